#include "blendsa/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace blendsa {

namespace {

using nlohmann::json;

// One CSV record honoring quoted fields; returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  int ch;
  while ((ch = in.get()) != EOF) {
    any = true;
    char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      fields.push_back(field);
      return true;
    } else {
      field.push_back(c);
    }
  }
  if (!any) return false;
  if (!field.empty() && field.back() == '\r') field.pop_back();
  fields.push_back(field);
  return true;
}

bool needs_quoting(const std::string& s) {
  return s.find_first_of(",\"\n\r") != std::string::npos;
}

std::string quote(const std::string& s) {
  if (!needs_quoting(s)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

double parse_number(const std::string& s, const std::string& col, std::size_t row) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError("column '" + col + "' row " + std::to_string(row) +
                     ": cannot parse '" + s + "' as a number");
  }
}

ColumnKind kind_from_string(const std::string& s) {
  if (s == "continuous") return ColumnKind::Continuous;
  if (s == "binary") return ColumnKind::Binary;
  if (s == "categorical") return ColumnKind::Categorical;
  throw ParseError("unknown column kind '" + s + "'");
}

std::string kind_to_string(ColumnKind k) {
  switch (k) {
    case ColumnKind::Continuous: return "continuous";
    case ColumnKind::Binary: return "binary";
    case ColumnKind::Categorical: return "categorical";
  }
  return "continuous";
}

}  // namespace

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ColumnTable read_csv(const std::string& path, const TableSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");

  std::vector<std::string> header;
  if (!read_record(in, header)) throw ParseError("'" + path + "': empty file, header row required");

  std::vector<const ColumnSchema*> by_pos(header.size(), nullptr);
  std::vector<bool> seen(schema.columns.size(), false);
  for (std::size_t j = 0; j < header.size(); ++j) {
    bool found = false;
    for (std::size_t s = 0; s < schema.columns.size(); ++s) {
      if (schema.columns[s].name == header[j]) {
        if (seen[s]) throw ParseError("'" + path + "': duplicate column '" + header[j] + "'");
        by_pos[j] = &schema.columns[s];
        seen[s] = true;
        found = true;
        break;
      }
    }
    if (!found) throw ParseError("'" + path + "': column '" + header[j] + "' not in schema");
  }
  for (std::size_t s = 0; s < schema.columns.size(); ++s) {
    if (!seen[s]) throw ParseError("'" + path + "': schema column '" +
                                   schema.columns[s].name + "' absent from file");
  }

  std::vector<std::vector<std::string>> raw;
  std::vector<std::string> rec;
  while (read_record(in, rec)) {
    if (rec.size() == 1 && rec[0].empty()) continue;  // trailing blank line
    if (rec.size() != header.size()) {
      throw ParseError("'" + path + "': row " + std::to_string(raw.size()) + " has " +
                       std::to_string(rec.size()) + " fields, expected " +
                       std::to_string(header.size()));
    }
    raw.push_back(rec);
  }

  std::size_t n = raw.size();
  ColumnTable table(n);
  for (std::size_t j = 0; j < header.size(); ++j) {
    const ColumnSchema& cs = *by_pos[j];
    Column col;
    col.kind = cs.kind;
    col.values.assign(n, 0.0);
    col.mask.assign(n, 0);
    if (cs.kind == ColumnKind::Categorical) {
      col.levels = cs.levels;
      bool base_found = false;
      for (std::size_t l = 0; l < cs.levels.size(); ++l) {
        if (cs.levels[l] == cs.baseline) {
          col.baseline = l;
          base_found = true;
        }
      }
      if (!base_found) {
        throw ParseError("schema column '" + cs.name + "': baseline '" + cs.baseline +
                         "' is not a declared level");
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& cell = raw[i][j];
      if (cell.empty()) continue;  // missing
      col.mask[i] = 1;
      switch (cs.kind) {
        case ColumnKind::Continuous:
          col.values[i] = parse_number(cell, cs.name, i);
          break;
        case ColumnKind::Binary: {
          double v = parse_number(cell, cs.name, i);
          if (v != 0.0 && v != 1.0) {
            throw ParseError("column '" + cs.name + "' row " + std::to_string(i) +
                             ": binary value must be 0 or 1, got '" + cell + "'");
          }
          col.values[i] = v;
          break;
        }
        case ColumnKind::Categorical: {
          bool found = false;
          for (std::size_t l = 0; l < col.levels.size(); ++l) {
            if (col.levels[l] == cell) {
              col.values[i] = static_cast<double>(l);
              found = true;
              break;
            }
          }
          if (!found) {
            throw ParseError("column '" + cs.name + "' row " + std::to_string(i) +
                             ": unknown level '" + cell + "'");
          }
          break;
        }
      }
    }
    table.add_column(cs.name, std::move(col));
  }
  return table;
}

void write_csv(const std::string& path, const ColumnTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path + "'");
  const auto& names = table.names();
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (j) out << ',';
    out << quote(names[j]);
  }
  out << '\n';
  for (std::size_t i = 0; i < table.n_rows(); ++i) {
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (j) out << ',';
      const Column& col = table.column(names[j]);
      if (!col.mask[i]) continue;
      switch (col.kind) {
        case ColumnKind::Continuous:
          out << format_value(col.values[i]);
          break;
        case ColumnKind::Binary:
          out << (col.values[i] == 1.0 ? '1' : '0');
          break;
        case ColumnKind::Categorical:
          out << quote(col.levels[static_cast<std::size_t>(col.values[i])]);
          break;
      }
    }
    out << '\n';
  }
}

TableSchema schema_of(const ColumnTable& table) {
  TableSchema schema;
  for (const std::string& name : table.names()) {
    const Column& col = table.column(name);
    ColumnSchema cs;
    cs.name = name;
    cs.kind = col.kind;
    if (col.kind == ColumnKind::Categorical) {
      cs.levels = col.levels;
      cs.baseline = col.levels[col.baseline];
    }
    schema.columns.push_back(std::move(cs));
  }
  return schema;
}

std::string schema_to_json(const TableSchema& schema) {
  json j;
  j["columns"] = json::array();
  for (const ColumnSchema& cs : schema.columns) {
    json c;
    c["name"] = cs.name;
    c["kind"] = kind_to_string(cs.kind);
    if (cs.kind == ColumnKind::Categorical) {
      c["levels"] = cs.levels;
      c["baseline"] = cs.baseline;
    }
    j["columns"].push_back(c);
  }
  return j.dump(2) + "\n";
}

TableSchema schema_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("schema JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("columns") || !j["columns"].is_array()) {
    throw ParseError("schema JSON: expected object with a 'columns' array");
  }
  TableSchema schema;
  for (std::size_t i = 0; i < j["columns"].size(); ++i) {
    const json& c = j["columns"][i];
    std::string at = "/columns/" + std::to_string(i);
    if (!c.is_object() || !c.contains("name") || !c.contains("kind")) {
      throw ParseError("schema JSON at " + at + ": need 'name' and 'kind'");
    }
    ColumnSchema cs;
    cs.name = c["name"].get<std::string>();
    cs.kind = kind_from_string(c["kind"].get<std::string>());
    if (cs.kind == ColumnKind::Categorical) {
      if (!c.contains("levels") || !c.contains("baseline")) {
        throw ParseError("schema JSON at " + at +
                         ": categorical column needs 'levels' and 'baseline'");
      }
      cs.levels = c["levels"].get<std::vector<std::string>>();
      cs.baseline = c["baseline"].get<std::string>();
    }
    schema.columns.push_back(std::move(cs));
  }
  return schema;
}

TableSchema read_schema(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return schema_from_json_text(ss.str());
}

void write_schema(const std::string& path, const TableSchema& schema) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << schema_to_json(schema);
}

}  // namespace blendsa
