#include "blendsa/formula.hpp"

#include <algorithm>

namespace blendsa {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

// Columns a term contributes to the design, in declared level order.
struct Encoded {
  std::vector<std::string> names;             // design column names
  std::vector<const Column*> cols;            // nullptr for plain numeric
  std::vector<std::size_t> level;             // level index when categorical
};

Encoded encode_main(const DataView& view, const std::string& name) {
  Encoded enc;
  const Column& col = view.base().column(name);
  if (col.kind == ColumnKind::Categorical) {
    for (std::size_t l = 0; l < col.levels.size(); ++l) {
      if (l == col.baseline) continue;
      enc.names.push_back(name + "=" + col.levels[l]);
      enc.cols.push_back(&col);
      enc.level.push_back(l);
    }
  } else {
    enc.names.push_back(name);
    enc.cols.push_back(nullptr);
    enc.level.push_back(0);
  }
  return enc;
}

double encoded_value(const DataView& view, const std::string& name,
                     const Encoded& enc, std::size_t j, std::size_t row) {
  double v = view.value(name, row);
  if (enc.cols[j] != nullptr) {
    return static_cast<std::size_t>(v) == enc.level[j] ? 1.0 : 0.0;
  }
  return v;
}

}  // namespace

std::vector<std::string> Formula::term_columns() const {
  std::vector<std::string> out;
  auto push = [&](const std::string& n) {
    if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
  };
  for (const Term& t : terms) {
    push(t.first);
    if (t.is_interaction()) push(t.second);
  }
  return out;
}

Formula parse_formula(const std::string& text) {
  Formula f;
  std::string rhs = text;
  std::size_t tilde = text.find('~');
  if (tilde != std::string::npos) {
    f.response = trim(text.substr(0, tilde));
    rhs = text.substr(tilde + 1);
  }
  bool any = false;
  for (const std::string& raw : split(rhs, '+')) {
    std::string tok = trim(raw);
    if (tok.empty()) {
      if (!any && split(rhs, '+').size() == 1) break;  // empty RHS: intercept only
      throw ParseError("empty term in formula '" + text + "'");
    }
    any = true;
    if (tok == "1") continue;
    if (tok == "0" || tok == "-1") {
      f.intercept = false;
      continue;
    }
    std::size_t colon = tok.find(':');
    if (colon != std::string::npos) {
      Term t;
      t.first = trim(tok.substr(0, colon));
      t.second = trim(tok.substr(colon + 1));
      if (t.first.empty() || t.second.empty() ||
          t.second.find(':') != std::string::npos) {
        throw ParseError("malformed interaction term '" + tok + "'");
      }
      f.terms.push_back(t);
    } else {
      f.terms.push_back(Term{tok, ""});
    }
  }
  return f;
}

DesignMatrix design_matrix(const DataView& view, const Formula& formula,
                           const std::vector<std::size_t>& rows) {
  for (const std::string& name : formula.term_columns()) {
    view.base().column(name);  // existence check up front
  }
  std::vector<std::string> names;
  if (formula.intercept) names.push_back("(Intercept)");
  struct Block {
    Term term;
    Encoded a, b;  // b unused for main effects
  };
  std::vector<Block> blocks;
  for (const Term& t : formula.terms) {
    Block blk;
    blk.term = t;
    blk.a = encode_main(view, t.first);
    if (t.is_interaction()) {
      blk.b = encode_main(view, t.second);
      for (const std::string& an : blk.a.names) {
        for (const std::string& bn : blk.b.names) {
          names.push_back(an + ":" + bn);
        }
      }
    } else {
      for (const std::string& an : blk.a.names) names.push_back(an);
    }
    blocks.push_back(std::move(blk));
  }

  DesignMatrix out;
  out.column_names = names;
  out.X.resize(static_cast<Eigen::Index>(rows.size()),
               static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::size_t r = rows[i];
    Eigen::Index c = 0;
    if (formula.intercept) out.X(i, c++) = 1.0;
    for (const Block& blk : blocks) {
      if (blk.term.is_interaction()) {
        for (std::size_t ja = 0; ja < blk.a.names.size(); ++ja) {
          double va = encoded_value(view, blk.term.first, blk.a, ja, r);
          for (std::size_t jb = 0; jb < blk.b.names.size(); ++jb) {
            double vb = encoded_value(view, blk.term.second, blk.b, jb, r);
            out.X(i, c++) = va * vb;
          }
        }
      } else {
        for (std::size_t ja = 0; ja < blk.a.names.size(); ++ja) {
          out.X(i, c++) = encoded_value(view, blk.term.first, blk.a, ja, r);
        }
      }
    }
  }
  return out;
}

Eigen::VectorXd response_vector(const DataView& view, const Formula& formula,
                                const std::vector<std::size_t>& rows) {
  if (formula.response.empty()) {
    throw ParseError("formula has no response column");
  }
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    y(static_cast<Eigen::Index>(i)) = view.value(formula.response, rows[i]);
  }
  return y;
}

}  // namespace blendsa
