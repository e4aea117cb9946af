#include "blendsa/table.hpp"

#include <cmath>

namespace blendsa {

const Column& ColumnTable::column(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ParseError("unknown column '" + name + "'");
  }
  return cols_[it->second];
}

void ColumnTable::add_column(const std::string& name, Column col) {
  if (index_.count(name)) {
    throw ParseError("duplicate column '" + name + "'");
  }
  if (col.values.size() != n_rows_ || col.mask.size() != n_rows_) {
    throw ParseError("column '" + name + "' length mismatch: expected " +
                     std::to_string(n_rows_) + " rows");
  }
  for (std::size_t i = 0; i < n_rows_; ++i) {
    if (!col.mask[i]) continue;
    double v = col.values[i];
    switch (col.kind) {
      case ColumnKind::Continuous:
        if (!std::isfinite(v)) {
          throw ParseError("column '" + name + "' row " + std::to_string(i) +
                           ": non-finite continuous value");
        }
        break;
      case ColumnKind::Binary:
        if (v != 0.0 && v != 1.0) {
          throw ParseError("column '" + name + "' row " + std::to_string(i) +
                           ": binary value must be 0 or 1");
        }
        break;
      case ColumnKind::Categorical: {
        double r = std::round(v);
        if (r != v || v < 0 || static_cast<std::size_t>(v) >= col.levels.size()) {
          throw ParseError("column '" + name + "' row " + std::to_string(i) +
                           ": categorical index out of range");
        }
        break;
      }
    }
  }
  if (col.kind == ColumnKind::Categorical) {
    if (col.levels.empty()) {
      throw ParseError("categorical column '" + name + "' needs at least 1 level");
    }
    if (col.baseline >= col.levels.size()) {
      throw ParseError("categorical column '" + name + "' baseline index out of range");
    }
  }
  index_[name] = cols_.size();
  names_.push_back(name);
  cols_.push_back(std::move(col));
}

ColumnTable ColumnTable::subset(const std::vector<std::size_t>& rows) const {
  ColumnTable out(rows.size());
  for (std::size_t c = 0; c < cols_.size(); ++c) {
    const Column& src = cols_[c];
    Column col;
    col.kind = src.kind;
    col.levels = src.levels;
    col.baseline = src.baseline;
    col.values.resize(rows.size());
    col.mask.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::size_t r = rows[i];
      if (r >= n_rows_) {
        throw ParseError("subset row index " + std::to_string(r) + " out of range");
      }
      col.values[i] = src.values[r];
      col.mask[i] = src.mask[r];
    }
    out.add_column(names_[c], std::move(col));
  }
  return out;
}

bool DataView::available(const std::string& name, std::size_t row) const {
  const Column& col = base_->column(name);
  if (col.mask[row]) return true;
  auto it = overlay_.find(name);
  return it != overlay_.end() && it->second.filled[row];
}

double DataView::value(const std::string& name, std::size_t row) const {
  const Column& col = base_->column(name);
  if (col.mask[row]) return col.values[row];
  auto it = overlay_.find(name);
  if (it != overlay_.end() && it->second.filled[row]) {
    return it->second.values[row];
  }
  throw MissingValueError("column '" + name + "' is missing for subject " +
                          std::to_string(row) + " and has not been imputed");
}

double DataView::base_value(const std::string& name, std::size_t row) const {
  const Column& col = base_->column(name);
  if (!col.mask[row]) {
    throw MissingValueError("column '" + name + "' is missing for subject " +
                            std::to_string(row));
  }
  return col.values[row];
}

void DataView::write_imputed(const std::string& name, std::size_t row, double value) {
  const Column& col = base_->column(name);
  if (col.mask[row]) {
    throw Error("refusing to overwrite observed value: column '" + name +
                "' subject " + std::to_string(row));
  }
  auto& ov = overlay_[name];
  if (ov.values.empty()) {
    ov.values.resize(base_->n_rows(), 0.0);
    ov.filled.resize(base_->n_rows(), 0);
  }
  ov.values[row] = value;
  ov.filled[row] = 1;
}

void DataView::clear_overlay() { overlay_.clear(); }

}  // namespace blendsa
