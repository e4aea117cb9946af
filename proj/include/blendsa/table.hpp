#ifndef BLENDSA_TABLE_HPP
#define BLENDSA_TABLE_HPP

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "blendsa/error.hpp"

namespace blendsa {

enum class ColumnKind { Continuous, Binary, Categorical };

// One typed column with an explicit per-cell observedness mask.
// Categorical values are stored as level indices into `levels`.
struct Column {
  ColumnKind kind = ColumnKind::Continuous;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;   // 1 = observed
  std::vector<std::string> levels;  // categorical only
  std::size_t baseline = 0;         // index into levels

  std::size_t n_levels() const { return levels.size(); }
};

// Immutable columnar dataset. Insertion order is preserved for I/O.
class ColumnTable {
 public:
  ColumnTable() = default;
  explicit ColumnTable(std::size_t n_rows) : n_rows_(n_rows) {}

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  bool has_column(const std::string& name) const {
    return index_.count(name) > 0;
  }
  const Column& column(const std::string& name) const;

  // Validates invariants and appends; the column must have n_rows entries.
  void add_column(const std::string& name, Column col);

  // Row subset with columns and masks carried over.
  ColumnTable subset(const std::vector<std::size_t>& rows) const;

 private:
  std::size_t n_rows_ = 0;
  std::vector<std::string> names_;
  std::vector<Column> cols_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Read view over a table plus per-imputation overlay values. Imputation
// writes go to the overlay; the base table is never mutated. Reading a
// cell that is neither observed nor imputed throws MissingValueError.
class DataView {
 public:
  explicit DataView(const ColumnTable& base) : base_(&base) {}

  const ColumnTable& base() const { return *base_; }
  std::size_t n_rows() const { return base_->n_rows(); }

  bool available(const std::string& name, std::size_t row) const;

  // Value of an observed or imputed cell; throws otherwise.
  double value(const std::string& name, std::size_t row) const;

  // Observed value straight from the base table, bypassing the overlay.
  // Used by indicator derivation and generators, never by model code.
  double base_value(const std::string& name, std::size_t row) const;

  void write_imputed(const std::string& name, std::size_t row, double value);

  // Drops all imputed values (start of a fresh imputation replicate).
  void clear_overlay();

 private:
  struct OverlayColumn {
    std::vector<double> values;
    std::vector<std::uint8_t> filled;
  };
  const ColumnTable* base_;
  std::unordered_map<std::string, OverlayColumn> overlay_;
};

}  // namespace blendsa

#endif
