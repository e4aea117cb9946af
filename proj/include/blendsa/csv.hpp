#ifndef BLENDSA_CSV_HPP
#define BLENDSA_CSV_HPP

#include <string>
#include <vector>

#include "blendsa/table.hpp"

namespace blendsa {

// Declares the type of each CSV column. Baseline is mandatory for
// categorical columns and never inferred from the data.
struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
  std::vector<std::string> levels;  // categorical only
  std::string baseline;             // categorical only
};

struct TableSchema {
  std::vector<ColumnSchema> columns;
};

// Reads a UTF-8 CSV with a mandatory header row. Empty field = missing.
// Columns present in the file but absent from the schema are an error, as
// are schema columns absent from the file.
ColumnTable read_csv(const std::string& path, const TableSchema& schema);

// Writes observed cells (empty field where masked out); continuous values
// carry 17 significant digits so a read-back is bit-exact.
void write_csv(const std::string& path, const ColumnTable& table);

// Schema that describes `table` as written by write_csv.
TableSchema schema_of(const ColumnTable& table);

// JSON (de)serialization of schemas, used for sidecar .schema.json files.
std::string schema_to_json(const TableSchema& schema);
TableSchema schema_from_json_text(const std::string& text);
TableSchema read_schema(const std::string& path);
void write_schema(const std::string& path, const TableSchema& schema);

// 17-significant-digit decimal rendering shared by all CSV writers.
std::string format_value(double v);

}  // namespace blendsa

#endif
