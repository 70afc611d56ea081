#pragma once

// CSV ingestion and full-precision number formatting.

#include <string>
#include <utility>
#include <vector>

#include "dirnormal/core.hpp"

namespace dirnormal {

/// Parsed CSV: an optional header plus string cells, one vector per row.
struct CsvTable {
  std::vector<std::string> header;  // empty when the file has none
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;    // 1-based source line of each row
  std::string path;
};

/// The first row is a header when any of its cells is not a number.
/// Throws ParseError when the file cannot be opened or a row is ragged.
CsvTable read_csv(const std::string& path);

/// Every cell must be numeric. `names` receives the header if present.
DataMatrix read_data_csv(const std::string& path, std::vector<std::string>* names = nullptr);
Matrix table_to_matrix(const CsvTable& table, const std::vector<int>& columns);

/// Split a table on a label column; groups keep the order of first appearance.
std::vector<DataMatrix> read_grouped_csv(const std::string& path, const std::string& group_col,
                                         std::vector<std::string>* labels = nullptr);

/// A vector given as one row or one column.
Vector read_vector_csv(const std::string& path);
Matrix read_matrix_csv(const std::string& path);

/// Square matrix symmetric to within tol (relative to its largest entry),
/// returned symmetrized.
SpdMatrix read_spd_csv(const std::string& path, double tol = 1e-9);

/// "i,j" rows of 1-based indices, returned 0-based.
std::vector<std::pair<int, int>> read_edge_list(const std::string& path);

/// 17 significant digits, enough to round-trip every double.
std::string format_double(double x);

void write_data_csv(const std::string& path, const Matrix& values,
                    const std::vector<std::string>& names = {});

}  // namespace dirnormal
