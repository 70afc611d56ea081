#include "dirnormal/io.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include "dirnormal/errors.hpp"

namespace dirnormal {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\"");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

std::optional<double> parse_number(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (*begin == '+') ++begin;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

std::string where(const CsvTable& t, std::size_t row, std::size_t col) {
  return t.path + ":" + std::to_string(t.line_numbers[row]) + ", column " + std::to_string(col + 1);
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file '" + path + "'");
  CsvTable t;
  t.path = path;
  std::string line;
  int line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (first) {
      first = false;
      const bool header = std::any_of(cells.begin(), cells.end(), [](const std::string& c) {
        return !parse_number(c).has_value();
      });
      if (header) {
        t.header = std::move(cells);
        continue;
      }
    }
    const std::size_t width = !t.header.empty() ? t.header.size() : (t.rows.empty() ? cells.size() : t.rows.front().size());
    if (cells.size() != width) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) +
                       " fields, found " + std::to_string(cells.size()) + " (ragged row)");
    }
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(line_no);
  }
  if (t.rows.empty()) throw ParseError(path + ": no data rows");
  return t;
}

Matrix table_to_matrix(const CsvTable& table, const std::vector<int>& columns) {
  Matrix m(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      const auto& cell = table.rows[r][columns[j]];
      const auto v = parse_number(cell);
      if (!v) throw ParseError(where(table, r, columns[j]) + ": '" + cell + "' is not a number");
      if (!std::isfinite(*v)) throw NonFiniteError(where(table, r, columns[j]) + ": non-finite value");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = *v;
    }
  }
  return m;
}

DataMatrix read_data_csv(const std::string& path, std::vector<std::string>* names) {
  const CsvTable t = read_csv(path);
  std::vector<int> cols(t.rows.front().size());
  for (std::size_t j = 0; j < cols.size(); ++j) cols[j] = static_cast<int>(j);
  if (names) *names = t.header;
  return DataMatrix(table_to_matrix(t, cols));
}

std::vector<DataMatrix> read_grouped_csv(const std::string& path, const std::string& group_col,
                                         std::vector<std::string>* labels) {
  const CsvTable t = read_csv(path);
  const auto it = std::find(t.header.begin(), t.header.end(), group_col);
  if (it == t.header.end()) throw ParseError(path + ": no column named '" + group_col + "'");
  const int g = static_cast<int>(it - t.header.begin());
  std::vector<int> cols;
  for (int j = 0; j < static_cast<int>(t.header.size()); ++j) {
    if (j != g) cols.push_back(j);
  }
  std::vector<std::string> order;
  std::vector<CsvTable> parts;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string& label = t.rows[r][g];
    auto pos = std::find(order.begin(), order.end(), label);
    if (pos == order.end()) {
      order.push_back(label);
      parts.push_back(CsvTable{t.header, {}, {}, t.path});
      pos = order.end() - 1;
    }
    auto& part = parts[pos - order.begin()];
    part.rows.push_back(t.rows[r]);
    part.line_numbers.push_back(t.line_numbers[r]);
  }
  std::vector<DataMatrix> out;
  for (const auto& part : parts) out.emplace_back(table_to_matrix(part, cols));
  if (labels) *labels = order;
  return out;
}

Matrix read_matrix_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  std::vector<int> cols(t.rows.front().size());
  for (std::size_t j = 0; j < cols.size(); ++j) cols[j] = static_cast<int>(j);
  return table_to_matrix(t, cols);
}

Vector read_vector_csv(const std::string& path) {
  const Matrix m = read_matrix_csv(path);
  if (m.rows() != 1 && m.cols() != 1) {
    throw DimensionError(path + ": expected a single row or column, got " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
  }
  return Eigen::Map<const Vector>(m.data(), m.size());
}

SpdMatrix read_spd_csv(const std::string& path, double tol) {
  const Matrix m = read_matrix_csv(path);
  if (m.rows() != m.cols()) throw DimensionError(path + ": matrix is not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol * scale) {
    throw DimensionError(path + ": matrix is not symmetric");
  }
  try {
    return SpdMatrix(m);
  } catch (const NotPositiveDefinite&) {
    throw NotPositiveDefinite(path + ": matrix is not positive definite");
  }
}

std::vector<std::pair<int, int>> read_edge_list(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.rows.front().size() != 2) throw ParseError(path + ": edge list rows need exactly two indices");
  std::vector<std::pair<int, int>> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    int idx[2];
    for (int c = 0; c < 2; ++c) {
      const auto& cell = t.rows[r][c];
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), idx[c]);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || idx[c] < 1) {
        throw ParseError(where(t, r, c) + ": '" + cell + "' is not a positive index");
      }
    }
    out.emplace_back(idx[0] - 1, idx[1] - 1);
  }
  return out;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_data_csv(const std::string& path, const Matrix& values, const std::vector<std::string>& names) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write file '" + path + "'");
  if (!names.empty()) {
    for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
    out << '\n';
  }
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << format_double(values(i, j));
    out << '\n';
  }
}

}  // namespace dirnormal
