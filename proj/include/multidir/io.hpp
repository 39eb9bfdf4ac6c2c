#pragma once

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "multidir/matrix.hpp"

// CSV ingestion for the two file formats the CLI accepts: integer count
// tables (one row per group) and decimal parent-parameter matrices.  An
// optional header row is detected by failing to parse the first line.

namespace multidir {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string message, int line, int column)
      : std::runtime_error(std::move(message)), line_(line), column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

namespace io_detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      fields.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view field, T& out) {
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end && !field.empty();
}

template <typename T>
std::vector<std::vector<T>> read_table(const std::string& path, bool allow_negative) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open '" + path + "'", 0, 0);
  }
  std::vector<std::vector<T>> rows;
  std::string line;
  int line_no = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    std::vector<T> row;
    row.reserve(fields.size());
    bool non_numeric = false;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      T value{};
      if (!parse_number(fields[c], value)) {
        // Only a non-numeric first line counts as a header row.
        if (first_content_line) {
          non_numeric = true;
          break;
        }
        throw ParseError("invalid value in '" + path + "'", line_no,
                         static_cast<int>(c) + 1);
      }
      if (!allow_negative && value < T{}) {
        throw ParseError("negative value in '" + path + "'", line_no,
                         static_cast<int>(c) + 1);
      }
      row.push_back(value);
    }
    first_content_line = false;
    if (non_numeric) continue;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace io_detail

// Count rows, one group per row.  Throws ParseError with 1-based line and
// column on malformed or negative entries.
inline std::vector<std::vector<int>> read_counts_csv(const std::string& path) {
  return io_detail::read_table<int>(path, /*allow_negative=*/false);
}

// Decimal matrix (parent parameters).  Rows must be rectangular; the caller
// decides dimensions.
inline Matrix<double> read_matrix_csv(const std::string& path) {
  const auto rows = io_detail::read_table<double>(path, /*allow_negative=*/true);
  if (rows.empty()) {
    throw ParseError("no data rows in '" + path + "'", 0, 0);
  }
  const std::size_t cols = rows.front().size();
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != cols) {
      throw ParseError("ragged row in '" + path + "'", static_cast<int>(r) + 1, 0);
    }
  }
  Matrix<double> out(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = rows[r][c];
  }
  return out;
}

inline void write_counts_csv(const std::string& path,
                             const std::vector<std::vector<int>>& rows) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write '" + path + "'");
  }
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out << ',';
      out << row[c];
    }
    out << '\n';
  }
}

}  // namespace multidir
