#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace floodline::io {

/// RFC 4180 style table: first row is the header. Quoted fields may contain
/// commas, quotes ("") and newlines.
class CsvTable {
 public:
  static CsvTable parse(std::string_view text, const std::string& source = "<csv>");
  static CsvTable read(const std::string& path);

  const std::vector<std::string>& header() const noexcept { return header_; }
  std::size_t rows() const noexcept { return rows_.size(); }
  std::size_t line_of(std::size_t row) const { return lines_[row]; }

  /// Column index; throws InputError naming the source when absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
  const std::string& at(std::size_t row, std::size_t col) const { return rows_[row][col]; }
  const std::string& at(std::size_t row, std::string_view name) const { return rows_[row][column(name)]; }

  /// Numeric cell; throws ParseError with the line number when malformed.
  double number(std::size_t row, std::string_view name) const;
  /// Empty cell -> nullopt.
  std::optional<double> optional_number(std::size_t row, std::string_view name) const;

 private:
  std::string source_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> lines_;
};

/// Builds CSV text row by row.
class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header);
  void row(const std::vector<std::string>& fields);
  const std::string& str() const noexcept { return text_; }

 private:
  void append(const std::vector<std::string>& fields);
  std::size_t width_;
  std::string text_;
};

/// Shortest-exact decimal form: 17 significant digits.
std::string fmt_double(double v);
std::string fmt_optional(const std::optional<double>& v);
std::string fmt_fixed(double v, int decimals);

/// Writes to `<path>.tmp` then renames over `path`; creates parent directories.
void write_atomic(const std::string& path, std::string_view contents);
std::string read_file(const std::string& path);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::string& path);

}  // namespace floodline::io
