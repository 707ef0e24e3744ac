#include "floodline/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "floodline/errors.hpp"

namespace floodline::io {

namespace fs = std::filesystem;

CsvTable CsvTable::parse(std::string_view text, const std::string& source) {
  CsvTable t;
  t.source_ = source;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t record_line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = record.size() == 1 && record[0].empty();
    if (!blank) {
      if (t.header_.empty()) {
        t.header_ = std::move(record);
      } else {
        if (record.size() != t.header_.size()) {
          throw ParseError(record_line, source + ": expected " + std::to_string(t.header_.size()) + " fields, got " +
                                            std::to_string(record.size()));
        }
        t.rows_.push_back(std::move(record));
        t.lines_.push_back(record_line);
      }
    }
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started || !field.empty()) throw ParseError(line, source + ": stray quote inside field");
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        record_line = line;
        break;
      default:
        field += c;
    }
  }
  if (in_quotes) throw ParseError(line, source + ": unterminated quoted field");
  if (!field.empty() || !record.empty() || field_started) end_record();
  if (t.header_.empty()) throw ParseError(1, source + ": missing header row");
  return t;
}

CsvTable CsvTable::read(const std::string& path) { return parse(read_file(path), path); }

bool CsvTable::has_column(std::string_view name) const {
  for (const auto& h : header_) {
    if (h == name) return true;
  }
  return false;
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  throw InputError(source_ + ": missing column '" + std::string(name) + "'");
}

double CsvTable::number(std::size_t row, std::string_view name) const {
  const auto v = optional_number(row, name);
  if (!v) throw ParseError(lines_[row], source_ + ": empty value in column '" + std::string(name) + "'");
  return *v;
}

std::optional<double> CsvTable::optional_number(std::size_t row, std::string_view name) const {
  const std::string& s = at(row, name);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw ParseError(lines_[row], source_ + ": column '" + std::string(name) + "' is not a number: '" + s + "'");
  }
  return v;
}

CsvWriter::CsvWriter(const std::vector<std::string>& header) : width_(header.size()) { append(header); }

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != width_) throw std::invalid_argument("CSV row width mismatch");
  append(fields);
}

void CsvWriter::append(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) text_ += ',';
    const auto& f = fields[i];
    if (f.find_first_of(",\"\n\r") != std::string::npos) {
      text_ += '"';
      for (char c : f) {
        if (c == '"') text_ += '"';
        text_ += c;
      }
      text_ += '"';
    } else {
      text_ += f;
    }
  }
  text_ += '\n';
}

std::string fmt_double(double v) {
  if (v == 0.0) return "0";  // folds -0 into 0
  return fmt::format("{:.17g}", v);
}

std::string fmt_optional(const std::optional<double>& v) { return v ? fmt_double(*v) : std::string{}; }

std::string fmt_fixed(double v, int decimals) {
  std::string s = fmt::format("{:.{}f}", v, decimals);
  if (s.starts_with('-') && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

void write_atomic(const std::string& path, std::string_view contents) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw InputError("write failed for " + tmp);
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  std::string out;
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

}  // namespace floodline::io
