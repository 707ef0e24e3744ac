#include "floodline/depth.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "floodline/errors.hpp"

namespace floodline::depth {

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
constexpr std::size_t kPayloadBytes = DepthMatrix::kCells * 4;

constexpr std::array<int, 256> make_reverse() {
  std::array<int, 256> table{};
  for (auto& v : table) v = -1;
  for (int i = 0; i < 64; ++i) table[static_cast<unsigned char>(kAlphabet[i])] = i;
  return table;
}
constexpr auto kReverse = make_reverse();

float sanitize(float v) {
  return (std::isfinite(v) && v > 0.0f) ? v : std::numeric_limits<float>::quiet_NaN();
}

bool is_space(char c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t'; }

}  // namespace

DepthMatrix::DepthMatrix(float fill) : cells_(kCells, sanitize(fill)) {}

DepthMatrix::DepthMatrix(std::vector<float> cells) : cells_(std::move(cells)) {
  if (cells_.size() != kCells) throw std::invalid_argument("depth matrix must be 256x512");
  for (auto& v : cells_) v = sanitize(v);
}

std::optional<double> DepthMatrix::at(int row, int col) const {
  if (row < 0 || row >= kRows || col < 0 || col >= kCols) return std::nullopt;
  const float v = cells_[static_cast<std::size_t>(row) * kCols + static_cast<std::size_t>(col)];
  if (std::isnan(v)) return std::nullopt;
  return static_cast<double>(v);
}

void DepthMatrix::set(int row, int col, float meters) {
  if (row < 0 || row >= kRows || col < 0 || col >= kCols) throw std::out_of_range("depth cell out of range");
  cells_[static_cast<std::size_t>(row) * kCols + static_cast<std::size_t>(col)] = sanitize(meters);
}

bool DepthMatrix::missing(int row, int col) const { return !at(row, col).has_value(); }

std::pair<int, int> DepthMatrix::cell_for_pixel(int x, int y, int width_px, int height_px) {
  const auto row = static_cast<long long>(y) * kRows / height_px;
  const auto col = static_cast<long long>(x) * kCols / width_px;
  return {static_cast<int>(row), static_cast<int>(col)};
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t v = bytes[i] << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && is_space(text[begin])) ++begin;
  while (end > begin && is_space(text[end - 1])) --end;

  const std::size_t len = end - begin;
  if (len % 4 != 0) throw FormatError(end, "base64 length is not a multiple of 4");

  std::vector<std::uint8_t> out;
  out.reserve(len / 4 * 3);
  for (std::size_t q = begin; q < end; q += 4) {
    const bool last = q + 4 == end;
    int vals[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[q + k];
      if (c == '=' && last && k >= 2) {
        vals[k] = 0;
        ++pad;
        continue;
      }
      if (pad > 0) throw FormatError(q + k, "data after base64 padding");
      vals[k] = kReverse[static_cast<unsigned char>(c)];
      if (vals[k] < 0) throw FormatError(q + k, "invalid base64 character");
    }
    const std::uint32_t v = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  }
  return out;
}

DepthMatrix decode_depth(std::string_view encoded) {
  const auto bytes = base64_decode(encoded);
  if (bytes.size() != kPayloadBytes) {
    throw FormatError(bytes.size(), "depth payload must be " + std::to_string(kPayloadBytes) +
                                        " bytes, got " + std::to_string(bytes.size()));
  }
  std::vector<float> cells(DepthMatrix::kCells);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::uint32_t word = static_cast<std::uint32_t>(bytes[4 * i]) |
                         (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                         (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                         (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    cells[i] = std::bit_cast<float>(word);
  }
  return DepthMatrix(std::move(cells));
}

std::string encode_depth(const DepthMatrix& matrix) {
  std::vector<std::uint8_t> bytes(kPayloadBytes);
  const auto& cells = matrix.cells();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto word = std::bit_cast<std::uint32_t>(cells[i]);
    bytes[4 * i] = static_cast<std::uint8_t>(word & 0xFF);
    bytes[4 * i + 1] = static_cast<std::uint8_t>((word >> 8) & 0xFF);
    bytes[4 * i + 2] = static_cast<std::uint8_t>((word >> 16) & 0xFF);
    bytes[4 * i + 3] = static_cast<std::uint8_t>((word >> 24) & 0xFF);
  }
  return base64_encode(bytes);
}

DepthMatrix read_depth_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open depth file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_depth(ss.str());
  } catch (const FormatError& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_depth_file(const std::string& path, const DepthMatrix& matrix) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write depth file " + path);
  out << encode_depth(matrix) << '\n';
}

}  // namespace floodline::depth
