#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace floodline::depth {

/// Panorama depth grid: 256 x 512 cells of distance in meters. Missing cells
/// (non-finite or non-positive in the source payload) are stored as NaN.
class DepthMatrix {
 public:
  static constexpr int kRows = 256;
  static constexpr int kCols = 512;
  static constexpr std::size_t kCells = static_cast<std::size_t>(kRows) * kCols;

  /// All cells set to `fill`; a non-positive or non-finite fill yields an all-missing grid.
  explicit DepthMatrix(float fill = 0.0f);
  explicit DepthMatrix(std::vector<float> cells);

  std::optional<double> at(int row, int col) const;
  void set(int row, int col, float meters);
  bool missing(int row, int col) const;

  const std::vector<float>& cells() const noexcept { return cells_; }

  /// Depth cell holding full-resolution panorama pixel (x, y): proportional
  /// nearest-cell mapping floor(y/height*256), floor(x/width*512).
  static std::pair<int, int> cell_for_pixel(int x, int y, int width_px, int height_px);

 private:
  std::vector<float> cells_;
};

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
/// Strict RFC 4648 decoding. Leading/trailing whitespace is ignored; anything
/// else outside the alphabet raises FormatError with the offending byte offset.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Canonical payload: base64 of 256*512 little-endian float32, row-major.
DepthMatrix decode_depth(std::string_view encoded);
std::string encode_depth(const DepthMatrix& matrix);

DepthMatrix read_depth_file(const std::string& path);
void write_depth_file(const std::string& path, const DepthMatrix& matrix);

}  // namespace floodline::depth
