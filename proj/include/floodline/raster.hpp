#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace floodline::raster {

enum class Units { meters, feet };

Units parse_units(std::string_view s);
std::string_view to_string(Units u);

inline constexpr double kFeetToMeters = 0.3048;

/// Single multiplication by 0.3048 for feet; meters pass through unchanged.
constexpr double to_meters(double value, Units units) noexcept {
  return units == Units::feet ? value * kFeetToMeters : value;
}

/// ESRI ASCII grid. Row 0 is the northernmost row; (xll, yll) is the
/// lower-left corner of the lower-left cell.
struct RasterGrid {
  int ncols = 0;
  int nrows = 0;
  double xll = 0.0;
  double yll = 0.0;
  double cellsize = 1.0;
  double nodata = -9999.0;
  std::vector<double> values;  ///< row-major, nrows * ncols
  Units units = Units::meters;

  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * ncols + col]; }
  double& at(int row, int col) { return values[static_cast<std::size_t>(row) * ncols + col]; }
  bool valid(int row, int col) const;

  friend bool operator==(const RasterGrid&, const RasterGrid&) = default;
};

/// Parses an ESRI ASCII grid. Header keys are case-insensitive; nodata_value
/// defaults to -9999. Throws ParseError with the line number on failure.
RasterGrid parse_grid(std::string_view text, Units units = Units::meters);
std::string serialize_grid(const RasterGrid& grid);

RasterGrid read_grid_file(const std::string& path, Units units);
void write_grid_file(const std::string& path, const RasterGrid& grid);

struct SampleResult {
  std::optional<double> value;
  int valid_pixel_count = 0;

  bool missing() const noexcept { return !value.has_value(); }
};

struct CellIndex {
  long long row;
  long long col;
};

/// Cell containing (x, y) under half-open cells: a point on a shared edge
/// belongs to the cell to its east / north. May lie outside the grid.
CellIndex containing_cell(const RasterGrid& grid, double x, double y);

/// Value of the cell containing (x, y); missing outside the extent or on nodata.
SampleResult point_sample(const RasterGrid& grid, double x, double y);

/// Mean of the (up to) six valid cells of the 3x3 block around the containing
/// cell that are nearest to (x, y) by distance to cell center, ties broken by
/// (row, col). Missing iff no cell in the block is valid.
SampleResult neighborhood_mean(const RasterGrid& grid, double x, double y);

/// Layer semantics of the flood surface raster.
enum class FloodSemantic { surface_elevation, depth_above_ground };

struct LayerSpec {
  std::string path;
  Units units = Units::meters;
  FloodSemantic semantic = FloodSemantic::surface_elevation;
};

inline constexpr std::string_view kHand = "hand";
inline constexpr std::string_view kStreamAny = "d2stream_so0";
inline constexpr std::string_view kStreamOrder4 = "d2stream_so4";
inline constexpr std::string_view kDem = "dem";
inline constexpr std::string_view kFathom = "fathom_100yr";

/// JSON manifest: {"layers": {"<name>": {"path", "units", "semantic"?}}}.
/// Paths resolve relative to the manifest's directory.
std::map<std::string, LayerSpec> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::map<std::string, LayerSpec>& layers);

/// All five layers of one AOI, loaded and converted on demand.
class LayerSet {
 public:
  static LayerSet load(const std::string& manifest_path);

  const RasterGrid& grid(std::string_view name) const;
  FloodSemantic flood_semantic() const noexcept { return flood_semantic_; }

  /// Point sample converted to meters.
  std::optional<double> point_m(std::string_view layer, double x, double y) const;

 private:
  std::map<std::string, RasterGrid, std::less<>> grids_;
  FloodSemantic flood_semantic_ = FloodSemantic::surface_elevation;
};

}  // namespace floodline::raster
