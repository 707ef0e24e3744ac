#include "floodline/raster.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "floodline/errors.hpp"

namespace floodline::raster {

namespace fs = std::filesystem;

Units parse_units(std::string_view s) {
  if (s == "meters" || s == "m") return Units::meters;
  if (s == "feet" || s == "ft") return Units::feet;
  throw InputError("unknown units '" + std::string(s) + "'");
}

std::string_view to_string(Units u) { return u == Units::feet ? "feet" : "meters"; }

bool RasterGrid::valid(int row, int col) const {
  if (row < 0 || row >= nrows || col < 0 || col >= ncols) return false;
  const double v = at(row, col);
  return v != nodata && std::isfinite(v);
}

namespace {

struct Token {
  std::string_view text;
  std::size_t line;
};

/// Splits into whitespace-separated tokens, remembering each token's line.
std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else {
      const std::size_t start = i;
      while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      out.push_back({text.substr(start, i - start), line});
    }
  }
  return out;
}

std::optional<double> to_number(std::string_view s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

int positive_int(const Token& t, const std::string& key) {
  const auto v = to_number(t.text);
  if (!v || *v <= 0.0 || *v != std::floor(*v) || *v > 1e8) {
    throw ParseError(t.line, key + " must be a positive integer, got '" + std::string(t.text) + "'");
  }
  return static_cast<int>(*v);
}

}  // namespace

RasterGrid parse_grid(std::string_view text, Units units) {
  const auto tokens = tokenize(text);
  std::map<std::string, Token> header;
  std::size_t i = 0;
  // Header entries are key/value pairs whose key is not itself a number.
  while (i < tokens.size() && !to_number(tokens[i].text)) {
    const std::string key = lower(tokens[i].text);
    static const std::array<std::string_view, 8> known = {"ncols",     "nrows",     "xllcorner", "yllcorner",
                                                          "xllcenter", "yllcenter", "cellsize",  "nodata_value"};
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ParseError(tokens[i].line, "unexpected token '" + std::string(tokens[i].text) + "'");
    }
    if (i + 1 >= tokens.size()) throw ParseError(tokens[i].line, "header key '" + key + "' has no value");
    if (header.count(key)) throw ParseError(tokens[i].line, "duplicate header key '" + key + "'");
    header.emplace(key, tokens[i + 1]);
    i += 2;
  }

  const std::size_t header_end_line = i < tokens.size() ? tokens[i].line : (tokens.empty() ? 1 : tokens.back().line);
  for (const char* key : {"ncols", "nrows", "cellsize"}) {
    if (!header.count(key)) throw ParseError(header_end_line, std::string("missing header key '") + key + "'");
  }
  // Each origin coordinate is given as either a corner or a cell center, not both.
  for (const char axis : {'x', 'y'}) {
    const std::string corner = std::string(1, axis) + "llcorner";
    const std::string center = std::string(1, axis) + "llcenter";
    const auto n = header.count(corner) + header.count(center);
    if (n == 0) throw ParseError(header_end_line, "missing header key '" + corner + "'");
    if (n == 2) throw ParseError(header.at(center).line, "both " + corner + " and " + center + " given");
  }

  auto number = [&](const std::string& key) {
    const Token& t = header.at(key);
    const auto v = to_number(t.text);
    if (!v) throw ParseError(t.line, key + " is not a number: '" + std::string(t.text) + "'");
    return *v;
  };

  RasterGrid g;
  g.units = units;
  g.ncols = positive_int(header.at("ncols"), "ncols");
  g.nrows = positive_int(header.at("nrows"), "nrows");
  g.cellsize = number("cellsize");
  if (!(g.cellsize > 0.0)) throw ParseError(header.at("cellsize").line, "cellsize must be positive");
  g.xll = header.count("xllcorner") ? number("xllcorner") : number("xllcenter") - 0.5 * g.cellsize;
  g.yll = header.count("yllcorner") ? number("yllcorner") : number("yllcenter") - 0.5 * g.cellsize;
  if (header.count("nodata_value")) g.nodata = number("nodata_value");

  const std::size_t expected = static_cast<std::size_t>(g.ncols) * static_cast<std::size_t>(g.nrows);
  g.values.reserve(expected);
  for (; i < tokens.size(); ++i) {
    const auto v = to_number(tokens[i].text);
    if (!v) throw ParseError(tokens[i].line, "non-numeric grid value '" + std::string(tokens[i].text) + "'");
    if (g.values.size() == expected) throw ParseError(tokens[i].line, "more grid values than ncols*nrows");
    g.values.push_back(*v);
  }
  if (g.values.size() != expected) {
    const std::size_t line = tokens.empty() ? 1 : tokens.back().line;
    throw ParseError(line, fmt::format("expected {} grid values, found {}", expected, g.values.size()));
  }
  return g;
}

std::string serialize_grid(const RasterGrid& g) {
  std::string out;
  out += fmt::format("ncols {}\nnrows {}\n", g.ncols, g.nrows);
  out += fmt::format("xllcorner {:.17g}\nyllcorner {:.17g}\ncellsize {:.17g}\nNODATA_value {:.17g}\n", g.xll, g.yll,
                     g.cellsize, g.nodata);
  for (int r = 0; r < g.nrows; ++r) {
    for (int c = 0; c < g.ncols; ++c) {
      if (c) out += ' ';
      out += fmt::format("{:.17g}", g.at(r, c));
    }
    out += '\n';
  }
  return out;
}

RasterGrid read_grid_file(const std::string& path, Units units) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open raster " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_grid(ss.str(), units);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path + ": " + e.what());
  }
}

void write_grid_file(const std::string& path, const RasterGrid& grid) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write raster " + path);
  out << serialize_grid(grid);
}

CellIndex containing_cell(const RasterGrid& g, double x, double y) {
  const auto col = static_cast<long long>(std::floor((x - g.xll) / g.cellsize));
  const auto from_bottom = static_cast<long long>(std::floor((y - g.yll) / g.cellsize));
  return {static_cast<long long>(g.nrows) - 1 - from_bottom, col};
}

SampleResult point_sample(const RasterGrid& g, double x, double y) {
  if (!std::isfinite(x) || !std::isfinite(y)) return {};
  const auto [row, col] = containing_cell(g, x, y);
  if (row < 0 || row >= g.nrows || col < 0 || col >= g.ncols) return {};
  if (!g.valid(static_cast<int>(row), static_cast<int>(col))) return {};
  return {g.at(static_cast<int>(row), static_cast<int>(col)), 1};
}

SampleResult neighborhood_mean(const RasterGrid& g, double x, double y) {
  if (!std::isfinite(x) || !std::isfinite(y)) return {};
  const auto center = containing_cell(g, x, y);

  struct Candidate {
    double dist2;
    long long row;
    long long col;
    double value;
  };
  std::vector<Candidate> cells;
  cells.reserve(9);
  // Grid units: column offset from the west edge, row offset from the north edge.
  const double gx = (x - g.xll) / g.cellsize;
  const double gy = static_cast<double>(g.nrows) - (y - g.yll) / g.cellsize;
  for (long long r = center.row - 1; r <= center.row + 1; ++r) {
    for (long long c = center.col - 1; c <= center.col + 1; ++c) {
      if (r < 0 || r >= g.nrows || c < 0 || c >= g.ncols) continue;
      if (!g.valid(static_cast<int>(r), static_cast<int>(c))) continue;
      const double dx = gx - (static_cast<double>(c) + 0.5);
      const double dy = gy - (static_cast<double>(r) + 0.5);
      cells.push_back({dx * dx + dy * dy, r, c, g.at(static_cast<int>(r), static_cast<int>(c))});
    }
  }
  if (cells.empty()) return {};
  std::sort(cells.begin(), cells.end(), [](const Candidate& a, const Candidate& b) {
    if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  const std::size_t k = std::min<std::size_t>(6, cells.size());
  // Shifted mean: exact when every selected value is identical.
  const double ref = cells[0].value;
  double offset = 0.0;
  for (std::size_t i = 0; i < k; ++i) offset += cells[i].value - ref;
  return {ref + offset / static_cast<double>(k), static_cast<int>(k)};
}

namespace {

FloodSemantic parse_semantic(std::string_view s) {
  if (s == "surface_elevation") return FloodSemantic::surface_elevation;
  if (s == "depth_above_ground") return FloodSemantic::depth_above_ground;
  throw InputError("unknown flood layer semantic '" + std::string(s) + "'");
}

std::string_view to_string(FloodSemantic s) {
  return s == FloodSemantic::surface_elevation ? "surface_elevation" : "depth_above_ground";
}

}  // namespace

std::map<std::string, LayerSpec> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open raster manifest " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  const fs::path base = fs::path(path).parent_path();
  std::map<std::string, LayerSpec> out;
  try {
    for (const auto& [name, spec] : j.at("layers").items()) {
      LayerSpec layer;
      const fs::path p(spec.at("path").get<std::string>());
      layer.path = p.is_absolute() ? p.string() : (base / p).lexically_normal().string();
      layer.units = parse_units(spec.value("units", std::string("meters")));
      layer.semantic = parse_semantic(spec.value("semantic", std::string("surface_elevation")));
      out.emplace(name, std::move(layer));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  return out;
}

void write_manifest(const std::string& path, const std::map<std::string, LayerSpec>& layers) {
  nlohmann::json j;
  for (const auto& [name, spec] : layers) {
    nlohmann::json l{{"path", spec.path}, {"units", std::string(to_string(spec.units))}};
    if (name == kFathom) l["semantic"] = std::string(to_string(spec.semantic));
    j["layers"][name] = l;
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << j.dump(2) << '\n';
}

LayerSet LayerSet::load(const std::string& manifest_path) {
  const auto specs = read_manifest(manifest_path);
  LayerSet set;
  for (std::string_view name : {kHand, kStreamAny, kStreamOrder4, kDem, kFathom}) {
    const auto it = specs.find(std::string(name));
    if (it == specs.end()) {
      throw StageError("raster manifest " + manifest_path + " lacks layer '" + std::string(name) + "'");
    }
    set.grids_.emplace(std::string(name), read_grid_file(it->second.path, it->second.units));
    if (name == kFathom) set.flood_semantic_ = it->second.semantic;
  }
  return set;
}

const RasterGrid& LayerSet::grid(std::string_view name) const {
  const auto it = grids_.find(name);
  if (it == grids_.end()) throw StageError("layer '" + std::string(name) + "' not loaded");
  return it->second;
}

std::optional<double> LayerSet::point_m(std::string_view layer, double x, double y) const {
  const auto& g = grid(layer);
  const auto s = point_sample(g, x, y);
  if (!s.value) return std::nullopt;
  return to_meters(*s.value, g.units);
}

}  // namespace floodline::raster
