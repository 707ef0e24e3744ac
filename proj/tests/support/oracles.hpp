#pragma once

// Independent re-derivations of library quantities, written without
// reusing any library code path.

#include <optional>
#include <span>

#include "floodline/raster.hpp"

namespace oracle {

/// Initial great-circle bearing by the textbook spherical-trig formula in
/// extended precision.
double bearing_deg(double lat1, double lon1, double lat2, double lon2);

/// Same bearing from unit vectors: the chord to the target projected onto the
/// local north/east tangent basis.
double bearing_vector_deg(double lat1, double lon1, double lat2, double lon2);

/// Sorted-copy quantile with h = (n - 1) p.
double quantile(std::span<const double> values, double p);

/// Depth-damage fraction from a depth in meters, by table scan in feet.
double damage_fraction(double depth_m);

/// Six nearest valid cells of the 3x3 block, in world coordinates.
std::optional<double> neighborhood_mean(const floodline::raster::RasterGrid& g, double x, double y);

}  // namespace oracle
