#include "floodline/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "floodline/errors.hpp"

namespace floodline::features {

std::string_view to_string(HdslSource s) {
  switch (s) {
    case HdslSource::extracted:
      return "extracted";
    case HdslSource::imputed:
      return "imputed";
    case HdslSource::missing:
      break;
  }
  return "missing";
}

HdslSource parse_hdsl_source(std::string_view s) {
  if (s == "extracted") return HdslSource::extracted;
  if (s == "imputed") return HdslSource::imputed;
  if (s == "missing") return HdslSource::missing;
  throw InputError("unknown hdsl_source '" + std::string(s) + "'");
}

std::string normalize_street(std::string_view name) {
  std::size_t b = 0;
  std::size_t e = name.size();
  while (b < e && std::isspace(static_cast<unsigned char>(name[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(name[e - 1]))) --e;
  std::string out(name.substr(b, e - b));
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

StreetEncoder::StreetEncoder(std::span<const std::string> names) {
  std::set<std::string> unique;
  for (const auto& n : names) {
    auto key = normalize_street(n);
    if (!key.empty()) unique.insert(std::move(key));
  }
  int code = 0;
  for (const auto& key : unique) codes_.emplace(key, code++);
}

int StreetEncoder::encode(std::string_view name) const {
  const auto it = codes_.find(normalize_street(name));
  return it == codes_.end() ? reserved_code() : it->second;
}

BoundingBox BoundingBox::of(std::span<const geo::GeoPoint> points) {
  BoundingBox b;
  if (points.empty()) return b;
  b.lat_min = b.lat_max = points.front().lat;
  b.lon_min = b.lon_max = points.front().lon;
  for (const auto& p : points) {
    b.lat_min = std::min(b.lat_min, p.lat);
    b.lat_max = std::max(b.lat_max, p.lat);
    b.lon_min = std::min(b.lon_min, p.lon);
    b.lon_max = std::max(b.lon_max, p.lon);
  }
  return b;
}

namespace {

int bin5(double v, double lo, double hi) {
  if (!(hi > lo)) return 0;
  const double f = std::floor((v - lo) / (hi - lo) * 5.0);
  return static_cast<int>(std::clamp(f, 0.0, 4.0));
}

}  // namespace

int geo_cluster(const geo::GeoPoint& p, const BoundingBox& box) {
  return bin5(p.lat, box.lat_min, box.lat_max) * 5 + bin5(p.lon, box.lon_min, box.lon_max);
}

FeatureVector with_derived(const FeatureVector& v) {
  FeatureVector out = v;
  const double hand = v[kHandM];
  const double d2s = v[kD2StreamSo0M];
  const double elev = v[kElevation];
  const double fathom = v[kMeanFathomMeter];
  const double water = fathom - elev;
  out[kWaterDepth] = water;
  out[kHandStreamRatio] = hand / (d2s + 1.0);
  out[kHandStreamProduct] = hand * d2s;
  out[kElevationSquared] = elev * elev;
  out[kElevationHandDiff] = elev - hand;
  out[kWaterDepthCombined] = fathom + water;
  out[kWaterDepthMax] = std::max(fathom, water);
  return out;
}

std::optional<FeatureVector> build_features(const ParcelRecord& parcel, const LayerSamples& s, bool door_visible,
                                            const StreetEncoder& encoder, const BoundingBox& box) {
  if (!s.hand_m || !s.d2stream_so0_m || !s.d2stream_so4_m || !s.elevation_m || !s.flood_surface_m) {
    return std::nullopt;
  }
  FeatureVector v{};
  v[kLatitude] = parcel.centroid.lat;
  v[kLongitude] = parcel.centroid.lon;
  v[kStreetNameEncoded] = encoder.encode(parcel.street_name);
  v[kDoorVisible] = door_visible ? 1.0 : 0.0;
  v[kHandM] = *s.hand_m;
  v[kD2StreamSo0M] = *s.d2stream_so0_m;
  v[kD2StreamSo4M] = *s.d2stream_so4_m;
  v[kElevation] = *s.elevation_m;
  v[kMeanFathomMeter] = *s.flood_surface_m;
  v[kGeoCluster] = geo_cluster(parcel.centroid, box);
  v = with_derived(v);
  if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) return std::nullopt;
  return v;
}

}  // namespace floodline::features
