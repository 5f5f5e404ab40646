#include "music/geo.hpp"

#include <algorithm>
#include <cmath>

namespace music {

namespace {
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
}

bool valid_geo(const GeoPoint& p) {
  return p.latitude >= -90.0 && p.latitude <= 90.0 && p.longitude >= -180.0 &&
         p.longitude <= 180.0;
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  const double la1 = a.latitude * kDegToRad;
  const double la2 = b.latitude * kDegToRad;
  const double dla = (b.latitude - a.latitude) * kDegToRad;
  const double dlo = (b.longitude - a.longitude) * kDegToRad;
  const double s1 = std::sin(dla / 2.0);
  const double s2 = std::sin(dlo / 2.0);
  const double h = s1 * s1 + std::cos(la1) * std::cos(la2) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

double point_to_chord_km(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) {
  const double coslat = std::cos(p.latitude * kDegToRad);
  // local plane in km, origin at p
  const double ax = (a.longitude - p.longitude) * coslat * kKmPerDegLat;
  const double ay = (a.latitude - p.latitude) * kKmPerDegLat;
  const double bx = (b.longitude - p.longitude) * coslat * kKmPerDegLat;
  const double by = (b.latitude - p.latitude) * kKmPerDegLat;
  const double dx = bx - ax;
  const double dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(-(ax * dx + ay * dy) / len2, 0.0, 1.0);
  const double cx = ax + t * dx;
  const double cy = ay + t * dy;
  return std::sqrt(cx * cx + cy * cy);
}

}  // namespace music
