#pragma once

namespace music {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kKmPerDegLat = 111.19492664455873;  // pi * R / 180

struct GeoPoint {
  double latitude = 0.0;
  double longitude = 0.0;

  bool operator==(const GeoPoint&) const = default;
};

bool valid_geo(const GeoPoint& p);

// Great-circle distance, Earth radius 6371.0 km.
double haversine_km(const GeoPoint& a, const GeoPoint& b);

// Distance from p to the chord a-b, clamped to the endpoints. Computed in a
// local equirectangular projection around p; accurate at city scale, which is
// all the snap radii here need.
double point_to_chord_km(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b);

}  // namespace music
