#include "music/field.hpp"

#include <algorithm>
#include <cmath>

namespace music::analytics {

namespace {

constexpr double kCoincidentKm = 1e-9;

void check_distinct(const std::vector<Reading>& readings) {
  for (std::size_t i = 0; i < readings.size(); ++i)
    for (std::size_t j = i + 1; j < readings.size(); ++j)
      if (haversine_km(readings[i].location, readings[j].location) < kCoincidentKm)
        throw AnalyticsError("duplicated reading location");
}

}  // namespace

BoundingBox bounding_box(const std::vector<Reading>& readings, double margin_km) {
  if (readings.empty()) throw AnalyticsError("no readings");
  BoundingBox b{90.0, -90.0, 180.0, -180.0};
  for (const auto& r : readings) {
    b.lat_min = std::min(b.lat_min, r.location.latitude);
    b.lat_max = std::max(b.lat_max, r.location.latitude);
    b.lon_min = std::min(b.lon_min, r.location.longitude);
    b.lon_max = std::max(b.lon_max, r.location.longitude);
  }
  if (margin_km > 0.0) {
    const double dlat = margin_km / kKmPerDegLat;
    const double midlat = (b.lat_min + b.lat_max) / 2.0;
    const double dlon = dlat / std::max(0.1, std::cos(midlat * 3.14159265358979323846 / 180.0));
    b.lat_min -= dlat;
    b.lat_max += dlat;
    b.lon_min -= dlon;
    b.lon_max += dlon;
  }
  return b;
}

double idw_predict(const GeoPoint& x, const std::vector<Reading>& readings, double power) {
  if (readings.empty()) throw AnalyticsError("no readings");
  double num = 0.0;
  double den = 0.0;
  for (const auto& r : readings) {
    const double d = haversine_km(x, r.location);
    if (d < kCoincidentKm) return r.value;
    const double w = std::pow(d, -power);
    num += w * r.value;
    den += w;
  }
  return num / den;
}

PollutionField idw_field(const std::vector<Reading>& readings, const BoundingBox& bbox,
                         double resolution_km, double power) {
  if (readings.empty()) throw AnalyticsError("no readings");
  if (!(resolution_km > 0.0)) throw AnalyticsError("resolution must be > 0");
  check_distinct(readings);

  PollutionField field;
  field.bbox = bbox;
  const double lat_span_km = std::max(0.0, bbox.lat_max - bbox.lat_min) * kKmPerDegLat;
  const double midlat = (bbox.lat_min + bbox.lat_max) / 2.0;
  const double coslat = std::max(0.1, std::cos(midlat * 3.14159265358979323846 / 180.0));
  const double lon_span_km = std::max(0.0, bbox.lon_max - bbox.lon_min) * kKmPerDegLat * coslat;
  field.rows = std::max(1, static_cast<int>(std::ceil(lat_span_km / resolution_km)) + 1);
  field.cols = std::max(1, static_cast<int>(std::ceil(lon_span_km / resolution_km)) + 1);

  const double dlat = field.rows > 1 ? (bbox.lat_max - bbox.lat_min) / (field.rows - 1) : 0.0;
  const double dlon = field.cols > 1 ? (bbox.lon_max - bbox.lon_min) / (field.cols - 1) : 0.0;
  field.values.reserve(static_cast<std::size_t>(field.rows) * field.cols);
  field.grid.reserve(field.values.capacity());
  for (int r = 0; r < field.rows; ++r) {
    for (int c = 0; c < field.cols; ++c) {
      GeoPoint g{bbox.lat_min + r * dlat, bbox.lon_min + c * dlon};
      field.grid.push_back(g);
      field.values.push_back(idw_predict(g, readings, power));
    }
  }
  field.loocv_rmse = readings.size() >= 2 ? loocv_error(readings, power) : 0.0;
  return field;
}

double loocv_error(const std::vector<Reading>& readings, double power) {
  if (readings.size() < 2) throw AnalyticsError("loocv needs at least 2 readings");
  check_distinct(readings);
  double se = 0.0;
  std::vector<Reading> rest;
  rest.reserve(readings.size() - 1);
  for (std::size_t i = 0; i < readings.size(); ++i) {
    rest.clear();
    for (std::size_t j = 0; j < readings.size(); ++j)
      if (j != i) rest.push_back(readings[j]);
    const double pred = idw_predict(readings[i].location, rest, power);
    const double e = pred - readings[i].value;
    se += e * e;
  }
  return std::sqrt(se / static_cast<double>(readings.size()));
}

}  // namespace music::analytics
