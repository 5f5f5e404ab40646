#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "music/geo.hpp"

namespace music::analytics {

class AnalyticsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Reading {
  GeoPoint location;
  double value = 0.0;
};

struct BoundingBox {
  double lat_min = 0.0, lat_max = 0.0;
  double lon_min = 0.0, lon_max = 0.0;
};

BoundingBox bounding_box(const std::vector<Reading>& readings, double margin_km = 0.0);

struct PollutionField {
  BoundingBox bbox;
  int rows = 0;  // latitude steps
  int cols = 0;  // longitude steps
  std::vector<double> values;  // row-major, rows*cols
  std::vector<GeoPoint> grid;  // cell centers, same layout
  double loocv_rmse = 0.0;     // 0 when fewer than 2 readings

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

// Inverse-distance-weighted prediction at a single point: sum(w_i v_i)/sum(w_i)
// with w_i = haversine(x, x_i)^-p; exact v_i when x coincides with x_i.
double idw_predict(const GeoPoint& x, const std::vector<Reading>& readings, double power);

// Mean field over bbox at resolution_km grid spacing.
// Throws AnalyticsError on empty readings or duplicated reading locations.
PollutionField idw_field(const std::vector<Reading>& readings, const BoundingBox& bbox,
                         double resolution_km, double power);

// Leave-one-out RMSE of idw_predict. Throws on fewer than 2 readings or on
// duplicated locations.
double loocv_error(const std::vector<Reading>& readings, double power);

}  // namespace music::analytics
