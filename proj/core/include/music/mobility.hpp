#pragma once

#include <cstdint>
#include <vector>

#include "music/geo.hpp"

namespace music::sim {

struct Waypoint {
  std::int64_t t_ms = 0;
  GeoPoint position;
};

// Piecewise-linear path through timestamped waypoints; clamps before the
// first and after the last.
class MobilityPath {
 public:
  MobilityPath() = default;
  explicit MobilityPath(std::vector<Waypoint> waypoints);

  GeoPoint position_at(std::int64_t t_ms) const;
  bool empty() const { return waypoints_.empty(); }

 private:
  std::vector<Waypoint> waypoints_;  // sorted by t_ms
};

}  // namespace music::sim
