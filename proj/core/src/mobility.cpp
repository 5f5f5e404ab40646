#include "music/mobility.hpp"

#include <algorithm>

namespace music::sim {

MobilityPath::MobilityPath(std::vector<Waypoint> waypoints) : waypoints_(std::move(waypoints)) {
  std::stable_sort(waypoints_.begin(), waypoints_.end(),
                   [](const Waypoint& a, const Waypoint& b) { return a.t_ms < b.t_ms; });
}

GeoPoint MobilityPath::position_at(std::int64_t t_ms) const {
  if (waypoints_.empty()) return {};
  if (t_ms <= waypoints_.front().t_ms) return waypoints_.front().position;
  if (t_ms >= waypoints_.back().t_ms) return waypoints_.back().position;
  for (std::size_t i = 1; i < waypoints_.size(); ++i) {
    if (t_ms <= waypoints_[i].t_ms) {
      const Waypoint& a = waypoints_[i - 1];
      const Waypoint& b = waypoints_[i];
      if (b.t_ms == a.t_ms) return b.position;
      const double f =
          static_cast<double>(t_ms - a.t_ms) / static_cast<double>(b.t_ms - a.t_ms);
      return {a.position.latitude + f * (b.position.latitude - a.position.latitude),
              a.position.longitude + f * (b.position.longitude - a.position.longitude)};
    }
  }
  return waypoints_.back().position;
}

}  // namespace music::sim
