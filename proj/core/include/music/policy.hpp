#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "music/command.hpp"
#include "music/registry.hpp"
#include "music/traffic.hpp"

namespace music::policy {

struct PolicyParams {
  double separation_km = 0.5;      // spatial coverage conflict distance
  double battery_floor_pct = 15.0; // below this a node is always deactivated

  // hotspot detection
  double alpha = 0.4;   // hotspot threshold fraction of free flow
  int k = 2;            // sustained low windows
  double lambda = 0.3;  // EWMA smoothing (weight of the newest window)
  std::int64_t window_ms = 600'000;
  double f_min_hz = 0.2;
  double f_max_hz = 1.0;
  double camera_speed_fraction = 0.25;  // beta: capture when forecast < beta * free flow
  bool deactivate_free_flow = false;    // park nodes on sustained free-flow segments
  double free_flow_fraction = 0.9;      // "close to free flow" cutoff for the above
  std::string hotspot_mode = "speed_drop";  // or "sensor_outlier"
  double outlier_cutoff = 3.0;

  // cleanliness
  double dirt_threshold = 0.3;
  std::int64_t image_period_ms = 300'000;
  std::vector<std::string> auxiliary_sensors;  // started when dirt exceeds the threshold

  // sensing set for coverage-style policies: sensor name -> requested Hz
  // (empty map = each node's advertised sensors at table defaults)
  std::map<std::string, double> sensing_sensors;

  // history horizon for context data windows (<=0: everything retained)
  std::int64_t data_window_ms = 0;

  std::int64_t idw_resolution_m = 100;
  double idw_power = 2.0;
};

// Recent per-node data the policies consume, extracted from the DataStore.
struct NodeWindows {
  std::vector<analytics::TraceFix> gps_fixes;  // vehicle_id = imei
  // per normalized sensor name, scalar readings (timestamp, value)
  std::map<std::string, std::vector<std::pair<std::int64_t, double>>> readings;
  std::optional<std::pair<std::int64_t, std::string>> latest_image;  // (recv time, raw bytes)
};

struct PolicyContext {
  ctrl::RegistrySnapshot snapshot;
  std::map<std::string, NodeWindows> windows;  // by imei
  cmd::SensorTable sensor_table;
  PolicyParams params;
  std::vector<analytics::RoadSegment> segments;  // hotspot scenarios
  std::int64_t tick_ms = 0;
};

// The programmable surface: a policy maps context snapshots to sensing
// directives. Implementations must be deterministic in the context.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string_view name() const = 0;
  virtual cmd::SensingPolicy tick(const PolicyContext& ctx) = 0;
};

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

// Name -> factory registry. Built-ins: always_on (alias: default),
// spatial_coverage, hotspot, cleanliness.
class PolicyRegistry {
 public:
  static PolicyRegistry& instance();
  void register_policy(const std::string& name, PolicyFactory factory);
  std::unique_ptr<Policy> create(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, PolicyFactory> factories_;
};

// Built-in policy constructors (also reachable through the registry).
std::unique_ptr<Policy> make_always_on();
std::unique_ptr<Policy> make_spatial_coverage();
std::unique_ptr<Policy> make_hotspot();
std::unique_ptr<Policy> make_cleanliness();

// Spatial-coverage helper, exposed for the loocv-over-time metric: one
// reading per node = mean of its recent window (normalized sensor name).
std::vector<analytics::Reading> coverage_readings(const PolicyContext& ctx,
                                                  const std::string& sensor);

// Sensing entries a directive should carry under `params` for this node.
std::vector<wire::SensorStartEntry> sensing_entries(const PolicyParams& params,
                                                    const ctrl::NodeRecord& node,
                                                    const cmd::SensorTable& table);

}  // namespace music::policy
