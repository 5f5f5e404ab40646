#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "music/command.hpp"
#include "music/edge_node.hpp"
#include "music/policy.hpp"
#include "music/traffic.hpp"

namespace music::sim {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PolicyConfig {
  std::string name = "always_on";
  std::int64_t tick_period_ms = 5'000;
  policy::PolicyParams params;
};

struct Scenario {
  std::string name = "scenario";
  std::int64_t duration_ms = 60'000;
  std::uint64_t seed = 0;
  double acceleration = 0.0;  // 0 = free run
  std::int64_t start_epoch_ms = 1'704'067'200'000;  // 2024-01-01T00:00:00Z

  std::int64_t keepalive_period_ms = 10'000;
  std::int64_t liveness_timeout_ms = 30'000;
  cmd::DutyCycleConfig duty_cycle;

  PolicyConfig policy;
  cmd::SensorTable sensor_table = cmd::SensorTable::defaults();

  FieldModel field;
  std::vector<analytics::RoadSegment> segments;

  std::vector<EdgeNodeConfig> nodes;  // times inside are scenario-relative ms
};

// Parses the documented JSON scenario schema. Throws ScenarioError with a
// line number for syntax errors and a field path for semantic ones.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text, const std::string& origin_dir = ".");

}  // namespace music::sim
