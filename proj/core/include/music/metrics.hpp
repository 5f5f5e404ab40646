#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "music/traffic.hpp"

namespace music::report {

struct NodeMetrics {
  std::uint64_t uplink_bytes = 0;    // edge -> cloud, transport tally
  std::uint64_t downlink_bytes = 0;  // cloud -> edge (commands)
  std::uint64_t data_bytes = 0;      // sensor/image frames within uplink_bytes
  std::uint64_t emitted_bytes = 0;   // node-side tally; must equal uplink_bytes
  std::map<std::string, std::uint64_t> messages;  // keepalive/sensor_data/image
  std::map<std::string, std::uint64_t> commands;  // START/STOP/SEND/CAPTURE_IMAGE
  std::uint64_t samples_generated = 0;
  std::uint64_t samples_delivered = 0;  // node-side count of sent samples
  std::uint64_t samples_received = 0;   // cloud-side count of stored samples
  std::uint64_t samples_buffered = 0;
  std::uint64_t sessions_completed = 0;
  double battery_end_pct = 0.0;
  int long_sessions = 0;
};

struct DirectiveRow {
  std::int64_t t_ms = 0;
  std::uint64_t policy_id = 0;
  std::string imei;
  bool active = false;
  double frequency_hz = 0.0;  // first sensing entry (0 when none)
  bool capture = false;
};

struct CommandRow {
  std::int64_t t_ms = 0;
  std::string imei;
  std::string type;
};

struct FlagRow {
  std::int64_t t_ms = 0;
  std::int64_t segment_id = 0;
  bool flagged = false;
};

struct LifeEvent {
  std::int64_t t_ms = 0;
  std::string imei;
  std::string event;  // "dead" | "revived"
};

struct MetricsReport {
  std::string scenario_name;
  std::string policy_name;
  std::uint64_t seed = 0;
  std::int64_t start_epoch_ms = 0;
  std::int64_t duration_ms = 0;
  double acceleration = 0.0;
  std::uint64_t policy_ticks = 0;

  std::map<std::string, NodeMetrics> nodes;
  std::vector<DirectiveRow> directives;
  std::vector<CommandRow> commands;
  std::vector<std::pair<std::int64_t, double>> coverage_rmse;  // (t, loocv)
  std::vector<FlagRow> flag_timeline;
  std::vector<analytics::HotspotFlag> final_flags;
  std::vector<LifeEvent> life_events;
  std::size_t quarantined = 0;
  std::map<std::string, std::size_t> record_bytes_targets;  // sensor -> pad target

  std::uint64_t total_uplink_bytes() const;
  std::uint64_t total_downlink_bytes() const;
  std::uint64_t total_data_bytes() const;
  std::uint64_t total_commands() const;
  std::uint64_t total_samples_received() const;

  // Canonical line-oriented rendering; byte-identical across same-seed runs.
  std::string to_text() const;

  // report.txt plus the per-series CSVs (node_metrics, directives, commands,
  // coverage_rmse, hotspot_flags, hotspot_final, life_events).
  void write_files(const std::string& dir) const;
};

}  // namespace music::report
