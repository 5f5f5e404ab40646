#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "music/generators.hpp"
#include "music/mobility.hpp"
#include "music/scheduler.hpp"
#include "music/wire.hpp"

namespace music::sim {

struct BatteryConfig {
  double start_pct = 100.0;
  double base_drain_pct_per_h = 0.5;
  double per_sample_pct = 0.0005;
  double per_kib_tx_pct = 0.01;
};

struct MuteWindow {
  std::int64_t from_ms = 0;
  std::int64_t to_ms = 0;  // half-open [from, to)
};

struct EdgeNodeConfig {
  std::string imei;
  std::vector<Waypoint> waypoints;
  std::vector<SensorGenConfig> sensors;
  BatteryConfig battery;
  std::int64_t keepalive_period_ms = 10'000;
  ImageProfile image;
  std::vector<MuteWindow> keepalive_mutes;
  std::vector<std::int64_t> churn_at_ms;
  std::int64_t reconnect_delay_ms = 100;
};

struct NodeCounters {
  std::uint64_t samples_generated = 0;
  std::uint64_t samples_delivered = 0;
  std::uint64_t samples_buffered = 0;
  std::uint64_t keepalives_sent = 0;
  std::uint64_t data_msgs_sent = 0;
  std::uint64_t images_sent = 0;
  std::uint64_t commands_received = 0;
  std::uint64_t tx_bytes = 0;  // emission-site tally, cross-checked vs transport
};

class EdgeNode;

// The node's window onto the world: virtual time plus its two connections,
// both edge-initiated. Implemented by the in-process simulation.
class EdgeEnv {
 public:
  virtual ~EdgeEnv() = default;
  virtual Scheduler& scheduler() = 0;
  // Opens the data+command connection pair; returns the new source address.
  virtual std::string open_connections(EdgeNode& node) = 0;
  virtual void close_connections(EdgeNode& node) = 0;
  virtual bool connections_open(const EdgeNode& node) const = 0;
  // Data-channel send (already framed).
  virtual void uplink(EdgeNode& node, std::string_view frame) = 0;
};

// One simulated device: keepalives, command handling, sample synthesis along
// its mobility path, battery drain, address churn. Recording is materialized
// lazily at STOP; between STOP and SEND the session sits in the buffer, so
// nothing is lost across churn. Battery at 0 silences the node entirely.
class EdgeNode {
 public:
  EdgeNode(EdgeNodeConfig cfg, EdgeEnv* env, std::uint64_t scenario_seed,
           const FieldModel* field);

  void start();  // connect, announce, arm timers
  void on_command_frame(std::string_view frame);

  // Closes the books at the end of a run: an open recording is materialized
  // into the buffer so generated = delivered + buffered holds exactly.
  void finalize(std::int64_t end_ms);

  const std::string& imei() const { return cfg_.imei; }
  const EdgeNodeConfig& config() const { return cfg_; }
  const NodeCounters& counters() const { return counters_; }
  double battery_pct() const { return battery_pct_; }
  bool powered() const { return battery_pct_ > 0.0; }
  GeoPoint position_now() const;
  const std::string& address() const { return address_; }
  bool recording() const { return recording_.has_value(); }

 private:
  struct LiveSession {
    std::int64_t started_ms = 0;
    std::vector<wire::SensorStartEntry> entries;  // effective (device-clamped) rates
  };

  void connect();
  void churn();
  void send_keepalive();
  void arm_keepalive();
  bool muted_at(std::int64_t t_ms) const;
  void drain_to(std::int64_t t_ms);  // base battery drain
  void handle_command(const wire::CommandMsg& cmd);
  void handle_start(const wire::CommandMsg& cmd);
  void materialize_recording(std::int64_t stop_ms);
  void handle_send(bool compress);
  void capture_image();
  void send_frame(std::string_view frame, bool is_data);
  std::size_t buffered_sample_count() const;

  EdgeNodeConfig cfg_;
  EdgeEnv* env_;
  const FieldModel* field_;
  MobilityPath path_;
  std::mt19937_64 rng_;

  std::string address_;
  int churn_count_ = 0;
  double battery_pct_;
  std::int64_t last_drain_ms_ = 0;
  std::optional<LiveSession> recording_;
  // sensor name -> buffered sessions awaiting SEND
  std::map<std::string, std::vector<wire::SensorSession>> buffer_;
  NodeCounters counters_;
};

}  // namespace music::sim
