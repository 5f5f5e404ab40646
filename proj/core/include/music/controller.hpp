#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "music/data_store.hpp"
#include "music/registry.hpp"
#include "music/wire.hpp"

namespace music::ctrl {

// Write side of a node's command connection. Implementations: the TCP server's
// per-connection writer, and the simulator's in-process delivery queue.
class CommandSink {
 public:
  virtual ~CommandSink() = default;
  virtual bool send_frame(std::string_view frame) = 0;  // false once closed
};

enum class DispatchStatus { Ok, NotFound, NodeDead, InvalidTransition, NoChannel };

std::string_view to_string(DispatchStatus s);

struct DataResult {
  bool stored = false;
  bool unknown_sender = false;
  bool session_completed = false;
};

// The backend Driver: node registry, liveness, session tracking, data intake
// and command dispatch. Transport-agnostic; connection handlers (TCP or
// simulated) feed decoded messages in and bind CommandSinks.
//
// All mutations take one mutex and swap immutable NodeRecords, so snapshot()
// is a cheap pointer copy and never observes a torn record.
class ControllerCore {
 public:
  struct Config {
    std::int64_t keepalive_period_ms = 10'000;
    std::int64_t liveness_timeout_ms = 30'000;  // 3 missed keepalives
  };

  ControllerCore(Config cfg, DataStore* store) : cfg_(cfg), store_(store) {}

  const Config& config() const { return cfg_; }

  // Keepalives are always absorbed: they register unknown nodes, refresh
  // last_seen/battery/location/sensors and revive dead nodes. The observed
  // transport address wins over the message's "ip" field for routing.
  void on_keepalive(const wire::KeepAliveMsg& msg, const std::string& addr, std::int64_t now_ms);

  // Sensor/image data. Messages from unknown senders are quarantined. An
  // empty-session SensorDataMsg is the end-of-send marker: it completes the
  // pending session when one is armed (AwaitingSend with SEND issued).
  // wire_frame, when supplied, is persisted as-is; otherwise the message is
  // re-encoded for the log.
  DataResult on_data(const wire::Message& msg, std::int64_t now_ms,
                     std::string_view wire_frame = {});

  // Marks nodes silent for longer than the liveness timeout dead; returns the
  // imeis that flipped on this sweep.
  std::vector<std::string> liveness_sweep(std::int64_t now_ms);

  // Encodes and writes a command to the node's command connection, advancing
  // the expected session state. Commands to dead nodes are suppressed.
  DispatchStatus dispatch(const std::string& imei, const wire::CommandMsg& cmd,
                          std::int64_t now_ms);

  RegistrySnapshot snapshot(std::int64_t now_ms) const;

  // Single-node lookup; nullptr when unknown.
  std::shared_ptr<const NodeRecord> node(const std::string& imei) const;

  void bind_command_channel(const std::string& imei, std::shared_ptr<CommandSink> sink);
  void unbind_command_channel(const std::string& imei, const CommandSink* sink);
  bool has_command_channel(const std::string& imei) const;

  using SessionCompleteHandler = std::function<void(const std::string& imei, std::int64_t now_ms)>;
  void set_session_complete_handler(SessionCompleteHandler h) { on_session_complete_ = std::move(h); }

  using CommandObserver = std::function<void(const std::string& imei, const wire::CommandMsg& cmd,
                                             std::size_t frame_bytes, std::int64_t now_ms)>;
  void set_command_observer(CommandObserver o) { command_observer_ = std::move(o); }

  DataStore* data_store() { return store_; }

 private:
  template <typename Fn>
  void update_record(const std::string& imei, Fn&& fn);

  Config cfg_;
  DataStore* store_;

  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<const NodeRecord>> nodes_;
  std::map<std::string, std::shared_ptr<CommandSink>> command_channels_;

  SessionCompleteHandler on_session_complete_;
  CommandObserver command_observer_;
};

}  // namespace music::ctrl
