#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "music/command.hpp"
#include "music/controller.hpp"
#include "music/scheduler.hpp"

namespace music::cmd {

// One logical command sequencer per node. Owns the default duty cycle timing
// (exact deadlines via the Scheduler) and drains policy command batches in
// order, holding each command until the node's session phase admits it —
// in particular a START queued behind STOP/SEND waits for the end-of-send
// marker. Commands to dead nodes stay pending until a keepalive revives them.
class CommandScheduler {
 public:
  CommandScheduler(ctrl::ControllerCore* controller, Scheduler* scheduler, SensorTable table,
                   DutyCycleConfig cycle);

  // Installs the session-complete hook. Call once before traffic flows.
  void start();

  // Replaces the directive store with the policy's view and enqueues the
  // compiled batch.
  void apply_policy(const SensingPolicy& policy, const CompileResult& batch);

  // Poke a node: on registration, keepalive (revival), or channel rebind.
  void on_node_event(const std::string& imei);

  // Retries stuck queue heads (e.g. after NoChannel). Cheap; call ~1 Hz.
  void retry_tick();

  Directive directive_for(const ctrl::NodeRecord& node) const;
  const SensorTable& sensor_table() const { return table_; }
  const DutyCycleConfig& cycle() const { return cycle_; }

  // Sessions that ran longer than this are flagged in per-node stats.
  std::int64_t long_session_threshold_ms = 600'000;
  std::map<std::string, int> long_sessions() const;

 private:
  struct NodeState {
    std::deque<wire::CommandMsg> queue;
    std::int64_t next_wakeup_ms = -1;
    std::int64_t flagged_session_start_ms = -1;
    int long_sessions = 0;
  };

  void pump(const std::string& imei);
  // Returns true when the command left the queue (dispatched or dropped).
  bool try_dispatch(const std::string& imei, const ctrl::NodeRecord& node,
                    wire::CommandMsg cmd);
  void run_duty_cycle(const std::string& imei, const ctrl::NodeRecord& node);
  void arm_wakeup(const std::string& imei, std::int64_t when_ms);
  wire::CommandMsg finalize_send(const ctrl::NodeRecord& node, wire::CommandMsg cmd) const;

  ctrl::ControllerCore* controller_;
  Scheduler* scheduler_;
  SensorTable table_;
  DutyCycleConfig cycle_;

  mutable std::recursive_mutex mu_;
  std::map<std::string, NodeState> nodes_;
  std::map<std::string, Directive> directives_;
};

}  // namespace music::cmd
