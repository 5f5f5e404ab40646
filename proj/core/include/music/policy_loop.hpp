#pragma once

#include <cstdint>
#include <functional>
#include <memory>

#include "music/command_scheduler.hpp"
#include "music/controller.hpp"
#include "music/policy.hpp"
#include "music/scheduler.hpp"

namespace music::policy {

// Extracts the per-node data windows (GPS fixes, scalar readings, latest
// image) from the data store for one policy tick.
PolicyContext build_policy_context(ctrl::ControllerCore& controller, ctrl::DataStore& store,
                                   const cmd::SensorTable& table, const PolicyParams& params,
                                   const std::vector<analytics::RoadSegment>& segments,
                                   std::int64_t now_ms);

// Ticks one policy: snapshot -> tick -> compile(prev, next) -> dispatch batch.
// A tick that throws leaves the previous policy in force. Ticks the policy
// cannot keep up with are coalesced, never queued.
class PolicyLoop {
 public:
  using ContextBuilder = std::function<PolicyContext(std::int64_t now_ms)>;
  using TickObserver = std::function<void(const PolicyContext&, const cmd::SensingPolicy&,
                                          const cmd::CompileResult&)>;

  PolicyLoop(Policy* policy, cmd::CommandScheduler* commands, Scheduler* scheduler,
             std::int64_t tick_period_ms, ContextBuilder build_context);

  void set_tick_observer(TickObserver obs) { observer_ = std::move(obs); }

  void start();
  void stop() { running_ = false; }

  // One synchronous tick (also used by the loop itself).
  void tick_once();

  const cmd::SensingPolicy& current() const { return current_; }

 private:
  void arm_next(std::int64_t from_ms);

  Policy* policy_;
  cmd::CommandScheduler* commands_;
  Scheduler* scheduler_;
  std::int64_t tick_period_ms_;
  ContextBuilder build_context_;
  TickObserver observer_;

  cmd::SensingPolicy current_;  // policy_id 0: nothing deployed yet
  bool running_ = false;
};

}  // namespace music::policy
