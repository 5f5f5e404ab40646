#include "music/command_scheduler.hpp"

#include <algorithm>

#include "music/log.hpp"

namespace music::cmd {

using ctrl::DispatchStatus;
using ctrl::SessionPhase;

CommandScheduler::CommandScheduler(ctrl::ControllerCore* controller, Scheduler* scheduler,
                                   SensorTable table, DutyCycleConfig cycle)
    : controller_(controller), scheduler_(scheduler), table_(std::move(table)), cycle_(cycle) {}

void CommandScheduler::start() {
  controller_->set_session_complete_handler(
      [this](const std::string& imei, std::int64_t) { pump(imei); });
}

Directive CommandScheduler::directive_for(const ctrl::NodeRecord& node) const {
  std::lock_guard lock(mu_);
  auto it = directives_.find(node.imei);
  if (it != directives_.end()) return it->second;
  return default_directive(node, table_);
}

void CommandScheduler::apply_policy(const SensingPolicy& policy, const CompileResult& batch) {
  {
    std::lock_guard lock(mu_);
    for (const auto& [imei, directive] : policy.directives) directives_[imei] = directive;
    for (const auto& cc : batch.commands) nodes_[cc.imei].queue.push_back(cc.command);
  }
  for (const auto& [imei, _] : policy.directives) pump(imei);
}

void CommandScheduler::on_node_event(const std::string& imei) { pump(imei); }

void CommandScheduler::retry_tick() {
  std::vector<std::string> to_pump;
  {
    std::lock_guard lock(mu_);
    for (const auto& [imei, state] : nodes_)
      if (!state.queue.empty()) to_pump.push_back(imei);
  }
  for (const auto& imei : to_pump) pump(imei);
}

std::map<std::string, int> CommandScheduler::long_sessions() const {
  std::lock_guard lock(mu_);
  std::map<std::string, int> out;
  for (const auto& [imei, state] : nodes_)
    if (state.long_sessions > 0) out[imei] = state.long_sessions;
  return out;
}

wire::CommandMsg CommandScheduler::finalize_send(const ctrl::NodeRecord& node,
                                                 wire::CommandMsg cmd) const {
  const auto& s = node.session;
  const std::int64_t duration =
      s.phase == SessionPhase::AwaitingSend ? s.phase_since_ms - s.recording_started_ms : 0;
  cmd.compress =
      estimate_session_bytes(s.recording, duration, table_) > cycle_.compress_threshold_bytes;
  return cmd;
}

bool CommandScheduler::try_dispatch(const std::string& imei, const ctrl::NodeRecord& node,
                                    wire::CommandMsg cmd) {
  using wire::CommandType;
  const SessionPhase phase = node.session.phase;

  switch (cmd.type) {
    case CommandType::Start:
      if (phase != SessionPhase::Idle) return false;  // wait for session completion
      break;
    case CommandType::Stop:
      if (phase == SessionPhase::Idle) {
        MUSIC_LOG_WARN("dropping stale STOP for %s (session already over)", imei.c_str());
        return true;
      }
      if (phase != SessionPhase::Recording) return false;
      break;
    case CommandType::Send:
      if (phase == SessionPhase::Idle) {
        MUSIC_LOG_WARN("dropping stale SEND for %s (session already over)", imei.c_str());
        return true;
      }
      if (phase != SessionPhase::AwaitingSend) return false;
      cmd = finalize_send(node, cmd);
      break;
    case CommandType::CaptureImage:
      break;
  }

  switch (controller_->dispatch(imei, cmd, scheduler_->now_ms())) {
    case DispatchStatus::Ok:
      return true;
    case DispatchStatus::NotFound:
      MUSIC_LOG_WARN("dropping command for unknown node %s", imei.c_str());
      return true;
    case DispatchStatus::InvalidTransition:
      // raced with another state change; retry on the next pump
      return false;
    case DispatchStatus::NodeDead:
    case DispatchStatus::NoChannel:
      return false;  // pending until revival / rebind
  }
  return false;
}

void CommandScheduler::run_duty_cycle(const std::string& imei, const ctrl::NodeRecord& node) {
  const Directive directive = directive_for(node);
  auto action = default_cycle_tick(node, directive, cycle_, table_, scheduler_->now_ms());
  if (action) {
    if (action->type == wire::CommandType::Send) *action = finalize_send(node, *action);
    if (controller_->dispatch(imei, *action, scheduler_->now_ms()) == DispatchStatus::Ok) {
      pump(imei);  // STOP chains straight into SEND; START arms the STOP deadline
      return;
    }
  }

  // No action due yet: arm the next exact deadline for this phase.
  const auto& s = node.session;
  if (!node.alive || !directive.active) return;
  if (s.phase == SessionPhase::Idle)
    arm_wakeup(imei, s.phase_since_ms + cycle_.break_ms);
  else if (s.phase == SessionPhase::Recording)
    arm_wakeup(imei, s.phase_since_ms + cycle_.sense_ms);
  // AwaitingSend with SEND issued: the completion marker pumps us.
}

void CommandScheduler::pump(const std::string& imei) {
  std::lock_guard lock(mu_);
  auto node = controller_->node(imei);
  if (!node) return;

  auto& state = nodes_[imei];
  while (!state.queue.empty()) {
    if (!node->alive) return;
    if (!try_dispatch(imei, *node, state.queue.front())) return;
    state.queue.pop_front();
    node = controller_->node(imei);  // phase may have advanced
    if (!node) return;
  }

  const std::int64_t long_cutoff = std::max(long_session_threshold_ms, cycle_.sense_ms + 60'000);
  if (node->session.phase == SessionPhase::Recording &&
      scheduler_->now_ms() - node->session.phase_since_ms > long_cutoff &&
      state.flagged_session_start_ms != node->session.phase_since_ms) {
    state.flagged_session_start_ms = node->session.phase_since_ms;
    ++state.long_sessions;
    MUSIC_LOG_WARN("node %s session open for more than %lld ms", imei.c_str(),
                   static_cast<long long>(long_cutoff));
  }

  run_duty_cycle(imei, *node);
}

void CommandScheduler::arm_wakeup(const std::string& imei, std::int64_t when_ms) {
  auto& state = nodes_[imei];
  if (state.next_wakeup_ms >= 0 && state.next_wakeup_ms <= when_ms) return;  // already armed
  state.next_wakeup_ms = when_ms;
  scheduler_->schedule_at(when_ms, [this, imei, when_ms] {
    {
      std::lock_guard lock(mu_);
      auto it = nodes_.find(imei);
      if (it != nodes_.end() && it->second.next_wakeup_ms == when_ms)
        it->second.next_wakeup_ms = -1;
    }
    pump(imei);
  });
}

}  // namespace music::cmd
