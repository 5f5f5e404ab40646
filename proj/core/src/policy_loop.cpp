#include "music/policy_loop.hpp"

#include <algorithm>

#include "music/base64.hpp"
#include "music/log.hpp"

namespace music::policy {

PolicyContext build_policy_context(ctrl::ControllerCore& controller, ctrl::DataStore& store,
                                   const cmd::SensorTable& table, const PolicyParams& params,
                                   const std::vector<analytics::RoadSegment>& segments,
                                   std::int64_t now_ms) {
  PolicyContext ctx;
  ctx.snapshot = controller.snapshot(now_ms);
  ctx.sensor_table = table;
  ctx.params = params;
  ctx.segments = segments;
  ctx.tick_ms = now_ms;

  const std::int64_t since =
      params.data_window_ms > 0 ? now_ms - params.data_window_ms : INT64_MIN;

  for (const auto& node : ctx.snapshot.nodes) {
    NodeWindows w;
    for (const auto& entry : store.entries_since(node->imei, since)) {
      if (const auto* data = std::get_if<wire::SensorDataMsg>(entry.message.get())) {
        for (const auto& [sensor, sessions] : data->sensor_data) {
          const std::string norm = cmd::SensorTable::normalize(sensor);
          for (const auto& session : sessions) {
            for (const auto& rec : session.records) {
              if (!rec.timestamp_ms) continue;  // windowed analytics need time
              auto lat = rec.values.find("latitude");
              auto lon = rec.values.find("longitude");
              if (lat != rec.values.end() && lon != rec.values.end()) {
                w.gps_fixes.push_back(
                    {node->imei, *rec.timestamp_ms, {lat->second, lon->second}});
              } else if (auto v = rec.values.find("value"); v != rec.values.end()) {
                w.readings[norm].emplace_back(*rec.timestamp_ms, v->second);
              }
            }
          }
        }
      } else if (const auto* image = std::get_if<wire::ImageDataMsg>(entry.message.get())) {
        if (auto bytes = util::base64_decode(image->encoded_image))
          w.latest_image = {entry.received_at_ms, std::move(*bytes)};
      }
    }
    std::stable_sort(w.gps_fixes.begin(), w.gps_fixes.end(),
                     [](const auto& a, const auto& b) { return a.timestamp_ms < b.timestamp_ms; });
    ctx.windows[node->imei] = std::move(w);
  }
  return ctx;
}

PolicyLoop::PolicyLoop(Policy* policy, cmd::CommandScheduler* commands, Scheduler* scheduler,
                       std::int64_t tick_period_ms, ContextBuilder build_context)
    : policy_(policy),
      commands_(commands),
      scheduler_(scheduler),
      tick_period_ms_(tick_period_ms),
      build_context_(std::move(build_context)) {}

void PolicyLoop::start() {
  running_ = true;
  arm_next(scheduler_->now_ms());
}

void PolicyLoop::arm_next(std::int64_t from_ms) {
  scheduler_->schedule_at(from_ms + tick_period_ms_, [this] {
    if (!running_) return;
    tick_once();
    // Coalesce: the next tick is measured from now, so a slow tick skips
    // slots instead of queueing them.
    arm_next(scheduler_->now_ms());
  });
}

void PolicyLoop::tick_once() {
  const std::int64_t now = scheduler_->now_ms();
  PolicyContext ctx = build_context_(now);

  cmd::SensingPolicy next;
  try {
    next = policy_->tick(ctx);
  } catch (const std::exception& e) {
    MUSIC_LOG_ERROR("policy '%s' tick failed, keeping previous policy: %s",
                    std::string(policy_->name()).c_str(), e.what());
    return;  // commands from the last good policy remain in force
  }
  next.policy_id = current_.policy_id + 1;

  const cmd::CompileResult batch = cmd::compile(current_, next, ctx.snapshot,
                                                commands_->sensor_table());
  commands_->apply_policy(next, batch);
  if (observer_) observer_(ctx, next, batch);
  current_ = std::move(next);
}

}  // namespace music::policy
