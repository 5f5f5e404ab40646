#include "music/sim_scheduler.hpp"

#include <chrono>
#include <thread>

namespace music::sim {

namespace {
std::int64_t wall_us() {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}
}  // namespace

void SimScheduler::pace_to(std::int64_t sim_ms) {
  if (acceleration_ <= 0.0) return;
  if (!wall_anchored_) {
    wall_anchored_ = true;
    wall_start_us_ = wall_us();
  }
  const double sim_elapsed_ms = static_cast<double>(sim_ms - start_ms_);
  const std::int64_t target_us =
      wall_start_us_ + static_cast<std::int64_t>(sim_elapsed_ms * 1000.0 / acceleration_);
  const std::int64_t delta = target_us - wall_us();
  if (delta > 0) std::this_thread::sleep_for(std::chrono::microseconds(delta));
}

bool SimScheduler::step(std::int64_t end_ms) {
  if (queue_.empty() || queue_.top().at_ms > end_ms) return false;
  Event ev = queue_.top();
  queue_.pop();
  pace_to(ev.at_ms);
  now_ms_ = ev.at_ms;
  ev.fn();
  return true;
}

void SimScheduler::run_until(std::int64_t end_ms) {
  while (step(end_ms)) {
  }
  pace_to(end_ms);
  now_ms_ = end_ms;
}

}  // namespace music::sim
