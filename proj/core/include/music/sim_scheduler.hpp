#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "music/scheduler.hpp"

namespace music::sim {

// Discrete-event scheduler over a virtual clock. Events execute in (time,
// insertion) order, single-sequenced, which is what makes seeded runs
// reproduce byte-identical outputs. acceleration > 0 paces execution against
// the wall clock (sim seconds per wall second); <= 0 runs events as fast as
// possible.
class SimScheduler final : public Scheduler {
 public:
  explicit SimScheduler(std::int64_t start_ms = 0, double acceleration = 0.0)
      : now_ms_(start_ms), start_ms_(start_ms), acceleration_(acceleration) {}

  std::int64_t now_ms() const override { return now_ms_; }

  void schedule_at(std::int64_t when_ms, std::function<void()> fn) override {
    if (when_ms < now_ms_) when_ms = now_ms_;
    queue_.push(Event{when_ms, seq_++, std::move(fn)});
  }

  // Runs every event with time <= end_ms; leaves the clock at end_ms.
  void run_until(std::int64_t end_ms);

  // Runs a single due event; returns false when the queue is empty or the
  // next event is past end_ms.
  bool step(std::int64_t end_ms);

  double acceleration() const { return acceleration_; }
  std::int64_t start_ms() const { return start_ms_; }

 private:
  struct Event {
    std::int64_t at_ms;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.at_ms != b.at_ms) return a.at_ms > b.at_ms;
      return a.seq > b.seq;
    }
  };

  void pace_to(std::int64_t sim_ms);

  std::int64_t now_ms_;
  std::int64_t start_ms_;
  double acceleration_;
  std::uint64_t seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  bool wall_anchored_ = false;
  std::int64_t wall_start_us_ = 0;
};

}  // namespace music::sim
