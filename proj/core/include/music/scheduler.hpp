#pragma once

#include <cstdint>
#include <functional>

namespace music {

// Time source + deferred execution. The simulator implements this with its
// discrete-event queue (exact deadlines, single-sequenced); the live
// controller implements it with a timer thread over the wall clock.
class Scheduler {
 public:
  virtual ~Scheduler() = default;

  virtual std::int64_t now_ms() const = 0;
  virtual void schedule_at(std::int64_t when_ms, std::function<void()> fn) = 0;

  void schedule_after(std::int64_t delay_ms, std::function<void()> fn) {
    schedule_at(now_ms() + delay_ms, std::move(fn));
  }
};

}  // namespace music
