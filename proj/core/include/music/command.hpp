#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "music/registry.hpp"
#include "music/wire.hpp"

namespace music::cmd {

class CommandError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Sensor fidelity table
// ---------------------------------------------------------------------------

struct SensorSpec {
  std::string name;
  double max_frequency_hz = 1.0;
  double default_frequency_hz = 1.0;
  std::size_t bytes_per_sample = 150;  // payload estimate for accounting
};

// Lookup is case-insensitive and ignores spaces/dashes/underscores, since
// device-advertised names ("Accelerometer") and config keys ("accelerometer")
// differ only in casing.
class SensorTable {
 public:
  static std::string normalize(std::string_view name);

  // accelerometer {max 100 Hz, default 20 Hz}, air quality {1, 1},
  // gps {1, 1}, compass {50, 10}.
  static SensorTable defaults();

  void put(SensorSpec spec);
  const SensorSpec* find(std::string_view name) const;
  std::vector<SensorSpec> all() const;  // sorted by normalized name

 private:
  std::map<std::string, SensorSpec> by_name_;
};

// min(requested, spec.max). Throws CommandError when requested <= 0.
double clamp_frequency(double requested_hz, const SensorSpec& spec);

// ---------------------------------------------------------------------------
// Sensing policy
// ---------------------------------------------------------------------------

// Per-node directive emitted by the ML layer each tick.
struct Directive {
  bool active = true;
  std::vector<wire::SensorStartEntry> sensors;  // desired set; clamped at compile
  bool capture_image = false;

  bool operator==(const Directive&) const = default;
};

struct SensingPolicy {
  std::uint64_t policy_id = 0;
  std::map<std::string, Directive> directives;  // by imei

  bool operator==(const SensingPolicy&) const = default;
};

// ---------------------------------------------------------------------------
// Policy -> command compilation
// ---------------------------------------------------------------------------

struct CompiledCommand {
  std::string imei;
  wire::CommandMsg command;
};

struct CompileResult {
  std::vector<CompiledCommand> commands;  // per-node order is significant
  std::vector<std::string> skipped;       // unknown or dead nodes
};

// Diffs two policies into the minimal command batch, consulting the session
// state in the snapshot so the emitted sequence is legal from each node's
// current phase:
//   active -> inactive : STOP (if recording), SEND (if unsent)
//   inactive -> active : START(clamped)
//   set/frequency change while active: STOP, SEND, START(new)  [session restart]
//   capture_image rising edge: CAPTURE_IMAGE
// A START queued behind a SEND is dispatched by the scheduler once the session
// completes. compile(p, p, ...) is empty for every p.
CompileResult compile(const SensingPolicy& prev, const SensingPolicy& next,
                      const ctrl::RegistrySnapshot& snapshot, const SensorTable& table);

// ---------------------------------------------------------------------------
// Default duty cycle: START (sense_s) -> STOP -> SEND -> (break_s) -> ...
// ---------------------------------------------------------------------------

struct DutyCycleConfig {
  std::int64_t sense_ms = 20'000;
  std::int64_t break_ms = 10'000;
  std::size_t compress_threshold_bytes = 64 * 1024;
};

// Pure decision for one node: what the default cycle owes it at `now`.
//   Idle for >= break       -> START (directive sensors, clamped; table
//                              defaults when the directive has no explicit set)
//   Recording for >= sense  -> STOP
//   AwaitingSend, unsent    -> SEND
// The next START is withheld until the session-complete marker arrives, which
// the Idle phase transition already encodes.
std::optional<wire::CommandMsg> default_cycle_tick(const ctrl::NodeRecord& node,
                                                   const Directive& directive,
                                                   const DutyCycleConfig& cycle,
                                                   const SensorTable& table, std::int64_t now_ms);

// Directive used for nodes the policy layer has not addressed: active, all
// advertised sensors at their table default frequencies.
Directive default_directive(const ctrl::NodeRecord& node, const SensorTable& table);

// Estimated payload of a session recorded with `entries` for duration_ms;
// drives the SEND compress flag.
std::size_t estimate_session_bytes(const std::vector<wire::SensorStartEntry>& entries,
                                   std::int64_t duration_ms, const SensorTable& table);

}  // namespace music::cmd
