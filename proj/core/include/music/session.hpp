#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "music/wire.hpp"

namespace music::ctrl {

enum class SessionPhase { Idle, Recording, AwaitingSend };

std::string_view to_string(SessionPhase p);

// Controller-side mirror of one node's recording session. Legal transitions:
//   Idle -> Recording        on START
//   Recording -> AwaitingSend on STOP
//   AwaitingSend -> Idle      on the end-of-send data marker after SEND
// SEND itself does not change phase; it arms completion.
struct SessionState {
  SessionPhase phase = SessionPhase::Idle;
  std::int64_t phase_since_ms = 0;            // when the current phase was entered
  std::int64_t recording_started_ms = 0;      // START time of the live/pending session
  std::vector<wire::SensorStartEntry> recording;  // sensors+frequencies of the live session
  bool send_issued = false;                   // meaningful in AwaitingSend

  bool operator==(const SessionState&) const = default;
};

enum class TransitionResult { Ok, Invalid };

// Applies a command to the expected-state machine. CAPTURE_IMAGE is always
// legal and does not touch the session.
TransitionResult apply_command(SessionState& s, const wire::CommandMsg& cmd, std::int64_t now_ms);

// Applies the end-of-send marker; returns true when it completed a session.
bool apply_send_complete(SessionState& s, std::int64_t now_ms);

}  // namespace music::ctrl
