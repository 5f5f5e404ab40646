#include "music/session.hpp"

namespace music::ctrl {

std::string_view to_string(SessionPhase p) {
  switch (p) {
    case SessionPhase::Idle: return "idle";
    case SessionPhase::Recording: return "recording";
    case SessionPhase::AwaitingSend: return "awaiting_send";
  }
  return "?";
}

TransitionResult apply_command(SessionState& s, const wire::CommandMsg& cmd, std::int64_t now_ms) {
  using wire::CommandType;
  switch (cmd.type) {
    case CommandType::Start:
      if (s.phase != SessionPhase::Idle) return TransitionResult::Invalid;
      s.phase = SessionPhase::Recording;
      s.phase_since_ms = now_ms;
      s.recording_started_ms = now_ms;
      s.recording = cmd.sensors;
      s.send_issued = false;
      return TransitionResult::Ok;
    case CommandType::Stop:
      if (s.phase != SessionPhase::Recording) return TransitionResult::Invalid;
      s.phase = SessionPhase::AwaitingSend;
      s.phase_since_ms = now_ms;
      s.send_issued = false;
      return TransitionResult::Ok;
    case CommandType::Send:
      if (s.phase != SessionPhase::AwaitingSend) return TransitionResult::Invalid;
      s.send_issued = true;  // phase unchanged until the data arrives
      return TransitionResult::Ok;
    case CommandType::CaptureImage:
      return TransitionResult::Ok;
  }
  return TransitionResult::Invalid;
}

bool apply_send_complete(SessionState& s, std::int64_t now_ms) {
  if (s.phase != SessionPhase::AwaitingSend || !s.send_issued) return false;
  s.phase = SessionPhase::Idle;
  s.phase_since_ms = now_ms;
  s.recording.clear();
  s.send_issued = false;
  return true;
}

}  // namespace music::ctrl
