#include "music/command.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "music/log.hpp"

namespace music::cmd {

std::string SensorTable::normalize(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  for (char c : name) {
    if (c == ' ' || c == '-' || c == '_') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

SensorTable SensorTable::defaults() {
  SensorTable t;
  t.put({"accelerometer", 100.0, 20.0, 140});
  t.put({"air_quality", 1.0, 1.0, 350});
  t.put({"gps", 1.0, 1.0, 120});
  t.put({"compass", 50.0, 10.0, 120});
  return t;
}

void SensorTable::put(SensorSpec spec) {
  if (!(spec.default_frequency_hz > 0.0) || spec.default_frequency_hz > spec.max_frequency_hz)
    throw CommandError("sensor '" + spec.name + "': need 0 < default <= max frequency");
  by_name_[normalize(spec.name)] = std::move(spec);
}

const SensorSpec* SensorTable::find(std::string_view name) const {
  auto it = by_name_.find(normalize(name));
  return it == by_name_.end() ? nullptr : &it->second;
}

std::vector<SensorSpec> SensorTable::all() const {
  std::vector<SensorSpec> out;
  out.reserve(by_name_.size());
  for (const auto& [_, spec] : by_name_) out.push_back(spec);
  return out;
}

double clamp_frequency(double requested_hz, const SensorSpec& spec) {
  if (!(requested_hz > 0.0)) throw CommandError("invalid frequency " + std::to_string(requested_hz));
  return std::min(requested_hz, spec.max_frequency_hz);
}

namespace {

std::vector<wire::SensorStartEntry> clamp_entries(const std::vector<wire::SensorStartEntry>& in,
                                                  const SensorTable& table) {
  std::vector<wire::SensorStartEntry> out;
  out.reserve(in.size());
  for (const auto& e : in) {
    const SensorSpec* spec = table.find(e.name);
    if (!spec) {
      MUSIC_LOG_WARN("sensor '%s' not in table, skipping", e.name.c_str());
      continue;
    }
    out.push_back({e.name, clamp_frequency(e.frequency_hz, *spec)});
  }
  return out;
}

wire::CommandMsg start_command(const std::vector<wire::SensorStartEntry>& entries,
                               const SensorTable& table) {
  wire::CommandMsg cmd;
  cmd.type = wire::CommandType::Start;
  cmd.sensors = clamp_entries(entries, table);
  return cmd;
}

// Session-ending commands appropriate for the node's current phase.
void append_stop_send(std::vector<CompiledCommand>& out, const std::string& imei,
                      const ctrl::SessionState& session) {
  if (session.phase == ctrl::SessionPhase::Recording) {
    out.push_back({imei, wire::CommandMsg{wire::CommandType::Stop, {}, false}});
    out.push_back({imei, wire::CommandMsg{wire::CommandType::Send, {}, false}});
  } else if (session.phase == ctrl::SessionPhase::AwaitingSend && !session.send_issued) {
    out.push_back({imei, wire::CommandMsg{wire::CommandType::Send, {}, false}});
  }
}

}  // namespace

CompileResult compile(const SensingPolicy& prev, const SensingPolicy& next,
                      const ctrl::RegistrySnapshot& snapshot, const SensorTable& table) {
  CompileResult result;
  for (const auto& [imei, want] : next.directives) {
    static const Directive kInactive{false, {}, false};
    auto prev_it = prev.directives.find(imei);
    const Directive& had = prev_it == prev.directives.end() ? kInactive : prev_it->second;
    if (want == had) continue;

    const ctrl::NodeRecord* node = snapshot.find(imei);
    if (!node || !node->alive) {
      MUSIC_LOG_WARN("policy directive for %s node '%s' skipped",
                     node ? "dead" : "unknown", imei.c_str());
      result.skipped.push_back(imei);
      continue;
    }

    if (had.active && !want.active) {
      append_stop_send(result.commands, imei, node->session);
    } else if (!had.active && want.active) {
      result.commands.push_back({imei, start_command(want.sensors, table)});
    } else if (want.active && want.sensors != had.sensors) {
      // no modify command in the protocol: restart the session
      append_stop_send(result.commands, imei, node->session);
      result.commands.push_back({imei, start_command(want.sensors, table)});
    }

    if (want.capture_image && !had.capture_image)
      result.commands.push_back({imei, wire::CommandMsg{wire::CommandType::CaptureImage, {}, false}});
  }
  return result;
}

Directive default_directive(const ctrl::NodeRecord& node, const SensorTable& table) {
  Directive d;
  d.active = true;
  for (const auto& name : node.sensors) {
    const SensorSpec* spec = table.find(name);
    if (!spec) {
      MUSIC_LOG_WARN("node %s advertises unknown sensor '%s'", node.imei.c_str(), name.c_str());
      continue;
    }
    d.sensors.push_back({name, spec->default_frequency_hz});
  }
  return d;
}

std::optional<wire::CommandMsg> default_cycle_tick(const ctrl::NodeRecord& node,
                                                   const Directive& directive,
                                                   const DutyCycleConfig& cycle,
                                                   const SensorTable& table, std::int64_t now_ms) {
  if (!node.alive || !directive.active) return std::nullopt;
  const auto& s = node.session;
  switch (s.phase) {
    case ctrl::SessionPhase::Idle:
      // phase_since is the registration time for nodes that never recorded
      if (now_ms - s.phase_since_ms >= cycle.break_ms) {
        const auto& entries = directive.sensors.empty()
                                  ? default_directive(node, table).sensors
                                  : directive.sensors;
        if (entries.empty()) return std::nullopt;  // nothing to sense
        return start_command(entries, table);
      }
      return std::nullopt;
    case ctrl::SessionPhase::Recording:
      if (now_ms - s.phase_since_ms >= cycle.sense_ms)
        return wire::CommandMsg{wire::CommandType::Stop, {}, false};
      return std::nullopt;
    case ctrl::SessionPhase::AwaitingSend:
      if (!s.send_issued) return wire::CommandMsg{wire::CommandType::Send, {}, false};
      return std::nullopt;
  }
  return std::nullopt;
}

std::size_t estimate_session_bytes(const std::vector<wire::SensorStartEntry>& entries,
                                   std::int64_t duration_ms, const SensorTable& table) {
  std::size_t total = 0;
  for (const auto& e : entries) {
    const SensorSpec* spec = table.find(e.name);
    const std::size_t per_sample = spec ? spec->bytes_per_sample : 150;
    const double samples = std::floor(static_cast<double>(duration_ms) / 1000.0 * e.frequency_hz);
    total += static_cast<std::size_t>(samples) * per_sample;
  }
  return total;
}

}  // namespace music::cmd
