#include "music/metrics.hpp"

#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "music/timeutil.hpp"

namespace music::report {

namespace {

std::string fmt(const char* layout, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* layout, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, layout);
  std::vsnprintf(buf, sizeof buf, layout, ap);
  va_end(ap);
  return buf;
}

}  // namespace

std::uint64_t MetricsReport::total_uplink_bytes() const {
  std::uint64_t n = 0;
  for (const auto& [_, m] : nodes) n += m.uplink_bytes;
  return n;
}

std::uint64_t MetricsReport::total_downlink_bytes() const {
  std::uint64_t n = 0;
  for (const auto& [_, m] : nodes) n += m.downlink_bytes;
  return n;
}

std::uint64_t MetricsReport::total_data_bytes() const {
  std::uint64_t n = 0;
  for (const auto& [_, m] : nodes) n += m.data_bytes;
  return n;
}

std::uint64_t MetricsReport::total_commands() const {
  std::uint64_t n = 0;
  for (const auto& [_, m] : nodes)
    for (const auto& [_t, c] : m.commands) n += c;
  return n;
}

std::uint64_t MetricsReport::total_samples_received() const {
  std::uint64_t n = 0;
  for (const auto& [_, m] : nodes) n += m.samples_received;
  return n;
}

std::string MetricsReport::to_text() const {
  std::string out;
  out += "# music simulation report\n";
  out += "scenario = " + scenario_name + "\n";
  out += "policy = " + policy_name + "\n";
  out += fmt("seed = %llu\n", static_cast<unsigned long long>(seed));
  out += "start_epoch = " + util::epoch_ms_to_iso8601(start_epoch_ms) + "\n";
  out += fmt("duration_s = %.3f\n", static_cast<double>(duration_ms) / 1000.0);
  out += fmt("acceleration = %.3f\n", acceleration);
  out += fmt("policy_ticks = %llu\n", static_cast<unsigned long long>(policy_ticks));
  out += fmt("quarantined_messages = %zu\n", quarantined);
  for (const auto& [sensor, target] : record_bytes_targets)
    out += fmt("record_bytes_target.%s = %zu\n", sensor.c_str(), target);

  for (const auto& [imei, m] : nodes) {
    out += "\n[node " + imei + "]\n";
    out += fmt("uplink_bytes = %llu\n", static_cast<unsigned long long>(m.uplink_bytes));
    out += fmt("downlink_bytes = %llu\n", static_cast<unsigned long long>(m.downlink_bytes));
    out += fmt("data_bytes = %llu\n", static_cast<unsigned long long>(m.data_bytes));
    for (const auto& [kind, count] : m.messages)
      out += fmt("messages.%s = %llu\n", kind.c_str(), static_cast<unsigned long long>(count));
    for (const auto& [type, count] : m.commands)
      out += fmt("commands.%s = %llu\n", type.c_str(), static_cast<unsigned long long>(count));
    out += fmt("samples_generated = %llu\n", static_cast<unsigned long long>(m.samples_generated));
    out += fmt("samples_delivered = %llu\n", static_cast<unsigned long long>(m.samples_delivered));
    out += fmt("samples_received = %llu\n", static_cast<unsigned long long>(m.samples_received));
    out += fmt("samples_buffered = %llu\n", static_cast<unsigned long long>(m.samples_buffered));
    out += fmt("sessions_completed = %llu\n",
               static_cast<unsigned long long>(m.sessions_completed));
    out += fmt("battery_end_pct = %.4f\n", m.battery_end_pct);
    out += fmt("long_sessions = %d\n", m.long_sessions);
  }

  out += "\n[totals]\n";
  out += fmt("uplink_bytes = %llu\n", static_cast<unsigned long long>(total_uplink_bytes()));
  out += fmt("downlink_bytes = %llu\n", static_cast<unsigned long long>(total_downlink_bytes()));
  out += fmt("data_bytes = %llu\n", static_cast<unsigned long long>(total_data_bytes()));
  out += fmt("commands = %llu\n", static_cast<unsigned long long>(total_commands()));
  out += fmt("samples_received = %llu\n",
             static_cast<unsigned long long>(total_samples_received()));

  if (!final_flags.empty()) {
    out += "\n[hotspots]\n";
    for (const auto& f : final_flags) {
      out += fmt("segment.%lld = %s", static_cast<long long>(f.segment_id),
                 f.flagged ? "hotspot" : "clear");
      if (f.set_at_window_ms)
        out += " since " + util::epoch_ms_to_iso8601(*f.set_at_window_ms);
      out += "\n";
    }
  }
  if (!life_events.empty()) {
    out += "\n[liveness]\n";
    for (const auto& e : life_events)
      out += fmt("%.3f %s %s\n", static_cast<double>(e.t_ms - start_epoch_ms) / 1000.0,
                 e.imei.c_str(), e.event.c_str());
  }
  return out;
}

void MetricsReport::write_files(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  {
    std::ofstream f(dir + "/report.txt");
    f << to_text();
  }
  {
    std::ofstream f(dir + "/node_metrics.csv");
    f << "imei,uplink_bytes,downlink_bytes,data_bytes,keepalives,sensor_data,images,"
         "samples_generated,samples_delivered,samples_received,samples_buffered,"
         "sessions_completed,battery_end_pct\n";
    for (const auto& [imei, m] : nodes) {
      auto count = [&](const char* k) {
        auto it = m.messages.find(k);
        return it == m.messages.end() ? 0ull : it->second;
      };
      f << imei << ',' << m.uplink_bytes << ',' << m.downlink_bytes << ',' << m.data_bytes
        << ',' << count("keepalive") << ',' << count("sensor_data") << ',' << count("image")
        << ',' << m.samples_generated << ',' << m.samples_delivered << ','
        << m.samples_received << ',' << m.samples_buffered << ',' << m.sessions_completed
        << ',' << fmt("%.4f", m.battery_end_pct) << '\n';
    }
  }
  {
    std::ofstream f(dir + "/directives.csv");
    f << "t_s,policy_id,imei,active,frequency_hz,capture\n";
    for (const auto& d : directives)
      f << fmt("%.3f", static_cast<double>(d.t_ms - start_epoch_ms) / 1000.0) << ','
        << d.policy_id << ',' << d.imei << ',' << (d.active ? 1 : 0) << ','
        << fmt("%.4f", d.frequency_hz) << ',' << (d.capture ? 1 : 0) << '\n';
  }
  {
    std::ofstream f(dir + "/commands.csv");
    f << "t_s,imei,type\n";
    for (const auto& c : commands)
      f << fmt("%.3f", static_cast<double>(c.t_ms - start_epoch_ms) / 1000.0) << ',' << c.imei
        << ',' << c.type << '\n';
  }
  {
    std::ofstream f(dir + "/coverage_rmse.csv");
    f << "t_s,loocv_rmse\n";
    for (const auto& [t, v] : coverage_rmse)
      f << fmt("%.3f", static_cast<double>(t - start_epoch_ms) / 1000.0) << ','
        << fmt("%.6f", v) << '\n';
  }
  {
    std::ofstream f(dir + "/hotspot_flags.csv");
    f << "t_s,segment_id,flagged\n";
    for (const auto& r : flag_timeline)
      f << fmt("%.3f", static_cast<double>(r.t_ms - start_epoch_ms) / 1000.0) << ','
        << r.segment_id << ',' << (r.flagged ? 1 : 0) << '\n';
  }
  {
    std::ofstream f(dir + "/hotspot_final.csv");
    f << "segment_id,flagged,set_at_window_iso8601\n";
    for (const auto& r : final_flags) {
      f << r.segment_id << ',' << (r.flagged ? 1 : 0) << ',';
      if (r.set_at_window_ms) f << util::epoch_ms_to_iso8601(*r.set_at_window_ms);
      f << '\n';
    }
  }
  {
    std::ofstream f(dir + "/life_events.csv");
    f << "t_s,imei,event\n";
    for (const auto& e : life_events)
      f << fmt("%.3f", static_cast<double>(e.t_ms - start_epoch_ms) / 1000.0) << ',' << e.imei
        << ',' << e.event << '\n';
  }
}

}  // namespace music::report
