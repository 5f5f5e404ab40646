#include "music/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "music/timeutil.hpp"

namespace music::sim {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& what) { throw ScenarioError(what); }

std::int64_t seconds_field(const json& j, const char* key, double fallback_s) {
  const double s = j.value(key, fallback_s);
  if (s < 0) fail(std::string(key) + " must be >= 0");
  return static_cast<std::int64_t>(s * 1000.0);
}

GeoPoint point_from(const json& j, const std::string& where) {
  if (!j.contains("latitude") || !j.contains("longitude"))
    fail(where + ": needs latitude and longitude");
  GeoPoint p{j["latitude"].get<double>(), j["longitude"].get<double>()};
  if (!valid_geo(p)) fail(where + ": coordinates out of range");
  return p;
}

void parse_policy_params(const json& j, policy::PolicyParams& p) {
  p.separation_km = j.value("separation_km", p.separation_km);
  p.battery_floor_pct = j.value("battery_floor_pct", p.battery_floor_pct);
  p.alpha = j.value("alpha", p.alpha);
  p.k = j.value("k", p.k);
  p.lambda = j.value("lambda", p.lambda);
  if (j.contains("window_s")) p.window_ms = seconds_field(j, "window_s", 600);
  p.f_min_hz = j.value("f_min_hz", p.f_min_hz);
  p.f_max_hz = j.value("f_max_hz", p.f_max_hz);
  p.camera_speed_fraction = j.value("camera_speed_fraction", p.camera_speed_fraction);
  p.deactivate_free_flow = j.value("deactivate_free_flow", p.deactivate_free_flow);
  p.free_flow_fraction = j.value("free_flow_fraction", p.free_flow_fraction);
  p.hotspot_mode = j.value("hotspot_mode", p.hotspot_mode);
  p.outlier_cutoff = j.value("outlier_cutoff", p.outlier_cutoff);
  p.dirt_threshold = j.value("dirt_threshold", p.dirt_threshold);
  if (j.contains("image_period_s")) p.image_period_ms = seconds_field(j, "image_period_s", 300);
  if (j.contains("auxiliary_sensors"))
    p.auxiliary_sensors = j["auxiliary_sensors"].get<std::vector<std::string>>();
  if (j.contains("sensing_sensors")) {
    if (!j["sensing_sensors"].is_object()) fail("policy.params.sensing_sensors must be an object");
    for (auto it = j["sensing_sensors"].begin(); it != j["sensing_sensors"].end(); ++it) {
      const double hz = it->get<double>();
      if (hz <= 0) fail("sensing_sensors." + it.key() + " must be > 0");
      p.sensing_sensors[it.key()] = hz;
    }
  }
  if (j.contains("data_window_s")) p.data_window_ms = seconds_field(j, "data_window_s", 0);
  p.idw_resolution_m = j.value("idw_resolution_m", p.idw_resolution_m);
  p.idw_power = j.value("idw_power", p.idw_power);
  if (!(p.separation_km > 0)) fail("separation_km must be > 0");
  if (!(p.dirt_threshold > 0 && p.dirt_threshold < 1)) fail("dirt_threshold must be in (0,1)");
  if (p.f_min_hz > p.f_max_hz) fail("f_min_hz must be <= f_max_hz");
}

SensorGenConfig parse_sensor(const json& j, const std::string& where) {
  SensorGenConfig s;
  if (!j.contains("name")) fail(where + ": sensor needs a name");
  s.name = j["name"].get<std::string>();
  s.generator = j.value("generator", "scalar");
  s.max_frequency_hz = j.value("max_frequency_hz", 1.0);
  if (!(s.max_frequency_hz > 0)) fail(where + ": max_frequency_hz must be > 0");
  s.noise_sigma = j.value("noise_sigma", 0.0);
  s.scalar_mean = j.value("scalar_mean", 0.0);
  s.wave_amplitude = j.value("wave_amplitude", 0.5);
  s.wave_hz = j.value("wave_hz", 1.0);
  s.unit = j.value("unit", "");
  s.record_bytes_target = j.value("record_bytes_target", 0u);
  return s;
}

EdgeNodeConfig parse_node(const json& j, std::size_t index) {
  const std::string where = "nodes[" + std::to_string(index) + "]";
  EdgeNodeConfig n;
  if (!j.contains("imei") || !j["imei"].is_string() || j["imei"].get<std::string>().empty())
    fail(where + ": imei must be a non-empty string");
  n.imei = j["imei"].get<std::string>();

  if (j.contains("battery")) {
    const json& b = j["battery"];
    n.battery.start_pct = b.value("start_pct", n.battery.start_pct);
    n.battery.base_drain_pct_per_h = b.value("base_drain_pct_per_h", n.battery.base_drain_pct_per_h);
    n.battery.per_sample_pct = b.value("per_sample_pct", n.battery.per_sample_pct);
    n.battery.per_kib_tx_pct = b.value("per_kib_tx_pct", n.battery.per_kib_tx_pct);
    if (n.battery.start_pct < 0 || n.battery.start_pct > 100)
      fail(where + ": battery.start_pct out of [0,100]");
  }
  n.keepalive_period_ms = seconds_field(j, "keepalive_period_s", 10.0);
  if (n.keepalive_period_ms <= 0) fail(where + ": keepalive_period_s must be > 0");

  if (j.contains("sensors"))
    for (const auto& sj : j["sensors"]) n.sensors.push_back(parse_sensor(sj, where));

  if (j.contains("waypoints")) {
    for (const auto& wj : j["waypoints"]) {
      Waypoint w;
      w.t_ms = static_cast<std::int64_t>(wj.value("t_s", 0.0) * 1000.0);
      w.position = point_from(wj, where + ".waypoints");
      n.waypoints.push_back(w);
    }
  }
  if (n.waypoints.empty()) fail(where + ": needs at least one waypoint");

  if (j.contains("image_profile")) {
    n.image.kind = j["image_profile"].value("kind", "uniform");
    n.image.dirt_fraction = j["image_profile"].value("dirt_fraction", 0.0);
  }
  if (j.contains("mute_keepalives")) {
    for (const auto& mj : j["mute_keepalives"]) {
      MuteWindow w;
      w.from_ms = seconds_field(mj, "from_s", 0.0);
      w.to_ms = seconds_field(mj, "to_s", 0.0);
      n.keepalive_mutes.push_back(w);
    }
  }
  if (j.contains("churn_at_s"))
    for (const auto& c : j["churn_at_s"])
      n.churn_at_ms.push_back(static_cast<std::int64_t>(c.get<double>() * 1000.0));
  n.reconnect_delay_ms = seconds_field(j, "reconnect_delay_s", 0.1);
  return n;
}

}  // namespace

Scenario parse_scenario(const std::string& json_text, const std::string& origin_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    // map byte offset to a line number for the diagnostic
    std::size_t line = 1;
    for (std::size_t i = 0; i < e.byte && i < json_text.size(); ++i)
      if (json_text[i] == '\n') ++line;
    fail("scenario syntax error at line " + std::to_string(line) + ": " + e.what());
  }
  if (!j.is_object()) fail("scenario must be a JSON object");

  try {
    Scenario s;
    s.name = j.value("name", s.name);
    s.duration_ms = seconds_field(j, "duration_s", 60.0);
    if (s.duration_ms <= 0) fail("duration_s must be > 0");
    s.seed = j.value("seed", 0ull);
    s.acceleration = j.value("acceleration", 0.0);
    if (j.contains("start_epoch")) {
      auto ms = util::iso8601_to_epoch_ms(j["start_epoch"].get<std::string>());
      if (!ms) fail("start_epoch: not an ISO-8601 UTC timestamp");
      s.start_epoch_ms = *ms;
    }
    s.keepalive_period_ms = seconds_field(j, "keepalive_period_s", 10.0);
    s.liveness_timeout_ms = seconds_field(j, "liveness_timeout_s", 30.0);
    if (j.contains("duty_cycle")) {
      s.duty_cycle.sense_ms = seconds_field(j["duty_cycle"], "sense_s", 20.0);
      s.duty_cycle.break_ms = seconds_field(j["duty_cycle"], "break_s", 10.0);
      s.duty_cycle.compress_threshold_bytes =
          j["duty_cycle"].value("compress_threshold_bytes", s.duty_cycle.compress_threshold_bytes);
      if (s.duty_cycle.sense_ms <= 0) fail("duty_cycle.sense_s must be > 0");
    }

    if (j.contains("policy")) {
      s.policy.name = j["policy"].value("name", s.policy.name);
      s.policy.tick_period_ms = seconds_field(j["policy"], "tick_period_s", 5.0);
      if (s.policy.tick_period_ms <= 0) fail("policy.tick_period_s must be > 0");
      if (j["policy"].contains("params")) parse_policy_params(j["policy"]["params"], s.policy.params);
    }
    s.policy.params.window_ms = s.policy.params.window_ms > 0 ? s.policy.params.window_ms : 600'000;

    if (j.contains("sensor_table")) {
      for (const auto& tj : j["sensor_table"]) {
        cmd::SensorSpec spec;
        if (!tj.contains("name")) fail("sensor_table entries need a name");
        spec.name = tj["name"].get<std::string>();
        spec.max_frequency_hz = tj.value("max_frequency_hz", 1.0);
        spec.default_frequency_hz = tj.value("default_frequency_hz", 1.0);
        spec.bytes_per_sample = tj.value("bytes_per_sample", 150u);
        s.sensor_table.put(spec);
      }
    }

    if (j.contains("field")) {
      s.field.base = j["field"].value("base", s.field.base);
      if (j["field"].contains("plumes")) {
        for (const auto& pj : j["field"]["plumes"]) {
          Plume p;
          p.center = point_from(pj, "field.plumes");
          p.amplitude = pj.value("amplitude", 0.0);
          p.sigma_km = pj.value("sigma_km", 1.0);
          if (!(p.sigma_km > 0)) fail("field.plumes.sigma_km must be > 0");
          s.field.plumes.push_back(p);
        }
      }
    }

    if (j.contains("segments_file")) {
      const auto path =
          std::filesystem::path(origin_dir) / j["segments_file"].get<std::string>();
      s.segments = analytics::load_segments_csv(path.string());
    } else if (j.contains("segments")) {
      for (const auto& sj : j["segments"]) {
        analytics::RoadSegment seg;
        seg.id = sj.at("id").get<std::int64_t>();
        seg.start = {sj.at("start_lat").get<double>(), sj.at("start_lon").get<double>()};
        seg.end = {sj.at("end_lat").get<double>(), sj.at("end_lon").get<double>()};
        seg.free_flow_speed_kmh = sj.value("free_flow_kmh", 0.0);
        seg.length_km = haversine_km(seg.start, seg.end);
        if (seg.length_km <= 0) fail("segments: zero-length segment " + std::to_string(seg.id));
        s.segments.push_back(seg);
      }
    }

    if (j.contains("nodes")) {
      std::size_t i = 0;
      for (const auto& nj : j["nodes"]) s.nodes.push_back(parse_node(nj, i++));
    }
    for (std::size_t a = 0; a < s.nodes.size(); ++a)
      for (std::size_t b = a + 1; b < s.nodes.size(); ++b)
        if (s.nodes[a].imei == s.nodes[b].imei)
          fail("duplicate imei '" + s.nodes[a].imei + "'");

    // node-level keepalive default follows the scenario-level setting
    for (auto& n : s.nodes)
      if (!j["nodes"][static_cast<std::size_t>(&n - s.nodes.data())].contains(
              "keepalive_period_s"))
        n.keepalive_period_ms = s.keepalive_period_ms;

    return s;
  } catch (const json::exception& e) {
    fail(std::string("scenario schema error: ") + e.what());
  }
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), std::filesystem::path(path).parent_path().string());
}

}  // namespace music::sim
