#include "music/simulation.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "music/log.hpp"
#include "music/timeutil.hpp"

namespace music::sim {

// Cloud -> edge half of one connection epoch. A send fails once the link it
// belongs to was closed (the edge reconnects with a fresh generation).
class Simulation::SimCommandSink final : public ctrl::CommandSink {
 public:
  SimCommandSink(Simulation* sim, std::string imei, int generation)
      : sim_(sim), imei_(std::move(imei)), generation_(generation) {}

  bool send_frame(std::string_view frame) override {
    auto it = sim_->links_.find(imei_);
    if (it == sim_->links_.end() || !it->second->open ||
        it->second->generation != generation_)
      return false;
    auto* node = sim_->node(imei_);
    if (!node) return false;
    std::string copy(frame);
    sim_->scheduler_->schedule_at(sim_->scheduler_->now_ms(),
                                  [node, copy] { node->on_command_frame(copy); });
    return true;
  }

 private:
  Simulation* sim_;
  std::string imei_;
  int generation_;
};

Simulation::Simulation(Scenario scenario, Options options)
    : scenario_(std::move(scenario)), options_(std::move(options)) {
  if (options_.seed_override) scenario_.seed = *options_.seed_override;
  if (options_.accel_override) scenario_.acceleration = *options_.accel_override;

  scheduler_ = std::make_unique<SimScheduler>(scenario_.start_epoch_ms, scenario_.acceleration);

  ctrl::DataStore::Config store_cfg;
  if (options_.out_dir) {
    std::filesystem::create_directories(*options_.out_dir);
    store_cfg.dir = *options_.out_dir + "/data";
  }
  store_ = std::make_unique<ctrl::DataStore>(store_cfg);

  controller_ = std::make_unique<ctrl::ControllerCore>(
      ctrl::ControllerCore::Config{scenario_.keepalive_period_ms, scenario_.liveness_timeout_ms},
      store_.get());

  commands_ = std::make_unique<cmd::CommandScheduler>(controller_.get(), scheduler_.get(),
                                                      scenario_.sensor_table,
                                                      scenario_.duty_cycle);
  commands_->start();

  policy_ = policy::PolicyRegistry::instance().create(scenario_.policy.name);
  if (!policy_)
    throw ScenarioError("unknown policy '" + scenario_.policy.name + "'");

  loop_ = std::make_unique<policy::PolicyLoop>(
      policy_.get(), commands_.get(), scheduler_.get(), scenario_.policy.tick_period_ms,
      [this](std::int64_t now) {
        return policy::build_policy_context(*controller_, *store_, scenario_.sensor_table,
                                            scenario_.policy.params, scenario_.segments, now);
      });
  loop_->set_tick_observer(
      [this](const policy::PolicyContext& ctx, const cmd::SensingPolicy& next,
             const cmd::CompileResult& batch) { on_policy_tick(ctx, next, batch); });

  controller_->set_command_observer([this](const std::string& imei, const wire::CommandMsg& cmd,
                                           std::size_t bytes, std::int64_t now) {
    auto& m = report_.nodes[imei];
    m.commands[std::string(wire::to_string(cmd.type))]++;
    m.downlink_bytes += bytes;
    report_.commands.push_back({now, imei, std::string(wire::to_string(cmd.type))});
  });

  // shift scenario-relative node times onto the epoch-based clock
  const std::int64_t epoch = scenario_.start_epoch_ms;
  for (auto node_cfg : scenario_.nodes) {
    for (auto& w : node_cfg.waypoints) w.t_ms += epoch;
    for (auto& m : node_cfg.keepalive_mutes) {
      m.from_ms += epoch;
      m.to_ms += epoch;
    }
    for (auto& c : node_cfg.churn_at_ms) c += epoch;
    for (const auto& s : node_cfg.sensors)
      if (s.record_bytes_target > 0)
        report_.record_bytes_targets[cmd::SensorTable::normalize(s.name)] =
            s.record_bytes_target;
    const std::string imei = node_cfg.imei;
    nodes_[imei] =
        std::make_unique<EdgeNode>(std::move(node_cfg), this, scenario_.seed, &scenario_.field);
  }

  report_.scenario_name = scenario_.name;
  report_.policy_name = scenario_.policy.name;
  report_.seed = scenario_.seed;
  report_.start_epoch_ms = epoch;
  report_.duration_ms = scenario_.duration_ms;
  report_.acceleration = scenario_.acceleration;
}

Simulation::~Simulation() = default;

EdgeNode* Simulation::node(const std::string& imei) {
  auto it = nodes_.find(imei);
  return it == nodes_.end() ? nullptr : it->second.get();
}

std::string Simulation::open_connections(EdgeNode& node) {
  auto& link_slot = links_[node.imei()];
  const int generation = (link_slot ? link_slot->generation : 0) + 1;
  auto link = std::make_shared<Link>();
  link->generation = generation;

  int index = 1;
  for (const auto& [imei, _] : nodes_) {
    if (imei == node.imei()) break;
    ++index;
  }
  link->addr = "10.0." + std::to_string(index) + "." + std::to_string(generation & 0xff) + ":" +
               std::to_string(40000 + generation);
  link->open = true;
  link_slot = link;

  controller_->bind_command_channel(
      node.imei(), std::make_shared<SimCommandSink>(this, node.imei(), generation));
  commands_->on_node_event(node.imei());
  return link->addr;
}

void Simulation::close_connections(EdgeNode& node) {
  auto it = links_.find(node.imei());
  if (it != links_.end() && it->second) it->second->open = false;
}

bool Simulation::connections_open(const EdgeNode& node) const {
  auto it = links_.find(node.imei());
  return it != links_.end() && it->second && it->second->open;
}

void Simulation::uplink(EdgeNode& node, std::string_view frame) {
  auto it = links_.find(node.imei());
  if (it == links_.end() || !it->second || !it->second->open) return;
  const std::string imei = node.imei();
  const int generation = it->second->generation;
  std::string chunk(frame);
  scheduler_->schedule_at(scheduler_->now_ms(), [this, imei, generation, chunk] {
    route_uplink(imei, generation, chunk);
  });
}

void Simulation::route_uplink(const std::string& imei, int generation, const std::string& chunk) {
  // bytes sent on a connection are delivered even if it closed meanwhile
  auto lit = links_.find(imei);
  if (lit == links_.end() || !lit->second) return;
  auto link = lit->second;

  const std::int64_t now = scheduler_->now_ms();
  auto& metrics = report_.nodes[imei];
  metrics.uplink_bytes += chunk.size();

  std::vector<std::string> frames;
  try {
    frames = link->splitter.push(chunk);
  } catch (const wire::FrameTooLargeError& e) {
    MUSIC_LOG_ERROR("uplink from %s: %s", imei.c_str(), e.what());
    return;
  }

  for (const auto& f : frames) {
    wire::Message msg;
    try {
      msg = wire::decode(f);
    } catch (const wire::WireError& e) {
      MUSIC_LOG_WARN("uplink from %s: dropping frame: %s", imei.c_str(), e.what());
      continue;
    }

    if (const auto* ka = std::get_if<wire::KeepAliveMsg>(&msg)) {
      auto before = controller_->node(ka->imei);
      const bool was_dead = before && !before->alive;
      controller_->on_keepalive(*ka, link->addr, now);
      if (was_dead) report_.life_events.push_back({now, ka->imei, "revived"});
      metrics.messages["keepalive"]++;
      commands_->on_node_event(ka->imei);
      continue;
    }

    metrics.data_bytes += f.size();
    if (std::holds_alternative<wire::SensorDataMsg>(msg)) {
      metrics.messages["sensor_data"]++;
      const auto& data = std::get<wire::SensorDataMsg>(msg);
      for (const auto& [_, sessions] : data.sensor_data)
        for (const auto& s : sessions) metrics.samples_received += s.records.size();
    } else if (std::holds_alternative<wire::ImageDataMsg>(msg)) {
      metrics.messages["image"]++;
    }
    const auto result = controller_->on_data(msg, now, f);
    if (result.session_completed) metrics.sessions_completed++;
  }
}

void Simulation::on_policy_tick(const policy::PolicyContext& ctx, const cmd::SensingPolicy& next,
                                const cmd::CompileResult& batch) {
  (void)batch;
  report_.policy_ticks++;

  for (const auto& [imei, d] : next.directives) {
    report::DirectiveRow row;
    row.t_ms = ctx.tick_ms;
    row.policy_id = next.policy_id;
    row.imei = imei;
    row.active = d.active;
    row.frequency_hz = d.sensors.empty() ? 0.0 : d.sensors.front().frequency_hz;
    row.capture = d.capture_image;
    report_.directives.push_back(std::move(row));
  }

  if (scenario_.policy.name == "spatial_coverage") {
    std::string sensor = "air_quality";
    if (!ctx.params.sensing_sensors.empty()) sensor = ctx.params.sensing_sensors.begin()->first;
    const auto readings = policy::coverage_readings(ctx, sensor);
    if (readings.size() >= 2) {
      try {
        report_.coverage_rmse.emplace_back(
            ctx.tick_ms, analytics::loocv_error(readings, ctx.params.idw_power));
      } catch (const analytics::AnalyticsError&) {
        // duplicated sites etc: no rmse sample this tick
      }
    }
  }

  if (scenario_.policy.name == "hotspot" && !ctx.segments.empty()) {
    std::vector<analytics::TraceFix> fixes;
    for (const auto& [_, w] : ctx.windows)
      fixes.insert(fixes.end(), w.gps_fixes.begin(), w.gps_fixes.end());
    const auto series = analytics::segment_speeds(fixes, ctx.segments, ctx.params.window_ms);
    const auto flags =
        analytics::detect_hotspots(ctx.segments, series, ctx.params.alpha, ctx.params.k);
    for (const auto& flag : flags)
      report_.flag_timeline.push_back({ctx.tick_ms, flag.segment_id, flag.flagged});
  }

  if (tick_probe_) tick_probe_(ctx, next);
}

policy::PolicyContext Simulation::full_context(std::int64_t now_ms) {
  policy::PolicyParams params = scenario_.policy.params;
  params.data_window_ms = 0;  // everything
  return policy::build_policy_context(*controller_, *store_, scenario_.sensor_table, params,
                                      scenario_.segments, now_ms);
}

report::MetricsReport Simulation::run() {
  if (ran_) throw std::logic_error("Simulation::run called twice");
  ran_ = true;

  const std::int64_t end = scenario_.start_epoch_ms + scenario_.duration_ms;

  for (auto& [_, node] : nodes_) {
    EdgeNode* n = node.get();
    scheduler_->schedule_at(scenario_.start_epoch_ms, [n] { n->start(); });
  }
  scheduler_->schedule_at(scenario_.start_epoch_ms + 1000, [this] { housekeeping(); });
  loop_->start();

  scheduler_->run_until(end);
  loop_->stop();

  finalize_report();
  if (options_.out_dir) {
    report_.write_files(*options_.out_dir);
    export_traces();
    store_->flush();
  }
  return report_;
}

void Simulation::housekeeping() {
  const std::int64_t now = scheduler_->now_ms();
  for (const auto& imei : controller_->liveness_sweep(now))
    report_.life_events.push_back({now, imei, "dead"});
  commands_->retry_tick();
  scheduler_->schedule_at(now + 1000, [this] { housekeeping(); });
}

void Simulation::finalize_report() {
  const std::int64_t end = scheduler_->now_ms();
  for (auto& [imei, node] : nodes_) {
    node->finalize(end);
    auto& m = report_.nodes[imei];
    const NodeCounters& c = node->counters();
    m.emitted_bytes = c.tx_bytes;
    m.samples_generated = c.samples_generated;
    m.samples_delivered = c.samples_delivered;
    m.samples_buffered = c.samples_buffered;
    m.battery_end_pct = node->battery_pct();
  }
  for (const auto& [imei, count] : commands_->long_sessions())
    report_.nodes[imei].long_sessions = count;
  report_.quarantined = store_->quarantine_count();

  if (!scenario_.segments.empty()) {
    auto ctx = full_context(end);
    std::vector<analytics::TraceFix> fixes;
    for (const auto& [_, w] : ctx.windows)
      fixes.insert(fixes.end(), w.gps_fixes.begin(), w.gps_fixes.end());
    const auto series =
        analytics::segment_speeds(fixes, scenario_.segments, scenario_.policy.params.window_ms);
    report_.final_flags = analytics::detect_hotspots(scenario_.segments, series,
                                                     scenario_.policy.params.alpha,
                                                     scenario_.policy.params.k);
  }
}

void Simulation::export_traces() {
  auto ctx = full_context(scheduler_->now_ms());

  std::vector<analytics::TraceFix> fixes;
  for (const auto& [_, w] : ctx.windows)
    fixes.insert(fixes.end(), w.gps_fixes.begin(), w.gps_fixes.end());
  std::stable_sort(fixes.begin(), fixes.end(), [](const auto& a, const auto& b) {
    if (a.vehicle_id != b.vehicle_id) return a.vehicle_id < b.vehicle_id;
    return a.timestamp_ms < b.timestamp_ms;
  });

  {
    std::ofstream f(*options_.out_dir + "/gps_trace.csv");
    f << "timestamp_iso8601,vehicle_id,latitude,longitude\n";
    char buf[64];
    for (const auto& fix : fixes) {
      std::snprintf(buf, sizeof buf, "%.7f,%.7f", fix.position.latitude,
                    fix.position.longitude);
      f << util::epoch_ms_to_iso8601(fix.timestamp_ms) << ',' << fix.vehicle_id << ',' << buf
        << '\n';
    }
  }

  if (!scenario_.segments.empty()) {
    const auto series =
        analytics::segment_speeds(fixes, scenario_.segments, scenario_.policy.params.window_ms);
    std::ofstream f(*options_.out_dir + "/segment_speeds.csv");
    f << "segment_id,window_start_iso8601,mean_speed_kmh,sample_count\n";
    char buf[32];
    for (const auto& [seg_id, s] : series) {
      for (const auto& w : s.windows) {
        std::snprintf(buf, sizeof buf, "%.4f", w.mean_speed_kmh);
        f << seg_id << ',' << util::epoch_ms_to_iso8601(w.window_start_ms) << ',' << buf << ','
          << w.sample_count << '\n';
      }
    }
  }
}

}  // namespace music::sim
