#include "music/policy.hpp"

#include <algorithm>
#include <cmath>

#include "music/detector.hpp"
#include "music/log.hpp"

namespace music::policy {

PolicyRegistry& PolicyRegistry::instance() {
  static PolicyRegistry registry;
  return registry;
}

void PolicyRegistry::register_policy(const std::string& name, PolicyFactory factory) {
  factories_[name] = std::move(factory);
}

std::unique_ptr<Policy> PolicyRegistry::create(const std::string& name) const {
  auto it = factories_.find(name);
  if (it == factories_.end()) return nullptr;
  return it->second();
}

std::vector<std::string> PolicyRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : factories_) out.push_back(name);
  return out;
}

std::vector<wire::SensorStartEntry> sensing_entries(const PolicyParams& params,
                                                    const ctrl::NodeRecord& node,
                                                    const cmd::SensorTable& table) {
  std::vector<wire::SensorStartEntry> entries;
  if (params.sensing_sensors.empty()) return cmd::default_directive(node, table).sensors;
  for (const auto& advertised : node.sensors) {
    const std::string norm = cmd::SensorTable::normalize(advertised);
    for (const auto& [want, hz] : params.sensing_sensors) {
      if (cmd::SensorTable::normalize(want) == norm) {
        entries.push_back({advertised, hz});
        break;
      }
    }
  }
  return entries;
}

std::vector<analytics::Reading> coverage_readings(const PolicyContext& ctx,
                                                  const std::string& sensor) {
  const std::string norm = cmd::SensorTable::normalize(sensor);
  std::vector<analytics::Reading> readings;
  for (const auto& node : ctx.snapshot.nodes) {
    auto wit = ctx.windows.find(node->imei);
    if (wit == ctx.windows.end()) continue;
    auto rit = wit->second.readings.find(norm);
    if (rit == wit->second.readings.end() || rit->second.empty()) continue;
    double sum = 0.0;
    for (const auto& [_, v] : rit->second) sum += v;
    readings.push_back({node->location, sum / static_cast<double>(rit->second.size())});
  }
  return readings;
}

namespace {

// ---------------------------------------------------------------------------
// always_on: every alive node sensing, no adaptation. The byte-accounting
// baseline the adaptive policies are measured against.
// ---------------------------------------------------------------------------
class AlwaysOnPolicy final : public Policy {
 public:
  std::string_view name() const override { return "always_on"; }

  cmd::SensingPolicy tick(const PolicyContext& ctx) override {
    cmd::SensingPolicy out;
    for (const auto& node : ctx.snapshot.nodes) {
      if (!node->alive) continue;
      cmd::Directive d;
      d.active = true;
      d.sensors = sensing_entries(ctx.params, *node, ctx.sensor_table);
      out.directives[node->imei] = std::move(d);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// spatial_coverage: keep active sensors >= separation_km apart. Conflicts are
// resolved greedily per edge in ascending (imei,imei) order by deactivating
// the lower-battery endpoint (tie: lexicographically larger imei). Nodes
// below the battery floor are always deactivated; nodes whose conflicts have
// cleared are reactivated.
// ---------------------------------------------------------------------------
class SpatialCoveragePolicy final : public Policy {
 public:
  std::string_view name() const override { return "spatial_coverage"; }

  cmd::SensingPolicy tick(const PolicyContext& ctx) override {
    std::vector<const ctrl::NodeRecord*> alive;
    for (const auto& node : ctx.snapshot.nodes)
      if (node->alive) alive.push_back(node.get());

    std::map<std::string, bool> active;
    for (const auto* n : alive)
      active[n->imei] = static_cast<double>(n->battery) >= ctx.params.battery_floor_pct;

    // conflict edges in ascending pair order (nodes arrive sorted by imei)
    for (std::size_t i = 0; i < alive.size(); ++i) {
      for (std::size_t j = i + 1; j < alive.size(); ++j) {
        const auto* a = alive[i];
        const auto* b = alive[j];
        if (!active[a->imei] || !active[b->imei]) continue;
        if (haversine_km(a->location, b->location) >= ctx.params.separation_km) continue;
        const ctrl::NodeRecord* loser;
        if (a->battery != b->battery)
          loser = a->battery < b->battery ? a : b;
        else
          loser = a->imei > b->imei ? a : b;
        active[loser->imei] = false;
      }
    }

    cmd::SensingPolicy out;
    for (const auto* n : alive) {
      cmd::Directive d;
      d.active = active[n->imei];
      if (d.active) d.sensors = sensing_entries(ctx.params, *n, ctx.sensor_table);
      out.directives[n->imei] = std::move(d);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// hotspot: windowed segment speeds from the fleet's GPS fixes. Frequencies
// fall toward f_min as the forecast approaches free flow and hit f_max on
// flagged segments; very low forecasts trigger the camera.
// ---------------------------------------------------------------------------
class HotspotPolicy final : public Policy {
 public:
  std::string_view name() const override { return "hotspot"; }

  cmd::SensingPolicy tick(const PolicyContext& ctx) override {
    if (ctx.params.hotspot_mode == "sensor_outlier") return outlier_tick(ctx);
    if (ctx.segments.empty())
      throw cmd::CommandError("hotspot policy requires a segment table");

    std::vector<analytics::TraceFix> fixes;
    for (const auto& [_, w] : ctx.windows)
      fixes.insert(fixes.end(), w.gps_fixes.begin(), w.gps_fixes.end());

    // Full series (with the in-progress window) drives flag detection; only
    // completed windows feed forecasts so frequencies stay put within a window.
    const auto full = analytics::segment_speeds(fixes, ctx.segments, ctx.params.window_ms);
    std::map<std::int64_t, analytics::SegmentSpeedSeries> completed;
    for (const auto& [id, series] : full) {
      analytics::SegmentSpeedSeries c;
      c.segment_id = id;
      c.window_ms = series.window_ms;
      for (const auto& w : series.windows)
        if (w.window_start_ms + series.window_ms <= ctx.tick_ms) c.windows.push_back(w);
      if (!c.windows.empty()) completed[id] = std::move(c);
    }

    const auto flags = analytics::detect_hotspots(ctx.segments, full, ctx.params.alpha,
                                                  ctx.params.k);
    std::map<std::int64_t, bool> flagged;
    for (const auto& f : flags) flagged[f.segment_id] = f.flagged;

    cmd::SensingPolicy out;
    for (const auto& node : ctx.snapshot.nodes) {
      if (!node->alive) continue;
      cmd::Directive d;
      d.active = true;
      double f = ctx.params.f_max_hz;  // sense eagerly until the segment is understood

      const auto seg_id = analytics::map_to_segment(node->location, ctx.segments);
      if (seg_id) {
        const analytics::RoadSegment* seg = nullptr;
        for (const auto& s : ctx.segments)
          if (s.id == *seg_id) seg = &s;
        auto cit = completed.find(*seg_id);
        if (seg && cit != completed.end()) {
          const double free_flow = analytics::effective_free_flow_kmh(*seg, cit->second);
          if (free_flow > 0.0) {
            const double forecast = analytics::forecast_ewma(cit->second, ctx.params.lambda);
            const double span = ctx.params.f_max_hz - ctx.params.f_min_hz;
            f = ctx.params.f_min_hz + span * std::max(0.0, 1.0 - forecast / free_flow);
            f = std::clamp(f, ctx.params.f_min_hz, ctx.params.f_max_hz);
            d.capture_image = forecast < ctx.params.camera_speed_fraction * free_flow;
            if (ctx.params.deactivate_free_flow && sustained_free_flow(cit->second, free_flow, ctx))
              d.active = false;
          }
        }
        if (flagged[*seg_id]) f = ctx.params.f_max_hz;
      }

      f = std::round(f * 1000.0) / 1000.0;  // stable commands between windows
      d.sensors = sensing_entries(ctx.params, *node, ctx.sensor_table);
      for (auto& e : d.sensors) e.frequency_hz = f;
      if (!d.active) d.sensors.clear();
      out.directives[node->imei] = std::move(d);
    }
    return out;
  }

 private:
  bool sustained_free_flow(const analytics::SegmentSpeedSeries& series, double free_flow,
                           const PolicyContext& ctx) const {
    if (static_cast<int>(series.windows.size()) < ctx.params.k) return false;
    for (int i = 0; i < ctx.params.k; ++i) {
      const auto& w = series.windows[series.windows.size() - 1 - static_cast<std::size_t>(i)];
      if (w.mean_speed_kmh < ctx.params.free_flow_fraction * free_flow) return false;
    }
    return true;
  }

  // Peer-comparison variant: a node whose mean reading is a robust outlier
  // among the fleet gets f_max.
  cmd::SensingPolicy outlier_tick(const PolicyContext& ctx) {
    std::string sensor = "air_quality";
    if (!ctx.params.sensing_sensors.empty()) sensor = ctx.params.sensing_sensors.begin()->first;
    const auto readings = coverage_readings(ctx, sensor);

    // means in snapshot (imei-sorted) order to line up with flags
    std::vector<std::string> with_data;
    std::vector<double> means;
    const std::string norm = cmd::SensorTable::normalize(sensor);
    for (const auto& node : ctx.snapshot.nodes) {
      auto wit = ctx.windows.find(node->imei);
      if (wit == ctx.windows.end()) continue;
      auto rit = wit->second.readings.find(norm);
      if (rit == wit->second.readings.end() || rit->second.empty()) continue;
      double sum = 0.0;
      for (const auto& [_, v] : rit->second) sum += v;
      with_data.push_back(node->imei);
      means.push_back(sum / static_cast<double>(rit->second.size()));
    }
    const auto outliers = analytics::detect_reading_outliers(means, ctx.params.outlier_cutoff);
    std::map<std::string, bool> is_outlier;
    for (std::size_t i = 0; i < with_data.size(); ++i) is_outlier[with_data[i]] = outliers[i];

    cmd::SensingPolicy out;
    for (const auto& node : ctx.snapshot.nodes) {
      if (!node->alive) continue;
      cmd::Directive d;
      d.active = true;
      const double f = is_outlier[node->imei] ? ctx.params.f_max_hz : ctx.params.f_min_hz;
      d.sensors = sensing_entries(ctx.params, *node, ctx.sensor_table);
      for (auto& e : d.sensors) e.frequency_hz = f;
      out.directives[node->imei] = std::move(d);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// cleanliness: periodic CAPTURE_IMAGE; when the detector reports more dirt
// than the threshold, the configured auxiliary sensors join the node's
// sensing set. A detector failure keeps the node's previous directive.
// ---------------------------------------------------------------------------
class CleanlinessPolicy final : public Policy {
 public:
  explicit CleanlinessPolicy(DirtDetector detector) : detector_(std::move(detector)) {}

  std::string_view name() const override { return "cleanliness"; }

  cmd::SensingPolicy tick(const PolicyContext& ctx) override {
    cmd::SensingPolicy out;
    for (const auto& node : ctx.snapshot.nodes) {
      if (!node->alive) continue;
      cmd::Directive d;
      d.active = true;
      d.sensors = sensing_entries(ctx.params, *node, ctx.sensor_table);

      auto wit = ctx.windows.find(node->imei);
      const auto* image = (wit != ctx.windows.end() && wit->second.latest_image)
                              ? &*wit->second.latest_image
                              : nullptr;
      if (!image || ctx.tick_ms - image->first >= ctx.params.image_period_ms) {
        d.capture_image = true;  // stale or missing imagery: ask for a frame
        if (auto last = last_.find(node->imei); last != last_.end()) {
          d.sensors = last->second.sensors;  // keep whatever the last verdict set
          d.active = last->second.active;
        }
      } else {
        try {
          const double dirt = detector_(image->second);
          if (dirt > ctx.params.dirt_threshold)
            add_auxiliary(d, *node, ctx);
        } catch (const DetectorError& e) {
          MUSIC_LOG_WARN("detector failed for %s: %s", node->imei.c_str(), e.what());
          if (auto last = last_.find(node->imei); last != last_.end()) d = last->second;
        }
      }
      last_[node->imei] = d;
      out.directives[node->imei] = std::move(d);
    }
    return out;
  }

 private:
  void add_auxiliary(cmd::Directive& d, const ctrl::NodeRecord& node, const PolicyContext& ctx) {
    for (const auto& aux : ctx.params.auxiliary_sensors) {
      const auto* spec = ctx.sensor_table.find(aux);
      if (!spec) {
        MUSIC_LOG_WARN("auxiliary sensor '%s' not in table", aux.c_str());
        continue;
      }
      const std::string norm = cmd::SensorTable::normalize(aux);
      bool present = false;
      for (const auto& e : d.sensors)
        if (cmd::SensorTable::normalize(e.name) == norm) present = true;
      if (present) continue;
      // use the node's advertised spelling when it has one
      std::string name = aux;
      for (const auto& adv : node.sensors)
        if (cmd::SensorTable::normalize(adv) == norm) name = adv;
      d.sensors.push_back({name, spec->default_frequency_hz});
    }
  }

  DirtDetector detector_;
  std::map<std::string, cmd::Directive> last_;
};

struct BuiltinRegistrar {
  BuiltinRegistrar() {
    auto& r = PolicyRegistry::instance();
    r.register_policy("always_on", make_always_on);
    r.register_policy("default", make_always_on);
    r.register_policy("spatial_coverage", make_spatial_coverage);
    r.register_policy("hotspot", make_hotspot);
    r.register_policy("cleanliness", make_cleanliness);
  }
};
const BuiltinRegistrar registrar;

}  // namespace

std::unique_ptr<Policy> make_always_on() { return std::make_unique<AlwaysOnPolicy>(); }
std::unique_ptr<Policy> make_spatial_coverage() { return std::make_unique<SpatialCoveragePolicy>(); }
std::unique_ptr<Policy> make_hotspot() { return std::make_unique<HotspotPolicy>(); }
std::unique_ptr<Policy> make_cleanliness() {
  return std::make_unique<CleanlinessPolicy>(luminance_dirt_detector);
}

}  // namespace music::policy
