#include "music/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "music/csv.hpp"
#include "music/timeutil.hpp"

namespace music::analytics {

std::optional<std::int64_t> map_to_segment(const GeoPoint& p,
                                           const std::vector<RoadSegment>& segments,
                                           double snap_radius_km) {
  std::optional<std::int64_t> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& seg : segments) {
    const double d = point_to_chord_km(p, seg.start, seg.end);
    if (d > snap_radius_km) continue;
    if (d < best_d || (d == best_d && best && seg.id < *best)) {
      best_d = d;
      best = seg.id;
    }
  }
  return best;
}

std::map<std::int64_t, SegmentSpeedSeries> segment_speeds(
    const std::vector<TraceFix>& fixes, const std::vector<RoadSegment>& segments,
    std::int64_t window_ms, double snap_radius_km,
    std::vector<std::string>* rejected_vehicles) {
  if (window_ms <= 0) throw AnalyticsError("window must be > 0");

  std::map<std::string, std::vector<const TraceFix*>> by_vehicle;
  for (const auto& f : fixes) by_vehicle[f.vehicle_id].push_back(&f);

  // window start -> (sum, count), per segment
  std::map<std::int64_t, std::map<std::int64_t, std::pair<double, int>>> acc;

  for (auto& [vehicle, vfixes] : by_vehicle) {
    bool monotone = true;
    for (std::size_t i = 1; i < vfixes.size(); ++i)
      if (vfixes[i]->timestamp_ms <= vfixes[i - 1]->timestamp_ms) {
        monotone = false;
        break;
      }
    if (!monotone) {
      if (rejected_vehicles) rejected_vehicles->push_back(vehicle);
      continue;
    }
    for (std::size_t i = 1; i < vfixes.size(); ++i) {
      const TraceFix& a = *vfixes[i - 1];
      const TraceFix& b = *vfixes[i];
      const auto seg_a = map_to_segment(a.position, segments, snap_radius_km);
      const auto seg_b = map_to_segment(b.position, segments, snap_radius_km);
      if (!seg_a || !seg_b || *seg_a != *seg_b) continue;
      const double dt_h = static_cast<double>(b.timestamp_ms - a.timestamp_ms) / 3.6e6;
      if (dt_h <= 0.0) continue;
      const double speed = haversine_km(a.position, b.position) / dt_h;
      const std::int64_t mid = a.timestamp_ms + (b.timestamp_ms - a.timestamp_ms) / 2;
      std::int64_t w = mid / window_ms;
      if (mid < 0 && mid % window_ms != 0) --w;  // floor for negative times
      auto& cell = acc[*seg_a][w * window_ms];
      cell.first += speed;
      cell.second += 1;
    }
  }

  std::map<std::int64_t, SegmentSpeedSeries> out;
  for (const auto& [seg_id, windows] : acc) {
    SegmentSpeedSeries series;
    series.segment_id = seg_id;
    series.window_ms = window_ms;
    for (const auto& [wstart, cell] : windows)
      series.windows.push_back({wstart, cell.first / cell.second, cell.second});
    out[seg_id] = std::move(series);
  }
  return out;
}

double effective_free_flow_kmh(const RoadSegment& segment, const SegmentSpeedSeries& series) {
  if (segment.free_flow_speed_kmh > 0.0) return segment.free_flow_speed_kmh;
  if (series.windows.empty()) return 0.0;
  std::vector<double> means;
  means.reserve(series.windows.size());
  for (const auto& w : series.windows) means.push_back(w.mean_speed_kmh);
  std::sort(means.begin(), means.end());
  const double rank = 0.85 * static_cast<double>(means.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(rank);
  const std::size_t hi = std::min(lo + 1, means.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return means[lo] + (means[hi] - means[lo]) * frac;
}

std::vector<HotspotFlag> detect_hotspots(const std::vector<RoadSegment>& segments,
                                         const std::map<std::int64_t, SegmentSpeedSeries>& series,
                                         double alpha, int k) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw AnalyticsError("alpha must be in (0,1)");
  if (k < 1) throw AnalyticsError("k must be >= 1");
  std::vector<HotspotFlag> flags;
  flags.reserve(segments.size());
  for (const auto& seg : segments) {
    HotspotFlag flag;
    flag.segment_id = seg.id;
    auto it = series.find(seg.id);
    if (it != series.end()) {
      const auto& windows = it->second.windows;
      const double threshold = alpha * effective_free_flow_kmh(seg, it->second);
      // length of the trailing run of low windows, and where the rule first fired
      int run = 0;
      for (auto w = windows.rbegin(); w != windows.rend(); ++w) {
        if (w->mean_speed_kmh < threshold)
          ++run;
        else
          break;
      }
      if (threshold > 0.0 && run >= k) {
        flag.flagged = true;
        // k-th window of the current run, counted from the run's start
        flag.set_at_window_ms = windows[windows.size() - run + k - 1].window_start_ms;
      }
    }
    flags.push_back(flag);
  }
  return flags;
}

std::vector<bool> detect_reading_outliers(const std::vector<double>& means, double cutoff) {
  std::vector<bool> out(means.size(), false);
  if (means.size() < 2) return out;
  auto median_of = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];  // lower median
  };
  const double med = median_of(means);
  std::vector<double> dev;
  dev.reserve(means.size());
  for (double m : means) dev.push_back(std::fabs(m - med));
  const double mad = median_of(dev);
  for (std::size_t i = 0; i < means.size(); ++i)
    out[i] = std::fabs(means[i] - med) > cutoff * mad;
  return out;
}

double forecast_ewma(const std::vector<double>& values, double lambda) {
  if (values.empty()) throw AnalyticsError("no data for forecast");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw AnalyticsError("lambda must be in (0,1]");
  double s = values.front();
  for (std::size_t i = 1; i < values.size(); ++i) s = lambda * values[i] + (1.0 - lambda) * s;
  return s;
}

double forecast_ewma(const SegmentSpeedSeries& series, double lambda) {
  std::vector<double> means;
  means.reserve(series.windows.size());
  for (const auto& w : series.windows) means.push_back(w.mean_speed_kmh);
  return forecast_ewma(means, lambda);
}

TraceParseResult load_trace_csv(const std::string& path) {
  const util::CsvFile csv = util::read_csv(path);
  TraceParseResult result;
  const std::vector<std::string> expected{"timestamp_iso8601", "vehicle_id", "latitude",
                                          "longitude"};
  if (csv.header != expected)
    throw AnalyticsError("trace csv: expected header timestamp_iso8601,vehicle_id,latitude,longitude");
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const auto& row = csv.rows[i];
    const std::size_t line = csv.row_lines[i];
    if (row.size() != 4) {
      result.bad_rows.emplace_back(line, "expected 4 fields");
      continue;
    }
    auto ts = util::iso8601_to_epoch_ms(row[0]);
    if (!ts) {
      result.bad_rows.emplace_back(line, "bad timestamp '" + row[0] + "'");
      continue;
    }
    TraceFix fix;
    fix.timestamp_ms = *ts;
    fix.vehicle_id = row[1];
    try {
      fix.position.latitude = std::stod(row[2]);
      fix.position.longitude = std::stod(row[3]);
    } catch (const std::exception&) {
      result.bad_rows.emplace_back(line, "bad coordinate");
      continue;
    }
    if (fix.vehicle_id.empty() || !valid_geo(fix.position)) {
      result.bad_rows.emplace_back(line, "invalid field value");
      continue;
    }
    result.fixes.push_back(std::move(fix));
  }
  return result;
}

std::vector<RoadSegment> load_segments_csv(const std::string& path) {
  const util::CsvFile csv = util::read_csv(path);
  if (csv.header.size() < 5 || csv.header[0] != "id")
    throw AnalyticsError("segments csv: expected header id,start_lat,start_lon,end_lat,end_lon[,free_flow_kmh]");
  std::vector<RoadSegment> segments;
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const auto& row = csv.rows[i];
    if (row.size() < 5)
      throw AnalyticsError("segments csv line " + std::to_string(csv.row_lines[i]) +
                           ": expected at least 5 fields");
    try {
      RoadSegment seg;
      seg.id = std::stoll(row[0]);
      seg.start = {std::stod(row[1]), std::stod(row[2])};
      seg.end = {std::stod(row[3]), std::stod(row[4])};
      if (row.size() >= 6 && !row[5].empty()) seg.free_flow_speed_kmh = std::stod(row[5]);
      seg.length_km = haversine_km(seg.start, seg.end);
      if (!valid_geo(seg.start) || !valid_geo(seg.end) || seg.length_km <= 0.0)
        throw AnalyticsError("degenerate segment");
      segments.push_back(seg);
    } catch (const AnalyticsError&) {
      throw;
    } catch (const std::exception&) {
      throw AnalyticsError("segments csv line " + std::to_string(csv.row_lines[i]) +
                           ": bad field value");
    }
  }
  return segments;
}

}  // namespace music::analytics
