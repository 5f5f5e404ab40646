#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "music/field.hpp"
#include "music/geo.hpp"

namespace music::analytics {

struct RoadSegment {
  std::int64_t id = 0;
  GeoPoint start;
  GeoPoint end;
  double length_km = 0.0;
  // 0 means "not configured": bootstrap from the 85th percentile of observed
  // window means.
  double free_flow_speed_kmh = 0.0;
};

struct SpeedWindow {
  std::int64_t window_start_ms = 0;
  double mean_speed_kmh = 0.0;
  int sample_count = 0;
};

struct SegmentSpeedSeries {
  std::int64_t segment_id = 0;
  std::int64_t window_ms = 600'000;
  std::vector<SpeedWindow> windows;  // ascending, non-empty windows only
};

struct TraceFix {
  std::string vehicle_id;
  std::int64_t timestamp_ms = 0;
  GeoPoint position;
};

struct HotspotFlag {
  std::int64_t segment_id = 0;
  bool flagged = false;
  // Window at which the sustained rule first fired in the current low run.
  std::optional<std::int64_t> set_at_window_ms;
};

inline constexpr double kDefaultSnapRadiusKm = 0.05;

// Nearest segment chord within the snap radius; ties go to the lower id.
std::optional<std::int64_t> map_to_segment(const GeoPoint& p,
                                           const std::vector<RoadSegment>& segments,
                                           double snap_radius_km = kDefaultSnapRadiusKm);

// Windowed mean speeds per segment. Consecutive fixes of one vehicle that map
// to the same segment contribute distance/dt to the window containing their
// midpoint time. Traces with non-monotone timestamps are rejected (reported in
// `rejected_vehicles` when provided); fixes are otherwise grouped by vehicle,
// so input order across vehicles does not matter.
std::map<std::int64_t, SegmentSpeedSeries> segment_speeds(
    const std::vector<TraceFix>& fixes, const std::vector<RoadSegment>& segments,
    std::int64_t window_ms, double snap_radius_km = kDefaultSnapRadiusKm,
    std::vector<std::string>* rejected_vehicles = nullptr);

// free_flow_speed when configured, else the 85th percentile (linear
// interpolation) of the observed window means.
double effective_free_flow_kmh(const RoadSegment& segment, const SegmentSpeedSeries& series);

// Sustained-drop rule: flag a segment iff its most recent k non-empty windows
// all have mean speed < alpha * free_flow.
std::vector<HotspotFlag> detect_hotspots(const std::vector<RoadSegment>& segments,
                                         const std::map<std::int64_t, SegmentSpeedSeries>& series,
                                         double alpha, int k);

// Peer-comparison variant for co-located sensor arrays: flag entry i iff
// |mean_i - median(means)| > 3 * MAD.
std::vector<bool> detect_reading_outliers(const std::vector<double>& means,
                                          double cutoff = 3.0);

// EWMA forecast over window means, newest observation weighted by lambda.
// Throws AnalyticsError on an empty series or lambda outside (0,1].
double forecast_ewma(const SegmentSpeedSeries& series, double lambda);
double forecast_ewma(const std::vector<double>& values, double lambda);

// --- file formats (External Interfaces) -------------------------------------

struct TraceParseResult {
  std::vector<TraceFix> fixes;
  std::vector<std::pair<std::size_t, std::string>> bad_rows;  // (line, reason)
};

// CSV header: timestamp_iso8601,vehicle_id,latitude,longitude
TraceParseResult load_trace_csv(const std::string& path);

// CSV header: id,start_lat,start_lon,end_lat,end_lon[,free_flow_kmh]
std::vector<RoadSegment> load_segments_csv(const std::string& path);

}  // namespace music::analytics
