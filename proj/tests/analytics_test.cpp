#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "music/field.hpp"
#include "music/geo.hpp"
#include "music/traffic.hpp"

using namespace music;
using namespace music::analytics;

namespace {

// Independent reference: spherical distance via the atan2 form, different
// algebra from the haversine under test.
double reference_distance_km(const GeoPoint& a, const GeoPoint& b) {
  const double d2r = 3.14159265358979323846 / 180.0;
  const double la1 = a.latitude * d2r, la2 = b.latitude * d2r;
  const double dlo = (b.longitude - a.longitude) * d2r;
  const double y = std::sqrt(std::pow(std::cos(la2) * std::sin(dlo), 2) +
                             std::pow(std::cos(la1) * std::sin(la2) -
                                          std::sin(la1) * std::cos(la2) * std::cos(dlo),
                                      2));
  const double x =
      std::sin(la1) * std::sin(la2) + std::cos(la1) * std::cos(la2) * std::cos(dlo);
  return kEarthRadiusKm * std::atan2(y, x);
}

// Brute-force hold-out predictor used as the LOOCV oracle.
double oracle_idw(const GeoPoint& at, const std::vector<Reading>& readings, double p) {
  double num = 0, den = 0;
  for (const auto& r : readings) {
    const double d = haversine_km(at, r.location);
    if (d == 0.0) return r.value;
    num += r.value / std::pow(d, p);
    den += 1.0 / std::pow(d, p);
  }
  return num / den;
}

std::mt19937_64 rng(424242);

GeoPoint random_point() {
  std::uniform_real_distribution<double> lat(-89.0, 89.0);
  std::uniform_real_distribution<double> lon(-180.0, 180.0);
  return {lat(rng), lon(rng)};
}

}  // namespace

TEST_CASE("haversine identity, antipode, and the fixed Delhi pair") {
  const GeoPoint a{28.5472, 77.1928};
  CHECK(haversine_km(a, a) == 0.0);

  // half the equator: pi * R
  CHECK(haversine_km({0, 0}, {0, 180}) == doctest::Approx(20015.086796).epsilon(1e-9));

  // value frozen from two independent reference implementations
  const GeoPoint b{28.5449, 77.2001};
  CHECK(haversine_km(a, b) == doctest::Approx(0.757522060).epsilon(1e-6));
}

TEST_CASE("haversine matches the independent reference on random pairs") {
  for (int i = 0; i < 1000; ++i) {
    const GeoPoint a = random_point();
    const GeoPoint b = random_point();
    const double ours = haversine_km(a, b);
    const double ref = reference_distance_km(a, b);
    if (ref > 1e-9)
      CHECK(std::fabs(ours - ref) / ref <= 1e-6);
    else
      CHECK(std::fabs(ours - ref) <= 1e-9);
  }
}

TEST_CASE("haversine symmetry and triangle inequality on random triples") {
  for (int i = 0; i < 300; ++i) {
    const GeoPoint a = random_point(), b = random_point(), c = random_point();
    CHECK(haversine_km(a, b) == haversine_km(b, a));
    CHECK(haversine_km(a, c) <= haversine_km(a, b) + haversine_km(b, c) + 1e-9);
  }
}

TEST_CASE("idw: constant readings give a constant field with zero loocv") {
  std::vector<Reading> readings{{{28.50, 77.10}, 42.0}, {{28.52, 77.15}, 42.0},
                                {{28.55, 77.12}, 42.0}};
  const auto field = idw_field(readings, bounding_box(readings, 0.2), 0.1, 2.0);
  for (double v : field.values) CHECK(v == doctest::Approx(42.0).epsilon(1e-12));
  CHECK(field.loocv_rmse == doctest::Approx(0.0));
  CHECK(loocv_error(readings, 2.0) == doctest::Approx(0.0));
}

TEST_CASE("idw: single reading covers the whole field") {
  std::vector<Reading> readings{{{28.50, 77.10}, 7.5}};
  const auto field = idw_field(readings, {28.45, 28.55, 77.05, 77.15}, 0.5, 2.0);
  for (double v : field.values) CHECK(v == doctest::Approx(7.5));
  CHECK(field.loocv_rmse == 0.0);  // undefined-for-constant rule
}

TEST_CASE("idw: midpoint of two equal-distance readings averages them") {
  // same latitude, symmetric longitudes around the probe
  std::vector<Reading> readings{{{28.5, 77.0}, 10.0}, {{28.5, 77.02}, 30.0}};
  CHECK(idw_predict({28.5, 77.01}, readings, 2.0) == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("idw: empty input and duplicated locations are errors") {
  CHECK_THROWS_AS(idw_field({}, {0, 1, 0, 1}, 0.1, 2.0), AnalyticsError);
  std::vector<Reading> dup{{{28.5, 77.0}, 1.0}, {{28.5, 77.0}, 2.0}};
  CHECK_THROWS_AS(idw_field(dup, bounding_box(dup, 0.5), 0.1, 2.0), AnalyticsError);
  CHECK_THROWS_AS(loocv_error(dup, 2.0), AnalyticsError);
  CHECK_THROWS_AS(loocv_error({{{28.5, 77.0}, 1.0}}, 2.0), AnalyticsError);
}

TEST_CASE("idw convexity and exactness on random configurations") {
  std::uniform_real_distribution<double> value(-50.0, 150.0);
  std::uniform_int_distribution<int> count(2, 8);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Reading> readings;
    const int n = count(rng);
    for (int i = 0; i < n; ++i)
      readings.push_back({{28.5 + jitter(rng), 77.1 + jitter(rng)}, value(rng)});
    double lo = readings[0].value, hi = readings[0].value;
    for (const auto& r : readings) {
      lo = std::min(lo, r.value);
      hi = std::max(hi, r.value);
    }
    PollutionField field;
    try {
      field = idw_field(readings, bounding_box(readings, 0.2), 1.0, 2.0);
    } catch (const AnalyticsError&) {
      continue;  // rare duplicate from jitter collision
    }
    for (double v : field.values) {
      CHECK(v >= lo - 1e-9);
      CHECK(v <= hi + 1e-9);
    }
    for (const auto& r : readings)
      CHECK(idw_predict(r.location, readings, 2.0) == doctest::Approx(r.value).epsilon(1e-12));
  }
}

TEST_CASE("loocv: three collinear equally spaced readings, brute-force oracle") {
  // on a meridian so consecutive spacings are exactly equal
  std::vector<Reading> readings{
      {{28.00, 77.0}, 0.0}, {{28.01, 77.0}, 10.0}, {{28.02, 77.0}, 20.0}};

  // oracle: predict each held-out reading directly
  double se = 0;
  for (std::size_t i = 0; i < readings.size(); ++i) {
    std::vector<Reading> rest;
    for (std::size_t j = 0; j < readings.size(); ++j)
      if (j != i) rest.push_back(readings[j]);
    const double pred = oracle_idw(readings[i].location, rest, 2.0);
    se += (pred - readings[i].value) * (pred - readings[i].value);
  }
  const double oracle_rmse = std::sqrt(se / 3.0);

  const double got = loocv_error(readings, 2.0);
  CHECK(got == doctest::Approx(oracle_rmse).epsilon(1e-12));
  // frozen value: holdout predictions are 12, 10, 8 -> rmse = sqrt(96)
  CHECK(got == doctest::Approx(std::sqrt(96.0)).epsilon(1e-6));
}

TEST_CASE("map_to_segment: on-segment point, snap-radius miss, tie to lower id") {
  std::vector<RoadSegment> segments{
      {5, {28.00, 77.00}, {28.02, 77.00}, 2.2, 0.0},
      {9, {28.00, 77.10}, {28.02, 77.10}, 2.2, 0.0},
  };
  CHECK(*map_to_segment({28.01, 77.00}, segments) == 5);     // midpoint
  CHECK_FALSE(map_to_segment({28.01, 77.05}, segments).has_value());  // ~4.9 km away

  // exact tie via symmetric longitudes (0.25 degrees is exact in binary)
  std::vector<RoadSegment> pair{
      {7, {27.9, 77.25}, {28.1, 77.25}, 22.0, 0.0},
      {3, {27.9, 76.75}, {28.1, 76.75}, 22.0, 0.0},
  };
  CHECK(*map_to_segment({28.0, 77.0}, pair, /*snap_radius_km=*/30.0) == 3);
}

TEST_CASE("segment_speeds: 1 km in 3 minutes is 20 km/h") {
  // meridian chord, almost exactly 1 km long
  const double dlat = 1.0 / kKmPerDegLat;
  std::vector<RoadSegment> segments{{1, {28.0, 77.0}, {28.0 + dlat, 77.0}, 1.0, 0.0}};
  std::vector<TraceFix> fixes{
      {"bus1", 0, {28.0, 77.0}},
      {"bus1", 180'000, {28.0 + dlat, 77.0}},
  };
  const auto series = segment_speeds(fixes, segments, 600'000);
  REQUIRE(series.count(1) == 1);
  REQUIRE(series.at(1).windows.size() == 1);
  CHECK(series.at(1).windows[0].mean_speed_kmh == doctest::Approx(20.0).epsilon(1e-6));
  CHECK(series.at(1).windows[0].sample_count == 1);
  CHECK(series.at(1).windows[0].window_start_ms == 0);
}

TEST_CASE("segment_speeds: stationary vehicle reads zero, empty segment has no series") {
  std::vector<RoadSegment> segments{{1, {28.0, 77.0}, {28.01, 77.0}, 1.1, 0.0},
                                    {2, {29.0, 77.0}, {29.01, 77.0}, 1.1, 0.0}};
  std::vector<TraceFix> fixes{
      {"bus1", 0, {28.005, 77.0}},
      {"bus1", 60'000, {28.005, 77.0}},
  };
  const auto series = segment_speeds(fixes, segments, 600'000);
  CHECK(series.at(1).windows[0].mean_speed_kmh == doctest::Approx(0.0));
  CHECK(series.count(2) == 0);
}

TEST_CASE("segment_speeds: non-monotone trace is rejected, others survive") {
  std::vector<RoadSegment> segments{{1, {28.0, 77.0}, {28.01, 77.0}, 1.1, 0.0}};
  std::vector<TraceFix> fixes{
      {"bad", 1000, {28.005, 77.0}},
      {"bad", 500, {28.005, 77.0}},
      {"good", 0, {28.005, 77.0}},
      {"good", 1000, {28.0051, 77.0}},
  };
  std::vector<std::string> rejected;
  const auto series = segment_speeds(fixes, segments, 600'000, kDefaultSnapRadiusKm, &rejected);
  CHECK(rejected == std::vector<std::string>{"bad"});
  CHECK(series.at(1).windows[0].sample_count == 1);
}

TEST_CASE("segment_speeds is invariant to trace concatenation order across vehicles") {
  const double dlat = 1.0 / kKmPerDegLat;
  std::vector<RoadSegment> segments{{1, {28.0, 77.0}, {28.0 + dlat, 77.0}, 1.0, 0.0}};
  std::vector<TraceFix> a{{"v1", 0, {28.0, 77.0}}, {"v1", 120'000, {28.0 + dlat / 2, 77.0}}};
  std::vector<TraceFix> b{{"v2", 30'000, {28.0 + dlat, 77.0}},
                          {"v2", 150'000, {28.0 + dlat / 2, 77.0}}};

  std::vector<TraceFix> ab(a);
  ab.insert(ab.end(), b.begin(), b.end());
  std::vector<TraceFix> ba(b);
  ba.insert(ba.end(), a.begin(), a.end());

  const auto s1 = segment_speeds(ab, segments, 600'000);
  const auto s2 = segment_speeds(ba, segments, 600'000);
  REQUIRE(s1.count(1));
  REQUIRE(s2.count(1));
  REQUIRE(s1.at(1).windows.size() == s2.at(1).windows.size());
  for (std::size_t i = 0; i < s1.at(1).windows.size(); ++i) {
    CHECK(s1.at(1).windows[i].mean_speed_kmh ==
          doctest::Approx(s2.at(1).windows[i].mean_speed_kmh));
    CHECK(s1.at(1).windows[i].sample_count == s2.at(1).windows[i].sample_count);
  }
}

namespace {
SegmentSpeedSeries make_series(std::int64_t window_ms, const std::vector<double>& means) {
  SegmentSpeedSeries s;
  s.segment_id = 1;
  s.window_ms = window_ms;
  for (std::size_t i = 0; i < means.size(); ++i)
    s.windows.push_back({static_cast<std::int64_t>(i) * window_ms, means[i], 3});
  return s;
}
}  // namespace

TEST_CASE("detect_hotspots: sustained-drop rule") {
  std::vector<RoadSegment> segments{{1, {28.0, 77.0}, {28.01, 77.0}, 1.1, 20.0}};

  SUBCASE("speeds at or above free flow never flag") {
    std::map<std::int64_t, SegmentSpeedSeries> series{
        {1, make_series(600'000, {20, 21, 25, 22})}};
    const auto flags = detect_hotspots(segments, series, 0.4, 2);
    REQUIRE(flags.size() == 1);
    CHECK_FALSE(flags[0].flagged);
  }
  SUBCASE("two windows at 4 km/h against alpha*F = 8 flag the segment") {
    std::map<std::int64_t, SegmentSpeedSeries> series{
        {1, make_series(600'000, {20, 20, 4, 4})}};
    const auto flags = detect_hotspots(segments, series, 0.4, 2);
    CHECK(flags[0].flagged);
    CHECK(*flags[0].set_at_window_ms == 3 * 600'000);  // the k-th low window
  }
  SUBCASE("a single-window dip does not satisfy k=2") {
    std::map<std::int64_t, SegmentSpeedSeries> series{
        {1, make_series(600'000, {20, 20, 20, 4})}};
    CHECK_FALSE(detect_hotspots(segments, series, 0.4, 2)[0].flagged);
  }
  SUBCASE("a recovered segment is not flagged") {
    std::map<std::int64_t, SegmentSpeedSeries> series{
        {1, make_series(600'000, {4, 4, 18, 19})}};
    CHECK_FALSE(detect_hotspots(segments, series, 0.4, 2)[0].flagged);
  }
  SUBCASE("monotonicity: lowering a flagged segment's speeds never clears it") {
    std::mt19937_64 local(99);
    std::uniform_real_distribution<double> speed(0.0, 30.0);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> means;
      for (int i = 0; i < 6; ++i) means.push_back(speed(local));
      std::map<std::int64_t, SegmentSpeedSeries> series{{1, make_series(600'000, means)}};
      const bool flagged = detect_hotspots(segments, series, 0.4, 2)[0].flagged;
      if (!flagged) continue;
      for (auto& m : means) m *= 0.5;
      std::map<std::int64_t, SegmentSpeedSeries> lower{{1, make_series(600'000, means)}};
      CHECK(detect_hotspots(segments, lower, 0.4, 2)[0].flagged);
    }
  }
}

TEST_CASE("detect_hotspots parameter validation") {
  std::vector<RoadSegment> segments{{1, {28.0, 77.0}, {28.01, 77.0}, 1.1, 20.0}};
  std::map<std::int64_t, SegmentSpeedSeries> series;
  CHECK_THROWS_AS(detect_hotspots(segments, series, 0.0, 2), AnalyticsError);
  CHECK_THROWS_AS(detect_hotspots(segments, series, 1.0, 2), AnalyticsError);
  CHECK_THROWS_AS(detect_hotspots(segments, series, 0.4, 0), AnalyticsError);
}

TEST_CASE("reading outliers: robust z-score against median/MAD") {
  // 0.15 deviations around 10 with one wild sensor
  std::vector<double> means{10.0, 10.1, 9.9, 10.05, 25.0};
  const auto flags = detect_reading_outliers(means, 3.0);
  CHECK(flags == std::vector<bool>{false, false, false, false, true});

  // constant array flags nobody
  CHECK(detect_reading_outliers({5, 5, 5, 5}, 3.0) ==
        std::vector<bool>{false, false, false, false});
}

TEST_CASE("effective free flow falls back to the 85th percentile") {
  RoadSegment configured{1, {28, 77}, {28.01, 77}, 1.1, 33.0};
  RoadSegment bootstrap{2, {28, 77}, {28.01, 77}, 1.1, 0.0};
  const auto series = make_series(600'000, {10, 20, 30, 40, 50, 60, 70, 80, 90, 100});
  CHECK(effective_free_flow_kmh(configured, series) == 33.0);
  // rank = 0.85 * 9 = 7.65 -> 80 + 0.65 * 10 = 86.5
  CHECK(effective_free_flow_kmh(bootstrap, series) == doctest::Approx(86.5));
}

TEST_CASE("forecast_ewma: fixed point, last-observation limit, hand-computed blend") {
  CHECK(forecast_ewma(std::vector<double>{7, 7, 7, 7}, 0.3) == doctest::Approx(7.0));
  CHECK(forecast_ewma(std::vector<double>{3, 9, 27}, 1.0) == doctest::Approx(27.0));
  CHECK(forecast_ewma(std::vector<double>{10, 20}, 0.5) == doctest::Approx(15.0));
  CHECK_THROWS_AS(forecast_ewma(std::vector<double>{}, 0.5), AnalyticsError);
  CHECK_THROWS_AS(forecast_ewma(std::vector<double>{1.0}, 0.0), AnalyticsError);
  CHECK_THROWS_AS(forecast_ewma(std::vector<double>{1.0}, 1.5), AnalyticsError);
}

TEST_CASE("trace csv loader reports bad rows with line numbers") {
  const std::string path = "trace_test_tmp.csv";
  {
    std::ofstream f(path);
    f << "timestamp_iso8601,vehicle_id,latitude,longitude\n";
    f << "2024-01-01T00:00:00Z,bus1,28.5,77.1\n";
    f << "not-a-time,bus1,28.5,77.1\n";
    f << "2024-01-01T00:00:10Z,bus1,91.5,77.1\n";
    f << "2024-01-01T00:00:20Z,bus1,28.5\n";
    f << "2024-01-01T00:00:30Z,bus1,28.6,77.2\n";
  }
  const auto result = load_trace_csv(path);
  CHECK(result.fixes.size() == 2);
  REQUIRE(result.bad_rows.size() == 3);
  CHECK(result.bad_rows[0].first == 3);
  CHECK(result.bad_rows[1].first == 4);
  CHECK(result.bad_rows[2].first == 5);
  CHECK(result.fixes[0].timestamp_ms == 1704067200000);
  std::remove(path.c_str());
}

TEST_CASE("segments csv loader") {
  const std::string path = "segments_test_tmp.csv";
  {
    std::ofstream f(path);
    f << "id,start_lat,start_lon,end_lat,end_lon,free_flow_kmh\n";
    f << "1,28.0,77.0,28.01,77.0,20\n";
    f << "2,28.02,77.0,28.03,77.0,\n";
  }
  const auto segments = load_segments_csv(path);
  REQUIRE(segments.size() == 2);
  CHECK(segments[0].free_flow_speed_kmh == 20.0);
  CHECK(segments[1].free_flow_speed_kmh == 0.0);
  CHECK(segments[0].length_km == doctest::Approx(1.112).epsilon(0.01));
  std::remove(path.c_str());
}
