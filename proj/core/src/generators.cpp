#include "music/generators.hpp"

#include <algorithm>
#include <cmath>

namespace music::sim {

namespace {
constexpr double kTwoPi = 6.283185307179586;
constexpr int kImageSide = 32;
}  // namespace

double FieldModel::value_at(const GeoPoint& p) const {
  double v = base;
  for (const auto& plume : plumes) {
    const double d = haversine_km(p, plume.center) / plume.sigma_km;
    v += plume.amplitude * std::exp(-d * d);
  }
  return v;
}

wire::SensorRecord generate_record(const SensorGenConfig& cfg, const FieldModel& field,
                                   const GeoPoint& pos, std::int64_t t_ms,
                                   std::mt19937_64& rng) {
  wire::SensorRecord rec;
  rec.name = cfg.name;
  rec.timestamp_ms = t_ms;
  std::normal_distribution<double> noise(0.0, 1.0);
  auto jitter = [&] { return cfg.noise_sigma > 0.0 ? noise(rng) * cfg.noise_sigma : 0.0; };

  if (cfg.generator == "gps") {
    rec.measurement_unit = cfg.unit.empty() ? "degrees" : cfg.unit;
    rec.values["latitude"] = pos.latitude;
    rec.values["longitude"] = pos.longitude;
  } else if (cfg.generator == "accelerometer") {
    rec.measurement_unit = cfg.unit.empty() ? "meters per second squared" : cfg.unit;
    const double tau = static_cast<double>(t_ms) / 1000.0;
    const double w = kTwoPi * cfg.wave_hz * tau;
    rec.values["x"] = cfg.wave_amplitude * std::sin(w) + jitter();
    rec.values["y"] = cfg.wave_amplitude * std::sin(w + kTwoPi / 3.0) + jitter();
    rec.values["z"] = 9.81 + cfg.wave_amplitude * std::sin(w + 2.0 * kTwoPi / 3.0) + jitter();
  } else if (cfg.generator == "air_quality") {
    rec.measurement_unit = cfg.unit.empty() ? "micrograms per cubic meter" : cfg.unit;
    rec.values["value"] = field.value_at(pos) + jitter();
  } else {  // scalar
    rec.measurement_unit = cfg.unit.empty() ? "units" : cfg.unit;
    rec.values["value"] = cfg.scalar_mean + jitter();
  }

  if (cfg.record_bytes_target > 0) {
    const std::size_t base_size = wire::record_json(rec).size();
    // "pad":"..." adds 9 bytes of scaffolding plus the filler itself
    if (base_size + 9 < cfg.record_bytes_target)
      rec.pad = std::string(cfg.record_bytes_target - base_size - 9, 'x');
  }
  return rec;
}

std::string generate_image(const ImageProfile& profile, std::mt19937_64& rng) {
  policy::GrayImage img;
  img.width = kImageSide;
  img.height = kImageSide;
  const std::size_t n = static_cast<std::size_t>(kImageSide) * kImageSide;

  if (profile.kind == "split") {
    img.pixels.resize(n);
    for (int r = 0; r < kImageSide; ++r)
      for (int c = 0; c < kImageSide; ++c)
        img.pixels[static_cast<std::size_t>(r) * kImageSide + c] =
            c < kImageSide / 2 ? 0 : 255;
  } else if (profile.kind == "blobs") {
    img.pixels.assign(n, 128);
    auto dirty = static_cast<std::size_t>(std::lround(profile.dirt_fraction * n));
    if (dirty > n) dirty = n;
    // scatter deterministically from the node RNG
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < dirty; ++i) img.pixels[idx[i]] = 30;
  } else if (profile.kind == "corrupt") {
    return "P5\n32";  // truncated on purpose
  } else {  // uniform
    img.pixels.assign(n, 128);
  }
  return policy::encode_pgm(img);
}

}  // namespace music::sim
