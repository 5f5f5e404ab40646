#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "music/detector.hpp"
#include "music/geo.hpp"
#include "music/wire.hpp"

namespace music::sim {

// Ground-truth pollution surface the air-quality generator samples:
// base + sum of Gaussian plumes.
struct Plume {
  GeoPoint center;
  double amplitude = 0.0;
  double sigma_km = 1.0;
};

struct FieldModel {
  double base = 50.0;
  std::vector<Plume> plumes;

  double value_at(const GeoPoint& p) const;
};

struct SensorGenConfig {
  std::string name;              // advertised name, e.g. "AirQuality"
  std::string generator;         // air_quality | gps | accelerometer | scalar
  double max_frequency_hz = 1.0;
  double noise_sigma = 0.0;
  double scalar_mean = 0.0;      // scalar generator
  double wave_amplitude = 0.5;   // accelerometer generator
  double wave_hz = 1.0;
  std::string unit;              // default chosen per generator
  std::size_t record_bytes_target = 0;  // pad each record's JSON up to this
};

// One sample record at (epoch) time t for a node at `pos`.
wire::SensorRecord generate_record(const SensorGenConfig& cfg, const FieldModel& field,
                                   const GeoPoint& pos, std::int64_t t_ms, std::mt19937_64& rng);

// Synthetic camera frames, 32x32 grayscale PGM.
//   uniform          -> flat gray (dirt 0)
//   split            -> half black / half white
//   blobs            -> dirt_fraction of pixels darkened
//   corrupt          -> deliberately truncated payload
struct ImageProfile {
  std::string kind = "uniform";
  double dirt_fraction = 0.0;
};

std::string generate_image(const ImageProfile& profile, std::mt19937_64& rng);

}  // namespace music::sim
