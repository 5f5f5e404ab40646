#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace music::policy {

class DetectorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Pluggable dirt detector: image bytes -> dirt fraction in [0,1].
// Throws DetectorError on an undecodable payload. A trained model slots in
// behind the same signature.
using DirtDetector = std::function<double(std::string_view image_bytes)>;

// Deterministic stand-in: the fraction of pixels whose luminance deviates from
// the image's (lower) median by more than a fixed band of 16 levels.
double luminance_dirt_detector(std::string_view image_bytes);

// --- tiny grayscale image support (binary PGM / P5, 8-bit) ------------------

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

std::string encode_pgm(const GrayImage& img);
std::optional<GrayImage> decode_pgm(std::string_view bytes);

}  // namespace music::policy
