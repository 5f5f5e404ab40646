#include "music/detector.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

namespace music::policy {

namespace {
constexpr int kLuminanceBand = 16;
}

std::string encode_pgm(const GrayImage& img) {
  char header[64];
  std::snprintf(header, sizeof header, "P5\n%d %d\n255\n", img.width, img.height);
  std::string out(header);
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

std::optional<GrayImage> decode_pgm(std::string_view bytes) {
  // header: "P5" <ws> width <ws> height <ws> maxval <single ws> pixels
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  };
  auto read_int = [&]() -> std::optional<int> {
    skip_ws();
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos])))
      return std::nullopt;
    long v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1'000'000) return std::nullopt;
      ++pos;
    }
    return static_cast<int>(v);
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') return std::nullopt;
  pos = 2;
  auto w = read_int();
  auto h = read_int();
  auto maxval = read_int();
  if (!w || !h || !maxval || *w <= 0 || *h <= 0 || *maxval != 255) return std::nullopt;
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    return std::nullopt;
  ++pos;

  const std::size_t need = static_cast<std::size_t>(*w) * static_cast<std::size_t>(*h);
  if (bytes.size() - pos < need) return std::nullopt;

  GrayImage img;
  img.width = *w;
  img.height = *h;
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return img;
}

double luminance_dirt_detector(std::string_view image_bytes) {
  auto img = decode_pgm(image_bytes);
  if (!img || img->pixels.empty()) throw DetectorError("undecodable image payload");

  std::vector<std::uint8_t> sorted(img->pixels);
  std::nth_element(sorted.begin(), sorted.begin() + (sorted.size() - 1) / 2, sorted.end());
  const int median = sorted[(sorted.size() - 1) / 2];

  std::size_t deviating = 0;
  for (std::uint8_t p : img->pixels)
    if (std::abs(static_cast<int>(p) - median) > kLuminanceBand) ++deviating;
  return static_cast<double>(deviating) / static_cast<double>(img->pixels.size());
}

}  // namespace music::policy
