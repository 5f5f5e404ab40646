#include "music/compress.hpp"

#include <zlib.h>

#include <limits>

namespace music::util {

std::string deflate_bytes(std::string_view bytes) {
  uLongf bound = compressBound(static_cast<uLong>(bytes.size()));
  std::string out(bound, '\0');
  int rc = compress2(reinterpret_cast<Bytef*>(out.data()), &bound,
                     reinterpret_cast<const Bytef*>(bytes.data()),
                     static_cast<uLong>(bytes.size()), Z_DEFAULT_COMPRESSION);
  if (rc != Z_OK) throw CompressError("deflate failed (zlib rc " + std::to_string(rc) + ")");
  out.resize(bound);
  return out;
}

std::string inflate_bytes(std::string_view bytes, std::size_t max_out) {
  // Grow the output buffer until the payload fits or the cap is exceeded.
  std::size_t cap = bytes.size() * 4 + 64;
  for (;;) {
    if (cap > max_out) cap = max_out;
    std::string out(cap, '\0');
    uLongf out_len = static_cast<uLongf>(out.size());
    int rc = uncompress(reinterpret_cast<Bytef*>(out.data()), &out_len,
                        reinterpret_cast<const Bytef*>(bytes.data()),
                        static_cast<uLong>(bytes.size()));
    if (rc == Z_OK) {
      out.resize(out_len);
      return out;
    }
    if (rc == Z_BUF_ERROR && cap < max_out) {
      cap *= 2;
      continue;
    }
    throw CompressError(rc == Z_BUF_ERROR
                            ? "inflated payload exceeds size cap"
                            : "inflate failed (zlib rc " + std::to_string(rc) + ")");
  }
}

}  // namespace music::util
