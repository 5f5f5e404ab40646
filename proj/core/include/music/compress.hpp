#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace music::util {

class CompressError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// DEFLATE (zlib format) helpers used for the optional SEND compression path.
std::string deflate_bytes(std::string_view bytes);
std::string inflate_bytes(std::string_view bytes, std::size_t max_out);

}  // namespace music::util
