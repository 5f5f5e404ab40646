#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace music::util {

std::string base64_encode(std::string_view bytes);

// Strict decode: rejects bad characters, bad padding and bad length.
std::optional<std::string> base64_decode(std::string_view text);

bool is_valid_base64(std::string_view text);

}  // namespace music::util
