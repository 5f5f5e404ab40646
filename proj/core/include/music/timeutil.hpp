#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace music::util {

// UTC only. Accepts "YYYY-MM-DDTHH:MM:SS", optional ".mmm" fraction, optional
// trailing "Z". A space instead of 'T' is tolerated.
std::optional<std::int64_t> iso8601_to_epoch_ms(std::string_view text);

// Emits "YYYY-MM-DDTHH:MM:SSZ" (milliseconds appended only when nonzero).
std::string epoch_ms_to_iso8601(std::int64_t epoch_ms);

}  // namespace music::util
