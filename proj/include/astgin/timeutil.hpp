#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace astgin {

// Minutes since 1970-01-01 00:00 UTC.
using Minutes = std::int64_t;

// Parses "YYYY-MM-DD HH:MM" (a trailing ":SS" is accepted and ignored).
// Throws ValidationError on malformed input.
Minutes parse_timestamp(std::string_view text);

// Returns false instead of throwing.
bool try_parse_timestamp(std::string_view text, Minutes& out);

std::string format_timestamp(Minutes t);

inline int minute_of_day(Minutes t) {
  Minutes m = t % 1440;
  if (m < 0) m += 1440;
  return static_cast<int>(m);
}

}  // namespace astgin
