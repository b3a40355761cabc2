#pragma once

#include <string>
#include <string_view>

#include "agirisk/types.hpp"

namespace agirisk {

// ISO-8601 UTC timestamps of the form YYYY-MM-DDTHH:MM:SSZ.
// Parsing and formatting avoid the C locale/timezone machinery so the
// mapping is identical on every platform.
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp ts);

// Largest hour boundary <= ts (floor division, exact for ts < 0 too).
constexpr Timestamp hour_floor(Timestamp ts) {
  Timestamp q = ts / kSecondsPerHour;
  if (ts % kSecondsPerHour < 0) --q;
  return q * kSecondsPerHour;
}

constexpr Timestamp day_floor(Timestamp ts) {
  Timestamp q = ts / kSecondsPerDay;
  if (ts % kSecondsPerDay < 0) --q;
  return q * kSecondsPerDay;
}

// Hour of day 0-23 after applying a fixed timezone offset.
constexpr int local_hour_of_day(Timestamp ts, int tz_offset_hours = 0) {
  Timestamp shifted = ts + Timestamp{tz_offset_hours} * kSecondsPerHour;
  Timestamp h = (shifted - day_floor(shifted)) / kSecondsPerHour;
  return static_cast<int>(h);
}

}  // namespace agirisk
