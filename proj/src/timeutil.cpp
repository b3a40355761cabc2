#include "agirisk/timeutil.hpp"

#include <array>
#include <charconv>
#include <cstdio>

#include "agirisk/error.hpp"

namespace agirisk {
namespace {

// Howard Hinnant's civil-date algorithms; exact for the proleptic
// Gregorian calendar.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yy + (m <= 2));
}

int parse_fixed_int(std::string_view text, size_t pos, size_t len,
                    const char* field) {
  if (pos + len > text.size())
    throw ParseError("timestamp too short at " + std::string(field));
  int value = 0;
  const char* first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, value);
  if (ec != std::errc{} || ptr != first + len)
    throw ParseError("malformed timestamp " + std::string(field) + ": '" +
                     std::string(text) + "'");
  return value;
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SSZ
  if (text.size() != 20 || text[4] != '-' || text[7] != '-' ||
      text[10] != 'T' || text[13] != ':' || text[16] != ':' ||
      text[19] != 'Z')
    throw ParseError("malformed timestamp: '" + std::string(text) + "'");
  const int year = parse_fixed_int(text, 0, 4, "year");
  const int month = parse_fixed_int(text, 5, 2, "month");
  const int day = parse_fixed_int(text, 8, 2, "day");
  const int hour = parse_fixed_int(text, 11, 2, "hour");
  const int minute = parse_fixed_int(text, 14, 2, "minute");
  const int second = parse_fixed_int(text, 17, 2, "second");
  if (month < 1 || month > 12)
    throw ParseError("timestamp month out of range: '" + std::string(text) + "'");
  static constexpr std::array<int, 12> kDays = {31, 28, 31, 30, 31, 30,
                                                31, 31, 30, 31, 30, 31};
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  const int dmax = kDays[month - 1] + (month == 2 && leap ? 1 : 0);
  if (day < 1 || day > dmax)
    throw ParseError("timestamp day out of range: '" + std::string(text) + "'");
  if (hour > 23 || minute > 59 || second > 59)
    throw ParseError("timestamp time out of range: '" + std::string(text) + "'");
  return days_from_civil(year, month, day) * kSecondsPerDay +
         hour * kSecondsPerHour + minute * kSecondsPerMinute + second;
}

std::string format_timestamp(Timestamp ts) {
  std::int64_t days = ts / kSecondsPerDay;
  Timestamp rem = ts % kSecondsPerDay;
  if (rem < 0) {
    --days;
    rem += kSecondsPerDay;
  }
  int y, m, d;
  civil_from_days(days, y, m, d);
  const int hh = static_cast<int>(rem / kSecondsPerHour);
  const int mm = static_cast<int>((rem / kSecondsPerMinute) % 60);
  const int ss = static_cast<int>(rem % 60);
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                hh, mm, ss);
  return buf;
}

}  // namespace agirisk
