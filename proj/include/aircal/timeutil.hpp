#pragma once

#include <charconv>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "aircal/errors.hpp"

namespace aircal {

/// Observation time as UTC seconds since the Unix epoch.
/// Series on the measurement grid use multiples of 900 s (15 minutes).
struct Timestamp {
  std::int64_t secs = 0;

  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

inline constexpr std::int64_t kGridStepSeconds = 900;

/// A timestamped scalar (reference concentrations, hourly means, ...).
struct TimedValue {
  Timestamp ts{};
  double value = 0.0;
};

namespace detail {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace detail

struct CivilDate {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31
};

/// Gregorian date from days since 1970-01-01 (Howard Hinnant's algorithm).
inline CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

/// Days since 1970-01-01 for a Gregorian date.
inline std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

/// Local hour of day 0..23 after applying a fixed UTC offset.
inline int hour_of_day(Timestamp ts, std::int64_t utc_offset_seconds = 0) {
  const std::int64_t local = ts.secs + utc_offset_seconds;
  const std::int64_t sec_of_day = local - detail::floor_div(local, 86400) * 86400;
  return static_cast<int>(sec_of_day / 3600);
}

/// Weekday with Monday = 0 .. Sunday = 6.
inline int weekday_monday0(Timestamp ts, std::int64_t utc_offset_seconds = 0) {
  const std::int64_t days = detail::floor_div(ts.secs + utc_offset_seconds, 86400);
  // 1970-01-01 was a Thursday (index 3).
  std::int64_t wd = (days + 3) % 7;
  if (wd < 0) wd += 7;
  return static_cast<int>(wd);
}

/// Month 0..11 (January = 0).
inline int month0(Timestamp ts, std::int64_t utc_offset_seconds = 0) {
  const std::int64_t days = detail::floor_div(ts.secs + utc_offset_seconds, 86400);
  return civil_from_days(days).month - 1;
}

/// Meteorological season 0..3 with DJF=0, MAM=1, JJA=2, SON=3.
inline int season0(Timestamp ts, std::int64_t utc_offset_seconds = 0) {
  const int m = month0(ts, utc_offset_seconds) + 1;  // 1..12
  return (m % 12) / 3;
}

/// Start of the calendar hour containing `ts` (UTC).
inline Timestamp hour_start(Timestamp ts) {
  return Timestamp{detail::floor_div(ts.secs, 3600) * 3600};
}

/// Parse `YYYY-MM-DDTHH:MM:SSZ` or a plain integer of epoch seconds.
inline Timestamp parse_timestamp(std::string_view text) {
  auto fail = [&] { throw DataError("time: cannot parse timestamp '" + std::string(text) + "'"); };
  if (text.empty()) fail();

  const bool iso = text.find('T') != std::string_view::npos;
  if (!iso) {
    std::int64_t secs = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), secs);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) fail();
    return Timestamp{secs};
  }

  // Strict fixed-width ISO form: 2021-05-03T14:45:00Z
  if (text.size() != 20 || text[4] != '-' || text[7] != '-' || text[10] != 'T' ||
      text[13] != ':' || text[16] != ':' || text[19] != 'Z') {
    fail();
  }
  auto num = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    const auto res = std::from_chars(text.data() + pos, text.data() + pos + len, v);
    if (res.ec != std::errc() || res.ptr != text.data() + pos + len) fail();
    return v;
  };
  const int year = num(0, 4), month = num(5, 2), day = num(8, 2);
  const int hour = num(11, 2), minute = num(14, 2), second = num(17, 2);
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60) {
    fail();
  }
  return Timestamp{days_from_civil(year, month, day) * 86400 + hour * 3600 + minute * 60 + second};
}

inline std::string format_iso8601(Timestamp ts) {
  const std::int64_t days = detail::floor_div(ts.secs, 86400);
  const CivilDate date = civil_from_days(days);
  const std::int64_t sec_of_day = ts.secs - days * 86400;
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02lld:%02lld:%02lldZ", date.year, date.month,
                date.day, static_cast<long long>(sec_of_day / 3600),
                static_cast<long long>((sec_of_day / 60) % 60),
                static_cast<long long>(sec_of_day % 60));
  return buf;
}

}  // namespace aircal
