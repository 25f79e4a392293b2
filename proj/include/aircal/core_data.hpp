#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aircal/errors.hpp"
#include "aircal/timeutil.hpp"

namespace aircal {

/// Pollutant channel. PM channels are reported in µg/m³, NO2 in ppb.
enum class Channel { PM25, PM10, NO2 };

inline bool is_pm(Channel c) { return c != Channel::NO2; }

inline const char* channel_name(Channel c) {
  switch (c) {
    case Channel::PM25: return "pm25";
    case Channel::PM10: return "pm10";
    case Channel::NO2: return "no2";
  }
  return "?";
}

inline const char* channel_unit(Channel c) { return is_pm(c) ? "ug/m3" : "ppb"; }

inline Channel parse_channel(std::string_view name) {
  if (name == "pm25" || name == "PM25" || name == "pm2.5") return Channel::PM25;
  if (name == "pm10" || name == "PM10") return Channel::PM10;
  if (name == "no2" || name == "NO2") return Channel::NO2;
  throw DataError("channel: unknown channel '" + std::string(name) + "'");
}

inline constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

/// One raw observation from a low-cost sensor. Fields that do not apply
/// to the channel stay NaN: PM devices report sample flow rate (sfr) and
/// time-of-flight (mtf); NO2 devices report working/auxiliary electrode
/// voltages (wev/aev).
struct SensorRecord {
  Timestamp ts{};
  double conc = kAbsent;  // sensed concentration, channel unit
  double tmp = kAbsent;   // °C
  double hmd = kAbsent;   // %RH
  double sfr = kAbsent;
  double mtf = kAbsent;
  double wev = kAbsent;
  double aev = kAbsent;

  friend bool operator==(const SensorRecord&, const SensorRecord&) = default;
};

struct SensorField {
  const char* name;
  double SensorRecord::* member;
};

/// Channel-specific signal set, in the documented raw-column order:
/// conc, device-specific pair, tmp, hmd.
inline std::vector<SensorField> active_fields(Channel c) {
  if (is_pm(c)) {
    return {{"conc", &SensorRecord::conc},
            {"sfr", &SensorRecord::sfr},
            {"mtf", &SensorRecord::mtf},
            {"tmp", &SensorRecord::tmp},
            {"hmd", &SensorRecord::hmd}};
  }
  return {{"conc", &SensorRecord::conc},
          {"wev", &SensorRecord::wev},
          {"aev", &SensorRecord::aev},
          {"tmp", &SensorRecord::tmp},
          {"hmd", &SensorRecord::hmd}};
}

/// Co-located sensor and reference observations for one channel.
/// records[i] and reference[i] share the same timestamp. Timestamps are
/// strictly increasing; after gap handling each series is additionally on
/// a uniform 900 s grid.
struct AlignedSeries {
  Channel channel = Channel::PM25;
  std::vector<SensorRecord> records;
  std::vector<double> reference;

  std::size_t size() const { return records.size(); }

  friend bool operator==(const AlignedSeries&, const AlignedSeries&) = default;
};

/// Shared validity checks for an AlignedSeries.
inline void validate_series(const AlignedSeries& s, bool require_uniform_grid = false) {
  if (s.records.size() != s.reference.size()) {
    throw ShapeError("series: records and reference lengths differ");
  }
  const auto fields = active_fields(s.channel);
  for (std::size_t i = 0; i < s.records.size(); ++i) {
    if (i > 0) {
      const auto gap = s.records[i].ts.secs - s.records[i - 1].ts.secs;
      if (gap <= 0) throw DataError("series: timestamps not strictly increasing");
      if (require_uniform_grid && gap != kGridStepSeconds) {
        throw DataError("series: non-uniform spacing inside a segment");
      }
    }
    for (const auto& f : fields) {
      if (!std::isfinite(s.records[i].*(f.member))) {
        throw DataError(std::string("series: non-finite '") + f.name + "' value");
      }
    }
    if (!std::isfinite(s.reference[i])) throw DataError("series: non-finite reference value");
  }
}

namespace detail {

inline std::string trim(std::string_view v) {
  const auto first = v.find_first_not_of(" \t\r\n﻿");
  if (first == std::string_view::npos) return {};
  const auto last = v.find_last_not_of(" \t\r\n");
  return std::string(v.substr(first, last - first + 1));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string token;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(trim(token));
      token.clear();
    } else {
      token.push_back(ch);
    }
  }
  cells.push_back(trim(token));
  return cells;
}

inline double parse_cell_double(const std::string& cell, const std::string& column,
                                std::size_t line_no) {
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    throw DataError("csv: line " + std::to_string(line_no) + ": cannot parse '" + cell +
                    "' in column '" + column + "'");
  }
  return v;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // parallel line numbers below
  std::vector<std::size_t> line_numbers;
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("csv: cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (table.header.empty()) {
      table.header = split_csv_line(line);
    } else {
      table.rows.push_back(split_csv_line(line));
      table.line_numbers.push_back(line_no);
    }
  }
  return table;
}

inline std::size_t column_index(const CsvTable& table, const std::string& name) {
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (table.header[i] == name) return i;
  }
  throw SchemaError("csv: missing required column '" + name + "'");
}

inline void format_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace detail

/// Parse a sensor CSV. Required columns: ts, conc, tmp, hmd plus sfr,mtf
/// (PM channels) or wev,aev (NO2). Rows are returned in file order.
inline std::vector<SensorRecord> parse_csv(const std::string& path, Channel channel) {
  const auto table = detail::read_csv(path);
  if (table.header.empty()) throw DataError("csv: empty input '" + path + "'");

  const std::size_t ts_col = detail::column_index(table, "ts");
  const auto fields = active_fields(channel);
  std::vector<std::size_t> cols;
  for (const auto& f : fields) cols.push_back(detail::column_index(table, f.name));

  if (table.rows.empty()) throw DataError("csv: no data rows in '" + path + "'");

  std::vector<SensorRecord> records;
  records.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line_no = table.line_numbers[r];
    if (row.size() < table.header.size()) {
      throw DataError("csv: line " + std::to_string(line_no) + ": expected " +
                      std::to_string(table.header.size()) + " cells, got " +
                      std::to_string(row.size()));
    }
    SensorRecord rec;
    try {
      rec.ts = parse_timestamp(row[ts_col]);
    } catch (const DataError&) {
      throw DataError("csv: line " + std::to_string(line_no) + ": cannot parse '" + row[ts_col] +
                      "' in column 'ts'");
    }
    for (std::size_t f = 0; f < fields.size(); ++f) {
      rec.*(fields[f].member) = detail::parse_cell_double(row[cols[f]], fields[f].name, line_no);
    }
    records.push_back(rec);
  }
  return records;
}

/// Parse a reference CSV with columns ts, ref.
inline std::vector<TimedValue> parse_reference_csv(const std::string& path) {
  const auto table = detail::read_csv(path);
  if (table.header.empty()) throw DataError("csv: empty input '" + path + "'");
  const std::size_t ts_col = detail::column_index(table, "ts");
  const std::size_t ref_col = detail::column_index(table, "ref");
  if (table.rows.empty()) throw DataError("csv: no data rows in '" + path + "'");

  std::vector<TimedValue> values;
  values.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line_no = table.line_numbers[r];
    TimedValue tv;
    try {
      tv.ts = parse_timestamp(row[ts_col]);
    } catch (const DataError&) {
      throw DataError("csv: line " + std::to_string(line_no) + ": cannot parse '" + row[ts_col] +
                      "' in column 'ts'");
    }
    tv.value = detail::parse_cell_double(row[ref_col], "ref", line_no);
    values.push_back(tv);
  }
  return values;
}

inline void write_sensor_csv(const std::string& path, const std::vector<SensorRecord>& records,
                             Channel channel) {
  std::ofstream out(path);
  if (!out) throw IoError("csv: cannot write '" + path + "'");
  const auto fields = active_fields(channel);
  std::string line = "ts";
  for (const auto& f : fields) {
    line += ',';
    line += f.name;
  }
  line += '\n';
  for (const auto& rec : records) {
    line += format_iso8601(rec.ts);
    for (const auto& f : fields) {
      line += ',';
      detail::format_double(line, rec.*(f.member));
    }
    line += '\n';
  }
  out << line;
  if (!out) throw IoError("csv: failed writing '" + path + "'");
}

inline void write_reference_csv(const std::string& path, const std::vector<TimedValue>& values) {
  std::ofstream out(path);
  if (!out) throw IoError("csv: cannot write '" + path + "'");
  std::string line = "ts,ref\n";
  for (const auto& tv : values) {
    line += format_iso8601(tv.ts);
    line += ',';
    detail::format_double(line, tv.value);
    line += '\n';
  }
  out << line;
  if (!out) throw IoError("csv: failed writing '" + path + "'");
}

/// A contiguous run of timestamps present on one side only and dropped
/// by align().
struct DroppedRange {
  Timestamp first{};
  Timestamp last{};
  std::size_t count = 0;
  enum class Side { sensor_only, reference_only } side = Side::sensor_only;
};

struct AlignResult {
  AlignedSeries series;
  std::vector<DroppedRange> dropped;  // contiguity report, ascending
};

/// Inner-join sensor records and reference values on identical timestamps.
/// The result is sorted ascending; one-sided timestamps are dropped and
/// reported.
inline AlignResult align(std::vector<SensorRecord> sensor, std::vector<TimedValue> reference,
                         Channel channel) {
  if (sensor.empty() || reference.empty()) {
    throw AlignmentError("align: empty input series");
  }
  std::sort(sensor.begin(), sensor.end(),
            [](const SensorRecord& a, const SensorRecord& b) { return a.ts < b.ts; });
  std::sort(reference.begin(), reference.end(),
            [](const TimedValue& a, const TimedValue& b) { return a.ts < b.ts; });
  for (std::size_t i = 1; i < sensor.size(); ++i) {
    if (sensor[i].ts == sensor[i - 1].ts) {
      throw DataError("align: duplicate sensor timestamp " + format_iso8601(sensor[i].ts));
    }
  }
  for (std::size_t i = 1; i < reference.size(); ++i) {
    if (reference[i].ts == reference[i - 1].ts) {
      throw DataError("align: duplicate reference timestamp " + format_iso8601(reference[i].ts));
    }
  }

  AlignResult result;
  result.series.channel = channel;
  // Consecutive drops from the same side (with no kept timestamp between
  // them) collapse into one reported range.
  enum class Scan { keep, sensor_drop, ref_drop } last = Scan::keep;
  auto note_drop = [&](Timestamp ts, DroppedRange::Side side) {
    const Scan kind =
        side == DroppedRange::Side::sensor_only ? Scan::sensor_drop : Scan::ref_drop;
    if (last == kind) {
      result.dropped.back().last = ts;
      ++result.dropped.back().count;
    } else {
      result.dropped.push_back({ts, ts, 1, side});
    }
    last = kind;
  };

  std::size_t i = 0, j = 0;
  while (i < sensor.size() && j < reference.size()) {
    if (sensor[i].ts == reference[j].ts) {
      result.series.records.push_back(sensor[i]);
      result.series.reference.push_back(reference[j].value);
      last = Scan::keep;
      ++i;
      ++j;
    } else if (sensor[i].ts < reference[j].ts) {
      note_drop(sensor[i].ts, DroppedRange::Side::sensor_only);
      ++i;
    } else {
      note_drop(reference[j].ts, DroppedRange::Side::reference_only);
      ++j;
    }
  }
  for (; i < sensor.size(); ++i) note_drop(sensor[i].ts, DroppedRange::Side::sensor_only);
  for (; j < reference.size(); ++j) note_drop(reference[j].ts, DroppedRange::Side::reference_only);

  if (result.series.records.empty()) {
    throw AlignmentError("align: no common timestamps between sensor and reference");
  }
  validate_series(result.series);
  return result;
}

/// Close interior gaps of at most `max_gap_steps` missing 15-minute slots
/// by linear interpolation of every numeric field (sensor and reference).
/// Longer gaps split the series; each returned segment is on a strictly
/// uniform 900 s grid. Windowing later never crosses a segment boundary.
inline std::vector<AlignedSeries> fill_gaps(const AlignedSeries& series, int max_gap_steps) {
  if (max_gap_steps < 0) throw DomainError("fill_gaps: max_gap_steps must be >= 0");
  validate_series(series);
  if (series.records.empty()) return {};

  const auto fields = active_fields(series.channel);
  for (const auto& rec : series.records) {
    if (rec.ts.secs % kGridStepSeconds != 0) {
      throw DataError("fill_gaps: timestamp " + format_iso8601(rec.ts) +
                      " is not on the 15-minute grid");
    }
  }

  std::vector<AlignedSeries> segments;
  AlignedSeries current;
  current.channel = series.channel;
  current.records.push_back(series.records[0]);
  current.reference.push_back(series.reference[0]);

  for (std::size_t i = 1; i < series.size(); ++i) {
    const auto& prev = series.records[i - 1];
    const auto& next = series.records[i];
    const std::int64_t missing = (next.ts.secs - prev.ts.secs) / kGridStepSeconds - 1;
    if (missing > max_gap_steps) {
      segments.push_back(std::move(current));
      current = AlignedSeries{};
      current.channel = series.channel;
    } else {
      for (std::int64_t k = 1; k <= missing; ++k) {
        const double w = static_cast<double>(k) / static_cast<double>(missing + 1);
        SensorRecord filled;
        filled.ts = Timestamp{prev.ts.secs + k * kGridStepSeconds};
        for (const auto& f : fields) {
          filled.*(f.member) = prev.*(f.member) + (next.*(f.member) - prev.*(f.member)) * w;
        }
        current.records.push_back(filled);
        current.reference.push_back(series.reference[i - 1] +
                                    (series.reference[i] - series.reference[i - 1]) * w);
      }
    }
    current.records.push_back(next);
    current.reference.push_back(series.reference[i]);
  }
  segments.push_back(std::move(current));

  for (const auto& seg : segments) validate_series(seg, /*require_uniform_grid=*/true);
  return segments;
}

/// Average 15-minute values into calendar hours. An hour is kept when at
/// least 3 of its 4 slots are present; the mean is stamped at the hour
/// start. Hours below the threshold are omitted.
inline std::vector<TimedValue> hourly_average(const std::vector<TimedValue>& values) {
  std::map<std::int64_t, std::pair<double, int>> hours;
  for (const auto& tv : values) {
    if (tv.ts.secs % kGridStepSeconds != 0) {
      throw DataError("hourly: timestamp " + format_iso8601(tv.ts) +
                      " is not on the 15-minute grid");
    }
    auto& [sum, count] = hours[detail::floor_div(tv.ts.secs, 3600)];
    sum += tv.value;
    ++count;
  }
  std::vector<TimedValue> result;
  for (const auto& [hour, agg] : hours) {
    if (agg.second >= 3) {
      result.push_back({Timestamp{hour * 3600}, agg.first / agg.second});
    }
  }
  return result;
}

}  // namespace aircal
