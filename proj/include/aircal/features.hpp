#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "aircal/core_data.hpp"
#include "aircal/errors.hpp"
#include "aircal/tensor.hpp"
#include "aircal/timeutil.hpp"

namespace aircal {

/// Knobs for the engineered feature set.
struct FeatureSpec {
  double epsilon = 1e-6;                           // near-zero denominator guard
  std::vector<int> lags = {1, 2, 3};               // target-lag step counts
  std::set<int> rush_hours = {7, 8, 9, 16, 17, 18};  // local hours, weekdays only
  std::int64_t utc_offset_seconds = 0;             // site-local clock for time features

  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

inline void validate_spec(const FeatureSpec& spec) {
  if (!(spec.epsilon > 0.0)) throw DomainError("features: epsilon must be positive");
  if (spec.lags.empty()) throw DomainError("features: at least one target lag required");
  std::set<int> seen;
  for (int lag : spec.lags) {
    if (lag <= 0) throw DomainError("features: lags must be positive");
    if (!seen.insert(lag).second) throw DomainError("features: duplicate lag");
  }
}

/// Engineered inputs: one named column per feature, one row per timestep.
/// Row timestamps are retained so that windows and hourly aggregation can
/// be tied back to the clock.
struct FeatureMatrix {
  Channel channel = Channel::PM25;
  std::vector<std::string> names;
  Matrix data;                      // rows × names.size()
  std::vector<Timestamp> timestamps;  // one per row

  std::size_t rows() const { return data.rows(); }
  std::size_t cols() const { return data.cols(); }
};

/// Feature rows plus the co-located reference targets for the same rows.
struct FeatureFrame {
  FeatureMatrix matrix;
  std::vector<double> targets;
};

/// Percentage-change values are capped here to limit the leverage of
/// near-zero denominators.
inline constexpr double kPctChangeClip = 10.0;

/// Clamp a denominator away from zero: |d| < eps maps to ±eps, with the
/// sign of d and 0 treated as positive.
inline double clamp_denominator(double d, double eps) {
  if (std::abs(d) >= eps) return d;
  return d < 0.0 ? -eps : eps;
}

/// Relative change over `lag` steps: out[t] = (x[t] - x[t-lag]) / x[t-lag].
/// The first `lag` entries are NaN and must be dropped by the caller.
/// lag 1 gives the 15-minute change, lag 2 the 30-minute change.
inline std::vector<double> pct_change(const std::vector<double>& x, int lag,
                                      double epsilon = 1e-6) {
  if (lag < 1) throw DomainError("features: pct_change lag must be >= 1");
  if (x.size() <= static_cast<std::size_t>(lag)) {
    throw InsufficientDataError("features: series shorter than pct_change lag");
  }
  std::vector<double> out(x.size(), kAbsent);
  for (std::size_t t = lag; t < x.size(); ++t) {
    const double denom = clamp_denominator(x[t - lag], epsilon);
    const double change = (x[t] - x[t - lag]) / denom;
    out[t] = std::clamp(change, -kPctChangeClip, kPctChangeClip);
  }
  return out;
}

/// Harmonic encoding of a cyclic integer: (sin, cos) of 2π·value/period.
inline std::pair<double, double> cyclical_encode(int value, int period) {
  if (period < 1) throw DomainError("features: cyclical period must be positive");
  if (value < 0 || value >= period) {
    throw DomainError("features: cyclical value " + std::to_string(value) +
                      " outside [0, " + std::to_string(period) + ")");
  }
  const double angle = 2.0 * M_PI * static_cast<double>(value) / static_cast<double>(period);
  return {std::sin(angle), std::cos(angle)};
}

/// 1.0 during configured local rush hours on weekdays, else 0.0.
inline double rush_hour(Timestamp ts, const FeatureSpec& spec) {
  const int wd = weekday_monday0(ts, spec.utc_offset_seconds);
  if (wd > 4) return 0.0;
  return spec.rush_hours.count(hour_of_day(ts, spec.utc_offset_seconds)) ? 1.0 : 0.0;
}

/// Cross-terms between device signals and meteorology. PM channels pair
/// particle optics with temperature and humidity; NO2 pairs the electrode
/// voltages analogously.
inline std::vector<std::pair<std::string, double>> interactions(const SensorRecord& rec,
                                                                Channel channel,
                                                                const FeatureSpec& spec) {
  if (is_pm(channel)) {
    return {{"mtf_over_tmp", rec.mtf / clamp_denominator(rec.tmp + spec.epsilon, spec.epsilon)},
            {"sfr_x_hmd", rec.sfr * rec.hmd}};
  }
  return {{"wev_x_tmp", rec.wev * rec.tmp},
          {"aev_over_hmd", rec.aev / clamp_denominator(rec.hmd + spec.epsilon, spec.epsilon)}};
}

/// Build the engineered feature matrix for one gap-free segment.
///
/// Fixed column order:
///   1. raw signals (conc, device pair, tmp, hmd)
///   2. pc15/pc30 of each raw signal
///   3. hour/day/month/season sin-cos pairs and the rush-hour flag
///   4. channel interactions
///   5. lagged sensed concentration and its lag-step percentage change
///
/// Leading rows that contain any not-yet-defined lag entry are dropped, so
/// row t never reads series values at indices beyond t.
inline FeatureFrame build_feature_matrix(const AlignedSeries& series, const FeatureSpec& spec) {
  validate_spec(spec);
  validate_series(series);

  const std::size_t total = series.size();
  const int max_lag = *std::max_element(spec.lags.begin(), spec.lags.end());
  const std::size_t drop = static_cast<std::size_t>(std::max(2, max_lag));
  if (total <= drop) {
    throw InsufficientDataError("features: series of length " + std::to_string(total) +
                                " too short for lag window of " + std::to_string(drop));
  }

  const auto fields = active_fields(series.channel);
  std::vector<std::vector<double>> raw(fields.size(), std::vector<double>(total));
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t f = 0; f < fields.size(); ++f) {
      raw[f][i] = series.records[i].*(fields[f].member);
    }
  }

  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  auto add_column = [&](std::string name, std::vector<double> values) {
    names.push_back(std::move(name));
    columns.push_back(std::move(values));
  };

  for (std::size_t f = 0; f < fields.size(); ++f) add_column(fields[f].name, raw[f]);
  for (std::size_t f = 0; f < fields.size(); ++f) {
    add_column(std::string("pc15_") + fields[f].name, pct_change(raw[f], 1, spec.epsilon));
    add_column(std::string("pc30_") + fields[f].name, pct_change(raw[f], 2, spec.epsilon));
  }

  std::vector<double> hour_sin(total), hour_cos(total), day_sin(total), day_cos(total),
      month_sin(total), month_cos(total), season_sin(total), season_cos(total), rush(total);
  for (std::size_t i = 0; i < total; ++i) {
    const Timestamp ts = series.records[i].ts;
    std::tie(hour_sin[i], hour_cos[i]) =
        cyclical_encode(hour_of_day(ts, spec.utc_offset_seconds), 24);
    std::tie(day_sin[i], day_cos[i]) =
        cyclical_encode(weekday_monday0(ts, spec.utc_offset_seconds), 7);
    std::tie(month_sin[i], month_cos[i]) = cyclical_encode(month0(ts, spec.utc_offset_seconds), 12);
    std::tie(season_sin[i], season_cos[i]) =
        cyclical_encode(season0(ts, spec.utc_offset_seconds), 4);
    rush[i] = rush_hour(ts, spec);
  }
  add_column("hour_sin", std::move(hour_sin));
  add_column("hour_cos", std::move(hour_cos));
  add_column("day_sin", std::move(day_sin));
  add_column("day_cos", std::move(day_cos));
  add_column("month_sin", std::move(month_sin));
  add_column("month_cos", std::move(month_cos));
  add_column("season_sin", std::move(season_sin));
  add_column("season_cos", std::move(season_cos));
  add_column("rush_hour", std::move(rush));

  {
    std::vector<std::vector<double>> inter_cols;
    std::vector<std::string> inter_names;
    for (std::size_t i = 0; i < total; ++i) {
      const auto values = interactions(series.records[i], series.channel, spec);
      if (i == 0) {
        inter_cols.assign(values.size(), std::vector<double>(total));
        for (const auto& [name, _] : values) inter_names.push_back(name);
      }
      for (std::size_t k = 0; k < values.size(); ++k) inter_cols[k][i] = values[k].second;
    }
    for (std::size_t k = 0; k < inter_cols.size(); ++k) {
      add_column(inter_names[k], std::move(inter_cols[k]));
    }
  }

  // Autoregressive context from the sensed channel. The sensor (not the
  // reference) is lagged so the same features exist at inference time.
  const std::vector<double>& conc = raw[0];
  for (int lag : spec.lags) {
    std::vector<double> lagged(total, kAbsent);
    for (std::size_t i = static_cast<std::size_t>(lag); i < total; ++i) {
      lagged[i] = conc[i - lag];
    }
    add_column("conc_lag" + std::to_string(lag), std::move(lagged));
  }
  for (int lag : spec.lags) {
    add_column("conc_lag" + std::to_string(lag) + "_pc", pct_change(conc, lag, spec.epsilon));
  }

  FeatureFrame frame;
  frame.matrix.channel = series.channel;
  frame.matrix.names = names;
  const std::size_t rows = total - drop;
  frame.matrix.data = Matrix(rows, columns.size());
  frame.matrix.timestamps.reserve(rows);
  frame.targets.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t src = r + drop;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      frame.matrix.data(r, c) = columns[c][src];
    }
    frame.matrix.timestamps.push_back(series.records[src].ts);
    frame.targets.push_back(series.reference[src]);
  }

  if (!frame.matrix.data.all_finite()) {
    throw DataError("features: non-finite cell escaped the guard rules");
  }
  return frame;
}

/// Dump a feature matrix as CSV (named header, one row per timestep).
inline void write_feature_csv(const std::string& path, const FeatureMatrix& matrix) {
  std::ofstream out(path);
  if (!out) throw IoError("features: cannot write '" + path + "'");
  std::string line = "ts";
  for (const auto& name : matrix.names) {
    line += ',';
    line += name;
  }
  line += '\n';
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    line += format_iso8601(matrix.timestamps[r]);
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
      line += ',';
      detail::format_double(line, matrix.data(r, c));
    }
    line += '\n';
  }
  out << line;
}

}  // namespace aircal
