#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "aircal/core_data.hpp"
#include "aircal/errors.hpp"

namespace aircal {

namespace detail {

inline void require_same_length(std::span<const double> y, std::span<const double> yhat,
                                const char* op) {
  if (y.size() != yhat.size()) {
    throw ShapeError(std::string("metrics: ") + op + " length mismatch (" +
                     std::to_string(y.size()) + " vs " + std::to_string(yhat.size()) + ")");
  }
  if (y.empty()) throw ShapeError(std::string("metrics: ") + op + " on empty vectors");
}

}  // namespace detail

/// Mean absolute error.
inline double mae_loss(std::span<const double> y, std::span<const double> yhat) {
  detail::require_same_length(y, yhat, "mae");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sum += std::abs(y[i] - yhat[i]);
  return sum / static_cast<double>(y.size());
}

/// Subgradient of the MAE with respect to the predictions:
/// sign(yhat - y)/n, with sign(0) taken as 0.
inline std::vector<double> mae_grad(std::span<const double> y, std::span<const double> yhat) {
  detail::require_same_length(y, yhat, "mae_grad");
  const double inv_n = 1.0 / static_cast<double>(y.size());
  std::vector<double> g(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = yhat[i] - y[i];
    g[i] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
  }
  return g;
}

/// Root mean squared error.
inline double rmse(std::span<const double> y, std::span<const double> yhat) {
  detail::require_same_length(y, yhat, "rmse");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - yhat[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(y.size()));
}

/// Variance-explained coefficient of determination,
/// 1 - SS_res/SS_tot. Can be negative for predictions worse than the mean.
inline double r2_direct(std::span<const double> y, std::span<const double> yhat) {
  detail::require_same_length(y, yhat, "r2");
  if (y.size() < 2) throw InsufficientDataError("metrics: r2 needs at least 2 samples");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - yhat[i];
    const double c = y[i] - mean;
    ss_res += r * r;
    ss_tot += c * c;
  }
  if (ss_tot <= 0.0) throw DegenerateError("metrics: r2 undefined for constant targets");
  return 1.0 - ss_res / ss_tot;
}

/// Ordinary least squares of predictions on reference values,
/// y_pred ≈ intercept + slope·y_ref.
struct OlsFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2_regression = 0.0;  // squared Pearson correlation
  double rss = 0.0;            // residual sum of squares around the line
  std::size_t n = 0;

  friend bool operator==(const OlsFit&, const OlsFit&) = default;
};

inline OlsFit ols_fit(std::span<const double> y_ref, std::span<const double> y_pred) {
  detail::require_same_length(y_ref, y_pred, "ols");
  const std::size_t n = y_ref.size();
  if (n < 3) throw InsufficientDataError("metrics: ols needs at least 3 samples");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += y_ref[i];
    my += y_pred[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = y_ref[i] - mx;
    const double dy = y_pred[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0) throw DegenerateError("metrics: ols undefined for constant reference");

  OlsFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2_regression = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double resid = y_pred[i] - (fit.intercept + fit.slope * y_ref[i]);
    fit.rss += resid * resid;
  }
  return fit;
}

/// Relative expanded uncertainty (coverage factor 2, percent) of a
/// candidate method at the limit value L:
///   u² = RSS/(n-2) - u_ref² + [b0 + (b1-1)·L]²,   W = 200·sqrt(u²)/L
/// Negative intermediate values are floored at zero. The between-
/// instrument term is omitted (single co-located device).
inline double expanded_uncertainty(const OlsFit& fit, std::span<const double> y_ref,
                                   double limit_value, double u_ref = 0.0) {
  if (fit.n <= 2) throw InsufficientDataError("metrics: uncertainty needs n > 2");
  if (y_ref.size() != fit.n) {
    throw IntegrityError("metrics: reference vector does not match the fit");
  }
  if (!(limit_value > 0.0)) throw DomainError("metrics: limit value must be positive");
  const double variance_about_line = fit.rss / static_cast<double>(fit.n - 2);
  const double bias_at_limit = fit.intercept + (fit.slope - 1.0) * limit_value;
  double u_sq = variance_about_line - u_ref * u_ref + bias_at_limit * bias_at_limit;
  if (u_sq < 0.0) u_sq = 0.0;
  return 200.0 * std::sqrt(u_sq) / limit_value;
}

/// EU data-quality objective for the expanded uncertainty, percent.
inline double equivalence_threshold(Channel channel) {
  return channel == Channel::NO2 ? 25.0 : 50.0;
}

/// Default limit values (channel units) used when none is supplied. These
/// are conventional analogues, not regulatory constants; pass an explicit
/// limit for any compliance claim.
inline double default_limit_value(Channel channel) {
  switch (channel) {
    case Channel::NO2: return 40.0;
    case Channel::PM10: return 50.0;
    case Channel::PM25: return 25.0;
  }
  return 0.0;
}

struct EquivalenceReport {
  Channel channel = Channel::PM25;
  OlsFit fit;
  double expanded_uncertainty_percent = 0.0;
  double threshold_percent = 0.0;
  double limit_value = 0.0;
  double reference_uncertainty_used = 0.0;
  bool pass = false;
};

inline EquivalenceReport equivalence_report(const OlsFit& fit, double uncertainty_percent,
                                            Channel channel, double limit_value,
                                            double u_ref = 0.0) {
  EquivalenceReport report;
  report.channel = channel;
  report.fit = fit;
  report.expanded_uncertainty_percent = uncertainty_percent;
  report.threshold_percent = equivalence_threshold(channel);
  report.limit_value = limit_value;
  report.reference_uncertainty_used = u_ref;
  report.pass = uncertainty_percent <= report.threshold_percent;
  return report;
}

enum class Resolution { min15, hourly };

inline const char* resolution_name(Resolution r) {
  return r == Resolution::min15 ? "15min" : "hourly";
}

/// Core accuracy metrics of a calibrated series at a given resolution.
struct MetricSet {
  double r2 = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t n = 0;
  Resolution resolution = Resolution::min15;
};

inline MetricSet compute_metrics(std::span<const double> y, std::span<const double> yhat,
                                 Resolution resolution) {
  MetricSet m;
  m.r2 = r2_direct(y, yhat);
  m.mae = mae_loss(y, yhat);
  m.rmse = rmse(y, yhat);
  m.n = y.size();
  m.resolution = resolution;
  return m;
}

}  // namespace aircal
