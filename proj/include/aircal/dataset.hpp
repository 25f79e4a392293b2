#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "aircal/errors.hpp"
#include "aircal/features.hpp"
#include "aircal/tensor.hpp"

namespace aircal {

inline constexpr double kSigmaFloor = 1e-8;

/// Per-feature z-score statistics, fitted on training rows only.
struct NormStats {
  std::vector<std::string> names;
  std::vector<double> mu;
  std::vector<double> sigma;  // floored at kSigmaFloor

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Chronological split fractions; must sum to 1.
struct SplitSpec {
  double train_frac = 0.7;
  double val_frac = 0.2;
  double test_frac = 0.1;

  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

inline void validate_split(const SplitSpec& spec) {
  if (!(spec.train_frac > 0.0 && spec.val_frac > 0.0 && spec.test_frac > 0.0)) {
    throw SplitError("dataset: split fractions must be positive");
  }
  if (std::abs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) > 1e-9) {
    throw SplitError("dataset: split fractions must sum to 1");
  }
}

/// Supervised sequence-to-one pairs: inputs[i] is a window of W feature
/// rows, targets[i] the reference value one step past the window end.
struct WindowedDataset {
  std::size_t window = 0;
  std::size_t features = 0;
  std::vector<Matrix> inputs;        // each window × features
  std::vector<double> targets;
  std::vector<Timestamp> target_ts;  // timestamp of each target

  std::size_t size() const { return inputs.size(); }
};

struct SplitFrames {
  FeatureFrame train;
  FeatureFrame val;
  FeatureFrame test;
};

namespace detail {

inline FeatureFrame slice_frame(const FeatureFrame& frame, std::size_t begin, std::size_t end) {
  FeatureFrame out;
  out.matrix.channel = frame.matrix.channel;
  out.matrix.names = frame.matrix.names;
  out.matrix.data = Matrix(end - begin, frame.matrix.cols());
  for (std::size_t r = begin; r < end; ++r) {
    for (std::size_t c = 0; c < frame.matrix.cols(); ++c) {
      out.matrix.data(r - begin, c) = frame.matrix.data(r, c);
    }
  }
  out.matrix.timestamps.assign(frame.matrix.timestamps.begin() + begin,
                               frame.matrix.timestamps.begin() + end);
  out.targets.assign(frame.targets.begin() + begin, frame.targets.begin() + end);
  return out;
}

}  // namespace detail

/// Split feature rows into contiguous chronological train/val/test blocks.
/// Boundaries fall at floor(T·train_frac) and floor(T·(train+val)).
inline SplitFrames chrono_split(const FeatureFrame& frame, const SplitSpec& spec) {
  validate_split(spec);
  const std::size_t total = frame.matrix.rows();
  if (total < 10) {
    throw SplitError("dataset: need at least 10 rows to split, got " + std::to_string(total));
  }
  const auto b1 = static_cast<std::size_t>(std::floor(total * spec.train_frac));
  const auto b2 = static_cast<std::size_t>(std::floor(total * (spec.train_frac + spec.val_frac)));
  if (b1 == 0 || b2 <= b1 || b2 >= total) {
    throw SplitError("dataset: a split block is empty");
  }
  return {detail::slice_frame(frame, 0, b1), detail::slice_frame(frame, b1, b2),
          detail::slice_frame(frame, b2, total)};
}

/// Column means and population (1/N) standard deviations over training
/// rows. Degenerate columns get the sigma floor so scaling stays defined.
inline NormStats fit_norm(const FeatureMatrix& train) {
  if (train.rows() == 0) throw InsufficientDataError("dataset: cannot fit stats on empty block");
  const std::size_t cols = train.cols();
  NormStats stats;
  stats.names = train.names;
  stats.mu.assign(cols, 0.0);
  stats.sigma.assign(cols, 0.0);
  const double n = static_cast<double>(train.rows());
  for (std::size_t r = 0; r < train.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) stats.mu[c] += train.data(r, c);
  }
  for (std::size_t c = 0; c < cols; ++c) stats.mu[c] /= n;
  for (std::size_t r = 0; r < train.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = train.data(r, c) - stats.mu[c];
      stats.sigma[c] += d * d;
    }
  }
  for (std::size_t c = 0; c < cols; ++c) {
    stats.sigma[c] = std::max(std::sqrt(stats.sigma[c] / n), kSigmaFloor);
  }
  return stats;
}

/// z-score every cell with the given statistics.
inline FeatureMatrix apply_norm(const FeatureMatrix& matrix, const NormStats& stats) {
  if (stats.mu.size() != matrix.cols() || stats.sigma.size() != matrix.cols()) {
    throw ShapeError("dataset: normalization stats do not match feature count");
  }
  if (!stats.names.empty() && stats.names != matrix.names) {
    throw ShapeError("dataset: normalization stats fitted on different columns");
  }
  FeatureMatrix out = matrix;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      out.data(r, c) = (matrix.data(r, c) - stats.mu[c]) / stats.sigma[c];
    }
  }
  return out;
}

/// Undo apply_norm (exact up to floating-point rounding).
inline FeatureMatrix invert_norm(const FeatureMatrix& matrix, const NormStats& stats) {
  if (stats.mu.size() != matrix.cols() || stats.sigma.size() != matrix.cols()) {
    throw ShapeError("dataset: normalization stats do not match feature count");
  }
  FeatureMatrix out = matrix;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      out.data(r, c) = matrix.data(r, c) * stats.sigma[c] + stats.mu[c];
    }
  }
  return out;
}

/// Roll a window of length W over one contiguous segment: pair i holds
/// rows i..i+W-1 and the target at row i+W, so exactly T−W pairs exist
/// and every target lies strictly after its window.
inline WindowedDataset make_windows(const FeatureMatrix& matrix,
                                    const std::vector<double>& targets, std::size_t window) {
  if (window < 1) throw DomainError("dataset: window must be >= 1");
  if (targets.size() != matrix.rows()) {
    throw ShapeError("dataset: targets do not match matrix rows");
  }
  if (matrix.timestamps.size() != matrix.rows()) {
    throw ShapeError("dataset: matrix rows carry no timestamps");
  }
  const std::size_t total = matrix.rows();
  if (total <= window) {
    throw InsufficientDataError("dataset: need more rows (" + std::to_string(total) +
                                ") than the window size (" + std::to_string(window) + ")");
  }
  WindowedDataset ds;
  ds.window = window;
  ds.features = matrix.cols();
  const std::size_t pairs = total - window;
  ds.inputs.reserve(pairs);
  ds.targets.reserve(pairs);
  ds.target_ts.reserve(pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    Matrix win(window, matrix.cols());
    for (std::size_t r = 0; r < window; ++r) {
      for (std::size_t c = 0; c < matrix.cols(); ++c) win(r, c) = matrix.data(i + r, c);
    }
    ds.inputs.push_back(std::move(win));
    ds.targets.push_back(targets[i + window]);
    ds.target_ts.push_back(matrix.timestamps[i + window]);
  }
  return ds;
}

/// Concatenate window sets from multiple segments (same W and F).
inline WindowedDataset concat_windows(std::vector<WindowedDataset> parts) {
  WindowedDataset out;
  for (auto& part : parts) {
    if (part.size() == 0) continue;
    if (out.size() == 0) {
      out.window = part.window;
      out.features = part.features;
    } else if (part.window != out.window || part.features != out.features) {
      throw ShapeError("dataset: cannot concatenate windows of different shapes");
    }
    for (auto& m : part.inputs) out.inputs.push_back(std::move(m));
    out.targets.insert(out.targets.end(), part.targets.begin(), part.targets.end());
    out.target_ts.insert(out.target_ts.end(), part.target_ts.begin(), part.target_ts.end());
  }
  return out;
}

}  // namespace aircal
