#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "aircal/dataset.hpp"
#include "aircal/errors.hpp"
#include "aircal/metrics.hpp"
#include "aircal/neuralnet.hpp"
#include "aircal/rng.hpp"

namespace aircal {

/// Adam optimizer state; moment buffers mirror the parameter layout.
struct AdamState {
  ParamSet m;
  ParamSet v;
  long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double eta = 1e-4;
};

inline AdamState make_adam(const ModelConfig& config, double eta) {
  AdamState state;
  state.m = make_zero_params(config);
  state.v = make_zero_params(config);
  state.eta = eta;
  return state;
}

/// dst += scale * src over every parameter buffer.
inline void axpy_params(ParamSet& dst, const ParamSet& src, double scale = 1.0) {
  std::vector<std::span<double>> acc;
  std::vector<std::span<const double>> from;
  for_each_buffer(dst, [&](std::span<double> b, bool) { acc.push_back(b); });
  for_each_buffer(src, [&](std::span<const double> b, bool) { from.push_back(b); });
  for (std::size_t b = 0; b < acc.size(); ++b) {
    if (acc[b].size() != from[b].size()) {
      throw ShapeError("train: parameter sets have different shapes");
    }
    for (std::size_t i = 0; i < acc[b].size(); ++i) acc[b][i] += scale * from[b][i];
  }
}

inline void scale_params(ParamSet& p, double scale) {
  for_each_buffer(p, [&](std::span<double> b, bool) {
    for (double& v : b) v *= scale;
  });
}

inline void zero_params(ParamSet& p) {
  for_each_buffer(p, [](std::span<double> b, bool) { std::fill(b.begin(), b.end(), 0.0); });
}

/// One bias-corrected Adam update, applied in place.
inline void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state) {
  ++state.t;
  const double bc1 = 1.0 - std::pow(state.beta1, state.t);
  const double bc2 = 1.0 - std::pow(state.beta2, state.t);

  std::vector<std::span<double>> p_bufs, m_bufs, v_bufs;
  std::vector<std::span<const double>> g_bufs;
  for_each_buffer(params, [&](std::span<double> b, bool) { p_bufs.push_back(b); });
  for_each_buffer(grads, [&](std::span<const double> b, bool) { g_bufs.push_back(b); });
  for_each_buffer(state.m, [&](std::span<double> b, bool) { m_bufs.push_back(b); });
  for_each_buffer(state.v, [&](std::span<double> b, bool) { v_bufs.push_back(b); });

  for (std::size_t k = 0; k < p_bufs.size(); ++k) {
    if (p_bufs[k].size() != g_bufs[k].size()) {
      throw ShapeError("train: gradient shapes do not match parameters");
    }
    auto p = p_bufs[k];
    auto g = g_bufs[k];
    auto m = m_bufs[k];
    auto v = v_bufs[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= state.eta * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

/// Optimization schedule. Epochs stop early once the validation MAE has
/// not improved by more than min_delta for `patience` epochs.
struct TrainSpec {
  std::size_t max_epochs = 200;
  std::size_t batch_size = 64;
  std::size_t patience = 10;
  double min_delta = 0.0;
  double eta = 1e-4;
  std::uint64_t seed = 0;

  friend bool operator==(const TrainSpec&, const TrainSpec&) = default;
};

inline void validate_train_spec(const TrainSpec& spec) {
  if (spec.max_epochs < 1 || spec.batch_size < 1 || spec.patience < 1) {
    throw DomainError("train: epochs, batch size and patience must be positive");
  }
  if (!(spec.eta > 0.0)) throw DomainError("train: learning rate must be positive");
}

/// Epoch-by-epoch record of one training run. Wall-clock is informational
/// and excluded from reproducibility comparisons.
struct TrainReport {
  std::vector<double> train_mae;  // per epoch, training-mode predictions
  std::vector<double> val_mae;    // per epoch, eval mode
  std::size_t best_epoch = 0;     // 1-based epoch whose weights were kept
  bool stopped_early = false;
  double best_val_mae = 0.0;
  double final_train_mae = 0.0;  // eval mode at the restored weights
  double final_val_mae = 0.0;
  double wall_seconds = 0.0;

  friend bool operator==(const TrainReport& a, const TrainReport& b) {
    return a.train_mae == b.train_mae && a.val_mae == b.val_mae && a.best_epoch == b.best_epoch &&
           a.stopped_early == b.stopped_early && a.best_val_mae == b.best_val_mae &&
           a.final_train_mae == b.final_train_mae && a.final_val_mae == b.final_val_mae;
  }
};

struct FitResult {
  LstmModel model;
  TrainReport report;
};

namespace detail {

// Eval-mode MAE in the space of the supplied targets (the target scaler,
// if any, is the pipeline's concern, not the optimizer's).
inline double eval_mae(const LstmModel& model, const WindowedDataset& data) {
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const ForwardCache cache = model_forward(model, data.inputs[i], RunMode::eval);
    sum += std::abs(cache.prediction - data.targets[i]);
  }
  return sum / static_cast<double>(data.size());
}

}  // namespace detail

/// Minimize MAE + λ·Σw² with Adam over seeded shuffled mini-batches.
/// Returns the weights of the best validation epoch together with the
/// per-epoch loss curves. Fully reproducible from (seed, spec, data).
inline FitResult fit(const LstmModel& init, const WindowedDataset& train,
                     const WindowedDataset& val, const TrainSpec& spec) {
  validate_train_spec(spec);
  validate_config(init.config);
  if (train.size() == 0 || val.size() == 0) {
    throw InsufficientDataError("train: empty training or validation set");
  }
  if (train.window != init.config.window || train.features != init.config.features) {
    throw ShapeError("train: dataset shape does not match model config");
  }

  const auto start_time = std::chrono::steady_clock::now();
  FitResult result;
  result.model = init;
  LstmModel& model = result.model;
  TrainReport& report = result.report;

  AdamState adam = make_adam(model.config, spec.eta);
  Rng shuffle_rng(Rng::mix(spec.seed, 0x5148));
  std::uint64_t dropout_counter = 0;

  ParamSet best_params = model.params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t epochs_without_improvement = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  ParamSet batch_grads = make_zero_params(model.config);

  for (std::size_t epoch = 1; epoch <= spec.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);

    double abs_err_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += spec.batch_size) {
      const std::size_t end = std::min(begin + spec.batch_size, order.size());
      const std::size_t batch_n = end - begin;

      zero_params(batch_grads);
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t idx = order[k];
        const std::uint64_t mask_seed = Rng::mix(spec.seed, 0xd201 + dropout_counter++);
        const ForwardCache cache =
            model_forward(model, train.inputs[idx], RunMode::train, mask_seed);
        const double diff = cache.prediction - train.targets[idx];
        abs_err_sum += std::abs(diff);
        const double d_pred = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        axpy_params(batch_grads, model_backward(model, cache, d_pred, model.config.l2_lambda));
      }
      // averaging keeps the objective at batch MAE + λ·Σw²
      scale_params(batch_grads, 1.0 / static_cast<double>(batch_n));
      adam_step(model.params, batch_grads, adam);
    }
    report.train_mae.push_back(abs_err_sum / static_cast<double>(train.size()));

    const double val_mae = detail::eval_mae(model, val);
    if (!std::isfinite(val_mae)) {
      throw TrainError("train: validation MAE diverged at epoch " + std::to_string(epoch));
    }
    report.val_mae.push_back(val_mae);

    if (val_mae < best_val) {
      // strict-minimum tracking decides which weights are kept
      const bool counts_as_progress = (best_val - val_mae) > spec.min_delta;
      best_val = val_mae;
      best_params = model.params;
      report.best_epoch = epoch;
      if (counts_as_progress) {
        epochs_without_improvement = 0;
      } else {
        ++epochs_without_improvement;
      }
    } else {
      ++epochs_without_improvement;
    }
    if (epochs_without_improvement >= spec.patience && epoch < spec.max_epochs) {
      report.stopped_early = true;
      break;
    }
  }

  model.params = best_params;
  report.best_val_mae = best_val;
  report.final_train_mae = detail::eval_mae(model, train);
  report.final_val_mae = detail::eval_mae(model, val);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return result;
}

/// Hyperparameter search space of the desk-scale grid.
struct GridSpec {
  std::vector<std::size_t> windows = {8, 12, 16, 20, 24};
  std::vector<double> etas = {1e-3, 1e-4, 1e-5};
  std::vector<std::size_t> batch_sizes = {16, 32, 48, 64};

  std::size_t trial_count() const { return windows.size() * etas.size() * batch_sizes.size(); }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline void validate_grid(const GridSpec& spec) {
  if (spec.windows.empty() || spec.etas.empty() || spec.batch_sizes.empty()) {
    throw DomainError("grid: every search dimension needs at least one value");
  }
}

struct GridTrial {
  std::size_t window = 0;
  double eta = 0.0;
  std::size_t batch_size = 0;
  bool ok = false;
  double val_r2 = 0.0;
  double val_mae = 0.0;
  std::size_t best_epoch = 0;
  std::string error;
};

struct GridResult {
  GridTrial best;
  std::vector<GridTrial> trials;  // in enumeration order (W, eta, batch)
};

/// Datasets must be rebuilt per window size; the search receives a
/// builder instead of fixed data.
using DatasetBuilder =
    std::function<std::pair<WindowedDataset, WindowedDataset>(std::size_t window)>;

/// Train one model per (window, eta, batch) combination and rank by
/// validation R². Ties break to the smaller window, then the larger
/// batch, then the larger eta. Failed trials are recorded, not fatal.
inline GridResult grid_search(const GridSpec& grid, const DatasetBuilder& build_datasets,
                              const ModelConfig& base_config, const TrainSpec& base_spec,
                              int jobs = 1) {
  validate_grid(grid);
  std::vector<GridTrial> trials;
  for (std::size_t w : grid.windows) {
    for (double eta : grid.etas) {
      for (std::size_t batch : grid.batch_sizes) {
        GridTrial t;
        t.window = w;
        t.eta = eta;
        t.batch_size = batch;
        trials.push_back(t);
      }
    }
  }

  auto run_trial = [&](std::size_t index) {
    GridTrial& trial = trials[index];
    try {
      auto [train_ds, val_ds] = build_datasets(trial.window);
      ModelConfig config = base_config;
      config.window = trial.window;
      config.features = train_ds.features;
      TrainSpec spec = base_spec;
      spec.batch_size = trial.batch_size;
      spec.eta = trial.eta;
      spec.seed = Rng::mix(base_spec.seed, 0x6721 + index);

      LstmModel model;
      model.config = config;
      model.params = init_params(config, Rng::mix(spec.seed, 0x11));
      const FitResult fitted = fit(model, train_ds, val_ds, spec);

      std::vector<double> preds;
      preds.reserve(val_ds.size());
      for (const auto& window : val_ds.inputs) {
        preds.push_back(model_forward(fitted.model, window, RunMode::eval).prediction);
      }
      trial.val_r2 = r2_direct(val_ds.targets, preds);
      trial.val_mae = fitted.report.best_val_mae;
      trial.best_epoch = fitted.report.best_epoch;
      trial.ok = true;
    } catch (const Error& e) {
      trial.ok = false;
      trial.error = e.what();
    }
  };

  if (jobs <= 1 || trials.size() <= 1) {
    for (std::size_t i = 0; i < trials.size(); ++i) run_trial(i);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next.fetch_add(1); i < trials.size(); i = next.fetch_add(1)) {
        run_trial(i);
      }
    };
    std::vector<std::thread> pool;
    const std::size_t n_workers = std::min<std::size_t>(jobs, trials.size());
    pool.reserve(n_workers);
    for (std::size_t k = 0; k < n_workers; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  const GridTrial* best = nullptr;
  auto better = [](const GridTrial& a, const GridTrial& b) {
    if (a.val_r2 != b.val_r2) return a.val_r2 > b.val_r2;
    if (a.window != b.window) return a.window < b.window;
    if (a.batch_size != b.batch_size) return a.batch_size > b.batch_size;
    return a.eta > b.eta;
  };
  for (const auto& trial : trials) {
    if (!trial.ok) continue;
    if (best == nullptr || better(trial, *best)) best = &trial;
  }
  if (best == nullptr) throw TrainError("grid: every trial failed");

  GridResult result;
  result.best = *best;
  result.trials = std::move(trials);
  return result;
}

}  // namespace aircal
