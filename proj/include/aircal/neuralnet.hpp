#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "aircal/dataset.hpp"
#include "aircal/errors.hpp"
#include "aircal/rng.hpp"
#include "aircal/tensor.hpp"

namespace aircal {

/// Architecture and regularization settings of the calibration network:
/// LSTM block → dense + Leaky-ReLU → dropout → linear output.
struct ModelConfig {
  std::size_t window = 12;
  std::size_t hidden = 128;
  std::size_t dense = 64;
  double dropout_rate = 0.3;
  double leaky_alpha = 0.01;
  double l2_lambda = 1e-4;
  std::size_t features = 0;  // filled from the feature matrix

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void validate_config(const ModelConfig& c) {
  if (c.window < 1 || c.hidden < 1 || c.dense < 1 || c.features < 1) {
    throw DomainError("model: window/hidden/dense/features must be positive");
  }
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) {
    throw DomainError("model: dropout rate must lie in [0, 1)");
  }
  if (!(c.leaky_alpha >= 0.0) || !(c.l2_lambda >= 0.0)) {
    throw DomainError("model: leaky_alpha and l2_lambda must be non-negative");
  }
}

/// LSTM weights with the gate blocks stacked row-wise in the fixed order
/// [input i, forget f, cell-candidate g, output o].
struct LstmParams {
  Matrix w_input;            // (4H) × F
  Matrix w_hidden;           // (4H) × H
  std::vector<double> bias;  // 4H

  friend bool operator==(const LstmParams&, const LstmParams&) = default;
};

/// All trainable buffers of the network; gradients and Adam moments reuse
/// the same layout.
struct ParamSet {
  LstmParams lstm;
  Matrix dense_w;               // D × H
  std::vector<double> dense_b;  // D
  std::vector<double> out_w;    // D
  double out_b = 0.0;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

inline ParamSet make_zero_params(const ModelConfig& c) {
  ParamSet p;
  p.lstm.w_input = Matrix(4 * c.hidden, c.features);
  p.lstm.w_hidden = Matrix(4 * c.hidden, c.hidden);
  p.lstm.bias.assign(4 * c.hidden, 0.0);
  p.dense_w = Matrix(c.dense, c.hidden);
  p.dense_b.assign(c.dense, 0.0);
  p.out_w.assign(c.dense, 0.0);
  p.out_b = 0.0;
  return p;
}

/// Closed-form trainable parameter count: 4H(F+H+1) + D(H+1) + (D+1).
inline std::size_t param_count(const ModelConfig& c) {
  return 4 * c.hidden * (c.features + c.hidden + 1) + c.dense * (c.hidden + 1) + (c.dense + 1);
}

/// Visit every parameter buffer in the documented serialization order.
/// `is_weight` marks matrices subject to L2 (biases are exempt).
template <typename Fn>
void for_each_buffer(ParamSet& p, Fn&& fn) {
  fn(std::span<double>(p.lstm.w_input.data()), true);
  fn(std::span<double>(p.lstm.w_hidden.data()), true);
  fn(std::span<double>(p.lstm.bias), false);
  fn(std::span<double>(p.dense_w.data()), true);
  fn(std::span<double>(p.dense_b), false);
  fn(std::span<double>(p.out_w), true);
  fn(std::span<double>(&p.out_b, 1), false);
}

template <typename Fn>
void for_each_buffer(const ParamSet& p, Fn&& fn) {
  fn(std::span<const double>(p.lstm.w_input.data()), true);
  fn(std::span<const double>(p.lstm.w_hidden.data()), true);
  fn(std::span<const double>(p.lstm.bias), false);
  fn(std::span<const double>(p.dense_w.data()), true);
  fn(std::span<const double>(p.dense_b), false);
  fn(std::span<const double>(p.out_w), true);
  fn(std::span<const double>(&p.out_b, 1), false);
}

/// The calibration model: architecture, weights, and the input scaling it
/// was trained with. Targets stay in physical units unless a target
/// scaler was fitted (mu 0 / sigma 1 means off).
struct LstmModel {
  ModelConfig config;
  ParamSet params;
  NormStats norm;
  double target_mu = 0.0;
  double target_sigma = 1.0;

  friend bool operator==(const LstmModel&, const LstmModel&) = default;
};

enum class RunMode { train, eval };

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double leaky_relu(double x, double alpha) { return x >= 0.0 ? x : alpha * x; }

/// Per-step activations kept for backpropagation through time.
struct LstmCache {
  Matrix inputs;     // W × F (copy of the sequence)
  Matrix gate_i, gate_f, gate_g, gate_o;  // W × H each
  Matrix cell, cell_tanh, hidden;         // W × H each

  std::span<const double> last_hidden() const { return hidden.row(hidden.rows() - 1); }
};

/// Full forward state of one sequence evaluation.
struct ForwardCache {
  LstmCache lstm;
  std::vector<double> dense_pre;   // D, before Leaky-ReLU
  std::vector<double> dense_act;   // D, after Leaky-ReLU
  std::vector<double> drop_scale;  // D; 0 dropped, 1/(1-rate) kept, 1 in eval
  double prediction = 0.0;         // network output (scaled target space)
};

/// Run the LSTM recurrence over a W×F sequence from zero initial state.
inline LstmCache lstm_forward(const LstmParams& params, const Matrix& sequence) {
  const std::size_t hidden_n = params.w_hidden.cols();
  if (params.w_input.rows() != 4 * hidden_n || params.w_hidden.rows() != 4 * hidden_n ||
      params.bias.size() != 4 * hidden_n || sequence.cols() != params.w_input.cols() ||
      sequence.rows() == 0) {
    throw ShapeError("model: LSTM parameter/input shape mismatch");
  }
  const std::size_t steps = sequence.rows();
  LstmCache cache;
  cache.inputs = sequence;
  cache.gate_i = cache.gate_f = cache.gate_g = cache.gate_o = Matrix(steps, hidden_n);
  cache.cell = cache.cell_tanh = cache.hidden = Matrix(steps, hidden_n);

  std::vector<double> pre(4 * hidden_n);
  std::vector<double> h_prev(hidden_n, 0.0), c_prev(hidden_n, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    matvec(params.w_input, sequence.row(t), pre);
    for (std::size_t r = 0; r < 4 * hidden_n; ++r) {
      const auto row = params.w_hidden.row(r);
      double acc = params.bias[r];
      for (std::size_t c = 0; c < hidden_n; ++c) acc += row[c] * h_prev[c];
      pre[r] += acc;
    }
    for (std::size_t j = 0; j < hidden_n; ++j) {
      const double gi = sigmoid(pre[j]);
      const double gf = sigmoid(pre[hidden_n + j]);
      const double gg = std::tanh(pre[2 * hidden_n + j]);
      const double go = sigmoid(pre[3 * hidden_n + j]);
      const double c_new = gf * c_prev[j] + gi * gg;
      const double c_tanh = std::tanh(c_new);
      cache.gate_i(t, j) = gi;
      cache.gate_f(t, j) = gf;
      cache.gate_g(t, j) = gg;
      cache.gate_o(t, j) = go;
      cache.cell(t, j) = c_new;
      cache.cell_tanh(t, j) = c_tanh;
      cache.hidden(t, j) = go * c_tanh;
    }
    for (std::size_t j = 0; j < hidden_n; ++j) {
      h_prev[j] = cache.hidden(t, j);
      c_prev[j] = cache.cell(t, j);
    }
  }
  return cache;
}

/// Evaluate the whole network on one sequence. Train mode applies an
/// inverted dropout mask drawn from `rng_seed`; eval mode is
/// deterministic and applies no dropout.
inline ForwardCache model_forward(const LstmModel& model, const Matrix& sequence, RunMode mode,
                                  std::uint64_t rng_seed = 0) {
  const ModelConfig& cfg = model.config;
  if (sequence.rows() != cfg.window || sequence.cols() != cfg.features) {
    throw ShapeError("model: sequence shape " + std::to_string(sequence.rows()) + "x" +
                     std::to_string(sequence.cols()) + " does not match configured " +
                     std::to_string(cfg.window) + "x" + std::to_string(cfg.features));
  }
  ForwardCache cache;
  cache.lstm = lstm_forward(model.params.lstm, sequence);

  const auto h_last = cache.lstm.last_hidden();
  cache.dense_pre.resize(cfg.dense);
  matvec(model.params.dense_w, h_last, cache.dense_pre);
  cache.dense_act.resize(cfg.dense);
  for (std::size_t j = 0; j < cfg.dense; ++j) {
    cache.dense_pre[j] += model.params.dense_b[j];
    cache.dense_act[j] = leaky_relu(cache.dense_pre[j], cfg.leaky_alpha);
  }

  cache.drop_scale.assign(cfg.dense, 1.0);
  if (mode == RunMode::train && cfg.dropout_rate > 0.0) {
    Rng rng(rng_seed);
    const double keep_scale = 1.0 / (1.0 - cfg.dropout_rate);
    for (std::size_t j = 0; j < cfg.dense; ++j) {
      cache.drop_scale[j] = rng.uniform() < cfg.dropout_rate ? 0.0 : keep_scale;
    }
  }

  double y = model.params.out_b;
  for (std::size_t j = 0; j < cfg.dense; ++j) {
    y += model.params.out_w[j] * cache.dense_act[j] * cache.drop_scale[j];
  }
  cache.prediction = y;
  return cache;
}

/// Exact gradients of d_prediction·prediction plus the L2 penalty
/// l2_lambda·Σw² (weights only) with respect to every parameter,
/// backpropagated through all W steps of the recurrence.
inline ParamSet model_backward(const LstmModel& model, const ForwardCache& cache,
                               double d_prediction, double l2_lambda) {
  const ModelConfig& cfg = model.config;
  const std::size_t hidden_n = cfg.hidden;
  if (cache.lstm.hidden.rows() != cfg.window || cache.lstm.hidden.cols() != hidden_n ||
      cache.dense_act.size() != cfg.dense || cache.lstm.inputs.cols() != cfg.features) {
    throw IntegrityError("model: forward cache does not match this model");
  }

  ParamSet grads = make_zero_params(cfg);

  // Output layer and dropout.
  std::vector<double> d_act(cfg.dense);
  for (std::size_t j = 0; j < cfg.dense; ++j) {
    grads.out_w[j] = d_prediction * cache.dense_act[j] * cache.drop_scale[j];
    d_act[j] = d_prediction * model.params.out_w[j] * cache.drop_scale[j];
  }
  grads.out_b = d_prediction;

  // Dense layer through Leaky-ReLU.
  std::vector<double> d_pre(cfg.dense);
  for (std::size_t j = 0; j < cfg.dense; ++j) {
    d_pre[j] = d_act[j] * (cache.dense_pre[j] >= 0.0 ? 1.0 : cfg.leaky_alpha);
  }
  outer_add(grads.dense_w, d_pre, cache.lstm.last_hidden());
  for (std::size_t j = 0; j < cfg.dense; ++j) grads.dense_b[j] = d_pre[j];

  std::vector<double> d_hidden(hidden_n, 0.0);
  matvec_transpose_add(model.params.dense_w, d_pre, d_hidden);

  // Backpropagation through time.
  std::vector<double> d_cell(hidden_n, 0.0);
  std::vector<double> d_gates(4 * hidden_n);
  std::vector<double> d_hidden_prev(hidden_n);
  for (std::size_t step = cfg.window; step-- > 0;) {
    for (std::size_t j = 0; j < hidden_n; ++j) {
      const double gi = cache.lstm.gate_i(step, j);
      const double gf = cache.lstm.gate_f(step, j);
      const double gg = cache.lstm.gate_g(step, j);
      const double go = cache.lstm.gate_o(step, j);
      const double c_tanh = cache.lstm.cell_tanh(step, j);
      const double c_prev = step > 0 ? cache.lstm.cell(step - 1, j) : 0.0;

      const double d_out_gate = d_hidden[j] * c_tanh;
      const double dc = d_cell[j] + d_hidden[j] * go * (1.0 - c_tanh * c_tanh);

      d_gates[j] = dc * gg * gi * (1.0 - gi);                       // input gate
      d_gates[hidden_n + j] = dc * c_prev * gf * (1.0 - gf);        // forget gate
      d_gates[2 * hidden_n + j] = dc * gi * (1.0 - gg * gg);        // candidate
      d_gates[3 * hidden_n + j] = d_out_gate * go * (1.0 - go);     // output gate
      d_cell[j] = dc * gf;
    }
    outer_add(grads.lstm.w_input, d_gates, cache.lstm.inputs.row(step));
    if (step > 0) {
      outer_add(grads.lstm.w_hidden, d_gates, cache.lstm.hidden.row(step - 1));
    }
    for (std::size_t r = 0; r < 4 * hidden_n; ++r) grads.lstm.bias[r] += d_gates[r];

    std::fill(d_hidden_prev.begin(), d_hidden_prev.end(), 0.0);
    matvec_transpose_add(model.params.lstm.w_hidden, d_gates, d_hidden_prev);
    std::swap(d_hidden, d_hidden_prev);
  }

  if (l2_lambda > 0.0) {
    auto add_l2 = [l2_lambda](std::span<double> g, std::span<const double> w) {
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += 2.0 * l2_lambda * w[k];
    };
    add_l2(grads.lstm.w_input.data(), model.params.lstm.w_input.data());
    add_l2(grads.lstm.w_hidden.data(), model.params.lstm.w_hidden.data());
    add_l2(grads.dense_w.data(), model.params.dense_w.data());
    add_l2(grads.out_w, model.params.out_w);
  }
  return grads;
}

inline ParamSet model_backward(const LstmModel& model, const ForwardCache& cache,
                               double d_prediction) {
  return model_backward(model, cache, d_prediction, model.config.l2_lambda);
}

/// Sum of the L2 penalty l2_lambda·Σw² over the weight matrices.
inline double l2_penalty(const ParamSet& params, double l2_lambda) {
  if (l2_lambda <= 0.0) return 0.0;
  double sum = 0.0;
  for_each_buffer(params, [&](std::span<const double> buf, bool is_weight) {
    if (!is_weight) return;
    for (double v : buf) sum += v * v;
  });
  return l2_lambda * sum;
}

/// Glorot-uniform weights (s = sqrt(6/(fan_in+fan_out)) per matrix), zero
/// biases except the forget-gate slice, which starts at 1.0.
inline ParamSet init_params(const ModelConfig& cfg, std::uint64_t seed) {
  validate_config(cfg);
  ParamSet p = make_zero_params(cfg);
  Rng rng(seed);
  auto glorot = [&](Matrix& m) {
    const double s = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (double& v : m.data()) v = rng.uniform(-s, s);
  };
  glorot(p.lstm.w_input);
  glorot(p.lstm.w_hidden);
  glorot(p.dense_w);
  {
    const double s = std::sqrt(6.0 / static_cast<double>(1 + cfg.dense));
    for (double& v : p.out_w) v = rng.uniform(-s, s);
  }
  for (std::size_t j = 0; j < cfg.hidden; ++j) p.lstm.bias[cfg.hidden + j] = 1.0;
  return p;
}

/// Eval-mode prediction in physical target units.
inline double predict(const LstmModel& model, const Matrix& sequence) {
  const ForwardCache cache = model_forward(model, sequence, RunMode::eval);
  return cache.prediction * model.target_sigma + model.target_mu;
}

inline std::vector<double> predict_all(const LstmModel& model, const WindowedDataset& data) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& window : data.inputs) out.push_back(predict(model, window));
  return out;
}

}  // namespace aircal
