#pragma once

// LSTM(hidden) -> Dense(dense, relu) -> Dense(9, softmax) over a 4x6 window.
//
// Gate equations, with [h, x] the concatenation of previous hidden state and
// current input:
//   f  = sigmoid(W_f [h, x] + b_f)
//   i  = sigmoid(W_i [h, x] + b_i)
//   C~ = tanh   (W_C [h, x] + b_C)
//   C' = f * C + i * C~
//   o  = sigmoid(W_o [h, x] + b_o)
//   h' = o * tanh(C')

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "mdsim/core.hpp"
#include "mdsim/features.hpp"

namespace mdsim::nn {

struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  bool operator==(const Tensor&) const = default;
};

inline constexpr int kNumTensors = 12;

inline constexpr std::array<std::string_view, kNumTensors> kTensorNames = {
    "W_f", "W_i", "W_C", "W_o", "b_f", "b_i", "b_C", "b_o",
    "dense1_W", "dense1_b", "dense2_W", "dense2_b"};

enum Gate : int { gate_f = 0, gate_i = 1, gate_c = 2, gate_o = 3 };

struct LstmParams {
  int hidden = 0;
  int input = kNumFeatures;
  int dense = 0;
  int classes = kNumLabels;

  std::array<Tensor, 4> w;  // hidden x (hidden + input), order f, i, C, o
  std::array<Tensor, 4> b;  // hidden x 1
  Tensor dense1_w;          // dense x hidden
  Tensor dense1_b;          // dense x 1
  Tensor dense2_w;          // classes x dense
  Tensor dense2_b;          // classes x 1

  static LstmParams zeros(int hidden, int dense) {
    if (hidden <= 0 || dense <= 0) throw std::invalid_argument("layer sizes must be positive");
    LstmParams p;
    p.hidden = hidden;
    p.dense = dense;
    for (int g = 0; g < 4; ++g) {
      p.w[g] = Tensor(hidden, hidden + p.input);
      p.b[g] = Tensor(hidden, 1);
    }
    p.dense1_w = Tensor(dense, hidden);
    p.dense1_b = Tensor(dense, 1);
    p.dense2_w = Tensor(p.classes, dense);
    p.dense2_b = Tensor(p.classes, 1);
    return p;
  }

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases included.
  static LstmParams random(int hidden, int dense, std::uint64_t seed) {
    LstmParams p = zeros(hidden, dense);
    std::mt19937_64 rng(seed);
    auto fill = [&rng](Tensor& t, int fan_in) {
      const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> u(-a, a);
      for (double& v : t.data) v = u(rng);
    };
    for (int g = 0; g < 4; ++g) {
      fill(p.w[g], hidden + p.input);
      fill(p.b[g], hidden + p.input);
    }
    fill(p.dense1_w, hidden);
    fill(p.dense1_b, hidden);
    fill(p.dense2_w, dense);
    fill(p.dense2_b, dense);
    return p;
  }

  std::array<Tensor*, kNumTensors> tensors() {
    return {&w[0], &w[1], &w[2], &w[3], &b[0], &b[1], &b[2], &b[3],
            &dense1_w, &dense1_b, &dense2_w, &dense2_b};
  }
  std::array<const Tensor*, kNumTensors> tensors() const {
    return {&w[0], &w[1], &w[2], &w[3], &b[0], &b[1], &b[2], &b[3],
            &dense1_w, &dense1_b, &dense2_w, &dense2_b};
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Tensor* t : tensors()) n += t->size();
    return n;
  }

  bool all_finite() const {
    for (const Tensor* t : tensors())
      for (double v : t->data)
        if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const LstmParams&) const = default;
};

struct CellState {
  std::vector<double> h;
  std::vector<double> c;

  static CellState zeros(int hidden) {
    return {std::vector<double>(hidden, 0.0), std::vector<double>(hidden, 0.0)};
  }
};

using Probabilities = std::array<double, kNumLabels>;

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace detail {

// Everything one step needs to be differentiated later.
struct StepCache {
  std::vector<double> h_prev, c_prev, x;
  std::vector<double> f, i, g, o, c, tanh_c, h;
};

inline double gate_preactivation(const LstmParams& p, int gate, int row, std::span<const double> h,
                                 std::span<const double> x) {
  const Tensor& w = p.w[gate];
  const double* wr = &w.data[static_cast<std::size_t>(row) * w.cols];
  double z = p.b[gate].data[row];
  for (int k = 0; k < p.hidden; ++k) z += wr[k] * h[k];
  for (int k = 0; k < p.input; ++k) z += wr[p.hidden + k] * x[k];
  return z;
}

inline void step(const LstmParams& p, std::span<const double> x, StepCache& s) {
  const int H = p.hidden;
  s.f.resize(H);
  s.i.resize(H);
  s.g.resize(H);
  s.o.resize(H);
  s.c.resize(H);
  s.tanh_c.resize(H);
  s.h.resize(H);
  for (int r = 0; r < H; ++r) {
    s.f[r] = sigmoid(gate_preactivation(p, gate_f, r, s.h_prev, x));
    s.i[r] = sigmoid(gate_preactivation(p, gate_i, r, s.h_prev, x));
    s.g[r] = std::tanh(gate_preactivation(p, gate_c, r, s.h_prev, x));
    s.o[r] = sigmoid(gate_preactivation(p, gate_o, r, s.h_prev, x));
  }
  for (int r = 0; r < H; ++r) {
    s.c[r] = s.f[r] * s.c_prev[r] + s.i[r] * s.g[r];
    s.tanh_c[r] = std::tanh(s.c[r]);
    s.h[r] = s.o[r] * s.tanh_c[r];
  }
}

struct ForwardCache {
  std::array<StepCache, kWindowRows> steps;
  std::vector<double> z1, a1;
  Probabilities z2{}, p{};
};

inline void softmax(const Probabilities& z, Probabilities& p) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (int k = 0; k < kNumLabels; ++k) {
    p[k] = std::exp(z[k] - m);
    sum += p[k];
  }
  for (double& v : p) v /= sum;
}

inline void forward(const LstmParams& p, const WindowRows& rows, ForwardCache& fc) {
  const int H = p.hidden;
  std::vector<double> h(H, 0.0), c(H, 0.0);
  for (int t = 0; t < kWindowRows; ++t) {
    StepCache& s = fc.steps[t];
    s.h_prev = h;
    s.c_prev = c;
    s.x.assign(rows[t].begin(), rows[t].end());
    step(p, s.x, s);
    h = s.h;
    c = s.c;
  }
  fc.z1.assign(p.dense, 0.0);
  fc.a1.assign(p.dense, 0.0);
  for (int r = 0; r < p.dense; ++r) {
    double z = p.dense1_b.data[r];
    const double* wr = &p.dense1_w.data[static_cast<std::size_t>(r) * H];
    for (int k = 0; k < H; ++k) z += wr[k] * h[k];
    fc.z1[r] = z;
    fc.a1[r] = z > 0.0 ? z : 0.0;
  }
  for (int r = 0; r < kNumLabels; ++r) {
    double z = p.dense2_b.data[r];
    const double* wr = &p.dense2_w.data[static_cast<std::size_t>(r) * p.dense];
    for (int k = 0; k < p.dense; ++k) z += wr[k] * fc.a1[k];
    fc.z2[r] = z;
  }
  softmax(fc.z2, fc.p);
}

inline void require_finite(const WindowRows& rows) {
  for (const auto& r : rows)
    for (double v : r)
      if (!std::isfinite(v)) throw std::domain_error("non-finite input to the detector");
}

}  // namespace detail

inline CellState lstm_cell(std::span<const double> x, const CellState& state, const LstmParams& p) {
  if (static_cast<int>(x.size()) != p.input || static_cast<int>(state.h.size()) != p.hidden ||
      static_cast<int>(state.c.size()) != p.hidden) {
    throw std::invalid_argument("lstm_cell: shape mismatch");
  }
  for (double v : x)
    if (!std::isfinite(v)) throw std::domain_error("lstm_cell: non-finite input");
  detail::StepCache s;
  s.h_prev = state.h;
  s.c_prev = state.c;
  detail::step(p, x, s);
  return {std::move(s.h), std::move(s.c)};
}

inline Probabilities forward(const WindowRows& scaled, const LstmParams& p) {
  detail::require_finite(scaled);
  detail::ForwardCache fc;
  detail::forward(p, scaled, fc);
  return fc.p;
}

inline Probabilities softmax(const Probabilities& logits) {
  Probabilities p{};
  detail::softmax(logits, p);
  return p;
}

// Pre-softmax output; exposed for the softmax invariance check.
inline Probabilities logits(const WindowRows& scaled, const LstmParams& p) {
  detail::require_finite(scaled);
  detail::ForwardCache fc;
  detail::forward(p, scaled, fc);
  return fc.z2;
}

inline Label argmax_label(const Probabilities& p) {
  return static_cast<Label>(std::max_element(p.begin(), p.end()) - p.begin());
}

inline constexpr double kProbabilityFloor = 1e-12;

struct LossAndGradients {
  double loss = 0.0;
  LstmParams grad;
  std::size_t correct = 0;  // argmax hits in the batch, for training stats
};

// Mean sparse categorical cross-entropy over the batch and its gradient with
// respect to every parameter (backpropagation through the 4 steps).
inline LossAndGradients loss_and_gradients(std::span<const FeatureWindow> batch, const LstmParams& p) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const int H = p.hidden;
  const int HX = H + p.input;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  LossAndGradients out;
  out.grad = LstmParams::zeros(p.hidden, p.dense);
  LstmParams& g = out.grad;

  detail::ForwardCache fc;
  std::vector<double> dz1(p.dense), dh(H), dc(H), dh_prev(H);
  std::array<std::vector<double>, 4> dz;
  for (auto& v : dz) v.resize(H);

  for (const auto& w : batch) {
    detail::require_finite(w.rows);
    const int y = to_int(w.label);
    detail::forward(p, w.rows, fc);
    out.loss -= std::log(std::max(fc.p[y], kProbabilityFloor));
    if (argmax_label(fc.p) == w.label) ++out.correct;

    Probabilities dz2;
    for (int k = 0; k < kNumLabels; ++k) dz2[k] = (fc.p[k] - (k == y ? 1.0 : 0.0)) * inv_n;

    // dense2
    std::fill(dz1.begin(), dz1.end(), 0.0);
    for (int r = 0; r < kNumLabels; ++r) {
      g.dense2_b.data[r] += dz2[r];
      double* gw = &g.dense2_w.data[static_cast<std::size_t>(r) * p.dense];
      const double* pw = &p.dense2_w.data[static_cast<std::size_t>(r) * p.dense];
      for (int k = 0; k < p.dense; ++k) {
        gw[k] += dz2[r] * fc.a1[k];
        dz1[k] += pw[k] * dz2[r];
      }
    }
    // relu + dense1
    const auto& h_last = fc.steps[kWindowRows - 1].h;
    std::fill(dh.begin(), dh.end(), 0.0);
    for (int r = 0; r < p.dense; ++r) {
      if (fc.z1[r] <= 0.0) continue;
      const double d = dz1[r];
      g.dense1_b.data[r] += d;
      double* gw = &g.dense1_w.data[static_cast<std::size_t>(r) * H];
      const double* pw = &p.dense1_w.data[static_cast<std::size_t>(r) * H];
      for (int k = 0; k < H; ++k) {
        gw[k] += d * h_last[k];
        dh[k] += pw[k] * d;
      }
    }
    // through time
    std::fill(dc.begin(), dc.end(), 0.0);
    for (int t = kWindowRows - 1; t >= 0; --t) {
      const auto& s = fc.steps[t];
      for (int r = 0; r < H; ++r) {
        const double d_o = dh[r] * s.tanh_c[r];
        dc[r] += dh[r] * s.o[r] * (1.0 - s.tanh_c[r] * s.tanh_c[r]);
        dz[gate_o][r] = d_o * s.o[r] * (1.0 - s.o[r]);
        dz[gate_f][r] = dc[r] * s.c_prev[r] * s.f[r] * (1.0 - s.f[r]);
        dz[gate_i][r] = dc[r] * s.g[r] * s.i[r] * (1.0 - s.i[r]);
        dz[gate_c][r] = dc[r] * s.i[r] * (1.0 - s.g[r] * s.g[r]);
      }
      std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
      for (int gate = 0; gate < 4; ++gate) {
        const Tensor& pw = p.w[gate];
        Tensor& gw = g.w[gate];
        for (int r = 0; r < H; ++r) {
          const double d = dz[gate][r];
          if (d == 0.0) continue;
          g.b[gate].data[r] += d;
          double* gr = &gw.data[static_cast<std::size_t>(r) * HX];
          const double* pr = &pw.data[static_cast<std::size_t>(r) * HX];
          for (int k = 0; k < H; ++k) {
            gr[k] += d * s.h_prev[k];
            dh_prev[k] += pr[k] * d;
          }
          for (int k = 0; k < p.input; ++k) gr[H + k] += d * s.x[k];
        }
      }
      for (int r = 0; r < H; ++r) dc[r] *= s.f[r];
      dh.swap(dh_prev);
    }
  }
  out.loss *= inv_n;
  return out;
}

inline double loss(std::span<const FeatureWindow> batch, const LstmParams& p) {
  double total = 0.0;
  for (const auto& w : batch) {
    auto prob = forward(w.rows, p);
    total -= std::log(std::max(prob[to_int(w.label)], kProbabilityFloor));
  }
  return total / static_cast<double>(batch.size());
}

// ---------------------------------------------------------------------------
// AdamW: Adam moments plus weight decay applied directly to the parameters.

struct AdamWConfig {
  double learning_rate = 0.001;
  double weight_decay = 0.004;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamMoments {
  LstmParams m;
  LstmParams v;
  long long t = 0;  // steps taken so far

  static AdamMoments for_params(const LstmParams& p) {
    return {LstmParams::zeros(p.hidden, p.dense), LstmParams::zeros(p.hidden, p.dense), 0};
  }
};

inline void adamw_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                         std::span<double> v, long long t, const AdamWConfig& cfg) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < theta.size(); ++k) {
    m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * grad[k];
    v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
    const double m_hat = m[k] / bc1;
    const double v_hat = v[k] / bc2;
    theta[k] = theta[k] - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon) -
               cfg.learning_rate * cfg.weight_decay * theta[k];
  }
}

// Advances moments.t and updates every tensor in place.
inline void adamw_step(LstmParams& params, const LstmParams& grads, AdamMoments& moments,
                       const AdamWConfig& cfg) {
  ++moments.t;
  auto pt = params.tensors();
  auto gt = grads.tensors();
  auto mt = moments.m.tensors();
  auto vt = moments.v.tensors();
  for (int k = 0; k < kNumTensors; ++k) {
    if (!pt[k]->same_shape(*gt[k])) throw std::invalid_argument("adamw_step: shape mismatch");
    adamw_update(pt[k]->data, gt[k]->data, mt[k]->data, vt[k]->data, moments.t, cfg);
  }
}

}  // namespace mdsim::nn
