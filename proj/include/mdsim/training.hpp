#pragma once

// Mini-batch AdamW training with early stopping on validation accuracy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdsim/features.hpp"
#include "mdsim/lstm.hpp"

namespace mdsim::nn {

struct TrainConfig {
  int hidden = 32;  // 256 at full scale
  int dense = 156;
  double learning_rate = 0.001;
  int batch_size = 64;
  int max_epochs = 100;
  double min_delta = 0.001;
  int patience = 10;
  bool restore_best = true;
  double weight_decay = 0.004;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 42;

  AdamWConfig optimizer() const {
    return {learning_rate, weight_decay, beta1, beta2, epsilon};
  }

  void validate() const {
    if (hidden <= 0 || dense <= 0 || batch_size <= 0 || max_epochs <= 0 || patience < 1 ||
        learning_rate < 0 || weight_decay < 0 || !(beta1 > 0 && beta1 < 1) ||
        !(beta2 > 0 && beta2 < 1) || !(epsilon > 0) || min_delta < 0) {
      throw std::invalid_argument("invalid training configuration");
    }
  }
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct TrainResult {
  LstmParams params;
  std::vector<EpochStats> history;
  int best_epoch = 0;  // epoch whose weights were returned
  bool stopped_early = false;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double accuracy(std::span<const FeatureWindow> windows, const LstmParams& p) {
  if (windows.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& w : windows) hits += argmax_label(forward(w.rows, p)) == w.label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(windows.size());
}

using EpochCallback = std::function<void(const EpochStats&)>;

// The patience counter follows the usual rule (an epoch counts as an
// improvement only when it beats the reference by more than min_delta), while
// the returned weights are those of the first epoch with the highest
// validation accuracy.
inline TrainResult train(const SplitDataset& data, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (data.train.empty() || data.val.empty()) {
    throw std::invalid_argument("training and validation sets must be non-empty");
  }
  TrainResult result;
  LstmParams params = LstmParams::random(cfg.hidden, cfg.dense, derive_seed(cfg.seed, 1));
  AdamMoments moments = AdamMoments::for_params(params);
  const AdamWConfig opt = cfg.optimizer();

  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, 2));
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<FeatureWindow> batch;
  batch.reserve(cfg.batch_size);

  double reference = -std::numeric_limits<double>::infinity();
  double best_val = -std::numeric_limits<double>::infinity();
  LstmParams best = params;
  int wait = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(data.train[order[k]]);
      auto lg = loss_and_gradients(batch, params);
      if (!std::isfinite(lg.loss)) {
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(start / cfg.batch_size));
      }
      loss_sum += lg.loss * static_cast<double>(batch.size());
      correct += lg.correct;
      adamw_step(params, lg.grad, moments, opt);
    }
    if (!params.all_finite()) throw TrainingDiverged("non-finite parameters after epoch " + std::to_string(epoch));

    EpochStats st;
    st.epoch = epoch;
    st.train_loss = loss_sum / static_cast<double>(order.size());
    st.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    st.val_acc = accuracy(data.val, params);
    result.history.push_back(st);
    if (on_epoch) on_epoch(st);

    if (st.val_acc > best_val) {
      best_val = st.val_acc;
      best = params;
      result.best_epoch = epoch;
    }
    if (st.val_acc - cfg.min_delta > reference) {
      reference = st.val_acc;
      wait = 0;
    } else if (++wait >= cfg.patience) {
      result.stopped_early = true;
      break;
    }
  }
  if (cfg.restore_best) {
    result.params = std::move(best);
  } else {
    result.params = std::move(params);
    result.best_epoch = static_cast<int>(result.history.size());
  }
  return result;
}

inline void write_history(std::ostream& os, std::span<const EpochStats> history) {
  os << "epoch,train_loss,train_acc,val_acc\n";
  for (const auto& e : history) {
    os << e.epoch << ',' << fmt_double(e.train_loss) << ',' << fmt_double(e.train_acc) << ','
       << fmt_double(e.val_acc) << '\n';
  }
}

}  // namespace mdsim::nn
