#pragma once

// Labeled unscaled windows -> trained detector: balance, fit the scaler,
// scale, split, train.

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "mdsim/detector.hpp"
#include "mdsim/features.hpp"
#include "mdsim/training.hpp"

namespace mdsim {

// Which windows the scaler statistics come from. `balanced` uses the training
// mix itself; `regular` uses only the regular windows of that mix, so a few
// huge randomPos deltas do not flatten the small ones.
enum class ScalerFit { balanced, regular };

inline std::string_view scaler_fit_name(ScalerFit f) { return f == ScalerFit::balanced ? "balanced" : "regular"; }

inline ScalerFit scaler_fit_from_name(std::string_view s) {
  if (s == "balanced") return ScalerFit::balanced;
  if (s == "regular") return ScalerFit::regular;
  throw ConfigError("scaler fit must be 'balanced' or 'regular'");
}

struct PipelineConfig {
  nn::TrainConfig train;
  double val_fraction = 0.33;
  std::uint64_t seed = 42;  // balance and split
  ScalerFit scaler_fit = ScalerFit::regular;
};

struct PipelineResult {
  DetectorModel model;
  nn::TrainResult training;
  std::array<std::size_t, kNumLabels> counts_before{};
  std::array<std::size_t, kNumLabels> counts_after{};
  std::vector<int> degenerate_columns;
  double val_accuracy = 0.0;  // of the returned weights
};

inline PipelineResult train_detector(std::span<const FeatureWindow> unscaled, const PipelineConfig& cfg,
                                     const nn::EpochCallback& on_epoch = {}) {
  PipelineResult out;
  out.counts_before = label_counts(unscaled);
  const auto balanced = balance(unscaled, derive_seed(cfg.seed, 1));
  out.counts_after = label_counts(balanced);
  if (cfg.scaler_fit == ScalerFit::balanced) {
    out.model.scaler = fit_scaler(balanced, &out.degenerate_columns);
  } else {
    std::vector<FeatureWindow> regular;
    for (const auto& w : balanced)
      if (w.label == Label::regular) regular.push_back(w);
    out.model.scaler = fit_scaler(regular, &out.degenerate_columns);
  }
  const auto scaled = apply_scaler(balanced, out.model.scaler);
  const auto data = split(scaled, cfg.val_fraction, derive_seed(cfg.seed, 2));
  out.training = nn::train(data, cfg.train, on_epoch);
  out.model.params = out.training.params;
  out.val_accuracy = nn::accuracy(data.val, out.model.params);
  return out;
}

}  // namespace mdsim
