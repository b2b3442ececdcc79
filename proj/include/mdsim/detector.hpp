#pragma once

// Trained detector: network parameters + scaler, its file format, and the
// per-sender online windowing used on board.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "mdsim/features.hpp"
#include "mdsim/lstm.hpp"

namespace mdsim {

struct DetectorModel {
  nn::LstmParams params;
  ScalerParams scaler;

  nn::Probabilities probabilities(const WindowRows& scaled) const { return nn::forward(scaled, params); }
  Label predict_scaled(const WindowRows& scaled) const { return nn::argmax_label(probabilities(scaled)); }

  Label predict(const WindowRows& unscaled) const {
    WindowRows s;
    for (int k = 0; k < kWindowRows; ++k) s[k] = scale_row(unscaled[k], scaler);
    return predict_scaled(s);
  }
};

// ---------------------------------------------------------------------------
// Model file: "MDS1" | u32 hidden | 12 x (u32 rows | u32 cols | f64 data) |
// 6 x f64 scaler mean | 6 x f64 scaler std. Little-endian throughout.

inline void save_model(std::ostream& os, const DetectorModel& m) {
  os.write("MDS1", 4);
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(m.params.hidden));
  for (const nn::Tensor* t : m.params.tensors()) {
    io::put<std::uint32_t>(os, static_cast<std::uint32_t>(t->rows));
    io::put<std::uint32_t>(os, static_cast<std::uint32_t>(t->cols));
    for (double v : t->data) io::put(os, v);
  }
  for (double v : m.scaler.mean) io::put(os, v);
  for (double v : m.scaler.std) io::put(os, v);
  if (!os) throw InputError("failed to write model");
}

inline DetectorModel load_model(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4)) throw FormatError("model file: truncated header");
  if (std::memcmp(magic, "MDS", 3) != 0) throw FormatError("model file: bad magic");
  if (magic[3] != '1') throw FormatError(std::string("model file: unsupported version '") + magic[3] + "'");
  const auto hidden = io::get<std::uint32_t>(is);
  if (hidden == 0 || hidden > 65536) throw FormatError("model file: bad hidden size");

  DetectorModel m;
  std::array<nn::Tensor, nn::kNumTensors> read;
  for (int k = 0; k < nn::kNumTensors; ++k) {
    const auto rows = io::get<std::uint32_t>(is);
    const auto cols = io::get<std::uint32_t>(is);
    if (rows == 0 || cols == 0 || static_cast<std::uint64_t>(rows) * cols > (1ULL << 28)) {
      throw FormatError("model file: bad dims for " + std::string(nn::kTensorNames[k]));
    }
    read[k] = nn::Tensor(static_cast<int>(rows), static_cast<int>(cols));
    for (double& v : read[k].data) v = io::get<double>(is);
  }
  const int H = static_cast<int>(hidden);
  const int dense = read[8].rows;
  m.params = nn::LstmParams::zeros(H, dense);
  auto dst = m.params.tensors();
  for (int k = 0; k < nn::kNumTensors; ++k) {
    if (!dst[k]->same_shape(read[k])) {
      throw FormatError("model file: shape mismatch for " + std::string(nn::kTensorNames[k]));
    }
    *dst[k] = std::move(read[k]);
  }
  for (double& v : m.scaler.mean) v = io::get<double>(is);
  for (double& v : m.scaler.std) v = io::get<double>(is);
  for (double v : m.scaler.std)
    if (!(v > 0)) throw FormatError("model file: scaler std must be positive");
  return m;
}

inline void save_model(const std::string& path, const DetectorModel& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open " + path + " for writing");
  save_model(os, m);
}

inline DetectorModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open model " + path);
  return load_model(is);
}

// ---------------------------------------------------------------------------
// Online windowing for one sender. The first beacon of a window is kept as
// reference; beacons 2..5 become scaled delta rows as they arrive; the fifth
// triggers a prediction and resets the window.

struct OnlineWindowState {
  std::optional<Kinematics> reference;
  double prev_t = 0.0;
  WindowRows rows{};
  int count = 0;  // scaled rows accumulated, 0..4
  std::size_t discarded = 0;

  void clear() {
    reference.reset();
    count = 0;
  }
};

inline std::optional<Label> online_observe(OnlineWindowState& st, const Kinematics& beacon,
                                           const DetectorModel& model) {
  if (!st.reference) {
    st.reference = beacon;
    st.prev_t = beacon.t;
    st.count = 0;
    return std::nullopt;
  }
  if (beacon.t < st.prev_t) {
    st.clear();
    ++st.discarded;
    return std::nullopt;
  }
  st.rows[st.count++] = scale_row(delta_row(*st.reference, st.prev_t, beacon), model.scaler);
  st.prev_t = beacon.t;
  if (st.count < kWindowRows) return std::nullopt;
  const Label label = model.predict_scaled(st.rows);
  st.clear();
  return label;
}

}  // namespace mdsim
