#pragma once

// Canonical records -> jumping windows of 5 messages -> 4x6 delta matrices.
//
// Row k (k = 1..4) of a window holds
//   dt   = t_k - t_{k-1}            (consecutive)
//   d*   = value_k - value_0        (relative to the first message)
// for posx, posy, spdx, spdy, acl. The window label is the label of the last
// message.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "mdsim/core.hpp"
#include "mdsim/veremi.hpp"

namespace mdsim {

using Row = std::array<double, kNumFeatures>;
using WindowRows = std::array<Row, kWindowRows>;

enum Feature : int { f_dt = 0, f_dposx, f_dposy, f_dspdx, f_dspdy, f_dacl };

inline constexpr std::array<const char*, kNumFeatures> kFeatureNames = {
    "dt", "dposx", "dposy", "dspdx", "dspdy", "dacl"};

// The per-message quantities a window is built from.
struct Kinematics {
  double t = 0.0;
  double posx = 0.0, posy = 0.0;
  double spdx = 0.0, spdy = 0.0;
  double acl = 0.0;
};

inline Kinematics kinematics_of(const veremi::CanonicalRecord& r) {
  return {r.send_time, r.posx, r.posy, r.spdx, r.spdy, r.acl};
}

inline Row delta_row(const Kinematics& reference, double prev_t, const Kinematics& m) {
  return {m.t - prev_t,          m.posx - reference.posx, m.posy - reference.posy,
          m.spdx - reference.spdx, m.spdy - reference.spdy, m.acl - reference.acl};
}

struct WindowOrigin {
  std::int64_t rx = 0;
  std::int64_t sender = 0;
  double first_time = 0.0;
};

struct FeatureWindow {
  WindowRows rows{};
  Label label = Label::regular;
  WindowOrigin origin;
};

struct ScalerParams {
  Row mean{};
  Row std{1, 1, 1, 1, 1, 1};

  static ScalerParams identity() { return {}; }
};

struct SplitDataset {
  std::vector<FeatureWindow> train;
  std::vector<FeatureWindow> val;
  double split_fraction = 0.33;
  std::uint64_t seed = 0;
};

struct MessageGroup {
  std::int64_t rx = 0;
  std::int64_t sender = 0;
  std::vector<veremi::CanonicalRecord> records;
};

// Groups by (rx, sender), sorts each group by sendTime and drops the tail so
// the length is a multiple of 5. Groups come out ordered by key.
inline std::vector<MessageGroup> group_sort_trim(std::span<const veremi::CanonicalRecord> records) {
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<veremi::CanonicalRecord>> by_pair;
  for (const auto& r : records) by_pair[{r.rx, r.sender_pseudo}].push_back(r);
  std::vector<MessageGroup> out;
  out.reserve(by_pair.size());
  for (auto& [key, group] : by_pair) {
    std::stable_sort(group.begin(), group.end(),
                     [](const auto& a, const auto& b) { return a.send_time < b.send_time; });
    group.resize(group.size() - group.size() % kWindowMessages);
    out.push_back({key.first, key.second, std::move(group)});
  }
  return out;
}

struct WindowBuild {
  std::vector<FeatureWindow> windows;
  std::size_t rejected = 0;  // chunks with non-monotone timestamps
};

inline WindowBuild make_windows(const MessageGroup& group) {
  WindowBuild out;
  const auto& g = group.records;
  for (std::size_t start = 0; start + kWindowMessages <= g.size(); start += kWindowMessages) {
    bool monotone = true;
    for (int k = 1; k < kWindowMessages; ++k) {
      if (g[start + k].send_time < g[start + k - 1].send_time) monotone = false;
    }
    if (!monotone) {
      ++out.rejected;
      continue;
    }
    FeatureWindow w;
    const Kinematics ref = kinematics_of(g[start]);
    double prev_t = ref.t;
    for (int k = 1; k < kWindowMessages; ++k) {
      const Kinematics m = kinematics_of(g[start + k]);
      w.rows[k - 1] = delta_row(ref, prev_t, m);
      prev_t = m.t;
    }
    w.label = g[start + kWindowMessages - 1].lab;
    w.origin = {group.rx, group.sender, ref.t};
    out.windows.push_back(w);
  }
  return out;
}

inline WindowBuild make_windows(std::span<const veremi::CanonicalRecord> records) {
  WindowBuild out;
  for (const auto& g : group_sort_trim(records)) {
    auto part = make_windows(g);
    out.rejected += part.rejected;
    out.windows.insert(out.windows.end(), part.windows.begin(), part.windows.end());
  }
  return out;
}

inline std::array<std::size_t, kNumLabels> label_counts(std::span<const FeatureWindow> windows) {
  std::array<std::size_t, kNumLabels> counts{};
  for (const auto& w : windows) ++counts[to_int(w.label)];
  return counts;
}

// Keeps every misbehavior window and a seeded uniform sample of regular
// windows, twice the mean size of the misbehavior classes present. Relative
// order of the kept windows is preserved.
inline std::vector<FeatureWindow> balance(std::span<const FeatureWindow> windows, std::uint64_t seed) {
  auto counts = label_counts(windows);
  if (counts[0] == 0) throw InputError("cannot balance: no regular windows");
  std::size_t classes = 0, total = 0;
  for (int l = 1; l < kNumLabels; ++l) {
    if (counts[l] > 0) {
      ++classes;
      total += counts[l];
    }
  }
  if (classes == 0) return {windows.begin(), windows.end()};
  const auto target = static_cast<std::size_t>(
      std::llround(2.0 * static_cast<double>(total) / static_cast<double>(classes)));

  std::vector<std::size_t> regular;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].label == Label::regular) regular.push_back(i);
  }
  std::vector<bool> keep(windows.size(), true);
  if (regular.size() > target) {
    std::mt19937_64 rng(seed);
    std::shuffle(regular.begin(), regular.end(), rng);
    for (std::size_t i = target; i < regular.size(); ++i) keep[regular[i]] = false;
  }
  std::vector<FeatureWindow> out;
  out.reserve(total + std::min(target, regular.size()));
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (keep[i]) out.push_back(windows[i]);
  }
  return out;
}

inline constexpr double kDegenerateStd = 1e-12;

// Column mean and population std over every row of every window. Columns
// with (near) zero variance get std = 1; their indices are appended to
// `degenerate` when given.
inline ScalerParams fit_scaler(std::span<const FeatureWindow> windows,
                               std::vector<int>* degenerate = nullptr) {
  const std::size_t n = windows.size() * kWindowRows;
  if (n < 2) throw InputError("fit_scaler needs at least two rows");
  ScalerParams p;
  for (int c = 0; c < kNumFeatures; ++c) {
    double sum = 0.0;
    for (const auto& w : windows)
      for (const auto& r : w.rows) sum += r[c];
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& w : windows)
      for (const auto& r : w.rows) ss += (r[c] - mean) * (r[c] - mean);
    double sd = std::sqrt(ss / static_cast<double>(n));
    if (!(sd > kDegenerateStd)) {
      sd = 1.0;
      if (degenerate) degenerate->push_back(c);
    }
    p.mean[c] = mean;
    p.std[c] = sd;
  }
  return p;
}

inline Row scale_row(const Row& r, const ScalerParams& p) {
  Row out;
  for (int c = 0; c < kNumFeatures; ++c) out[c] = (r[c] - p.mean[c]) / p.std[c];
  return out;
}

inline Row unscale_row(const Row& r, const ScalerParams& p) {
  Row out;
  for (int c = 0; c < kNumFeatures; ++c) out[c] = r[c] * p.std[c] + p.mean[c];
  return out;
}

inline FeatureWindow apply_scaler(FeatureWindow w, const ScalerParams& p) {
  for (auto& r : w.rows) r = scale_row(r, p);
  return w;
}

inline std::vector<FeatureWindow> apply_scaler(std::span<const FeatureWindow> ws, const ScalerParams& p) {
  std::vector<FeatureWindow> out;
  out.reserve(ws.size());
  for (const auto& w : ws) out.push_back(apply_scaler(w, p));
  return out;
}

inline std::size_t validation_count(std::size_t n, double fraction) {
  // 1e-9 guards against 0.33 * 100 = 33.000000000000004.
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

inline SplitDataset split(std::span<const FeatureWindow> windows, double fraction, std::uint64_t seed) {
  if (windows.size() < 3) throw InputError("split needs at least three windows");
  std::vector<std::size_t> idx(windows.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t n_val = validation_count(windows.size(), fraction);
  SplitDataset out;
  out.split_fraction = fraction;
  out.seed = seed;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (i < n_val ? out.val : out.train).push_back(windows[idx[i]]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Window tensor file: "MDSW" | u32 version | u64 n | u64 rows | u64 cols |
// n*rows*cols little-endian float64, row-major. Labels go to a text file with
// one integer per line.

static_assert(std::endian::native == std::endian::little, "binary formats assume little-endian");

namespace io {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("unexpected end of file");
  return v;
}

}  // namespace io

inline void write_window_tensor(std::ostream& os, std::span<const FeatureWindow> windows) {
  os.write("MDSW", 4);
  io::put<std::uint32_t>(os, 1);
  io::put<std::uint64_t>(os, windows.size());
  io::put<std::uint64_t>(os, kWindowRows);
  io::put<std::uint64_t>(os, kNumFeatures);
  for (const auto& w : windows)
    for (const auto& r : w.rows)
      for (double v : r) io::put(os, v);
}

inline void write_labels(std::ostream& os, std::span<const FeatureWindow> windows) {
  for (const auto& w : windows) os << to_int(w.label) << '\n';
}

inline std::vector<FeatureWindow> read_windows(std::istream& tensor, std::istream& labels) {
  char magic[4];
  if (!tensor.read(magic, 4) || std::memcmp(magic, "MDSW", 4) != 0) {
    throw FormatError("window tensor: bad magic");
  }
  if (io::get<std::uint32_t>(tensor) != 1) throw FormatError("window tensor: unsupported version");
  const auto n = io::get<std::uint64_t>(tensor);
  if (io::get<std::uint64_t>(tensor) != kWindowRows || io::get<std::uint64_t>(tensor) != kNumFeatures) {
    throw FormatError("window tensor: unexpected dims");
  }
  std::vector<FeatureWindow> out(n);
  for (auto& w : out)
    for (auto& r : w.rows)
      for (double& v : r) v = io::get<double>(tensor);
  for (auto& w : out) {
    int l;
    if (!(labels >> l)) throw FormatError("label file shorter than tensor");
    w.label = label_from_int(l);
  }
  return out;
}

inline void write_scaler(std::ostream& os, const ScalerParams& p) {
  os << "mean";
  for (double v : p.mean) os << ' ' << fmt_double(v);
  os << "\nstd";
  for (double v : p.std) os << ' ' << fmt_double(v);
  os << '\n';
}

inline ScalerParams read_scaler(std::istream& is) {
  ScalerParams p;
  std::string tag;
  if (!(is >> tag) || tag != "mean") throw FormatError("scaler file: expected 'mean'");
  for (double& v : p.mean)
    if (!(is >> v)) throw FormatError("scaler file: short mean");
  if (!(is >> tag) || tag != "std") throw FormatError("scaler file: expected 'std'");
  for (double& v : p.std)
    if (!(is >> v) || !(v > 0)) throw FormatError("scaler file: bad std");
  return p;
}

}  // namespace mdsim
