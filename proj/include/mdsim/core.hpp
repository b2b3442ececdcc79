#pragma once

// Shared vocabulary: misbehavior labels, error types, seeding and number
// formatting used by every other header.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mdsim {

inline constexpr int kNumLabels = 9;
inline constexpr int kNumFeatures = 6;
inline constexpr int kWindowMessages = 5;
inline constexpr int kWindowRows = kWindowMessages - 1;

// 0 is the only non-misbehavior label.
enum class Label : int {
  regular = 0,
  const_pos = 1,
  random_pos = 2,
  pos_offset = 3,
  random_speed = 4,
  spd_offset = 5,
  eventual_stop = 6,
  disruptive = 7,
  data_replay = 8,
};

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::array<std::string_view, kNumLabels> kLabelNames = {
    "regular",     "constPos",     "randomPos",  "posOffset", "randomSpeed",
    "spdOffset",   "eventualStop", "disruptive", "dataReplay"};

inline bool is_valid_label(int value) { return value >= 0 && value < kNumLabels; }

inline Label label_from_int(int value) {
  if (!is_valid_label(value)) {
    throw InputError("label out of range: " + std::to_string(value));
  }
  return static_cast<Label>(value);
}

inline int to_int(Label label) { return static_cast<int>(label); }

inline std::string_view label_name(Label label) { return kLabelNames[to_int(label)]; }

inline std::optional<Label> label_from_name(std::string_view name) {
  for (int i = 0; i < kNumLabels; ++i) {
    if (kLabelNames[i] == name) return static_cast<Label>(i);
  }
  return std::nullopt;
}

inline bool is_misbehavior(Label label) { return label != Label::regular; }

// splitmix64 finalizer; used to derive independent per-run seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename... Parts>
std::uint64_t derive_seed(std::uint64_t base, Parts... parts) {
  std::uint64_t s = mix_seed(base);
  ((s = mix_seed(s ^ static_cast<std::uint64_t>(parts))), ...);
  return s;
}

// Shortest round-trippable decimal (17 significant digits).
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace mdsim
