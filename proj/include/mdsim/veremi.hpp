#pragma once

// VeReMi log / ground-truth ingestion.
//
// Log files hold one JSON object per line. Only type-3 entries (messages
// received from other vehicles) are kept. Ground-truth files carry the real
// kinematics for every messageID; a message is labeled with the scenario label
// when its transmitted position or speed differs from the truth.

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdsim/core.hpp"

namespace mdsim::veremi {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct RawMessage {
  int type = 3;
  std::int64_t rx = 0;
  double send_time = 0.0;
  std::int64_t sender_pseudo = 0;
  std::int64_t message_id = 0;
  Vec2 pos, spd, acl, hed;
};

struct TruthRecord {
  std::int64_t message_id = 0;
  Vec2 pos, spd, acl, hed;
};

struct CanonicalRecord {
  std::int64_t rx = 0;
  std::int64_t sender_pseudo = 0;
  double send_time = 0.0;
  double posx = 0.0, posy = 0.0;
  double spdx = 0.0, spdy = 0.0;
  double acl = 0.0;  // signed magnitude, m/s^2
  double hed = 0.0;  // degrees in (-180, 180]
  Label lab = Label::regular;
};

enum class SkipKind { filtered, malformed, duplicate, missing_truth, bad_heading };

inline std::string_view skip_kind_name(SkipKind k) {
  switch (k) {
    case SkipKind::filtered: return "filtered";
    case SkipKind::malformed: return "malformed";
    case SkipKind::duplicate: return "duplicate";
    case SkipKind::missing_truth: return "missing_truth";
    case SkipKind::bad_heading: return "bad_heading";
  }
  return "unknown";
}

struct SkipEntry {
  std::size_t line = 0;  // 1-based; 0 when not line-addressable
  SkipKind kind = SkipKind::malformed;
  std::string reason;
};

struct SkipReport {
  std::vector<SkipEntry> entries;

  std::size_t count(SkipKind k) const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.kind == k ? 1 : 0;
    return n;
  }
  std::size_t size() const { return entries.size(); }
  void add(std::size_t line, SkipKind kind, std::string reason) {
    entries.push_back({line, kind, std::move(reason)});
  }
};

struct LogParse {
  std::vector<RawMessage> messages;
  SkipReport skips;
  std::size_t lines = 0;
};

struct TruthParse {
  std::map<std::int64_t, TruthRecord> truth;
  SkipReport skips;  // duplicates are reported here as warnings
  std::size_t lines = 0;
};

struct MergeResult {
  std::vector<CanonicalRecord> records;
  SkipReport skips;
};

inline constexpr double kLabelTolerance = 1e-9;

namespace detail {

inline Vec2 read_vec(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() < 2) {
    throw std::invalid_argument(std::string("field '") + key + "' is not a 2/3-vector");
  }
  // z is always zero in the source data and is dropped.
  return {v.at(0).get<double>(), v.at(1).get<double>()};
}

inline std::int64_t read_int(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    double d = v.get<double>();
    if (std::floor(d) == d) return static_cast<std::int64_t>(d);
  }
  throw std::invalid_argument(std::string("field '") + key + "' is not an integer");
}

inline bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace detail

// Reads a VeReMi log stream. Every input line ends up either as a message or
// as a skip entry, so messages.size() + skips.size() == lines.
inline LogParse parse_log_stream(std::istream& in, std::int64_t rx = 0) {
  if (!in) throw InputError("log stream is not readable");
  LogParse out;
  std::string line;
  while (std::getline(in, line)) {
    ++out.lines;
    if (detail::blank(line)) {
      out.skips.add(out.lines, SkipKind::malformed, "blank line");
      continue;
    }
    try {
      auto j = nlohmann::json::parse(line);
      int type = static_cast<int>(detail::read_int(j, "type"));
      if (type != 3) {
        out.skips.add(out.lines, SkipKind::filtered, "type " + std::to_string(type));
        continue;
      }
      RawMessage m;
      m.type = type;
      m.rx = rx;
      m.send_time = j.at("sendTime").get<double>();
      if (!(m.send_time >= 0.0)) throw std::invalid_argument("negative sendTime");
      m.sender_pseudo = detail::read_int(j, "senderPseudo");
      m.message_id = detail::read_int(j, "messageID");
      m.pos = detail::read_vec(j, "pos");
      m.spd = detail::read_vec(j, "spd");
      m.acl = detail::read_vec(j, "acl");
      m.hed = detail::read_vec(j, "hed");
      out.messages.push_back(m);
    } catch (const std::exception& e) {
      out.skips.add(out.lines, SkipKind::malformed, e.what());
    }
  }
  if (in.bad()) throw InputError("error while reading log stream");
  return out;
}

// First occurrence of a messageID wins; later ones are reported.
inline TruthParse parse_ground_truth(std::istream& in) {
  if (!in) throw InputError("ground-truth stream is not readable");
  TruthParse out;
  std::string line;
  while (std::getline(in, line)) {
    ++out.lines;
    if (detail::blank(line)) {
      out.skips.add(out.lines, SkipKind::malformed, "blank line");
      continue;
    }
    try {
      auto j = nlohmann::json::parse(line);
      if (!j.contains("messageID")) throw std::invalid_argument("missing messageID");
      TruthRecord t;
      t.message_id = detail::read_int(j, "messageID");
      t.pos = detail::read_vec(j, "pos");
      t.spd = detail::read_vec(j, "spd");
      t.acl = detail::read_vec(j, "acl");
      t.hed = detail::read_vec(j, "hed");
      auto [it, inserted] = out.truth.emplace(t.message_id, t);
      if (!inserted) {
        out.skips.add(out.lines, SkipKind::duplicate,
                      "duplicate messageID " + std::to_string(t.message_id));
      }
    } catch (const std::exception& e) {
      out.skips.add(out.lines, SkipKind::malformed, e.what());
    }
  }
  if (in.bad()) throw InputError("error while reading ground-truth stream");
  return out;
}

// atan2(y, x) in degrees, normalized to (-180, 180].
inline double horizontal_angle(double x, double y) {
  if (x == 0.0 && y == 0.0) throw std::domain_error("direction of a zero vector is undefined");
  double deg = std::atan2(y, x) * 180.0 / std::numbers::pi;
  if (deg <= -180.0) deg += 360.0;
  return deg;
}

// Smallest absolute difference between two angles, in [0, 180].
inline double circular_difference(double a_deg, double b_deg) {
  double d = std::fmod(std::fabs(a_deg - b_deg), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

// Norm of the acceleration vector, negative when it points more than 90
// degrees away from the heading.
inline double signed_acceleration(double ax, double ay, double heading_deg) {
  double mag = std::hypot(ax, ay);
  if (mag == 0.0) return 0.0;
  return circular_difference(heading_deg, horizontal_angle(ax, ay)) > 90.0 ? -mag : mag;
}

inline bool differs(double a, double b) { return std::fabs(a - b) > kLabelTolerance; }

inline MergeResult merge_and_label(const std::vector<RawMessage>& messages,
                                   const std::map<std::int64_t, TruthRecord>& truth,
                                   Label scenario_label) {
  MergeResult out;
  out.records.reserve(messages.size());
  for (const auto& m : messages) {
    auto it = truth.find(m.message_id);
    if (it == truth.end()) {
      out.skips.add(0, SkipKind::missing_truth,
                    "no ground truth for messageID " + std::to_string(m.message_id));
      continue;
    }
    const TruthRecord& t = it->second;
    CanonicalRecord r;
    r.rx = m.rx;
    r.sender_pseudo = m.sender_pseudo;
    r.send_time = m.send_time;
    r.posx = m.pos.x;
    r.posy = m.pos.y;
    r.spdx = m.spd.x;
    r.spdy = m.spd.y;
    try {
      r.hed = horizontal_angle(m.hed.x, m.hed.y);
    } catch (const std::domain_error&) {
      out.skips.add(0, SkipKind::bad_heading,
                    "zero heading vector for messageID " + std::to_string(m.message_id));
      continue;
    }
    r.acl = signed_acceleration(m.acl.x, m.acl.y, r.hed);
    bool falsified = differs(m.pos.x, t.pos.x) || differs(m.pos.y, t.pos.y) ||
                     differs(m.spd.x, t.spd.x) || differs(m.spd.y, t.spd.y);
    r.lab = falsified ? scenario_label : Label::regular;
    out.records.push_back(r);
  }
  return out;
}

inline constexpr const char* kCanonicalHeader = "rx,senderPseudo,sendTime,posx,posy,spdx,spdy,acl,hed,lab";

inline void write_canonical_csv(std::ostream& os, const std::vector<CanonicalRecord>& records) {
  os << kCanonicalHeader << '\n';
  for (const auto& r : records) {
    os << r.rx << ',' << r.sender_pseudo << ',' << fmt_double(r.send_time) << ','
       << fmt_double(r.posx) << ',' << fmt_double(r.posy) << ',' << fmt_double(r.spdx) << ','
       << fmt_double(r.spdy) << ',' << fmt_double(r.acl) << ',' << fmt_double(r.hed) << ','
       << to_int(r.lab) << '\n';
  }
}

inline std::vector<CanonicalRecord> read_canonical_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("canonical table is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCanonicalHeader) throw FormatError("unexpected canonical header: " + line);
  std::vector<CanonicalRecord> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      auto pos = line.find(',', start);
      f.push_back(line.substr(start, pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (f.size() != 10) {
      throw FormatError("canonical line " + std::to_string(lineno) + ": expected 10 fields");
    }
    try {
      CanonicalRecord r;
      r.rx = std::stoll(f[0]);
      r.sender_pseudo = std::stoll(f[1]);
      r.send_time = std::stod(f[2]);
      r.posx = std::stod(f[3]);
      r.posy = std::stod(f[4]);
      r.spdx = std::stod(f[5]);
      r.spdy = std::stod(f[6]);
      r.acl = std::stod(f[7]);
      r.hed = std::stod(f[8]);
      r.lab = label_from_int(std::stoi(f[9]));
      out.push_back(r);
    } catch (const std::exception& e) {
      throw FormatError("canonical line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_skip_report(std::ostream& os, std::string_view source, const SkipReport& report) {
  for (const auto& e : report.entries) {
    os << source << ',' << e.line << ',' << skip_kind_name(e.kind) << ',' << e.reason << '\n';
  }
}

}  // namespace mdsim::veremi
