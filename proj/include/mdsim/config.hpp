#pragma once

// Flat key = value settings file. One binding table drives both parsing and
// --dump-config, so every key that can be read is also printed.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mdsim/campaign.hpp"
#include "mdsim/pipeline.hpp"

namespace mdsim {

struct Settings {
  SimConfig sim;
  MatrixConfig matrix;

  // campaign
  std::vector<bool> defense{true, false};
  int repetitions = 10;
  std::uint64_t campaign_seed = 1;
  std::string model_path = "model.mds";
  int threads = 0;

  // gen-data
  int seeds_per_kind = 10;
  int regular_runs = 10;
  int post_windows = 2;
  std::uint64_t data_seed = 7;

  PipelineConfig pipeline;

  // single `simulate` run
  std::string sim_kind = "none";
  int sim_attacker = 0;
  int sim_activation = 40;
  std::uint64_t sim_misbehavior_seed = 1;

  CampaignConfig campaign() const {
    CampaignConfig c;
    c.sim = sim;
    c.matrix = matrix;
    c.defense = defense;
    c.repetitions = repetitions;
    c.seed = campaign_seed;
    c.model_path = model_path;
    c.threads = threads;
    return c;
  }

  CorpusConfig corpus() const {
    CorpusConfig c;
    c.sim = sim;
    c.matrix = matrix;
    c.seeds_per_kind = seeds_per_kind;
    c.regular_runs = regular_runs;
    c.post_windows = post_windows;
    c.seed = data_seed;
    c.threads = threads;
    return c;
  }

  // The configured single run, misbehavior included when sim_kind names one.
  SimConfig single_run() const {
    SimConfig c = sim;
    c.misbehavior.reset();
    if (sim_kind != "none") {
      auto kind = label_from_name(sim_kind);
      if (!kind || !is_misbehavior(*kind)) throw ConfigError("sim.misbehavior: unknown kind '" + sim_kind + "'");
      MisbehaviorSpec m;
      m.kind = *kind;
      m.vehicle_index = sim_attacker;
      m.activation_time = sim_activation;
      m.seed = sim_misbehavior_seed;
      c.misbehavior = m;
    }
    return c;
  }
};

namespace cfg {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string show(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string& s) {
  T v{};
  const char* end = s.data() + s.size();
  auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "on" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "off" || s == "0" || s == "no") return false;
  throw std::invalid_argument("not a boolean: '" + s + "'");
}

struct Binding {
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

inline Binding number(std::string key, double& v) {
  return {std::move(key), [&v] { return show(v); }, [&v](const std::string& s) { v = parse_number<double>(s); }};
}

inline Binding number(std::string key, int& v) {
  return {std::move(key), [&v] { return std::to_string(v); },
          [&v](const std::string& s) { v = parse_number<int>(s); }};
}

inline Binding number(std::string key, std::uint64_t& v) {
  return {std::move(key), [&v] { return std::to_string(v); },
          [&v](const std::string& s) { v = parse_number<std::uint64_t>(s); }};
}

inline Binding flag(std::string key, bool& v) {
  return {std::move(key), [&v] { return std::string(v ? "true" : "false"); },
          [&v](const std::string& s) { v = parse_bool(s); }};
}

inline Binding text(std::string key, std::string& v) {
  return {std::move(key), [&v] { return v; }, [&v](const std::string& s) { v = s; }};
}

inline std::string join_ints(const std::vector<int>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
  return out;
}

inline std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  for (const auto& x : split_list(s)) out.push_back(parse_number<int>(x));
  return out;
}

inline std::vector<Binding> bindings(Settings& st) {
  auto& p = st.sim.platoon;
  auto& t = st.pipeline.train;
  std::vector<Binding> b{
      number("sim.physics_step", st.sim.physics_step),
      number("sim.beacon_interval", st.sim.beacon_interval),
      number("sim.duration", st.sim.duration),
      number("sim.platoon_size", st.sim.platoon_size),
      number("sim.seed", st.sim.seed),
      flag("sim.defense_enabled", st.sim.defense_enabled),
      {"sim.forced_alarm_time",
       [&st] { return st.sim.forced_alarm_time ? show(*st.sim.forced_alarm_time) : std::string("none"); },
       [&st](const std::string& s) {
         if (s == "none" || s.empty()) st.sim.forced_alarm_time.reset();
         else st.sim.forced_alarm_time = parse_number<double>(s);
       }},
      number("sim.forced_alarm_vehicle", st.sim.forced_alarm_vehicle),
      number("sim.trace_every", st.sim.trace_every),
      text("sim.misbehavior", st.sim_kind),
      number("sim.misbehavior_vehicle", st.sim_attacker),
      number("sim.activation_time", st.sim_activation),
      number("sim.misbehavior_seed", st.sim_misbehavior_seed),
      number("leader.speed", p.leader_speed),
      number("leader.amplitude", p.leader_amplitude),
      number("leader.frequency", p.leader_frequency),
      number("leader.gain", p.leader_gain),
      number("vehicle.length", p.vehicle_length),
      number("ploeg.kp", p.ploeg_kp),
      number("ploeg.kd", p.ploeg_kd),
      number("ploeg.headway", p.ploeg_headway),
      number("standstill", p.standstill),
      number("acc.headway", p.acc_headway),
      number("acc.lambda", p.acc_lambda),
      number("accel.min", p.accel_min),
      number("accel.max", p.accel_max),
      number("radar.noise_sigma", p.radar_noise_sigma),
      number("gap.delta_g", st.sim.gap.delta_g),
      number("gap.delta_t", st.sim.gap.delta_t),
      {"campaign.sizes", [&st] { return join_ints(st.matrix.sizes); },
       [&st](const std::string& s) { st.matrix.sizes = parse_ints(s); }},
      {"campaign.kinds",
       [&st] {
         std::string out;
         for (std::size_t i = 0; i < st.matrix.kinds.size(); ++i)
           out += (i ? "," : "") + std::string(label_name(st.matrix.kinds[i]));
         return out;
       },
       [&st](const std::string& s) {
         st.matrix.kinds.clear();
         for (const auto& name : split_list(s)) {
           auto k = label_from_name(name);
           if (!k || !is_misbehavior(*k)) throw std::invalid_argument("unknown misbehavior kind '" + name + "'");
           st.matrix.kinds.push_back(*k);
         }
       }},
      {"campaign.defense",
       [&st] {
         std::string out;
         for (std::size_t i = 0; i < st.defense.size(); ++i) out += (i ? "," : "") + std::string(st.defense[i] ? "on" : "off");
         return out;
       },
       [&st](const std::string& s) {
         st.defense.clear();
         for (const auto& x : split_list(s)) st.defense.push_back(parse_bool(x));
       }},
      number("campaign.repetitions", st.repetitions),
      number("campaign.seed", st.campaign_seed),
      number("campaign.activation_min", st.matrix.activation_min),
      number("campaign.activation_max", st.matrix.activation_max),
      text("model.path", st.model_path),
      number("threads", st.threads),
      number("data.seeds_per_kind", st.seeds_per_kind),
      number("data.regular_runs", st.regular_runs),
      number("data.post_windows", st.post_windows),
      number("data.seed", st.data_seed),
      number("train.hidden", t.hidden),
      number("train.dense", t.dense),
      number("train.learning_rate", t.learning_rate),
      number("train.batch_size", t.batch_size),
      number("train.max_epochs", t.max_epochs),
      number("train.min_delta", t.min_delta),
      number("train.patience", t.patience),
      flag("train.restore_best", t.restore_best),
      number("train.weight_decay", t.weight_decay),
      number("train.beta1", t.beta1),
      number("train.beta2", t.beta2),
      number("train.epsilon", t.epsilon),
      number("train.seed", t.seed),
      number("train.val_fraction", st.pipeline.val_fraction),
      number("train.split_seed", st.pipeline.seed),
      {"train.scaler_fit", [&st] { return std::string(scaler_fit_name(st.pipeline.scaler_fit)); },
       [&st](const std::string& s) { st.pipeline.scaler_fit = scaler_fit_from_name(s); }},
  };
  for (auto& [size, ids] : st.matrix.ids) {
    b.push_back({"campaign.ids." + std::to_string(size), [&ids] { return join_ints(ids); },
                 [&ids](const std::string& s) { ids = parse_ints(s); }});
  }
  return b;
}

}  // namespace cfg

// Applies one `key = value` assignment.
inline void apply_setting(Settings& st, const std::string& key, const std::string& value) {
  constexpr std::string_view ids_prefix = "campaign.ids.";
  try {
    if (key.starts_with(ids_prefix)) {
      const int size = cfg::parse_number<int>(key.substr(ids_prefix.size()));
      st.matrix.ids[size] = cfg::parse_ints(value);
      return;
    }
    for (auto& b : cfg::bindings(st)) {
      if (b.key == key) {
        b.set(value);
        return;
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
  throw ConfigError("unknown setting '" + key + "'");
}

inline void apply_assignment(Settings& st, const std::string& line) {
  const auto eq = line.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key = value, got '" + line + "'");
  apply_setting(st, cfg::trim(std::string_view(line).substr(0, eq)), cfg::trim(std::string_view(line).substr(eq + 1)));
}

inline void read_settings(std::istream& is, Settings& st, const std::string& source = "config") {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (cfg::trim(line).empty()) continue;
    try {
      apply_assignment(st, line);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline Settings load_settings(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open config " + path);
  Settings st;
  read_settings(is, st, path);
  return st;
}

inline void dump_settings(std::ostream& os, Settings st) {
  for (auto& b : cfg::bindings(st)) os << b.key << " = " << b.get() << '\n';
}

}  // namespace mdsim
