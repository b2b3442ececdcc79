#pragma once

// Experiment matrix: run enumeration, per-run execution, scoring, metrics and
// the result directory format. Also builds the training corpus from
// defense-off simulations.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "mdsim/parallel.hpp"
#include "mdsim/simulation.hpp"

namespace mdsim {

inline std::vector<Label> all_attack_kinds() {
  std::vector<Label> out;
  for (int k = 1; k < kNumLabels; ++k) out.push_back(static_cast<Label>(k));
  return out;
}

struct MatrixConfig {
  std::vector<int> sizes{4, 8};
  std::map<int, std::vector<int>> ids{{4, {0, 1, 2}}, {8, {0, 1, 2, 3, 4, 5, 6}}, {16, {0, 7}}};
  std::vector<Label> kinds = all_attack_kinds();
  int activation_min = 15;
  int activation_max = 80;

  const std::vector<int>& ids_for(int size) const {
    auto it = ids.find(size);
    if (it == ids.end()) throw ConfigError("no misbehaving IDs configured for platoon size " + std::to_string(size));
    return it->second;
  }

  void validate() const {
    if (sizes.empty()) throw ConfigError("no platoon sizes configured");
    for (int s : sizes) {
      if (s < 2) throw ConfigError("platoon size must be >= 2");
      for (int id : ids_for(s)) {
        if (id < 0 || id >= s - 1) {
          throw ConfigError("misbehaving ID " + std::to_string(id) + " invalid for platoon size " +
                            std::to_string(s) + " (the last vehicle is never the attacker)");
        }
      }
    }
    for (Label k : kinds)
      if (!is_misbehavior(k)) throw ConfigError("campaign kinds must be attack labels");
    if (activation_min < 0 || activation_max < activation_min) throw ConfigError("bad activation time range");
  }
};

struct CampaignConfig {
  SimConfig sim;  // template: platoon, gap control, clock
  MatrixConfig matrix;
  std::vector<bool> defense{true, false};
  int repetitions = 10;
  std::uint64_t seed = 1;
  std::string model_path = "model.mds";
  int threads = 0;

  void validate() const {
    matrix.validate();
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (defense.empty()) throw ConfigError("no defense modes configured");
  }
};

struct RunSpec {
  std::size_t index = 0;
  int size = 4;
  int attacker = 0;
  Label kind = Label::const_pos;
  bool defense = false;
  int rep = 0;
  std::uint64_t seed = 0;  // shared by the defense-on and defense-off twin
};

// Order: size, attacker, kind, repetition, defense mode.
inline std::vector<RunSpec> enumerate_runs(const CampaignConfig& cfg) {
  cfg.validate();
  std::vector<RunSpec> out;
  for (int size : cfg.matrix.sizes)
    for (int id : cfg.matrix.ids_for(size))
      for (Label kind : cfg.matrix.kinds)
        for (int rep = 0; rep < cfg.repetitions; ++rep)
          for (bool def : cfg.defense) {
            RunSpec r;
            r.index = out.size();
            r.size = size;
            r.attacker = id;
            r.kind = kind;
            r.defense = def;
            r.rep = rep;
            r.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(size), static_cast<std::uint64_t>(id),
                                 static_cast<std::uint64_t>(to_int(kind)), static_cast<std::uint64_t>(rep));
            out.push_back(r);
          }
  return out;
}

inline std::size_t expected_run_count(const CampaignConfig& cfg) {
  std::size_t n = 0;
  for (int s : cfg.matrix.sizes) n += cfg.matrix.ids_for(s).size();
  return n * cfg.matrix.kinds.size() * cfg.defense.size() * static_cast<std::size_t>(cfg.repetitions);
}

inline int draw_activation(std::uint64_t run_seed, int lo, int hi) {
  std::mt19937_64 rng(derive_seed(run_seed, 0xAC7ULL));
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

struct TimedLabel {
  double time = 0.0;
  Label label = Label::regular;
  bool operator==(const TimedLabel&) const = default;
};

struct RunResult {
  RunSpec spec;
  int activation_time = 0;
  std::vector<TimedLabel> predictions;  // detecting vehicle, time-ordered
  std::vector<CollisionEvent> collisions;
  std::vector<TransitionEvent> transitions;
  std::size_t pre_windows = 0;  // all followers, windows ending before activation
  std::size_t pre_fp = 0;
  std::size_t replay_fallbacks = 0;

  int detecting_vehicle() const { return spec.attacker + 1; }
  bool accident() const { return !collisions.empty(); }
};

inline SimConfig run_sim_config(const RunSpec& spec, const SimConfig& base, int activation) {
  SimConfig c = base;
  c.platoon_size = spec.size;
  c.defense_enabled = spec.defense;
  c.detection_enabled = true;
  c.forced_alarm_time.reset();
  c.record_trace = false;
  c.harvest_receivers.clear();
  c.seed = derive_seed(spec.seed, 0x5EEDULL);
  MisbehaviorSpec m;
  m.kind = spec.kind;
  m.vehicle_index = spec.attacker;
  m.activation_time = activation;
  m.seed = derive_seed(spec.seed, 0xBADULL);
  c.misbehavior = m;
  return c;
}

inline RunResult run_one(const RunSpec& spec, const CampaignConfig& cfg, const DetectorModel* model) {
  if (spec.defense && model == nullptr) throw ConfigError("defense-on run needs a detector model");
  RunResult r;
  r.spec = spec;
  r.activation_time = draw_activation(spec.seed, cfg.matrix.activation_min, cfg.matrix.activation_max);
  const SimResult sim = simulate(run_sim_config(spec, cfg.sim, r.activation_time), model);
  const int detecting = r.detecting_vehicle();
  for (const auto& p : sim.predictions) {
    if (p.vehicle == detecting) r.predictions.push_back({p.time, p.label});
    if (p.vehicle > 0 && p.time < static_cast<double>(r.activation_time) - 1e-9) {
      ++r.pre_windows;
      if (p.label != Label::regular) ++r.pre_fp;
    }
  }
  r.collisions = sim.collisions;
  r.transitions = sim.transitions;
  r.replay_fallbacks = sim.replay_fallbacks;
  return r;
}

inline std::vector<RunResult> run_campaign(const CampaignConfig& cfg, const DetectorModel* model,
                                           const std::function<void(std::size_t, std::size_t)>& progress = {}) {
  const auto specs = enumerate_runs(cfg);
  const bool any_defense = std::find(cfg.defense.begin(), cfg.defense.end(), true) != cfg.defense.end();
  if (any_defense && model == nullptr) throw ConfigError("defense-on runs configured but no detector model loaded");
  std::vector<RunResult> out(specs.size());
  std::atomic<std::size_t> done{0};
  std::mutex progress_mu;
  parallel_for(specs.size(), cfg.threads, [&](std::size_t i) {
    out[i] = run_one(specs[i], cfg, model);
    const std::size_t d = ++done;
    if (progress) {
      std::lock_guard lock(progress_mu);
      progress(d, specs.size());
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Scoring

// The first two predictions whose window ends at or after activation.
inline std::vector<Label> scored_predictions(const RunResult& r) {
  std::vector<Label> out;
  for (const auto& p : r.predictions) {
    if (p.time + 1e-9 < static_cast<double>(r.activation_time)) continue;
    out.push_back(p.label);
    if (out.size() == 2) break;
  }
  return out;
}

inline Label first_nonzero_prediction(const RunResult& r) {
  for (Label l : scored_predictions(r))
    if (l != Label::regular) return l;
  return Label::regular;
}

inline bool score_single_label(const RunResult& r) { return first_nonzero_prediction(r) != Label::regular; }
inline bool score_multi_label(const RunResult& r) { return first_nonzero_prediction(r) == r.spec.kind; }

struct ConfidenceInterval {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 0;
};

// Normal approximation on 0/1 samples, from counts so the result does not
// depend on sample order.
inline ConfidenceInterval confidence_interval(std::size_t successes, std::size_t n) {
  ConfidenceInterval ci;
  ci.n = n;
  if (n == 0) return ci;
  const double nd = static_cast<double>(n);
  ci.mean = static_cast<double>(successes) / nd;
  if (n < 2) {
    ci.lo = ci.hi = ci.mean;
    return ci;
  }
  const double var = nd / (nd - 1.0) * ci.mean * (1.0 - ci.mean);
  const double half = 1.96 * std::sqrt(std::max(0.0, var)) / std::sqrt(nd);
  ci.lo = std::clamp(ci.mean - half, 0.0, 1.0);
  ci.hi = std::clamp(ci.mean + half, 0.0, 1.0);
  return ci;
}

inline ConfidenceInterval confidence_interval(const std::vector<int>& samples) {
  std::size_t ones = 0;
  for (int s : samples) ones += s != 0 ? 1 : 0;
  return confidence_interval(ones, samples.size());
}

struct AccuracyRow {
  std::string group;
  std::size_t single_hits = 0;
  std::size_t multi_hits = 0;
  std::size_t n = 0;
  ConfidenceInterval single() const { return confidence_interval(single_hits, n); }
  ConfidenceInterval multi() const { return confidence_interval(multi_hits, n); }
};

struct AccidentRow {
  Label kind = Label::const_pos;
  std::size_t off_runs = 0, off_crashes = 0;
  std::size_t on_runs = 0, on_crashes = 0;
  double off_fraction() const { return off_runs ? static_cast<double>(off_crashes) / off_runs : 0.0; }
  double on_fraction() const { return on_runs ? static_cast<double>(on_crashes) / on_runs : 0.0; }
};

using ConfusionCounts = std::array<std::array<std::size_t, kNumLabels>, kNumLabels>;

struct MetricsReport {
  std::vector<AccuracyRow> per_kind;
  std::vector<AccuracyRow> per_id;  // group "size/id"
  ConfusionCounts confusion{};
  std::size_t fp = 0;
  std::size_t pre_windows = 0;
  std::vector<AccidentRow> accidents;
  std::size_t pairs = 0;
  std::size_t pair_off_crashes = 0;
  std::size_t pair_on_crashes = 0;

  std::array<std::array<double, kNumLabels>, kNumLabels> confusion_normalized() const {
    std::array<std::array<double, kNumLabels>, kNumLabels> out{};
    for (int i = 0; i < kNumLabels; ++i) {
      std::size_t row = 0;
      for (auto c : confusion[i]) row += c;
      if (row == 0) continue;
      for (int j = 0; j < kNumLabels; ++j) out[i][j] = static_cast<double>(confusion[i][j]) / row;
    }
    return out;
  }

  double fp_rate() const { return pre_windows ? static_cast<double>(fp) / pre_windows : 0.0; }
  double off_fraction() const { return pairs ? static_cast<double>(pair_off_crashes) / pairs : 0.0; }
  double on_fraction() const { return pairs ? static_cast<double>(pair_on_crashes) / pairs : 0.0; }

  // Undefined when no defense-off run crashed.
  std::optional<double> gain() const {
    if (pair_off_crashes == 0) return std::nullopt;
    return (off_fraction() - on_fraction()) / off_fraction();
  }
};

inline std::string id_group(int size, int id) { return std::to_string(size) + "/" + std::to_string(id); }

// Accuracy, confusion and false positives come from defense-on runs (the
// detector runs only there); accidents from both modes.
inline MetricsReport compute_metrics(const std::vector<RunResult>& results) {
  MetricsReport m;
  std::map<int, AccuracyRow> kinds;
  std::map<std::pair<int, int>, AccuracyRow> ids;
  std::map<int, AccidentRow> acc;
  struct Twin {
    std::optional<bool> off, on;
  };
  std::map<std::tuple<int, int, int, int, std::uint64_t>, Twin> twins;

  for (const auto& r : results) {
    const auto& s = r.spec;
    auto& a = acc[to_int(s.kind)];
    a.kind = s.kind;
    auto& twin = twins[{s.size, s.attacker, to_int(s.kind), s.rep, s.seed}];
    if (s.defense) {
      ++a.on_runs;
      a.on_crashes += r.accident() ? 1 : 0;
      twin.on = r.accident();
      const bool single = score_single_label(r);
      const bool multi = score_multi_label(r);
      for (AccuracyRow* row : {&kinds[to_int(s.kind)], &ids[{s.size, s.attacker}]}) {
        ++row->n;
        row->single_hits += single ? 1 : 0;
        row->multi_hits += multi ? 1 : 0;
      }
      ++m.confusion[to_int(s.kind)][to_int(first_nonzero_prediction(r))];
      m.fp += r.pre_fp;
      m.pre_windows += r.pre_windows;
    } else {
      ++a.off_runs;
      a.off_crashes += r.accident() ? 1 : 0;
      twin.off = r.accident();
    }
  }
  for (auto& [k, row] : kinds) {
    row.group = std::string(label_name(static_cast<Label>(k)));
    m.per_kind.push_back(row);
  }
  for (auto& [k, row] : ids) {
    row.group = id_group(k.first, k.second);
    m.per_id.push_back(row);
  }
  for (auto& [k, row] : acc) m.accidents.push_back(row);
  for (auto& [k, t] : twins) {
    if (!t.off || !t.on) continue;
    ++m.pairs;
    m.pair_off_crashes += *t.off ? 1 : 0;
    m.pair_on_crashes += *t.on ? 1 : 0;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Result directory: runs.csv, predictions.csv, transitions.csv, collisions.csv

inline void write_results(const std::filesystem::path& dir, const std::vector<RunResult>& results) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream os(dir / name);
    if (!os) throw InputError("cannot write " + (dir / name).string());
    return os;
  };
  auto runs = open("runs.csv");
  auto preds = open("predictions.csv");
  auto trans = open("transitions.csv");
  auto coll = open("collisions.csv");
  runs << "run,size,attacker,kind,defense,rep,seed,activation,accident,pre_windows,pre_fp,replay_fallbacks\n";
  preds << "run,time,label\n";
  trans << "run,time,vehicle,from,to,cause\n";
  coll << "run,time,rear,front\n";
  for (const auto& r : results) {
    const auto& s = r.spec;
    runs << s.index << ',' << s.size << ',' << s.attacker << ',' << label_name(s.kind) << ','
         << (s.defense ? "on" : "off") << ',' << s.rep << ',' << s.seed << ',' << r.activation_time << ','
         << (r.accident() ? 1 : 0) << ',' << r.pre_windows << ',' << r.pre_fp << ',' << r.replay_fallbacks << '\n';
    for (const auto& p : r.predictions) preds << s.index << ',' << fmt_fixed(p.time, 2) << ',' << to_int(p.label) << '\n';
    for (const auto& t : r.transitions) {
      trans << s.index << ',' << fmt_fixed(t.time, 2) << ',' << t.vehicle << ',' << fsm_name(t.from) << ','
            << fsm_name(t.to) << ',' << cause_name(t.cause) << '\n';
    }
    for (const auto& c : r.collisions) coll << s.index << ',' << fmt_fixed(c.time, 2) << ',' << c.rear << ',' << c.front << '\n';
  }
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename Fn>
void for_each_row(const std::filesystem::path& path, std::size_t columns, Fn&& fn) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw FormatError(path.string() + ": missing header");
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != columns) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(columns) +
                        " columns");
    }
    try {
      fn(cells);
    } catch (const std::logic_error&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad value");
    }
  }
}

}  // namespace detail

inline std::vector<RunResult> read_results(const std::filesystem::path& dir) {
  std::vector<RunResult> out;
  std::map<std::size_t, std::size_t> slot;
  detail::for_each_row(dir / "runs.csv", 12, [&](const std::vector<std::string>& c) {
    RunResult r;
    r.spec.index = std::stoull(c[0]);
    r.spec.size = std::stoi(c[1]);
    r.spec.attacker = std::stoi(c[2]);
    auto kind = label_from_name(c[3]);
    if (!kind) throw std::invalid_argument("kind");
    r.spec.kind = *kind;
    if (c[4] != "on" && c[4] != "off") throw std::invalid_argument("defense");
    r.spec.defense = c[4] == "on";
    r.spec.rep = std::stoi(c[5]);
    r.spec.seed = std::stoull(c[6]);
    r.activation_time = std::stoi(c[7]);
    r.pre_windows = std::stoull(c[9]);
    r.pre_fp = std::stoull(c[10]);
    r.replay_fallbacks = std::stoull(c[11]);
    slot[r.spec.index] = out.size();
    out.push_back(std::move(r));
  });
  auto find = [&](const std::string& cell) -> RunResult& {
    auto it = slot.find(std::stoull(cell));
    if (it == slot.end()) throw std::invalid_argument("unknown run");
    return out[it->second];
  };
  detail::for_each_row(dir / "predictions.csv", 3, [&](const std::vector<std::string>& c) {
    find(c[0]).predictions.push_back({std::stod(c[1]), label_from_int(std::stoi(c[2]))});
  });
  detail::for_each_row(dir / "transitions.csv", 6, [&](const std::vector<std::string>& c) {
    auto from = fsm_from_name(c[3]);
    auto to = fsm_from_name(c[4]);
    auto cause = cause_from_name(c[5]);
    if (!from || !to || !cause) throw std::invalid_argument("transition");
    find(c[0]).transitions.push_back({std::stod(c[1]), std::stoi(c[2]), *from, *to, *cause});
  });
  detail::for_each_row(dir / "collisions.csv", 4, [&](const std::vector<std::string>& c) {
    find(c[0]).collisions.push_back({std::stod(c[1]), std::stoi(c[2]), std::stoi(c[3]), 0.0});
  });
  return out;
}

// ---------------------------------------------------------------------------
// Report: human-readable text plus CSV tables.

inline void write_report_text(std::ostream& os, const MetricsReport& m) {
  auto pct = [](double v) { return fmt_fixed(100.0 * v, 2); };
  os << "Single/multi-label accuracy by kind (defense-on runs, 95% CI)\n";
  for (const auto& r : m.per_kind) {
    const auto s = r.single(), x = r.multi();
    os << "  " << r.group << ": single " << pct(s.mean) << "% [" << pct(s.lo) << ", " << pct(s.hi) << "]  multi "
       << pct(x.mean) << "% [" << pct(x.lo) << ", " << pct(x.hi) << "]  n=" << r.n << '\n';
  }
  os << "\nAccuracy by platoon size/misbehaving ID\n";
  for (const auto& r : m.per_id) {
    const auto s = r.single(), x = r.multi();
    os << "  " << r.group << ": single " << pct(s.mean) << "%  multi " << pct(x.mean) << "%  n=" << r.n << '\n';
  }
  os << "\nConfusion matrix (rows: true kind, columns: first non-regular prediction; row-normalized)\n";
  const auto norm = m.confusion_normalized();
  os << "  " << std::string(13, ' ');
  for (int j = 0; j < kNumLabels; ++j) os << ' ' << std::string(label_name(static_cast<Label>(j))).substr(0, 6);
  os << '\n';
  for (int i = 1; i < kNumLabels; ++i) {
    std::string name(label_name(static_cast<Label>(i)));
    name.resize(13, ' ');
    os << "  " << name;
    for (int j = 0; j < kNumLabels; ++j) os << ' ' << fmt_fixed(norm[i][j], 3) << ' ';
    os << '\n';
  }
  os << "\nPre-activation false positives: " << m.fp << " / " << m.pre_windows << " windows";
  if (m.pre_windows) os << " (" << fmt_fixed(m.fp_rate(), 6) << ")";
  os << "\n\nAccidents by kind (fraction of runs)\n";
  for (const auto& a : m.accidents) {
    os << "  " << label_name(a.kind) << ": defense off " << a.off_crashes << "/" << a.off_runs << "  defense on "
       << a.on_crashes << "/" << a.on_runs << '\n';
  }
  os << "\nPaired runs: " << m.pairs << "  off " << pct(m.off_fraction()) << "%  on " << pct(m.on_fraction()) << "%\n";
  const auto g = m.gain();
  os << "Accident gain: " << (g ? fmt_fixed(*g, 4) : std::string("undefined (no defense-off accidents)")) << '\n';
}

inline void write_report_tables(const std::filesystem::path& dir, const MetricsReport& m) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream os(dir / name);
    if (!os) throw InputError("cannot write " + (dir / name).string());
    return os;
  };
  auto acc_table = [&](const char* name, const char* key, const std::vector<AccuracyRow>& rows) {
    auto os = open(name);
    os << key << ",n,single_mean,single_lo,single_hi,multi_mean,multi_lo,multi_hi\n";
    for (const auto& r : rows) {
      const auto s = r.single(), x = r.multi();
      os << r.group << ',' << r.n << ',' << fmt_double(s.mean) << ',' << fmt_double(s.lo) << ',' << fmt_double(s.hi)
         << ',' << fmt_double(x.mean) << ',' << fmt_double(x.lo) << ',' << fmt_double(x.hi) << '\n';
    }
  };
  acc_table("accuracy_by_kind.csv", "kind", m.per_kind);
  acc_table("accuracy_by_id.csv", "size_id", m.per_id);
  {
    auto os = open("confusion.csv");
    const auto norm = m.confusion_normalized();
    os << "true";
    for (int j = 0; j < kNumLabels; ++j) os << ',' << label_name(static_cast<Label>(j));
    os << '\n';
    for (int i = 0; i < kNumLabels; ++i) {
      os << label_name(static_cast<Label>(i));
      for (int j = 0; j < kNumLabels; ++j) os << ',' << fmt_double(norm[i][j]);
      os << '\n';
    }
  }
  {
    auto os = open("false_positives.csv");
    os << "fp,pre_windows,rate\n" << m.fp << ',' << m.pre_windows << ',' << fmt_double(m.fp_rate()) << '\n';
  }
  {
    auto os = open("accidents.csv");
    os << "kind,off_runs,off_crashes,off_fraction,on_runs,on_crashes,on_fraction\n";
    for (const auto& a : m.accidents) {
      os << label_name(a.kind) << ',' << a.off_runs << ',' << a.off_crashes << ',' << fmt_double(a.off_fraction()) << ','
         << a.on_runs << ',' << a.on_crashes << ',' << fmt_double(a.on_fraction()) << '\n';
    }
    const auto g = m.gain();
    os << "all_pairs," << m.pairs << ',' << m.pair_off_crashes << ',' << fmt_double(m.off_fraction()) << ',' << m.pairs
       << ',' << m.pair_on_crashes << ',' << fmt_double(m.on_fraction()) << '\n';
    os << "gain," << (g ? fmt_double(*g) : std::string("undefined")) << ",,,,,\n";
  }
}

// ---------------------------------------------------------------------------
// Training corpus from defense-off simulations.

struct CorpusConfig {
  SimConfig sim;
  MatrixConfig matrix;
  int seeds_per_kind = 10;   // per (size, attacker, kind)
  int regular_runs = 10;     // per size, no misbehavior
  int post_windows = 2;      // misbehavior-labeled windows kept per misbehavior run
  std::uint64_t seed = 7;
  int threads = 0;

  void validate() const {
    matrix.validate();
    if (seeds_per_kind < 0 || regular_runs < 0 || post_windows < 1) throw ConfigError("bad corpus sizes");
  }
};

struct Corpus {
  std::vector<FeatureWindow> windows;
  std::size_t runs = 0;
  std::size_t rejected = 0;
  std::size_t dropped_post = 0;  // post-activation windows beyond the kept ones
};

struct CorpusJob {
  int size = 4;
  int attacker = -1;  // -1: regular run
  Label kind = Label::regular;
  int rep = 0;
};

inline Corpus build_training_corpus(const CorpusConfig& cfg) {
  cfg.validate();
  std::vector<CorpusJob> jobs;
  for (int size : cfg.matrix.sizes) {
    for (int rep = 0; rep < cfg.regular_runs; ++rep) jobs.push_back({size, -1, Label::regular, rep});
    for (int id : cfg.matrix.ids_for(size))
      for (Label kind : cfg.matrix.kinds)
        for (int rep = 0; rep < cfg.seeds_per_kind; ++rep) jobs.push_back({size, id, kind, rep});
  }
  std::vector<Corpus> parts(jobs.size());
  parallel_for(jobs.size(), cfg.threads, [&](std::size_t j) {
    const auto& job = jobs[j];
    const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(job.size),
                                           static_cast<std::uint64_t>(job.attacker + 1),
                                           static_cast<std::uint64_t>(to_int(job.kind)),
                                           static_cast<std::uint64_t>(job.rep));
    SimConfig c = cfg.sim;
    c.platoon_size = job.size;
    c.defense_enabled = false;
    c.forced_alarm_time.reset();
    c.record_trace = false;
    c.seed = derive_seed(seed, 0x5EEDULL);
    c.harvest_receivers.clear();
    if (job.attacker < 0) {
      c.misbehavior.reset();
      for (int r = 1; r < job.size; ++r) c.harvest_receivers.push_back(r);
    } else {
      const int activation = draw_activation(seed, cfg.matrix.activation_min, cfg.matrix.activation_max);
      MisbehaviorSpec m;
      m.kind = job.kind;
      m.vehicle_index = job.attacker;
      m.activation_time = activation;
      m.seed = derive_seed(seed, 0xBADULL);
      c.misbehavior = m;
      c.harvest_receivers.push_back(job.attacker + 1);
    }
    const SimResult sim = simulate(c, nullptr);
    auto built = make_windows(sim.harvested);
    Corpus& part = parts[j];
    part.runs = 1;
    part.rejected = built.rejected;
    if (job.attacker < 0) {
      part.windows = std::move(built.windows);
      return;
    }
    // every regular-labeled window stays; of the falsified ones only the
    // first few, since later offset windows look regular after differencing
    int kept_post = 0;
    for (auto& w : built.windows) {
      if (w.label == Label::regular) {
        part.windows.push_back(w);
      } else if (kept_post < cfg.post_windows) {
        part.windows.push_back(w);
        ++kept_post;
      } else {
        ++part.dropped_post;
      }
    }
  });
  Corpus out;
  for (auto& p : parts) {
    out.runs += p.runs;
    out.rejected += p.rejected;
    out.dropped_post += p.dropped_post;
    out.windows.insert(out.windows.end(), p.windows.begin(), p.windows.end());
  }
  return out;
}

}  // namespace mdsim
