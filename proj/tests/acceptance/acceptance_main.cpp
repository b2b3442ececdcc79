// End-to-end acceptance suite. One PASS/FAIL line per criterion; exit status
// is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mdsim/campaign.hpp"
#include "mdsim/detector.hpp"
#include "mdsim/features.hpp"
#include "mdsim/lstm.hpp"
#include "mdsim/simulation.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace mdsim;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << "  " << id << " " << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------

void gradient_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  const auto batch = oracle::random_windows(rng, 20);
  const auto params = nn::LstmParams::random(8, 10, 102);
  const auto r = oracle::finite_difference_check(batch, params, 1e-5);
  const double secs = seconds_since(t0);
  const bool ok = r.checked == params.parameter_count() && r.worst_rel <= 1e-4 && secs < 30.0;
  report(1, "gradient oracle", ok,
         std::to_string(r.checked) + " parameters, worst relative error " + num(r.worst_rel, 3) + ", " +
             num(secs, 3) + " s");
}

DetectorModel random_model(std::uint64_t seed) {
  DetectorModel m;
  m.params = nn::LstmParams::random(6, 10, seed);
  for (double& v : m.params.dense2_w.data) v *= 20;  // spread predictions over the classes
  m.scaler.mean = {0.1, 2.0, 0.0, 0.5, 0.0, 0.0};
  m.scaler.std = {0.02, 3.0, 0.1, 0.4, 0.05, 0.3};
  return m;
}

void online_offline() {
  std::mt19937_64 rng(201);
  int traces = 0, mismatched = 0;
  std::size_t labels = 0;
  for (; traces < 150; ++traces) {
    const auto m = random_model(300 + traces);
    const auto beacons = oracle::random_trace(rng, 5 + static_cast<int>(rng() % 120), traces % 2 == 1);
    OnlineWindowState st;
    std::vector<Label> online;
    for (const auto& b : beacons)
      if (auto l = online_observe(st, b, m)) online.push_back(*l);
    labels += online.size();
    if (online != oracle::offline_labels(beacons, m)) ++mismatched;
  }
  report(2, "online/offline equivalence", mismatched == 0,
         std::to_string(traces) + " traces, " + std::to_string(labels) + " labels, " + std::to_string(mismatched) +
             " mismatching traces");
}

void pipeline_oracle() {
  std::mt19937_64 rng(301);
  double worst = 0.0;
  int cases = 0;
  for (; cases < 60; ++cases) {
    const auto recs = oracle::random_records(rng);
    const auto lib = make_windows(recs);
    const auto ref = oracle::naive_windows(recs);
    worst = std::max(worst, oracle::windows_mismatch(lib.windows, ref));
    if (lib.windows.size() < 2) continue;
    const auto p = fit_scaler(lib.windows);
    double mean[6], sd[6];
    oracle::naive_scaler(lib.windows, mean, sd);
    for (int c = 0; c < 6; ++c) {
      worst = std::max(worst, std::fabs(p.mean[c] - mean[c]) / std::max(1.0, std::fabs(mean[c])));
      worst = std::max(worst, std::fabs(p.std[c] - sd[c]) / std::max(1.0, sd[c]));
    }
    const auto scaled = apply_scaler(lib.windows, p);
    for (std::size_t w = 0; w < scaled.size(); ++w)
      for (int t = 0; t < 4; ++t)
        for (int c = 0; c < 6; ++c) {
          const double naive = (ref[w].m[t][c] - mean[c]) / sd[c];
          worst = std::max(worst, std::fabs(scaled[w].rows[t][c] - naive) / std::max(1.0, std::fabs(naive)));
        }
  }
  report(3, "windowing/scaler oracle", worst <= 1e-12,
         std::to_string(cases) + " record sets, worst deviation " + num(worst, 3));
}

// Mean front distance of each follower over [from, to).
std::map<int, double> mean_gap(const SimResult& r, double from, double to) {
  std::map<int, double> sum;
  std::map<int, int> n;
  for (const auto& row : r.trace) {
    if (row.index == 0 || row.t < from - 1e-9 || row.t >= to - 1e-9) continue;
    sum[row.index] += *row.front_distance;
    ++n[row.index];
  }
  for (auto& [i, s] : sum) s /= n[i];
  return sum;
}

void gap_control_dynamics() {
  SimConfig cfg;
  cfg.platoon_size = 4;
  cfg.defense_enabled = true;
  cfg.detection_enabled = false;
  cfg.forced_alarm_time = 40.0;
  cfg.forced_alarm_vehicle = 1;
  cfg.record_trace = true;
  const auto r = simulate(cfg);
  // the leader speed oscillates with a 10 s period; compare full-period means
  const auto before = mean_gap(r, 30.0, 40.0);
  const auto after = mean_gap(r, 100.0, 110.0);
  double gmin = 1e9, gmax = -1e9;
  for (int i = 1; i < 4; ++i) {
    const double g = after.at(i) - before.at(i);
    gmin = std::min(gmin, g);
    gmax = std::max(gmax, g);
  }
  std::map<int, double> downgrade;
  for (const auto& t : r.transitions)
    if (t.to == FsmState::downgrade) downgrade[t.vehicle] = t.time;
  double worst = 0.0;
  bool all = downgrade.size() == 4;
  for (auto& [i, t] : downgrade) worst = std::max(worst, t - 40.0);
  const bool clamp = r.min_command >= -6.0 && r.max_command <= 2.5;
  const bool ok = gmin >= 19.0 && gmax <= 21.0 && all && worst <= 30.0 && r.collisions.empty() && clamp;
  report(4, "gap-control dynamics", ok,
         "growth " + num(gmin) + ".." + num(gmax) + " m, " + std::to_string(downgrade.size()) +
             "/4 in DOWNGRADE, last after " + num(worst) + " s, " + std::to_string(r.collisions.size()) +
             " collisions, commands [" + num(r.min_command) + ", " + num(r.max_command) + "]");
}

// ---------------------------------------------------------------------------
// CLI-driven stages

fs::path work_dir;

bool run_cli(const std::string& args, const std::string& log) {
  const std::string cmd = std::string("\"") + MDSIM_CLI_PATH + "\" " + args + " > \"" + (work_dir / log).string() +
                          "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc != 0) std::cout << "  command failed (" << rc << "): " << cmd << std::endl;
  return rc == 0;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Every regular file of a, byte-compared with the same name in b.
bool same_dir(const fs::path& a, const fs::path& b, std::size_t& files) {
  files = 0;
  if (!fs::is_directory(a) || !fs::is_directory(b)) return false;
  std::size_t nb = 0;
  for (const auto& e : fs::directory_iterator(b)) nb += e.is_regular_file() ? 1 : 0;
  for (const auto& e : fs::directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    if (slurp(e.path()) != slurp(b / e.path().filename())) return false;
  }
  return files == nb && files > 0;
}

const std::string kDesk =
    "-s campaign.sizes=4,8 -s data.seeds_per_kind=10 -s train.hidden=32 -s train.max_epochs=100 "
    "-s campaign.repetitions=10";

std::vector<RunResult> closed_loop(bool& ok, double& secs) {
  const auto t0 = Clock::now();
  const std::string w = "\"" + work_dir.string() + "/";
  ok = run_cli(kDesk + " gen-data --windows " + w + "corpus.bin\" --labels " + w + "corpus.labels\"", "gen.log") &&
       run_cli(kDesk + " train --windows " + w + "corpus.bin\" --labels " + w + "corpus.labels\" -m " + w +
                   "model.mds\"",
               "train.log") &&
       run_cli(kDesk + " campaign -m " + w + "model.mds\" -o " + w + "runs\"", "campaign.log");
  secs = seconds_since(t0);
  if (!ok) return {};
  return read_results(work_dir / "runs");
}

void detection_accuracy(const MetricsReport& m, bool loop_ok, double secs) {
  std::string detail;
  bool ok = loop_ok && secs < 20 * 60 && m.per_kind.size() == 8;
  for (const auto& row : m.per_kind) {
    const auto kind = *label_from_name(row.group);
    const bool strict = kind == Label::const_pos || kind == Label::random_pos || kind == Label::random_speed ||
                        kind == Label::eventual_stop;
    const double acc = row.single().mean;
    ok = ok && acc >= (strict ? 0.95 : 0.80);
    detail += row.group + " " + num(acc, 3) + ", ";
  }
  report(5, "closed-loop detection", ok, detail + "end-to-end " + num(secs, 3) + " s");
}

void false_positives(const MetricsReport& m) {
  const bool ok = m.pre_windows > 0 && m.fp_rate() <= 0.001;
  report(6, "false positives", ok,
         std::to_string(m.fp) + " / " + std::to_string(m.pre_windows) + " pre-activation windows");
}

void no_crash_kinds(const MetricsReport& m) {
  bool quiet = true, some = false;
  std::string detail;
  for (const auto& a : m.accidents) {
    if (a.kind == Label::pos_offset || a.kind == Label::spd_offset || a.kind == Label::random_speed) {
      quiet = quiet && a.off_runs > 0 && a.off_crashes == 0;
      detail += std::string(label_name(a.kind)) + " " + std::to_string(a.off_crashes) + "/" +
                std::to_string(a.off_runs) + ", ";
    }
    if (a.kind == Label::const_pos || a.kind == Label::random_pos || a.kind == Label::eventual_stop ||
        a.kind == Label::data_replay) {
      if (a.off_crashes > 0) {
        some = true;
        detail += std::string(label_name(a.kind)) + " " + std::to_string(a.off_crashes) + "/" +
                  std::to_string(a.off_runs) + ", ";
      }
    }
  }
  if (!detail.empty()) detail.resize(detail.size() - 2);
  report(7, "no-crash kinds (defense off)", quiet && some, detail);
}

void accident_gain(const MetricsReport& m) {
  const auto g = m.gain();
  report(8, "accident gain", g && *g >= 0.90,
         (g ? num(*g) : std::string("undefined")) + " over " + std::to_string(m.pairs) + " pairs (off " +
             std::to_string(m.pair_off_crashes) + ", on " + std::to_string(m.pair_on_crashes) + ")");
}

void determinism(bool loop_ok) {
  const std::string w = "\"" + work_dir.string() + "/";
  const std::string sim = "-s sim.defense_enabled=true -s sim.misbehavior=dataReplay -s sim.misbehavior_vehicle=1 "
                          "-s sim.activation_time=30 simulate --trace -m " + w + "model.mds\" -o ";
  bool ok = loop_ok && run_cli(sim + w + "sim_a\"", "sim_a.log") && run_cli(sim + w + "sim_b\"", "sim_b.log");
  std::size_t sim_files = 0, camp_files = 0;
  ok = ok && same_dir(work_dir / "sim_a", work_dir / "sim_b", sim_files);
  // same campaign again with a different worker count
  ok = ok && run_cli(kDesk + " -j 3 campaign -m " + w + "model.mds\" -o " + w + "runs_b\"", "campaign_b.log");
  ok = ok && same_dir(work_dir / "runs", work_dir / "runs_b", camp_files);
  report(9, "determinism", ok,
         "simulate " + std::to_string(sim_files) + " files, campaign " + std::to_string(camp_files) +
             " files byte-identical on rerun");
}

// Transition-log checks on one run; returns an empty string when it holds.
std::string fsm_violation(const RunResult& r) {
  if (!r.spec.defense) return r.transitions.empty() ? "" : "transitions with defense off";
  if (r.transitions.empty()) return "";
  std::map<int, std::vector<TransitionEvent>> per;
  double first = 1e18;
  for (const auto& t : r.transitions) {
    per[t.vehicle].push_back(t);
    first = std::min(first, t.time);
  }
  const double bound = first + r.spec.size * 0.1 + 0.2 + 1e-6;
  for (int v = 0; v < r.spec.size; ++v) {
    auto it = per.find(v);
    if (it == per.end()) return "vehicle " + std::to_string(v) + " never warned";
    const auto& ts = it->second;
    if (ts[0].from != FsmState::following || ts[0].to != FsmState::gap_control) return "bad first transition";
    if (ts[0].time > bound) return "vehicle " + std::to_string(v) + " warned late";
    if (ts.size() > 2) return "more than two transitions";
    if (ts.size() == 2 && (ts[1].from != FsmState::gap_control || ts[1].to != FsmState::downgrade ||
                           ts[1].time < ts[0].time))
      return "non-monotone progression";
  }
  return "";
}

void fsm_properties(const std::vector<RunResult>& runs, bool loop_ok) {
  std::size_t bad = 0, with_alarm = 0;
  std::string first_bad;
  for (const auto& r : runs) {
    with_alarm += r.transitions.empty() ? 0 : 1;
    const auto v = fsm_violation(r);
    if (!v.empty()) {
      if (bad++ == 0) first_bad = " (run " + std::to_string(r.spec.index) + ": " + v + ")";
    }
  }
  report(10, "FSM properties", loop_ok && !runs.empty() && bad == 0,
         std::to_string(runs.size()) + " runs, " + std::to_string(with_alarm) + " with alarms, " +
             std::to_string(bad) + " violations" + first_bad);
}

}  // namespace

int main() {
  work_dir = fs::temp_directory_path() / "mdsim_acceptance";
  fs::remove_all(work_dir);
  fs::create_directories(work_dir);

  gradient_oracle();
  online_offline();
  pipeline_oracle();
  gap_control_dynamics();

  bool loop_ok = false;
  double secs = 0.0;
  std::vector<RunResult> runs;
  try {
    runs = closed_loop(loop_ok, secs);
  } catch (const std::exception& e) {
    std::cout << "  closed loop: " << e.what() << std::endl;
    loop_ok = false;
  }
  const auto metrics = compute_metrics(runs);
  detection_accuracy(metrics, loop_ok, secs);
  false_positives(metrics);
  no_crash_kinds(metrics);
  accident_gain(metrics);
  determinism(loop_ok);
  fsm_properties(runs, loop_ok);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  if (failures == 0) fs::remove_all(work_dir);
  return failures == 0 ? 0 : 1;
}
