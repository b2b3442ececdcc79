// mdsim command line: ingest, gen-data, train, simulate, campaign, report.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <string>
#include <vector>

#include "mdsim/mdsim.hpp"

namespace fs = std::filesystem;
using namespace mdsim;

namespace {

std::ofstream open_out(const fs::path& p, bool binary = false) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, binary ? std::ios::binary : std::ios::out);
  if (!os) throw InputError("cannot write " + p.string());
  return os;
}

std::ifstream open_in(const fs::path& p, bool binary = false) {
  std::ifstream is(p, binary ? std::ios::binary : std::ios::in);
  if (!is) throw InputError("cannot open " + p.string());
  return is;
}

// VeReMi names receiver logs JSONlog-<vehicle>-<module>-A<n>.json.
std::int64_t receiver_from_name(const fs::path& p, std::int64_t fallback) {
  static const std::regex re(R"(JSONlog-(\d+)-)");
  std::smatch m;
  const std::string name = p.filename().string();
  if (std::regex_search(name, m, re)) return std::stoll(m[1].str());
  return fallback;
}

Label parse_label_arg(const std::string& s) {
  if (auto l = label_from_name(s)) return *l;
  try {
    return label_from_int(std::stoi(s));
  } catch (const std::logic_error&) {
    throw ConfigError("unknown label '" + s + "'");
  }
}

void print_progress(std::size_t done, std::size_t total) {
  if (done == total || done % 50 == 0) {
    std::fprintf(stderr, "\r  %zu/%zu runs", done, total);
    if (done == total) std::fputc('\n', stderr);
  }
}

void write_sim_outputs(const fs::path& dir, const SimResult& r) {
  fs::create_directories(dir);
  auto preds = open_out(dir / "predictions.csv");
  preds << "time,vehicle,sender,label\n";
  for (const auto& p : r.predictions)
    preds << fmt_fixed(p.time, 2) << ',' << p.vehicle << ',' << p.sender << ',' << to_int(p.label) << '\n';
  auto trans = open_out(dir / "transitions.csv");
  trans << "time,vehicle,from,to,cause\n";
  for (const auto& t : r.transitions) {
    trans << fmt_fixed(t.time, 2) << ',' << t.vehicle << ',' << fsm_name(t.from) << ',' << fsm_name(t.to) << ','
          << cause_name(t.cause) << '\n';
  }
  auto coll = open_out(dir / "collisions.csv");
  coll << "time,rear,front,gap\n";
  for (const auto& c : r.collisions)
    coll << fmt_fixed(c.time, 2) << ',' << c.rear << ',' << c.front << ',' << fmt_double(c.overlap) << '\n';
  auto summary = open_out(dir / "summary.csv");
  summary << "vehicle,beacons,final_x,final_v,controller,crashed\n";
  for (std::size_t i = 0; i < r.final_state.size(); ++i) {
    const auto& s = r.final_state[i];
    summary << i << ',' << r.beacons_sent[i] << ',' << fmt_double(s.x) << ',' << fmt_double(s.v) << ','
            << controller_name(s.controller) << ',' << (s.crashed ? 1 : 0) << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Platoon misbehavior detection: data ingest, detector training and simulation campaigns"};
  app.require_subcommand(0, 1);

  std::string config_path;
  std::vector<std::string> overrides;
  bool dump = false;
  int threads = -1;
  app.add_option("-c,--config", config_path, "key = value settings file");
  app.add_option("-s,--set", overrides, "override one setting, KEY=VALUE (repeatable)");
  app.add_flag("--dump-config", dump, "print the effective settings and exit");
  app.add_option("-j,--threads", threads, "worker threads (0 = all cores)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "VeReMi logs + ground truth -> canonical labeled table");
  std::vector<std::string> logs;
  std::string truth_path, ingest_out = "canonical.csv", skips_out;
  std::string scenario = "0";
  ingest->add_option("--log", logs, "receiver log file (repeatable)")->required();
  ingest->add_option("--truth", truth_path, "ground-truth file")->required();
  ingest->add_option("--label", scenario, "scenario label for misbehaving messages (name or 0..8)");
  ingest->add_option("-o,--out", ingest_out, "canonical CSV output");
  ingest->add_option("--skips", skips_out, "skip/conflict report output");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "simulate defense-off runs -> labeled training windows");
  std::string gen_windows = "corpus.bin", gen_labels = "corpus.labels";
  gen->add_option("--windows", gen_windows, "window tensor output");
  gen->add_option("--labels", gen_labels, "label file output");

  // train
  auto* train = app.add_subcommand("train", "training windows -> detector model");
  std::string tr_windows, tr_labels, tr_canonical, tr_model, tr_scaler, tr_history;
  train->add_option("--windows", tr_windows, "window tensor input (unscaled)");
  train->add_option("--labels", tr_labels, "label file input");
  train->add_option("--canonical", tr_canonical, "canonical CSV input instead of a window tensor");
  train->add_option("-m,--model", tr_model, "model output (default: model.path)");
  train->add_option("--scaler", tr_scaler, "also write the scaler as text");
  train->add_option("--history", tr_history, "per-epoch history CSV");

  // simulate
  auto* sim = app.add_subcommand("simulate", "one platoon run");
  std::string sim_model, sim_out = "sim_out";
  bool sim_trace = false;
  sim->add_option("-m,--model", sim_model, "detector model (default: model.path when defense is on)");
  sim->add_option("-o,--out", sim_out, "output directory");
  sim->add_flag("--trace", sim_trace, "write trace.csv (t, index, x, v, a, controller, fsm, front_distance)");

  // campaign
  auto* camp = app.add_subcommand("campaign", "run the experiment matrix");
  std::string camp_model, camp_out = "runs";
  camp->add_option("-m,--model", camp_model, "detector model (default: model.path)");
  camp->add_option("-o,--out", camp_out, "results directory");

  // report
  auto* rep = app.add_subcommand("report", "results directory -> metrics text and tables");
  std::string rep_runs = "runs", rep_out;
  rep->add_option("-r,--runs", rep_runs, "results directory");
  rep->add_option("-o,--out", rep_out, "tables directory (default: <runs>/report)");

  CLI11_PARSE(app, argc, argv);

  try {
    Settings st;
    if (!config_path.empty()) st = load_settings(config_path);
    for (const auto& o : overrides) apply_assignment(st, o);
    if (threads >= 0) st.threads = threads;

    if (dump) {
      dump_settings(std::cout, st);
      return 0;
    }
    if (app.get_subcommands().empty()) {
      std::cout << app.help();
      return 0;
    }

    if (ingest->parsed()) {
      const Label label = parse_label_arg(scenario);
      auto tin = open_in(truth_path);
      const auto truth = veremi::parse_ground_truth(tin);
      std::vector<veremi::CanonicalRecord> all;
      std::ofstream skips;
      if (!skips_out.empty()) skips = open_out(skips_out);
      if (skips) veremi::write_skip_report(skips, truth_path, truth.skips);
      std::size_t skipped = truth.skips.size();
      for (std::size_t i = 0; i < logs.size(); ++i) {
        auto in = open_in(logs[i]);
        const auto parsed = veremi::parse_log_stream(in, receiver_from_name(logs[i], static_cast<std::int64_t>(i)));
        auto merged = veremi::merge_and_label(parsed.messages, truth.truth, label);
        if (skips) {
          veremi::write_skip_report(skips, logs[i], parsed.skips);
          veremi::write_skip_report(skips, logs[i], merged.skips);
        }
        skipped += parsed.skips.size() + merged.skips.size();
        all.insert(all.end(), merged.records.begin(), merged.records.end());
      }
      auto out = open_out(ingest_out);
      veremi::write_canonical_csv(out, all);
      std::cerr << "ingest: " << all.size() << " records, " << skipped << " skipped -> " << ingest_out << '\n';
      return 0;
    }

    if (gen->parsed()) {
      const auto corpus = build_training_corpus(st.corpus());
      auto tw = open_out(gen_windows, true);
      write_window_tensor(tw, corpus.windows);
      auto tl = open_out(gen_labels);
      write_labels(tl, corpus.windows);
      const auto counts = label_counts(corpus.windows);
      std::cerr << "gen-data: " << corpus.runs << " runs, " << corpus.windows.size() << " windows (";
      for (int l = 0; l < kNumLabels; ++l) std::cerr << (l ? " " : "") << label_name(static_cast<Label>(l)) << '=' << counts[l];
      std::cerr << ")\n";
      return 0;
    }

    if (train->parsed()) {
      std::vector<FeatureWindow> windows;
      if (!tr_canonical.empty()) {
        auto in = open_in(tr_canonical);
        const auto records = veremi::read_canonical_csv(in);
        auto built = make_windows(records);
        if (built.rejected) std::cerr << "train: " << built.rejected << " windows rejected (non-monotone time)\n";
        windows = std::move(built.windows);
      } else {
        if (tr_windows.empty() || tr_labels.empty()) throw ConfigError("train needs --windows and --labels, or --canonical");
        auto tw = open_in(tr_windows, true);
        auto tl = open_in(tr_labels);
        windows = read_windows(tw, tl);
      }
      const auto t0 = std::chrono::steady_clock::now();
      auto result = train_detector(windows, st.pipeline, [&](const nn::EpochStats& e) {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::fprintf(stderr, "epoch %3d  loss %.4f  train %.4f  val %.4f  (%.1fs)\n", e.epoch, e.train_loss,
                     e.train_acc, e.val_acc, s);
      });
      const std::string model_path = tr_model.empty() ? st.model_path : tr_model;
      {
        auto os = open_out(model_path, true);
        save_model(os, result.model);
      }
      if (!tr_scaler.empty()) {
        auto os = open_out(tr_scaler);
        write_scaler(os, result.model.scaler);
      }
      if (!tr_history.empty()) {
        auto os = open_out(tr_history);
        nn::write_history(os, result.training.history);
      }
      std::cerr << "train: best epoch " << result.training.best_epoch << ", validation accuracy "
                << fmt_fixed(result.val_accuracy, 4) << " -> " << model_path << '\n';
      return 0;
    }

    if (sim->parsed()) {
      SimConfig c = st.single_run();
      c.record_trace = sim_trace;
      std::optional<DetectorModel> model;
      if (c.defense_enabled && c.detection_enabled) model = load_model(sim_model.empty() ? st.model_path : sim_model);
      const auto r = simulate(c, model ? &*model : nullptr);
      write_sim_outputs(sim_out, r);
      if (sim_trace) {
        auto os = open_out(fs::path(sim_out) / "trace.csv");
        write_trace(os, r.trace);
      }
      std::cerr << "simulate: " << r.collisions.size() << " collisions, " << r.transitions.size()
                << " FSM transitions -> " << sim_out << '\n';
      return 0;
    }

    if (camp->parsed()) {
      CampaignConfig c = st.campaign();
      if (!camp_model.empty()) c.model_path = camp_model;
      c.validate();
      std::optional<DetectorModel> model;
      if (std::find(c.defense.begin(), c.defense.end(), true) != c.defense.end()) model = load_model(c.model_path);
      const auto results = run_campaign(c, model ? &*model : nullptr, print_progress);
      write_results(camp_out, results);
      std::cerr << "campaign: " << results.size() << " runs -> " << camp_out << '\n';
      return 0;
    }

    if (rep->parsed()) {
      const auto results = read_results(rep_runs);
      const auto m = compute_metrics(results);
      write_report_text(std::cout, m);
      const fs::path out = rep_out.empty() ? fs::path(rep_runs) / "report" : fs::path(rep_out);
      write_report_tables(out, m);
      auto txt = open_out(out / "report.txt");
      write_report_text(txt, m);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "mdsim: config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "mdsim: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
