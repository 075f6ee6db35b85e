// ctune: fit, tune and evaluate confidence-threshold cascades.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctune/dataset.hpp"
#include "ctune/error.hpp"
#include "ctune/evaluation.hpp"
#include "ctune/gof.hpp"
#include "ctune/gridsearch.hpp"
#include "ctune/model_io.hpp"
#include "ctune/parallel.hpp"
#include "ctune/pipeline.hpp"
#include "ctune/synth.hpp"
#include "ctune/tuner.hpp"

namespace fs = std::filesystem;
using namespace ctune;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Globals {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool json_errors = false;
  std::string run_dir;
  std::vector<std::string> argv;
  std::vector<std::string> outputs;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

fs::path resolve_output(Globals& g, const std::string& path) {
  fs::path p(path);
  if (!g.run_dir.empty() && p.is_relative()) p = fs::path(g.run_dir) / p;
  g.outputs.push_back(p.string());
  return p;
}

RunConfig load_config(const std::string& path) {
  return path.empty() ? RunConfig{} : load_run_config(path);
}

AlignedDataset load_aligned(const std::string& path, const RunConfig& cfg) {
  auto ds = load_dataset(path);
  if (!cfg.model_order.empty()) {
    std::vector<std::size_t> cols;
    for (const auto& id : cfg.model_order) cols.push_back(ds.model_index(id));
    ds = ds.select_models(cols);
  }
  if (cfg.n_train > 0) ds = split(ds, cfg.n_train, cfg.split_seed);
  return ds;
}

void write_manifest(const Globals& g, const std::string& command, const RunConfig* cfg) {
  if (g.run_dir.empty()) return;
  Json m{{"tool", "ctune"},
         {"version", kVersion},
         {"command", command},
         {"seed", g.seed},
         {"threads", g.threads},
         {"argv", g.argv},
         {"outputs", g.outputs}};
  write_json(m, fs::path(g.run_dir) / "manifest.json");
  if (cfg) write_json(to_json(*cfg), fs::path(g.run_dir) / "config.json");
}

void print_fit_report(const CascadeModel& cm, const FitDiagnostics& d) {
  std::cout << "model,ece,phi_min,phi_max,w_min,w_max,expected_cost\n";
  for (std::size_t pos = 0; pos < cm.size(); ++pos) {
    const auto& m = cm.marginal(pos);
    std::cout << cm.model(pos).model_id << ',' << fmt(d.ece[pos]) << ',' << fmt(m.phi_min) << ','
              << fmt(m.phi_max) << ',' << fmt(m.w_min) << ',' << fmt(m.w_max) << ','
              << fmt(cm.expected_cost(pos)) << '\n';
  }
  std::cout << "\nkendall tau\n";
  for (std::size_t i = 0; i < cm.size(); ++i) {
    for (std::size_t j = 0; j < cm.size(); ++j) {
      if (j) std::cout << ',';
      std::cout << (d.tau.has(i, j) ? fmt(d.tau.at(i, j)) : std::string("NA"));
    }
    std::cout << '\n';
  }
  for (const auto& w : cm.warnings()) std::cerr << "warning: " << w << '\n';
}

std::size_t max_thresholds(const CascadeModel& cm) { return cm.size() > 0 ? cm.size() - 1 : 0; }

std::string timing_csv_header() { return "k,method,candidates,seconds\n"; }

std::string curve_csv(const std::vector<ErrorCostCurve>& curves, std::size_t threshold_columns) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      lo = std::min(lo, p.cost);
      hi = std::max(hi, p.cost);
    }
  }
  std::ostringstream out;
  out << "source,cost,normalized_cost,error";
  for (std::size_t c = 0; c < threshold_columns; ++c) out << ",phi_" << c + 1;
  out << ",subcascade_id\n";
  for (const auto& curve : curves) {
    for (const auto& p : curve.points) {
      const double norm = hi > lo ? (p.cost - lo) / (hi - lo) : 0.0;
      out << curve_source_name(p.source) << ',' << fmt(p.cost) << ',' << fmt(norm) << ','
          << fmt(p.error);
      for (std::size_t c = 0; c < threshold_columns; ++c) {
        out << ',';
        if (c < p.thresholds.phi.size()) out << fmt(p.thresholds.phi[c]);
      }
      out << ',' << p.subcascade_id << '\n';
    }
  }
  return out.str();
}

int exit_code(ErrorCode code) { return 10 + static_cast<int>(code); }

}  // namespace

int main(int argc, char** argv) {
  Globals g;
  for (int i = 0; i < argc; ++i) g.argv.emplace_back(argv[i]);

  CLI::App app{"Markov-copula cascade threshold tuning"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->capture_default_str();
  app.add_flag("--json", g.json_errors, "Report errors as JSON on stderr");
  app.add_option("--run-dir", g.run_dir,
                 "Directory for outputs with relative paths, a manifest and a config snapshot");

  std::string data, config, model, out, frontier, baseline, comparison, timing, spec_path, truth;
  std::size_t B = 0, n_queries = 0, k_synth = 3, k_max = 4;
  bool no_selection = false;

  auto* fit = app.add_subcommand("fit", "Calibrate, fit marginals and all-pairs copulas");
  fit->add_option("--data", data, "Dataset (.csv or .jsonl)")->required();
  fit->add_option("--config", config, "Run config JSON");
  fit->add_option("--out", out, "Model JSON to write")->required();

  auto* tune_cmd = app.add_subcommand("tune", "Trace the efficient frontier by lambda sweep");
  tune_cmd->add_option("--model", model, "Model JSON")->required();
  tune_cmd->add_option("--config", config, "Run config JSON");
  tune_cmd->add_option("--out", out, "Frontier CSV")->required();
  tune_cmd->add_flag("--no-model-selection", no_selection, "Tune only the full cascade");

  auto* grid = app.add_subcommand("grid", "Quantile grid-search baseline");
  grid->add_option("--model", model, "Model JSON")->required();
  grid->add_option("--config", config, "Run config JSON");
  grid->add_option("--out", out, "Frontier CSV")->required();
  grid->add_option("--timing", timing, "Timing CSV");

  auto* rep = app.add_subcommand("replay", "Replay frontier thresholds on the test split");
  rep->add_option("--data", data, "Dataset")->required();
  rep->add_option("--config", config, "Run config JSON");
  rep->add_option("--model", model, "Model JSON")->required();
  rep->add_option("--frontier", frontier, "Frontier CSV")->required();
  rep->add_option("--out", out, "Curve CSV")->required();
  rep->add_option("--baseline", baseline, "Second frontier CSV to compare against");
  rep->add_option("--comparison", comparison, "Comparison JSON (needs --baseline)");

  auto* gof = app.add_subcommand("gof", "Cramer-von Mises goodness-of-fit report");
  gof->add_option("--data", data, "Dataset")->required();
  gof->add_option("--config", config, "Run config JSON");
  gof->add_option("--model", model, "Model JSON")->required();
  gof->add_option("--out", out, "Report CSV")->required();
  gof->add_option("--B", B, "Bootstrap replicates (default from config)");

  auto* syn = app.add_subcommand("synth", "Emit a synthetic dataset from a Markov-copula chain");
  syn->add_option("--spec", spec_path, "Synthetic spec JSON (default: built-in chain)");
  syn->add_option("--k", k_synth, "Models in the built-in chain")->capture_default_str();
  syn->add_option("--n", n_queries, "Number of queries (overrides the spec)");
  syn->add_option("--out", out, "Dataset CSV")->required();
  syn->add_option("--truth", truth, "Ground-truth spec JSON");

  auto* scal = app.add_subcommand("scaling", "Tuner vs grid-search runtime for k = 2..K");
  scal->add_option("--K", k_max, "Largest cascade length")->capture_default_str();
  scal->add_option("--config", config, "Run config JSON");
  scal->add_option("--out", out, "Timing CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    set_thread_count(g.threads);
    if (!g.run_dir.empty()) fs::create_directories(g.run_dir);

    if (*fit) {
      const auto cfg = load_config(config);
      const auto ds = load_aligned(data, cfg);
      auto opt = cfg.fit_options();
      opt.seed = g.seed;
      const auto cm = fit_cascade(ds, cfg.prices, opt);
      save_model(cm, resolve_output(g, out));
      print_fit_report(cm, fit_diagnostics(ds, cm));
      write_manifest(g, "fit", &cfg);
    } else if (*tune_cmd) {
      auto cfg = load_config(config);
      cfg.tune.seed = g.seed;
      const auto cm = load_model(model);
      TuneStats stats;
      const bool selection = cfg.model_selection && !no_selection && cm.size() > 1;
      const auto points = selection ? tune_with_model_selection(cm, cfg.tune, &stats)
                                    : tune(cm, cfg.tune, &stats);
      write_text(frontier_csv(points, max_thresholds(cm)), resolve_output(g, out));
      std::cerr << points.size() << " frontier points, " << stats.solves << " solves, "
                << stats.evaluations << " evaluations\n";
      write_manifest(g, "tune", &cfg);
    } else if (*grid) {
      const auto cfg = load_config(config);
      const auto cm = load_model(model);
      GridStats stats;
      const auto points = grid_search(cm, cfg.grid, &stats);
      write_text(frontier_csv(points, max_thresholds(cm)), resolve_output(g, out));
      if (!timing.empty()) {
        write_text(timing_csv_header() + std::to_string(cm.size()) + ",grid," +
                       std::to_string(stats.candidates) + "," + fmt(stats.seconds) + "\n",
                   resolve_output(g, timing));
      }
      std::cerr << stats.candidates << " candidates, " << points.size() << " Pareto points, "
                << stats.seconds << " s\n";
      write_manifest(g, "grid", &cfg);
    } else if (*rep) {
      const auto cfg = load_config(config);
      const auto ds = load_aligned(data, cfg);
      const auto cm = load_model(model);
      const auto& prices = cfg.prices;
      const auto points = read_frontier_csv(frontier, cm);
      std::vector<ErrorCostCurve> curves{model_curve(points),
                                         empirical_curve(points, ds, cm, prices)};
      std::optional<FrontierComparison> cmp;
      if (!baseline.empty()) {
        const auto base = read_frontier_csv(baseline, cm);
        const auto base_curve = empirical_curve(base, ds, cm, prices);
        cmp = compare_frontiers(curves[1], base_curve);
        const auto model_cmp = compare_frontiers(curves[0], model_curve(base));
        if (!comparison.empty()) {
          write_json(Json{{"auc_a", cmp->auc_a},
                          {"auc_b", cmp->auc_b},
                          {"pct_delta", cmp->pct_delta},
                          {"model_auc_a", model_cmp.auc_a},
                          {"model_auc_b", model_cmp.auc_b},
                          {"model_pct_delta", model_cmp.pct_delta},
                          {"n_test", ds.count(SplitTag::kTest)}},
                     resolve_output(g, comparison));
        }
        std::cerr << "empirical AUC " << cmp->auc_a << " vs baseline " << cmp->auc_b << " ("
                  << cmp->pct_delta << "%)\n";
      }
      write_text(curve_csv(curves, max_thresholds(cm)), resolve_output(g, out));
      write_manifest(g, "replay", &cfg);
    } else if (*gof) {
      const auto cfg = load_config(config);
      const auto ds = load_aligned(data, cfg);
      const auto cm = load_model(model);
      const std::size_t reps = B > 0 ? B : cfg.gof_B;
      const SplitTag tag = ds.count(SplitTag::kTest) > 0 ? SplitTag::kTest : SplitTag::kTrain;
      std::ostringstream csv;
      csv << "component,statistic,normalized_statistic,p_value,B,n\n";
      std::vector<std::vector<double>> phis;
      for (std::size_t pos = 0; pos < cm.size(); ++pos) {
        phis.push_back(calibrated(ds, cm, pos, tag));
        const auto r = marginal_cvm(cm.marginal(pos), phis.back(), reps, mix_seed(g.seed, pos));
        csv << "marginal:" << cm.model(pos).model_id << ',' << fmt(r.statistic) << ','
            << fmt(r.normalized) << ',' << fmt(r.p_value) << ',' << r.bootstrap_B << ',' << r.n
            << '\n';
      }
      for (std::size_t pos = 1; pos < cm.size(); ++pos) {
        std::vector<std::pair<double, double>> pairs;
        for (std::size_t q = 0; q < phis[pos].size(); ++q) pairs.emplace_back(phis[pos - 1][q], phis[pos][q]);
        const auto r = kendall_transform_cvm(
            cm.adjacent_copula(pos).copula, pairs, reps, mix_seed(g.seed, 1000 + pos),
            std::make_pair(cm.marginal(pos - 1), cm.marginal(pos)));
        csv << "copula:" << cm.model(pos - 1).model_id << '|' << cm.model(pos).model_id << ','
            << fmt(r.statistic) << ',' << fmt(r.normalized) << ',' << fmt(r.p_value) << ','
            << r.bootstrap_B << ',' << r.n << '\n';
      }
      write_text(csv.str(), resolve_output(g, out));
      write_manifest(g, "gof", &cfg);
    } else if (*syn) {
      SynthSpec spec = spec_path.empty() ? default_synth_spec(k_synth, 1000, g.seed)
                                         : synth_spec_from_json(read_json(spec_path));
      if (n_queries > 0) spec.n_queries = n_queries;
      if (spec_path.empty() || app.get_option("--seed")->count() > 0) spec.seed = g.seed;
      write_dataset(emit_dataset(spec), resolve_output(g, out));
      if (!truth.empty()) write_json(synth_spec_to_json(spec), resolve_output(g, truth));
      write_manifest(g, "synth", nullptr);
    } else if (*scal) {
      auto cfg = load_config(config);
      cfg.tune.seed = g.seed;
      std::ostringstream csv;
      csv << timing_csv_header();
      for (std::size_t k = 2; k <= k_max; ++k) {
        const auto cm = ground_truth_model(default_synth_spec(k, 0, g.seed));
        TuneStats ts;
        const auto t0 = std::chrono::steady_clock::now();
        tune(cm, cfg.tune, &ts);
        const double tune_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        csv << k << ",tune," << ts.evaluations << ',' << fmt(tune_s) << '\n';
        GridStats gs;
        grid_search(cm, cfg.grid, &gs);
        csv << k << ",grid," << gs.candidates << ',' << fmt(gs.seconds) << '\n';
        std::cerr << "k=" << k << ": tune " << ts.solves << " solves / " << ts.evaluations
                  << " evaluations in " << tune_s << " s; grid " << gs.candidates
                  << " candidates in " << gs.seconds << " s\n";
      }
      write_text(csv.str(), resolve_output(g, out));
      write_manifest(g, "scaling", &cfg);
    }
  } catch (const Error& e) {
    if (g.json_errors) {
      std::cerr << Json{{"error", std::string(error_code_name(e.code()))},
                        {"message", e.what()},
                        {"exit_code", exit_code(e.code())}}
                       .dump()
                << '\n';
    } else {
      std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << '\n';
    }
    return exit_code(e.code());
  } catch (const std::exception& e) {
    if (g.json_errors) {
      std::cerr << Json{{"error", "Internal"}, {"message", e.what()}, {"exit_code", 1}}.dump() << '\n';
    } else {
      std::cerr << "error: " << e.what() << '\n';
    }
    return 1;
  }
  return 0;
}
