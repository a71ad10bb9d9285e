// Copyright 2026 The specmap Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// specmap: command-line front end. Every pipeline stage is a subcommand that
// reads and writes files, and `sweep` runs a whole experiment from a config.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "specmap/pipeline.hpp"

namespace {

using namespace specmap;
namespace pl = specmap::pipeline;

Scene resolve_scene(const std::string& ref) {
  if (ref.rfind("table1:", 0) == 0) {
    try {
      return table1_scene(std::stoi(ref.substr(7)));
    } catch (const std::exception& e) {
      throw ConfigError("--scene " + ref + ": " + e.what());
    }
  }
  return io::load_scene(ref);
}

SpectrumGrid load_grid(const std::string& path, const GridSpec* spec) {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".csv") {
    if (!spec) throw ConfigError(path + ": CSV grids need --scene for the grid layout");
    return io::load_grid_csv(path, *spec);
  }
  return io::load_grid_binary(path);
}

void save_grid(const SpectrumGrid& g, const std::string& path) {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".csv") io::save_grid_csv(g, path);
  else io::save_grid_binary(g, path);
}

void write_json(const nlohmann::json& j, const std::string& path) {
  if (path.empty() || path == "-") std::cout << j.dump(2) << '\n';
  else io::open_out(path) << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3D spectrum map reconstruction from sparse RSS samples"};
  app.require_subcommand(1);

  // generate
  std::string gen_scene = "table1:3", gen_out = "truth.bin", gen_csv;
  UrbanPlParams gen_params;
  std::uint64_t gen_seed = 1;
  auto* gen = app.add_subcommand("generate", "Synthesize a truth grid for a scene");
  gen->add_option("--scene", gen_scene, "Scene JSON file or table1:K")->capture_default_str();
  gen->add_option("--A", gen_params.A, "Urban path-loss coefficient A")->capture_default_str();
  gen->add_option("--B", gen_params.B, "Height exponent B")->capture_default_str();
  gen->add_option("--sigma", gen_params.sigma_db, "Shadowing std-dev (dB)")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Shadowing seed")->capture_default_str();
  gen->add_option("-o,--out", gen_out, "Output grid (.bin or .csv)")->capture_default_str();
  gen->add_option("--csv", gen_csv, "Also write a CSV copy");

  // sample
  std::string smp_grid = "truth.bin", smp_out = "samples.csv";
  double smp_rate = 0.2;
  std::uint64_t smp_seed = 1;
  auto* smp = app.add_subcommand("sample", "Draw uniform random samples from a grid");
  smp->add_option("--grid", smp_grid, "Truth grid (.bin)")->capture_default_str();
  smp->add_option("--rate", smp_rate, "Fraction of cells to observe")->capture_default_str();
  smp->add_option("--seed", smp_seed, "Sampling seed")->capture_default_str();
  smp->add_option("-o,--out", smp_out, "Output samples CSV")->capture_default_str();

  // detect
  std::string det_samples = "samples.csv", det_trace, det_out;
  double det_freq = 100.0;
  mmpld::Config det_cfg;
  auto* det = app.add_subcommand("detect", "Estimate the number of transmitters");
  det->add_option("--samples", det_samples, "Samples CSV")->capture_default_str();
  det->add_option("--frequency", det_freq, "Carrier frequency (MHz)")->capture_default_str();
  det->add_option("--sigma1", det_cfg.thresholds.sigma1, "Absolute stop threshold")->capture_default_str();
  det->add_option("--sigma2", det_cfg.thresholds.sigma2, "Relative stop threshold")->capture_default_str();
  det->add_option("--k-max", det_cfg.k_max, "Largest K considered")->capture_default_str();
  det->add_option("--trace", det_trace, "Write the criterion trace CSV here");
  det->add_option("-o,--out", det_out, "Write the result JSON here (default stdout)");

  // estimate
  std::string est_samples = "samples.csv", est_out = "sources.json", est_trace, est_scene, est_residual = "mw";
  int est_k = 1;
  double est_freq = 100.0;
  sfla::Config est_cfg;
  std::vector<double> est_step_min;
  auto* est = app.add_subcommand("estimate", "Estimate transmitter positions and powers");
  est->add_option("--samples", est_samples, "Samples CSV")->capture_default_str();
  est->add_option("-k,--k", est_k, "Number of transmitters")->capture_default_str();
  est->add_option("--frequency", est_freq, "Carrier frequency (MHz)")->capture_default_str();
  est->add_option("--scene", est_scene, "Scene whose grid bounds the search box");
  est->add_option("--population", est_cfg.population)->capture_default_str();
  est->add_option("--memeplexes", est_cfg.memeplexes)->capture_default_str();
  est->add_option("--local-iters", est_cfg.local_iters)->capture_default_str();
  est->add_option("--global-iters", est_cfg.global_iters)->capture_default_str();
  est->add_option("--patience", est_cfg.patience)->capture_default_str();
  est->add_option("--alpha", est_cfg.alpha, "Path-loss exponent of the search model")->capture_default_str();
  est->add_option("--max-fit-samples", est_cfg.max_fit_samples, "Subsample cap (0 = all)")->capture_default_str();
  est->add_option("--residual", est_residual, "Fitness residual domain")
      ->check(CLI::IsMember({"mw", "db"}))
      ->capture_default_str();
  est->add_option("--step-min", est_step_min, "Minimum leap per dimension: log10_eta x y z power")->expected(5);
  est->add_option("--seed", est_cfg.seed)->capture_default_str();
  est->add_option("--trace", est_trace, "Write the fitness trace CSV here");
  est->add_option("-o,--out", est_out, "Output sources JSON")->capture_default_str();

  // fit
  std::string fit_samples = "samples.csv", fit_sources = "sources.json", fit_out, fit_objective = "combined_rss";
  double fit_freq = 100.0;
  auto* fit = app.add_subcommand("fit", "Learn path-loss parameters A, B, sigma");
  fit->add_option("--samples", fit_samples, "Samples CSV")->capture_default_str();
  fit->add_option("--sources", fit_sources, "Transmitters JSON")->capture_default_str();
  fit->add_option("--frequency", fit_freq, "Carrier frequency (MHz)")->capture_default_str();
  fit->add_option("--objective", fit_objective)->check(CLI::IsMember({"combined_rss", "summed_loss"}))->capture_default_str();
  fit->add_option("-o,--out", fit_out, "Write the fit JSON here (default stdout)");

  // reconstruct
  std::string rec_method = "model", rec_scene = "table1:3", rec_samples = "samples.csv", rec_sources = "sources.json",
              rec_params, rec_out = "estimate.bin";
  bool rec_overlay = false;
  auto* rec = app.add_subcommand("reconstruct", "Build a full grid from samples and/or a model");
  rec->add_option("--method", rec_method, "model, fspm, IDW or HaLRTC")
      ->check(CLI::IsMember({"model", "fspm", "IDW", "HaLRTC"}))
      ->capture_default_str();
  rec->add_option("--scene", rec_scene, "Scene giving the grid layout")->capture_default_str();
  rec->add_option("--samples", rec_samples, "Samples CSV")->capture_default_str();
  rec->add_option("--sources", rec_sources, "Transmitters JSON (model methods)")->capture_default_str();
  rec->add_option("--params", rec_params, "Fit JSON with A, B (method model)");
  rec->add_flag("--overlay", rec_overlay, "Copy sample values onto their cells");
  rec->add_option("-o,--out", rec_out, "Output grid (.bin or .csv)")->capture_default_str();

  // evaluate
  std::string ev_est = "estimate.bin", ev_truth = "truth.bin", ev_scene = "table1:3", ev_sources, ev_out, ev_log;
  double ev_tau = -90.0;
  auto* ev = app.add_subcommand("evaluate", "Score an estimated grid against the truth");
  ev->add_option("--estimate", ev_est, "Estimated grid")->capture_default_str();
  ev->add_option("--truth", ev_truth, "Truth grid")->capture_default_str();
  ev->add_option("--scene", ev_scene, "Scene with the true transmitters")->capture_default_str();
  ev->add_option("--sources", ev_sources, "Estimated transmitters JSON (for localisation scores)");
  ev->add_option("--threshold", ev_tau, "Zone threshold (dBm)")->capture_default_str();
  ev->add_option("-o,--out", ev_out, "Write the metrics JSON here (default stdout)");
  ev->add_option("--log", ev_log, "Append one CSV row to this run log");

  // sweep
  std::string sw_config, sw_out;
  int sw_threads = 0;
  auto* sw = app.add_subcommand("sweep", "Run a full experiment from a JSON config");
  sw->add_option("config", sw_config, "Experiment config JSON")->required();
  sw->add_option("--out", sw_out, "Output directory (overrides the config)");
  sw->add_option("--threads", sw_threads, "Worker threads (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pl::kExitConfig;
  }

  try {
    if (*gen) {
      const Scene scene = resolve_scene(gen_scene);
      gen_params.frequency_mhz = scene.frequency_mhz;
      gen_params.validate();
      const auto grid = generate_truth_grid(scene, gen_params, gen_seed);
      save_grid(grid, gen_out);
      if (!gen_csv.empty()) io::save_grid_csv(grid, gen_csv);
    } else if (*smp) {
      const auto grid = load_grid(smp_grid, nullptr);
      const auto set = draw_samples(grid, {smp_rate, smp_seed});
      io::save_samples_csv(set.samples, smp_out);
      std::cerr << set.samples.size() << " samples\n";
    } else if (*det) {
      const auto samples = io::load_samples_csv(det_samples);
      const auto d = mmpld::detect_source_count(samples, det_freq, det_cfg);
      nlohmann::json j{{"k", d.k}, {"degenerate", d.degenerate}, {"hit_k_max", d.hit_k_max},
                       {"criterion", d.state.criterion_history}};
      write_json(j, det_out);
      if (!det_trace.empty()) {
        auto f = io::open_out(det_trace);
        f << "k,criterion\n";
        for (std::size_t i = 0; i < d.state.criterion_history.size(); ++i)
          f << i + 1 << ',' << io::fmt(d.state.criterion_history[i]) << '\n';
      }
    } else if (*est) {
      const auto samples = io::load_samples_csv(est_samples);
      if (!est_scene.empty()) est_cfg.box = sfla::SearchBox::around(resolve_scene(est_scene).grid);
      est_cfg.residual = est_residual == "db" ? sfla::Residual::kDecibel : sfla::Residual::kMilliwatt;
      if (!est_step_min.empty()) std::copy(est_step_min.begin(), est_step_min.end(), est_cfg.step_min.begin());
      const auto res = sfla::estimate_parameters(samples, est_k, est_cfg);
      const auto canon = sfla::canonicalize_power(res.best, est_cfg.alpha, est_freq);
      std::vector<Transmitter> tx;
      for (const auto& s : canon) tx.push_back({s.position, s.power_watts});
      nlohmann::json j{{"sources", io::to_json(tx)}, {"raw", io::to_json(res.best)}, {"fitness", res.fitness},
                       {"iterations", res.iterations}, {"evaluations", res.evaluations}};
      write_json(j, est_out);
      if (!est_trace.empty()) {
        auto f = io::open_out(est_trace);
        f << "iteration,best_fitness\n";
        for (std::size_t i = 0; i < res.trace.size(); ++i) f << i + 1 << ',' << io::fmt(res.trace[i]) << '\n';
      }
    } else if (*fit) {
      const auto samples = io::load_samples_csv(fit_samples);
      const auto sources = io::transmitters_from_json(io::parse_json_file(fit_sources));
      plfit::FitOptions opt;
      opt.objective = fit_objective == "summed_loss" ? plfit::Objective::kSummedLoss : plfit::Objective::kCombinedRss;
      const auto r = plfit::fit_pl_params(samples, sources, fit_freq, {2.0, 0.0, 0.0, fit_freq}, {}, opt);
      write_json(io::to_json(r), fit_out);
    } else if (*rec) {
      const Scene scene = resolve_scene(rec_scene);
      const auto samples = io::load_samples_csv(rec_samples);
      SpectrumGrid out;
      if (rec_method == "IDW") {
        out = baselines::idw_reconstruct(samples, scene.grid);
      } else if (rec_method == "HaLRTC") {
        out = baselines::halrtc_reconstruct(samples_to_grid(scene.grid, samples)).grid;
      } else {
        const auto sources = io::transmitters_from_json(io::parse_json_file(rec_sources));
        UrbanPlParams p{2.0, 0.0, 0.0, scene.frequency_mhz};
        if (rec_method == "model") {
          if (rec_params.empty()) throw ConfigError("--method model needs --params");
          p = io::pl_params_from_json(io::parse_json_file(rec_params));
        }
        out = plfit::reconstruct_grid(scene.grid, sources, p);
        if (rec_overlay) {
          const auto obs = samples_to_grid(scene.grid, samples);
          for (std::size_t i = 0; i < obs.size(); ++i)
            if (obs.observed(i)) out.set(i, obs.values()[i], true);
        }
      }
      save_grid(out, rec_out);
    } else if (*ev) {
      const Scene scene = resolve_scene(ev_scene);
      const auto estg = load_grid(ev_est, &scene.grid);
      const auto truth = load_grid(ev_truth, &scene.grid);
      metrics::MetricsReport m;
      m.k_true = static_cast<int>(scene.sources.size());
      m.rmse = metrics::rmse(estg, truth);
      m.rms_db = metrics::rms_db(estg, truth);
      const auto z = metrics::cdzr_fazr(estg, truth, scene.sources, ev_tau);
      m.cdzr = z.cdzr;
      m.fazr = z.fazr;
      m.zones_skipped = z.skipped_any();
      if (!ev_sources.empty()) {
        const auto est_tx = io::transmitters_from_json(io::parse_json_file(ev_sources));
        m.k_est = static_cast<int>(est_tx.size());
        m.detect_success = m.k_est == m.k_true;
        m.loc_e = metrics::loc_error(est_tx, scene.sources);
        m.ss_e = metrics::ss_error(est_tx, scene.sources);
      }
      write_json(io::to_json(m), ev_out);
      if (!ev_log.empty()) {
        const bool fresh = !std::ifstream(ev_log).good();
        std::ofstream log(ev_log, std::ios::app);
        if (!log) throw ConfigError("cannot open '" + ev_log + "' for appending");
        if (fresh) log << "estimate,rmse,rms_db,cdzr,fazr,zones_skipped,loc_e,ss_e,k_true,k_est,detect_success\n";
        log << pl::sanitize(ev_est) << ',' << io::fmt(m.rmse) << ',' << io::fmt(m.rms_db) << ',' << io::fmt(m.cdzr)
            << ',' << io::fmt(m.fazr) << ',' << (m.zones_skipped ? 1 : 0) << ',' << io::fmt(m.loc_e) << ','
            << io::fmt(m.ss_e) << ',' << m.k_true << ',' << m.k_est << ',' << (m.detect_success ? 1 : 0) << '\n';
      }
    } else if (*sw) {
      auto cfg = pl::load_config(sw_config);
      if (!sw_out.empty()) cfg.output_dir = sw_out;
      if (sw_threads > 0) cfg.threads = sw_threads;
      const auto res = pl::run_sweep(cfg);
      pl::write_sweep_outputs(res, cfg, cfg.output_dir);
      for (const auto& r : res.rows)
        if (!r.ok) std::cerr << "failed: " << r.error << '\n';
      std::cerr << res.rows.size() << " rows, " << res.failures() << " failed, written to " << cfg.output_dir << '\n';
      return res.exit_code();
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return pl::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pl::kExitAllFailed;
  }
  return pl::kExitOk;
}
