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


// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion and exits
// non-zero when any of them fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "specmap/pipeline.hpp"

namespace {

using namespace specmap;
namespace fs = std::filesystem;
namespace pl = specmap::pipeline;

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Options {
  fs::path configs;
  fs::path out;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v, int digits = 4) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

// --- 1: clustering bookkeeping against brute force -------------------------------

Verdict mmpld_oracle(const Options&) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> pos(0.0, 500.0), rss(-100.0, 10.0);
  std::uniform_int_distribution<int> size(2, 100);
  std::size_t checks = 0, mismatches = 0;
  for (int set = 0; set < 200; ++set) {
    std::vector<Sample> s(static_cast<std::size_t>(size(rng)));
    for (auto& x : s) x = {{pos(rng), pos(rng) - 450.0, pos(rng) / 5.0}, rss(rng)};
    const double f = 100.0;
    std::size_t first = 0;
    for (std::size_t i = 1; i < s.size(); ++i)
      if (s[i].rss_dbm > s[first].rss_dbm) first = i;
    auto st = mmpld::init_state(first, mmpld::pld_vector(s, first, f));
    while (st.k() < std::min<std::size_t>(5, s.size())) {
      const auto next = mmpld::select_next_center(st);
      mmpld::update_and_assign(st, next, mmpld::pld_vector(s, next, f));
      for (std::size_t i = 0; i < s.size(); ++i) {
        double best = 0.0;
        int arg = -1;
        for (std::size_t q = 0; q < st.centers.size(); ++q) {
          const Sample& c = s[st.centers[q]];
          const double d_km = std::max(distance(c.position, s[i].position), 1.0) / 1000.0;
          const double v = std::abs(32.4 + 20.0 * std::log10(f) + 20.0 * std::log10(d_km) -
                                    std::abs(c.rss_dbm - s[i].rss_dbm));
          if (arg < 0 || v < best) {
            best = v;
            arg = static_cast<int>(q);
          }
        }
        ++checks;
        if (st.d_min[i] != best || st.assignment[i] != arg) ++mismatches;
      }
    }
  }
  return {mismatches == 0, std::to_string(checks) + " (sample, iteration) checks over 200 random sets, " +
                               std::to_string(mismatches) + " mismatches"};
}

// --- 2: frog leaping against a grid-search oracle ---------------------------------

struct OracleRun {
  int wins = 0;
  double worst_ratio = 0.0;
};

// Oracle: every cell center with 10 log-spaced power levels spanning a factor
// of 16 around the least-squares power at the true position.
OracleRun sfla_against_oracle(double position_step_min) {
  const GridSpec grid({0, 0, 0}, {100, 100, 25}, {20, 20, 5});
  Scene scene{grid, {{{41.3, 58.9, 7.1}, 1.0}}, 100.0};
  const auto truth_grid = generate_truth_grid(scene, {2.5, -0.1, 0.0, 100.0}, 1);
  OracleRun out;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto samples = draw_samples(truth_grid, {0.1, seed}).samples;
    sfla::Config cfg;
    cfg.box = sfla::SearchBox::around(grid);
    cfg.seed = seed;
    for (std::size_t d = sfla::kX; d <= sfla::kZ; ++d) cfg.step_min[d] = position_step_min;
    const sfla::FitnessData data(samples);

    const double eta = sfla::reference_eta(cfg.alpha, scene.frequency_mhz);
    const sfla::Genome unit{{eta, scene.sources[0].position, 1.0}};
    double num_ls = 0.0, den_ls = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = sfla::predicted_rss_mw(unit, data.positions()[i], cfg.alpha);
      num_ls += g * data.rss_mw()[i];
      den_ls += g * g;
    }
    const double p_ls = num_ls / den_ls;
    double oracle = std::numeric_limits<double>::infinity();
    for (std::size_t lin = 0; lin < grid.cell_count(); ++lin)
      for (int l = 0; l < 10; ++l) {
        const double p = p_ls * std::pow(16.0, l / 9.0 - 0.5);
        oracle = std::min(oracle, sfla::fitness_of({{eta, grid.cell_center(lin), p}}, data, cfg.alpha));
      }

    const auto res = sfla::estimate_parameters(samples, 1, cfg);
    if (res.fitness <= oracle) ++out.wins;
    out.worst_ratio = std::max(out.worst_ratio, res.fitness / oracle);
  }
  return out;
}

Verdict sfla_oracle(const Options&) {
  const auto floor = sfla_against_oracle(2.0);
  const auto bare = sfla_against_oracle(0.0);
  std::ostringstream detail;
  detail << floor.wins << "/10 seeds at or below the oracle with a 2 m position step floor (worst SFLA/oracle ratio "
         << num(floor.worst_ratio) << "); without the floor " << bare.wins << "/10 (worst ratio "
         << num(bare.worst_ratio) << ")";
  return {floor.wins >= 9, detail.str()};
}

// --- 3: path-loss fit round trip ---------------------------------------------------------

Verdict fit_round_trip(const Options&) {
  const Scene scene = table1_scene(3);
  const UrbanPlParams truth{2.5, -0.1, 0.0, 100.0};
  const auto grid = generate_truth_grid(scene, truth, 1);
  const auto samples = draw_samples(grid, {0.2, 1}).samples;
  const auto fit = plfit::fit_pl_params(samples, scene.sources, scene.frequency_mhz);
  const auto rec = plfit::reconstruct_grid(scene.grid, scene.sources, fit.params);
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) worst = std::max(worst, std::abs(rec.values()[i] - grid.values()[i]));
  const double ea = std::abs(fit.params.A - truth.A) / std::abs(truth.A);
  const double eb = std::abs(fit.params.B - truth.B) / std::abs(truth.B);
  return {ea <= 0.01 && eb <= 0.01 && worst <= 1e-3,
          "A=" + num(fit.params.A, 8) + " B=" + num(fit.params.B, 8) + " (rel err " + num(ea, 2) + ", " +
              num(eb, 2) + "), max |rec-truth| " + num(worst, 2) + " dB"};
}

// --- sweeps ---------------------------------------------------------------------------------

pl::SweepResult run_config(const Options& o, const std::string& name, pl::ExperimentConfig* out_cfg = nullptr,
                           int threads = 0) {
  auto cfg = pl::load_config((o.configs / name).string());
  if (threads > 0) cfg.threads = threads;
  const auto res = pl::run_sweep(cfg);
  pl::write_sweep_outputs(res, cfg, (o.out / fs::path(name).stem()).string());
  if (out_cfg) *out_cfg = cfg;
  return res;
}

double mean_rmse(const pl::SweepResult& r, int k, pl::Method m, double rate) {
  for (const auto& a : r.aggregates)
    if (a.k_true == k && a.method == m && a.rate == rate) return a.get("rmse").first;
  return std::numeric_limits<double>::quiet_NaN();
}

Verdict rate_trend(const Options& o) {
  pl::ExperimentConfig cfg;
  const auto res = run_config(o, "fig4.json", &cfg);
  const int k = static_cast<int>(cfg.scenes.front().sources.size());
  bool ok = res.failures() == 0;
  std::ostringstream os;
  for (auto m : cfg.methods) {
    os << pl::method_name(m) << '[';
    int small = 0, big = 0;
    for (std::size_t i = 0; i < cfg.rates.size(); ++i) {
      const double v = mean_rmse(res, k, m, cfg.rates[i]);
      os << (i ? " " : "") << num(v, 3);
      if (i == 0) continue;
      const double prev = mean_rmse(res, k, m, cfg.rates[i - 1]);
      if (v > prev) {
        if (pl::model_driven(m) && v <= prev * 1.05) ++small;
        else ++big;
      }
    }
    os << "] ";
    if (big > 0 || small > 1) ok = false;
  }
  const double slpm = mean_rmse(res, k, pl::Method::kSlpm, 0.2);
  const double fspm = mean_rmse(res, k, pl::Method::kFspm, 0.2);
  const double base = std::max(mean_rmse(res, k, pl::Method::kIdw, 0.2), mean_rmse(res, k, pl::Method::kHalrtc, 0.2));
  const bool order = slpm <= fspm && fspm <= base;
  os << "| r=0.2: SLPM " << num(slpm, 3) << " <= FSPM " << num(fspm, 3) << " <= max(IDW,HaLRTC) " << num(base, 3)
     << (order ? "" : " violated") << " | failed rows " << res.failures();
  return {ok && order, os.str()};
}

Verdict k_trend(const Options& o) {
  pl::ExperimentConfig cfg;
  const auto res = run_config(o, "fig5.json", &cfg);
  const double rate = cfg.rates.front();
  bool ok = res.failures() == 0;
  std::ostringstream os;
  for (auto m : {pl::Method::kSlpm, pl::Method::kFspm}) {
    os << pl::method_name(m) << '[';
    double prev = -1.0;
    for (std::size_t s = 0; s < cfg.scenes.size(); ++s) {
      const int k = static_cast<int>(cfg.scenes[s].sources.size());
      const double v = mean_rmse(res, k, m, rate);
      os << (s ? " " : "") << "K" << k << "=" << num(v, 3);
      if (!(v >= prev)) ok = false;
      prev = v;
    }
    os << "] ";
  }
  os << "| map from true sources and parameters[";
  for (std::size_t s = 0; s < cfg.scenes.size(); ++s) {
    const auto& scene = cfg.scenes[s];
    double acc = 0.0;
    for (auto seed : cfg.seeds) {
      const auto in = pl::make_inputs(cfg, scene, rate, seed);
      auto rec = plfit::reconstruct_grid(scene.grid, scene.sources, cfg.truth);
      if (cfg.overlay_samples) pl::overlay(rec, in.samples);
      acc += metrics::rmse(rec, in.truth);
    }
    os << (s ? " " : "") << "K" << scene.sources.size() << "=" << num(acc / static_cast<double>(cfg.seeds.size()), 3);
  }
  os << "] | failed rows " << res.failures();
  return {ok, os.str()};
}

Verdict detection(const Options& o) {
  auto cfg = pl::load_config((o.configs / "fig10.json").string());
  std::ostringstream os;
  bool ok = true;
  os << "sigma1=" << cfg.mmpld.thresholds.sigma1 << " sigma2=" << cfg.mmpld.thresholds.sigma2 << ";";
  for (const auto& scene : cfg.scenes) {
    const int k = static_cast<int>(scene.sources.size());
    for (double sigma : {0.0, cfg.truth.sigma_db}) {
      auto c = cfg;
      c.truth.sigma_db = sigma;
      os << " K" << k << "/sigma" << sigma << "[";
      for (double r : {0.3, 0.4, 0.5}) {
        std::vector<std::pair<int, int>> trials;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
          const auto in = pl::make_inputs(c, scene, r, seed);
          trials.push_back({mmpld::detect_source_count(in.samples.samples, scene.frequency_mhz, c.mmpld).k, k});
        }
        const double rate = metrics::detection_success_rate(trials);
        os << (r == 0.3 ? "" : " ") << num(rate, 2);
        if (k == 3 && rate < 0.7) ok = false;
      }
      os << "]";
    }
  }
  os << " (criterion applies to K3; other K shown for reference)";
  return {ok, os.str()};
}

// --- 7: metric identities -----------------------------------------------------------------

Verdict metric_identities(const Options&) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t violations = 0, cases = 0;
  for (int t = 0; t < 200; ++t) {
    const GridSpec g({0, 0, 0}, {10, 10, 10}, {1 + t % 7, 1 + t % 5, 1 + t % 3});
    SpectrumGrid a(g, 0.0, true);
    for (auto& v : a.values()) v = -120.0 + 130.0 * u(rng);
    ++cases;
    if (metrics::rmse(a, a) != 0.0) ++violations;
  }
  for (int k = 2; k <= 4; ++k) {
    const Scene s = table1_scene(k);
    const auto truth = generate_truth_grid(s, {}, static_cast<std::uint64_t>(k));
    for (double tau : {-90.0, -20.0, -10.0, 0.0}) {
      const auto z = metrics::cdzr_fazr(truth, truth, s.sources, tau);
      ++cases;
      if (z.cdzr != static_cast<double>(k) || z.fazr != 0.0) ++violations;
    }
  }
  for (int t = 0; t < 500; ++t) {
    std::vector<Transmitter> est(1 + t % 6), tru(1 + (t / 6) % 6);
    for (auto& s : est) s = {{500 * u(rng), 500 * u(rng), 100 * u(rng)}, 1.0};
    for (auto& s : tru) s = {{500 * u(rng), 500 * u(rng), 100 * u(rng)}, 1.0};
    const double base = metrics::loc_error(est, tru);
    std::shuffle(est.begin(), est.end(), rng);
    std::shuffle(tru.begin(), tru.end(), rng);
    ++cases;
    if (std::abs(metrics::loc_error(est, tru) - base) > 1e-9 * std::max(1.0, base)) ++violations;
  }
  return {violations == 0, std::to_string(cases) + " property cases, " + std::to_string(violations) + " violations"};
}

// --- 8: tensor completion -------------------------------------------------------------------

Verdict halrtc_sanity(const Options&) {
  const GridSpec g({0, 0, 0}, {1, 1, 1}, {20, 20, 10});
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<double> a(20), b(20), c(10);
  for (auto& x : a) x = u(rng);
  for (auto& x : b) x = u(rng);
  for (auto& x : c) x = u(rng);
  SpectrumGrid truth(g, 0.0, true);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j)
      for (int k = 0; k < 10; ++k) truth.at(CellIndex{i, j, k}) = -60.0 * a[i] * b[j] * c[k];
  const auto obs = draw_samples(truth, {0.5, 8}).observed;
  const auto r = baselines::halrtc_reconstruct(obs);
  double num_e = 0.0, den = 0.0;
  bool kept = true;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = r.grid.values()[i] - truth.values()[i];
    num_e += d * d;
    den += truth.values()[i] * truth.values()[i];
    if (obs.observed(i) && r.grid.values()[i] != obs.values()[i]) kept = false;
  }
  const double rel = std::sqrt(num_e / den);
  return {rel <= 1e-3 && kept, "relative Frobenius error " + num(rel, 3) + " after " + std::to_string(r.iterations) +
                                   " iterations, observed entries " + (kept ? "preserved" : "changed")};
}

// --- 9: determinism -------------------------------------------------------------------------------

std::string read_file(const fs::path& p, bool drop_last_column) {
  std::ifstream in(p);
  std::string line, out;
  while (std::getline(in, line)) out += (drop_last_column ? line.substr(0, line.rfind(',')) : line) + '\n';
  return out;
}

Verdict determinism(const Options& o) {
  const auto first_dir = o.out / "repeat";
  const auto second_dir = o.out / "repeat_again";
  pl::ExperimentConfig cfg;
  const auto a = run_config(o, "repeat.json", &cfg);
  const auto b = pl::run_sweep([&] {
    auto c = cfg;
    c.threads = 1;
    return c;
  }());
  pl::write_sweep_outputs(b, cfg, second_dir.string());
  std::size_t files = 0, differ = 0;
  for (const auto& entry : fs::directory_iterator(first_dir)) {
    if (entry.path().extension() != ".csv") continue;
    const bool results = entry.path().filename() == "results.csv";
    ++files;
    if (read_file(entry.path(), results) != read_file(second_dir / entry.path().filename(), results)) ++differ;
  }
  return {differ == 0 && files >= 10 && a.rows.size() == b.rows.size(),
          std::to_string(files) + " CSV files compared across a " + std::to_string(cfg.threads) +
              "-thread and a 1-thread rerun, " + std::to_string(differ) + " differ"};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Verdict(const Options&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"specmap acceptance checks"};
  Options o;
  std::string configs = "configs", out = "acceptance_out";
  std::vector<int> only;
  app.add_option("--configs", configs, "Directory holding the shipped experiment configs")->capture_default_str();
  app.add_option("--out", out, "Directory for sweep outputs")->capture_default_str();
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  o.configs = configs;
  o.out = out;
  fs::create_directories(o.out);

  const std::vector<Criterion> all{
      {1, "clustering bookkeeping matches brute force", 1.0, mmpld_oracle},
      {2, "frog leaping dominates grid-search oracle", 60.0, sfla_oracle},
      {3, "path-loss fit round trip", 10.0, fit_round_trip},
      {4, "RMSE trend over sampling rate", 900.0, rate_trend},
      {5, "RMSE trend over source count", 900.0, k_trend},
      {6, "source-count detection rate", 1200.0, detection},
      {7, "metric identities", 5.0, metric_identities},
      {8, "tensor completion sanity", 30.0, halrtc_sanity},
      {9, "sweep determinism", 900.0, determinism},
  };

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run(o);
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double s = seconds_since(t0);
    const bool in_time = s <= c.budget_s;
    const bool pass = v.pass && in_time;
    if (!pass) ++failed;
    std::cout << "criterion " << c.id << ": " << (pass ? "PASS" : "FAIL") << "  " << c.name << "  " << v.detail
              << "  [" << num(s, 3) << " s of " << c.budget_s << " s" << (in_time ? "" : ", over budget") << "]"
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
