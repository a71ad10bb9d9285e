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

/**
 * \file pipeline.hpp
 *
 * End-to-end experiments: generate a truth map, sample it, reconstruct with
 * one of four methods and score the result. A sweep runs the cartesian
 * product of scenes, methods, rates and seeds on a worker pool and writes
 * results.csv, aggregates.csv, threshold_curves.csv and fig4..fig10 tables.
 *
 * Every stochastic stage draws from its own stream derived from the run
 * seed, so a (scene, rate, seed) triple fully determines its rows. SLPM and
 * FSPM share the source-detection and source-estimation stages.
 */

#ifndef SPECMAP_PIPELINE_HPP
#define SPECMAP_PIPELINE_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "specmap/baselines.hpp"
#include "specmap/error.hpp"
#include "specmap/io.hpp"
#include "specmap/metrics.hpp"
#include "specmap/mmpld.hpp"
#include "specmap/plfit.hpp"
#include "specmap/sampler.hpp"
#include "specmap/scene.hpp"
#include "specmap/sfla.hpp"
#include "specmap/synthgen.hpp"

namespace specmap::pipeline {

using json = nlohmann::json;

enum class Method { kSlpm, kFspm, kIdw, kHalrtc };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::kSlpm: return "SLPM";
    case Method::kFspm: return "FSPM";
    case Method::kIdw: return "IDW";
    default: return "HaLRTC";
  }
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::kSlpm, Method::kFspm, Method::kIdw, Method::kHalrtc})
    if (s == method_name(m)) return m;
  throw ConfigError("unknown method '" + s + "' (expected SLPM, FSPM, IDW or HaLRTC)");
}

inline bool model_driven(Method m) { return m == Method::kSlpm || m == Method::kFspm; }

/// Exit codes of a sweep.
enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitAllFailed = 2, kExitPartial = 3 };

struct ExperimentConfig {
  std::vector<Scene> scenes;
  UrbanPlParams truth;
  std::vector<double> rates{0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<Method> methods{Method::kSlpm, Method::kFspm, Method::kIdw, Method::kHalrtc};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

  double threshold_dbm = -90.0;
  std::vector<double> threshold_curve_dbm{-110.0, -100.0, -90.0, -80.0, -70.0};

  mmpld::Config mmpld;
  sfla::Config sfla;
  bool sfla_box_from_grid = true;
  double sfla_step_max_fraction = 0.25;  ///< leap cap as a fraction of each box width
  plfit::FitOptions plfit;
  plfit::Bounds plfit_bounds;
  double plfit_init_a = 2.0;
  double plfit_init_b = 0.0;
  baselines::IdwConfig idw;
  baselines::HalrtcConfig halrtc;
  bool overlay_samples = true;

  int threads = 1;
  std::string output_dir = "results";
  bool dump_grids = false;

  json source = json::object();  ///< normalized input, hashed into every row

  void validate() const {
    if (scenes.empty()) throw ConfigError("no scene configured");
    if (rates.empty()) throw ConfigError("rates must be non-empty");
    for (double r : rates)
      if (!(r > 0.0 && r <= 1.0)) throw ConfigError("rates must lie in (0, 1]");
    if (methods.empty()) throw ConfigError("methods must be non-empty");
    if (seeds.empty()) throw ConfigError("seeds must be non-empty");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (!(truth.A > 0.0)) throw ConfigError("truth.A must be > 0");
    if (!(truth.sigma_db >= 0.0)) throw ConfigError("truth.sigma_db must be >= 0");
    try {
      sfla.validate();
      halrtc.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    if (mmpld.k_max < 1) throw ConfigError("mmpld.k_max must be >= 1");
    if (plfit.multistarts < 1) throw ConfigError("plfit.multistarts must be >= 1");
    if (idw.neighbor_count < 1 || !(idw.power_exponent > 0.0)) throw ConfigError("idw: need neighbors >= 1 and power > 0");
  }
};

// --- config parsing ------------------------------------------------------------

namespace detail {

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + "." + key + ": unknown key");
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

inline std::pair<double, double> read_range(const json& obj, const char* key, std::pair<double, double> def,
                                            const std::string& where) {
  if (!obj.contains(key)) return def;
  const auto& v = obj.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(where + "." + key + ": expected [lo, hi]");
  return {v[0].get<double>(), v[1].get<double>()};
}

inline Scene scene_from_ref(const json& j, const std::filesystem::path& base) {
  if (j.is_object() && j.contains("table1")) {
    check_keys(j, {"table1"}, "scene");
    try {
      return table1_scene(j.at("table1").get<int>());
    } catch (const std::exception& e) {
      throw ConfigError(std::string("scene.table1: ") + e.what());
    }
  }
  if (j.is_object() && j.contains("file")) {
    check_keys(j, {"file"}, "scene");
    std::filesystem::path p = j.at("file").get<std::string>();
    if (p.is_relative()) p = base / p;
    return io::load_scene(p.string());
  }
  return io::scene_from_json(j);
}

/// 1-based line of the last key of a dotted path, or 0 if not found.
inline std::size_t locate_key(const std::string& text, const std::string& dotted) {
  std::size_t pos = 0;
  std::stringstream ss(dotted);
  std::string part;
  bool found = false;
  while (std::getline(ss, part, '.')) {
    const auto br = part.find('[');
    if (br != std::string::npos) part = part.substr(0, br);
    if (part.empty()) continue;
    const auto hit = text.find("\"" + part + "\"", pos);
    if (hit == std::string::npos) break;
    pos = hit;
    found = true;
  }
  if (!found) return 0;
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base = ".") {
  using detail::read;
  detail::check_keys(j,
                     {"scene", "k_sweep", "truth", "rates", "methods", "seeds", "metrics", "mmpld", "sfla", "plfit",
                      "idw", "halrtc", "reconstruction", "threads", "output"},
                     "config");
  ExperimentConfig c;

  if (j.contains("scene") && j.contains("k_sweep")) throw ConfigError("config: give either scene or k_sweep, not both");
  if (j.contains("k_sweep")) {
    const auto& ks = j.at("k_sweep");
    if (!ks.is_array() || ks.empty()) throw ConfigError("k_sweep: expected a non-empty array of source counts");
    for (const auto& k : ks) {
      try {
        c.scenes.push_back(table1_scene(k.get<int>()));
      } catch (const std::exception& e) {
        throw ConfigError(std::string("k_sweep: ") + e.what());
      }
    }
  } else if (j.contains("scene")) {
    c.scenes.push_back(detail::scene_from_ref(j.at("scene"), base));
  } else {
    throw ConfigError("config: missing scene");
  }

  if (j.contains("truth")) {
    const auto& t = j.at("truth");
    detail::check_keys(t, {"A", "B", "sigma_db"}, "truth");
    read(t, "A", c.truth.A, "truth");
    read(t, "B", c.truth.B, "truth");
    read(t, "sigma_db", c.truth.sigma_db, "truth");
  }

  read(j, "rates", c.rates, "config");
  read(j, "seeds", c.seeds, "config");
  if (j.contains("methods")) {
    std::vector<std::string> names;
    read(j, "methods", names, "config");
    c.methods.clear();
    for (const auto& n : names) {
      try {
        c.methods.push_back(parse_method(n));
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("methods: ") + e.what());
      }
    }
    for (std::size_t a = 0; a < c.methods.size(); ++a)
      for (std::size_t b = a + 1; b < c.methods.size(); ++b)
        if (c.methods[a] == c.methods[b]) throw ConfigError("methods: duplicate entry");
  }

  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    detail::check_keys(m, {"threshold_dbm", "threshold_curve_dbm"}, "metrics");
    read(m, "threshold_dbm", c.threshold_dbm, "metrics");
    read(m, "threshold_curve_dbm", c.threshold_curve_dbm, "metrics");
  }

  if (j.contains("mmpld")) {
    const auto& m = j.at("mmpld");
    detail::check_keys(m, {"sigma1", "sigma2", "k_max", "exponent"}, "mmpld");
    read(m, "sigma1", c.mmpld.thresholds.sigma1, "mmpld");
    read(m, "sigma2", c.mmpld.thresholds.sigma2, "mmpld");
    read(m, "k_max", c.mmpld.k_max, "mmpld");
    read(m, "exponent", c.mmpld.exponent, "mmpld");
  }

  if (j.contains("sfla")) {
    const auto& s = j.at("sfla");
    detail::check_keys(s,
                       {"population", "memeplexes", "local_iters", "global_iters", "tol", "patience", "alpha",
                        "max_fit_samples", "eta_range", "power_range_watts", "step_max_fraction", "step_min",
                        "residual"},
                       "sfla");
    read(s, "population", c.sfla.population, "sfla");
    read(s, "memeplexes", c.sfla.memeplexes, "sfla");
    read(s, "local_iters", c.sfla.local_iters, "sfla");
    read(s, "global_iters", c.sfla.global_iters, "sfla");
    read(s, "tol", c.sfla.tol, "sfla");
    read(s, "patience", c.sfla.patience, "sfla");
    read(s, "alpha", c.sfla.alpha, "sfla");
    read(s, "max_fit_samples", c.sfla.max_fit_samples, "sfla");
    const auto eta = detail::read_range(s, "eta_range", {c.sfla.box.eta.lo, c.sfla.box.eta.hi}, "sfla");
    c.sfla.box.eta = {eta.first, eta.second};
    const auto pw = detail::read_range(s, "power_range_watts", {c.sfla.box.power_watts.lo, c.sfla.box.power_watts.hi}, "sfla");
    c.sfla.box.power_watts = {pw.first, pw.second};
    if (s.contains("step_min")) {
      std::vector<double> v;
      read(s, "step_min", v, "sfla");
      if (v.size() != sfla::kDimsPerSource) throw ConfigError("sfla.step_min: expected [log10_eta, x, y, z, power_watts]");
      std::copy(v.begin(), v.end(), c.sfla.step_min.begin());
    }
    if (s.contains("residual")) {
      std::string r;
      read(s, "residual", r, "sfla");
      if (r == "mw") c.sfla.residual = sfla::Residual::kMilliwatt;
      else if (r == "db") c.sfla.residual = sfla::Residual::kDecibel;
      else throw ConfigError("sfla.residual: expected mw or db");
    }
    read(s, "step_max_fraction", c.sfla_step_max_fraction, "sfla");
    if (!(c.sfla_step_max_fraction > 0.0 && c.sfla_step_max_fraction <= 1.0))
      throw ConfigError("sfla.step_max_fraction must lie in (0, 1]");
  }

  if (j.contains("plfit")) {
    const auto& p = j.at("plfit");
    detail::check_keys(p, {"objective", "multistarts", "max_iters", "init", "a_range", "b_range"}, "plfit");
    if (p.contains("objective")) {
      std::string o;
      read(p, "objective", o, "plfit");
      if (o == "combined_rss") c.plfit.objective = plfit::Objective::kCombinedRss;
      else if (o == "summed_loss") c.plfit.objective = plfit::Objective::kSummedLoss;
      else throw ConfigError("plfit.objective: expected combined_rss or summed_loss");
    }
    read(p, "multistarts", c.plfit.multistarts, "plfit");
    read(p, "max_iters", c.plfit.max_iters, "plfit");
    const auto init = detail::read_range(p, "init", {c.plfit_init_a, c.plfit_init_b}, "plfit");
    c.plfit_init_a = init.first;
    c.plfit_init_b = init.second;
    const auto ar = detail::read_range(p, "a_range", {c.plfit_bounds.a_lo, c.plfit_bounds.a_hi}, "plfit");
    const auto br = detail::read_range(p, "b_range", {c.plfit_bounds.b_lo, c.plfit_bounds.b_hi}, "plfit");
    c.plfit_bounds = {ar.first, ar.second, br.first, br.second};
    if (!(ar.first > 0.0 && ar.first <= ar.second && br.first <= br.second)) throw ConfigError("plfit: invalid ranges");
  }

  if (j.contains("idw")) {
    const auto& i = j.at("idw");
    detail::check_keys(i, {"power", "neighbors"}, "idw");
    read(i, "power", c.idw.power_exponent, "idw");
    read(i, "neighbors", c.idw.neighbor_count, "idw");
  }

  if (j.contains("halrtc")) {
    const auto& h = j.at("halrtc");
    detail::check_keys(h, {"weights", "rho", "rho_growth", "max_iters", "tol"}, "halrtc");
    if (h.contains("weights")) {
      std::vector<double> w;
      read(h, "weights", w, "halrtc");
      if (w.size() != 3) throw ConfigError("halrtc.weights: expected three numbers");
      c.halrtc.mode_weights = {w[0], w[1], w[2]};
    }
    read(h, "rho", c.halrtc.rho, "halrtc");
    read(h, "rho_growth", c.halrtc.rho_growth, "halrtc");
    read(h, "max_iters", c.halrtc.max_iters, "halrtc");
    read(h, "tol", c.halrtc.tol, "halrtc");
  }

  if (j.contains("reconstruction")) {
    const auto& r = j.at("reconstruction");
    detail::check_keys(r, {"overlay_samples"}, "reconstruction");
    read(r, "overlay_samples", c.overlay_samples, "reconstruction");
  }

  read(j, "threads", c.threads, "config");
  if (j.contains("output")) {
    const auto& o = j.at("output");
    detail::check_keys(o, {"dir", "dump_grids"}, "output");
    read(o, "dir", c.output_dir, "output");
    read(o, "dump_grids", c.dump_grids, "output");
  }

  c.source = j;
  c.validate();
  return c;
}

/// Loads a config file; errors carry `path:line:`.
inline ExperimentConfig load_config(const std::string& path) {
  const json j = io::parse_json_file(path);
  try {
    return config_from_json(j, std::filesystem::path(path).parent_path());
  } catch (const ConfigError& e) {
    std::ifstream in(path);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::string msg = e.what();
    const auto colon = msg.find(':');
    const std::size_t line = detail::locate_key(text, colon == std::string::npos ? msg : msg.substr(0, colon));
    throw ConfigError(path + ":" + (line ? std::to_string(line) + ":" : std::string()) + " " + msg);
  }
}

inline std::string config_hash(const ExperimentConfig& c) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << detail::fnv1a(c.source.dump());
  return os.str();
}

// --- single runs -------------------------------------------------------------------

/// One result row. NaN marks quantities a method does not produce.
struct RunRow {
  int k_true = 0;
  Method method = Method::kSlpm;
  double rate = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  metrics::MetricsReport report;
  double a_hat = std::numeric_limits<double>::quiet_NaN();
  double b_hat = std::numeric_limits<double>::quiet_NaN();
  double sigma_hat = std::numeric_limits<double>::quiet_NaN();
  double sfla_fitness = std::numeric_limits<double>::quiet_NaN();
  int sfla_iterations = 0;
  std::string config_hash;
  double wall_time_s = 0.0;
  /// CDZR / FAZR at each configured curve threshold.
  std::vector<double> curve_cdzr, curve_fazr;
};

struct RunOutput {
  RunRow row;
  std::optional<SpectrumGrid> grid;
};

/// Stage outputs shared by every method of one (scene, rate, seed) triple.
struct SharedInputs {
  SpectrumGrid truth;
  SampleSet samples;
};

struct SourceKnowledge {
  int k_est = 0;
  std::vector<Transmitter> sources;
  double sfla_fitness = 0.0;
  int sfla_iterations = 0;
};

namespace streams {
inline constexpr std::uint64_t kTruth = 1;
inline constexpr std::uint64_t kSampling = 2;
inline constexpr std::uint64_t kSfla = 3;
}  // namespace streams

inline SharedInputs make_inputs(const ExperimentConfig& cfg, const Scene& scene, double rate, std::uint64_t seed) {
  UrbanPlParams truth = cfg.truth;
  truth.frequency_mhz = scene.frequency_mhz;
  SharedInputs in;
  in.truth = generate_truth_grid(scene, truth, specmap::detail::stream_seed(seed, streams::kTruth));
  in.samples = draw_samples(in.truth, {rate, specmap::detail::stream_seed(seed, streams::kSampling)});
  return in;
}

/// Source count and parameters from the samples alone.
inline SourceKnowledge extract_sources(const ExperimentConfig& cfg, const Scene& scene,
                                       const std::vector<Sample>& samples, std::uint64_t seed) {
  SourceKnowledge out;
  const auto det = mmpld::detect_source_count(samples, scene.frequency_mhz, cfg.mmpld);
  out.k_est = det.k;

  sfla::Config sc = cfg.sfla;
  if (cfg.sfla_box_from_grid) {
    const auto keep = sc.box;
    sc.box = sfla::SearchBox::around(scene.grid);
    sc.box.eta = keep.eta;
    sc.box.power_watts = keep.power_watts;
  }
  for (std::size_t d = 0; d < sfla::kDimsPerSource; ++d)
    sc.step_max[d] = cfg.sfla_step_max_fraction * sc.box.dim(d).width();
  sc.seed = specmap::detail::stream_seed(seed, streams::kSfla);

  const auto res = sfla::estimate_parameters(samples, out.k_est, sc);
  out.sfla_fitness = res.fitness;
  out.sfla_iterations = res.iterations;
  for (const auto& s : sfla::canonicalize_power(res.best, sc.alpha, scene.frequency_mhz))
    if (s.power_watts > 0.0) out.sources.push_back({s.position, s.power_watts});
  if (out.sources.empty()) throw DegenerateInput("source estimation returned no transmitter with positive power");
  return out;
}

inline void overlay(SpectrumGrid& grid, const SampleSet& s) {
  const auto v = s.observed.values();
  for (std::size_t lin : s.cells) grid.set(lin, v[lin], true);
}

inline void score(RunRow& row, const SpectrumGrid& est, const SpectrumGrid& truth, const Scene& scene,
                  const ExperimentConfig& cfg, const SourceKnowledge* src) {
  auto& m = row.report;
  m.k_true = static_cast<int>(scene.sources.size());
  m.rmse = metrics::rmse(est, truth);
  m.rms_db = metrics::rms_db(est, truth);
  const auto z = metrics::cdzr_fazr(est, truth, scene.sources, cfg.threshold_dbm);
  m.cdzr = z.cdzr;
  m.fazr = z.fazr;
  m.zones_skipped = z.skipped_any();
  for (double tau : cfg.threshold_curve_dbm) {
    const auto zc = metrics::cdzr_fazr(est, truth, scene.sources, tau);
    row.curve_cdzr.push_back(zc.cdzr);
    row.curve_fazr.push_back(zc.fazr);
  }
  if (src) {
    m.k_est = src->k_est;
    m.detect_success = src->k_est == m.k_true;
    m.loc_e = metrics::loc_error(src->sources, scene.sources);
    m.ss_e = metrics::ss_error(src->sources, scene.sources);
    row.sfla_fitness = src->sfla_fitness;
    row.sfla_iterations = src->sfla_iterations;
  }
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/**
 * Runs every configured method on one (scene, rate, seed) triple. Failures
 * are caught per method and recorded on the row. When `keep_grids` is set
 * the reconstructed grids are returned alongside the rows.
 */
inline std::vector<RunOutput> run_combination(const ExperimentConfig& cfg, std::size_t scene_idx, double rate,
                                              std::uint64_t seed, const std::vector<Method>& methods,
                                              bool keep_grids = false) {
  const Scene& scene = cfg.scenes.at(scene_idx);
  const std::string hash = config_hash(cfg);
  std::vector<RunOutput> out(methods.size());
  for (std::size_t i = 0; i < methods.size(); ++i) {
    auto& r = out[i].row;
    r.k_true = static_cast<int>(scene.sources.size());
    r.method = methods[i];
    r.rate = rate;
    r.seed = seed;
    r.config_hash = hash;
    r.report.k_true = r.k_true;
  }
  auto context = [&](Method m) {
    std::ostringstream os;
    os << "K=" << scene.sources.size() << " rate=" << io::fmt(rate) << " seed=" << seed << ' ' << method_name(m) << ": ";
    return os.str();
  };

  const auto t_shared = std::chrono::steady_clock::now();
  std::optional<SharedInputs> in;
  try {
    in = make_inputs(cfg, scene, rate, seed);
  } catch (const std::exception& e) {
    for (auto& o : out) o.row.error = context(o.row.method) + e.what();
    return out;
  }
  const double shared_s = seconds_since(t_shared);

  std::optional<SourceKnowledge> src;
  std::string src_error;
  double src_s = 0.0;
  const bool need_src = std::any_of(methods.begin(), methods.end(), model_driven);
  if (need_src) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      src = extract_sources(cfg, scene, in->samples.samples, seed);
    } catch (const std::exception& e) {
      src_error = e.what();
    }
    src_s = seconds_since(t0);
  }

  for (auto& o : out) {
    auto& row = o.row;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      SpectrumGrid est;
      switch (row.method) {
        case Method::kSlpm:
        case Method::kFspm: {
          if (!src) throw Error(src_error);
          UrbanPlParams params{2.0, 0.0, 0.0, scene.frequency_mhz};
          if (row.method == Method::kSlpm) {
            const auto fit = plfit::fit_pl_params(in->samples.samples, src->sources, scene.frequency_mhz,
                                                  {cfg.plfit_init_a, cfg.plfit_init_b, 0.0, scene.frequency_mhz},
                                                  cfg.plfit_bounds, cfg.plfit);
            params = fit.params;
            row.a_hat = fit.params.A;
            row.b_hat = fit.params.B;
            row.sigma_hat = fit.params.sigma_db;
          }
          est = plfit::reconstruct_grid(scene.grid, src->sources, params);
          if (cfg.overlay_samples) overlay(est, in->samples);
          score(row, est, in->truth, scene, cfg, &*src);
          break;
        }
        case Method::kIdw:
          est = baselines::idw_reconstruct(in->samples.samples, scene.grid, cfg.idw);
          score(row, est, in->truth, scene, cfg, nullptr);
          break;
        case Method::kHalrtc:
          est = baselines::halrtc_reconstruct(in->samples.observed, cfg.halrtc).grid;
          score(row, est, in->truth, scene, cfg, nullptr);
          break;
      }
      row.ok = true;
      if (keep_grids) o.grid = std::move(est);
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = context(row.method) + e.what();
    }
    row.wall_time_s = shared_s + (model_driven(row.method) ? src_s : 0.0) + seconds_since(t0);
  }
  return out;
}

/// Reconstructed grid and scores for one method.
inline RunOutput run_pipeline(const ExperimentConfig& cfg, Method method, double rate, std::uint64_t seed,
                              std::size_t scene_idx = 0) {
  auto out = run_combination(cfg, scene_idx, rate, seed, {method}, true);
  return std::move(out.front());
}

// --- sweeps ----------------------------------------------------------------------------

struct Aggregate {
  int k_true = 0;
  Method method = Method::kSlpm;
  double rate = 0.0;
  std::size_t n_ok = 0, n_failed = 0;
  /// name -> (mean, std) over successful runs; NaN entries are ignored.
  std::vector<std::pair<std::string, std::pair<double, double>>> stats;
  std::vector<double> curve_cdzr, curve_fazr;  ///< means per curve threshold

  std::pair<double, double> get(const std::string& name) const {
    for (const auto& [n, v] : stats)
      if (n == name) return v;
    throw InvalidArgument("aggregate has no statistic '" + name + "'");
  }
};

struct SweepResult {
  std::vector<RunRow> rows;  ///< ordered by (scene, method, rate, seed)
  std::vector<Aggregate> aggregates;
  std::string config_hash;

  std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const RunRow& r) { return !r.ok; }));
  }
  int exit_code() const {
    const auto f = failures();
    if (f == 0) return kExitOk;
    return f == rows.size() ? kExitAllFailed : kExitPartial;
  }
};

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  std::vector<double> v;
  for (double x : xs)
    if (std::isfinite(x)) v.push_back(x);
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() == 1) return {mean, 0.0};
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(v.size() - 1))};
}

inline std::vector<Aggregate> aggregate(const std::vector<RunRow>& rows, std::size_t curve_points) {
  std::vector<Aggregate> out;
  std::map<std::tuple<int, int, double>, std::size_t> slot;
  std::vector<std::vector<const RunRow*>> members;
  for (const auto& r : rows) {
    const auto key = std::make_tuple(r.k_true, static_cast<int>(r.method), r.rate);
    auto it = slot.find(key);
    if (it == slot.end()) {
      it = slot.emplace(key, out.size()).first;
      Aggregate a;
      a.k_true = r.k_true;
      a.method = r.method;
      a.rate = r.rate;
      out.push_back(a);
      members.emplace_back();
    }
    members[it->second].push_back(&r);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& a = out[i];
    std::vector<const RunRow*> ok;
    for (auto* r : members[i]) {
      if (r->ok) ok.push_back(r);
      else ++a.n_failed;
    }
    a.n_ok = ok.size();
    auto stat = [&](const char* name, auto get) {
      std::vector<double> xs;
      for (auto* r : ok) xs.push_back(get(*r));
      a.stats.emplace_back(name, mean_std(xs));
    };
    stat("rmse", [](const RunRow& r) { return r.report.rmse; });
    stat("rms_db", [](const RunRow& r) { return r.report.rms_db; });
    stat("cdzr", [](const RunRow& r) { return r.report.cdzr; });
    stat("fazr", [](const RunRow& r) { return r.report.fazr; });
    stat("loc_e", [](const RunRow& r) { return r.report.loc_e; });
    stat("ss_e", [](const RunRow& r) { return r.report.ss_e; });
    const bool md = model_driven(a.method);
    stat("k_est", [md](const RunRow& r) { return md ? double(r.report.k_est) : std::numeric_limits<double>::quiet_NaN(); });
    stat("detect_rate", [md](const RunRow& r) {
      return md ? (r.report.detect_success ? 1.0 : 0.0) : std::numeric_limits<double>::quiet_NaN();
    });
    stat("a_hat", [](const RunRow& r) { return r.a_hat; });
    stat("b_hat", [](const RunRow& r) { return r.b_hat; });
    for (std::size_t c = 0; c < curve_points; ++c) {
      std::vector<double> cd, fa;
      for (auto* r : ok) {
        cd.push_back(r->curve_cdzr.at(c));
        fa.push_back(r->curve_fazr.at(c));
      }
      a.curve_cdzr.push_back(mean_std(cd).first);
      a.curve_fazr.push_back(mean_std(fa).first);
    }
  }
  return out;
}

/**
 * Runs the full product on `cfg.threads` workers. Each (scene, rate, seed)
 * unit fills its own slot, so row order never depends on scheduling.
 */
inline SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  struct Unit {
    std::size_t scene;
    double rate;
    std::uint64_t seed;
  };
  std::vector<Unit> units;
  for (std::size_t s = 0; s < cfg.scenes.size(); ++s)
    for (double r : cfg.rates)
      for (auto seed : cfg.seeds) units.push_back({s, r, seed});

  std::vector<std::vector<RunOutput>> done(units.size());
  std::atomic<std::size_t> next{0};
  const bool dump = cfg.dump_grids;
  auto worker = [&] {
    for (std::size_t u = next++; u < units.size(); u = next++)
      done[u] = run_combination(cfg, units[u].scene, units[u].rate, units[u].seed, cfg.methods, dump);
  };
  const auto n_threads = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), units.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  if (dump) {
    std::filesystem::create_directories(std::filesystem::path(cfg.output_dir) / "grids");
    for (std::size_t u = 0; u < units.size(); ++u)
      for (auto& o : done[u])
        if (o.grid) {
          std::ostringstream name;
          name << "k" << o.row.k_true << '_' << method_name(o.row.method) << "_r" << io::fmt(o.row.rate) << "_s"
               << o.row.seed << ".bin";
          io::save_grid_binary(*o.grid, (std::filesystem::path(cfg.output_dir) / "grids" / name.str()).string());
        }
  }

  SweepResult res;
  res.config_hash = config_hash(cfg);
  // Emit in (scene, method, rate, seed) order.
  const std::size_t per_scene = cfg.rates.size() * cfg.seeds.size();
  for (std::size_t s = 0; s < cfg.scenes.size(); ++s)
    for (std::size_t m = 0; m < cfg.methods.size(); ++m)
      for (std::size_t u = s * per_scene; u < (s + 1) * per_scene; ++u) res.rows.push_back(std::move(done[u][m].row));
  res.aggregates = aggregate(res.rows, cfg.threshold_curve_dbm.size());
  return res;
}

// --- CSV output ---------------------------------------------------------------------------

inline constexpr const char* kResultsHeader =
    "config_hash,k_true,method,rate,seed,status,rmse,rms_db,cdzr,fazr,zones_skipped,loc_e,ss_e,k_est,"
    "detect_success,a_hat,b_hat,sigma_hat,sfla_fitness,sfla_iterations,error,wall_time_s";

inline std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  return s;
}

inline std::string row_to_csv(const RunRow& r) {
  std::ostringstream os;
  const auto& m = r.report;
  os << r.config_hash << ',' << r.k_true << ',' << method_name(r.method) << ',' << io::fmt(r.rate) << ',' << r.seed
     << ',' << (r.ok ? "ok" : "failed") << ',' << io::fmt(m.rmse) << ',' << io::fmt(m.rms_db) << ','
     << io::fmt(m.cdzr) << ',' << io::fmt(m.fazr) << ',' << (m.zones_skipped ? 1 : 0) << ',' << io::fmt(m.loc_e)
     << ',' << io::fmt(m.ss_e) << ',' << m.k_est << ',' << (m.detect_success ? 1 : 0) << ',' << io::fmt(r.a_hat)
     << ',' << io::fmt(r.b_hat) << ',' << io::fmt(r.sigma_hat) << ',' << io::fmt(r.sfla_fitness) << ','
     << r.sfla_iterations << ',' << sanitize(r.error) << ',' << io::fmt(r.wall_time_s);
  return os.str();
}

/// Inverse of row_to_csv() (threshold curves are not part of the row).
inline RunRow row_from_csv(const std::string& line) {
  const auto f = io::split_csv(line);
  if (f.size() != 22) throw ConfigError("results row: expected 22 fields, got " + std::to_string(f.size()));
  auto to_int = [](std::string_view s) {
    long long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("results row: bad integer");
    return v;
  };
  auto to_u64 = [](std::string_view s) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("results row: bad seed");
    return v;
  };
  RunRow r;
  r.config_hash = std::string(f[0]);
  r.k_true = static_cast<int>(to_int(f[1]));
  r.method = parse_method(std::string(f[2]));
  r.rate = io::parse_double(f[3]);
  r.seed = to_u64(f[4]);
  r.ok = f[5] == "ok";
  auto& m = r.report;
  m.k_true = r.k_true;
  m.rmse = io::parse_double(f[6]);
  m.rms_db = io::parse_double(f[7]);
  m.cdzr = io::parse_double(f[8]);
  m.fazr = io::parse_double(f[9]);
  m.zones_skipped = f[10] == "1";
  m.loc_e = io::parse_double(f[11]);
  m.ss_e = io::parse_double(f[12]);
  m.k_est = static_cast<int>(to_int(f[13]));
  m.detect_success = f[14] == "1";
  r.a_hat = io::parse_double(f[15]);
  r.b_hat = io::parse_double(f[16]);
  r.sigma_hat = io::parse_double(f[17]);
  r.sfla_fitness = io::parse_double(f[18]);
  r.sfla_iterations = static_cast<int>(to_int(f[19]));
  r.error = std::string(f[20]);
  r.wall_time_s = io::parse_double(f[21]);
  return r;
}

inline void write_results_csv(const SweepResult& res, std::ostream& out) {
  out << kResultsHeader << '\n';
  for (const auto& r : res.rows) out << row_to_csv(r) << '\n';
}

inline const std::vector<std::string>& aggregate_stat_names() {
  static const std::vector<std::string> names{"rmse",  "rms_db", "cdzr",        "fazr",  "loc_e",
                                              "ss_e",  "k_est",  "detect_rate", "a_hat", "b_hat"};
  return names;
}

inline void write_aggregates_csv(const SweepResult& res, std::ostream& out) {
  out << "config_hash,k_true,method,rate,n_ok,n_failed";
  for (const auto& n : aggregate_stat_names()) out << ',' << n << "_mean," << n << "_std";
  out << '\n';
  for (const auto& a : res.aggregates) {
    out << res.config_hash << ',' << a.k_true << ',' << method_name(a.method) << ',' << io::fmt(a.rate) << ','
        << a.n_ok << ',' << a.n_failed;
    for (const auto& n : aggregate_stat_names()) {
      const auto [mean, sd] = a.get(n);
      out << ',' << io::fmt(mean) << ',' << io::fmt(sd);
    }
    out << '\n';
  }
}

inline void write_threshold_curves_csv(const SweepResult& res, const ExperimentConfig& cfg, std::ostream& out) {
  out << "k_true,method,rate,threshold_dbm,cdzr_mean,fazr_mean\n";
  for (const auto& a : res.aggregates)
    for (std::size_t c = 0; c < cfg.threshold_curve_dbm.size(); ++c)
      out << a.k_true << ',' << method_name(a.method) << ',' << io::fmt(a.rate) << ','
          << io::fmt(cfg.threshold_curve_dbm[c]) << ',' << io::fmt(a.curve_cdzr[c]) << ','
          << io::fmt(a.curve_fazr[c]) << '\n';
}

/**
 * Wide table: one row per (group, x) with <series>_mean,<series>_std columns.
 * `series_of` maps an aggregate to its series label, or "" to skip it.
 */
template <class GroupOf, class XOf, class SeriesOf>
void write_figure(const SweepResult& res, std::ostream& out, const std::string& group_col, const std::string& x_col,
                  const std::vector<std::string>& stats, GroupOf group_of, XOf x_of, SeriesOf series_of) {
  std::vector<std::string> series;
  std::map<std::pair<double, double>, std::map<std::string, const Aggregate*>> table;
  for (const auto& a : res.aggregates) {
    const std::string s = series_of(a);
    if (s.empty()) continue;
    if (std::find(series.begin(), series.end(), s) == series.end()) series.push_back(s);
    table[{group_of(a), x_of(a)}][s] = &a;
  }
  out << group_col << ',' << x_col;
  for (const auto& s : series)
    for (const auto& st : stats) out << ',' << s << '_' << st << "_mean," << s << '_' << st << "_std";
  out << '\n';
  for (const auto& [key, cells] : table) {
    out << io::fmt(key.first) << ',' << io::fmt(key.second);
    for (const auto& s : series)
      for (const auto& st : stats) {
        const auto it = cells.find(s);
        const auto v = it == cells.end() ? std::pair{std::numeric_limits<double>::quiet_NaN(),
                                                     std::numeric_limits<double>::quiet_NaN()}
                                         : it->second->get(st);
        out << ',' << io::fmt(v.first) << ',' << io::fmt(v.second);
      }
    out << '\n';
  }
}

/// Writes results.csv, aggregates.csv, threshold_curves.csv and fig4..fig10.csv.
inline void write_sweep_outputs(const SweepResult& res, const ExperimentConfig& cfg, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto file = [&](const char* name) { return io::open_out((fs::path(dir) / name).string()); };
  {
    auto f = file("results.csv");
    write_results_csv(res, f);
  }
  {
    auto f = file("aggregates.csv");
    write_aggregates_csv(res, f);
  }
  {
    auto f = file("threshold_curves.csv");
    write_threshold_curves_csv(res, cfg, f);
  }
  auto k_of = [](const Aggregate& a) { return double(a.k_true); };
  auto r_of = [](const Aggregate& a) { return a.rate; };
  auto by_method = [](const Aggregate& a) { return std::string(method_name(a.method)); };
  auto slpm_by_k = [](const Aggregate& a) {
    return a.method == Method::kSlpm ? "K" + std::to_string(a.k_true) : std::string();
  };
  {
    auto f = file("fig4.csv");  // RMSE vs rate per method
    write_figure(res, f, "k_true", "rate", {"rmse"}, k_of, r_of, by_method);
  }
  {
    auto f = file("fig5.csv");  // RMSE vs K per method
    write_figure(res, f, "rate", "k_true", {"rmse"}, r_of, k_of, by_method);
  }
  {
    auto f = file("fig6.csv");  // CDZR / FAZR vs rate per method
    write_figure(res, f, "k_true", "rate", {"cdzr", "fazr"}, k_of, r_of, by_method);
  }
  auto zero = [](const Aggregate&) { return 0.0; };
  {
    auto f = file("fig7.csv");  // localisation error vs rate per K
    write_figure(res, f, "panel", "rate", {"loc_e"}, zero, r_of, slpm_by_k);
  }
  {
    auto f = file("fig8.csv");  // source power error vs rate per K
    write_figure(res, f, "panel", "rate", {"ss_e"}, zero, r_of, slpm_by_k);
  }
  {
    auto f = file("fig9.csv");  // SLPM RMSE vs rate per K
    write_figure(res, f, "panel", "rate", {"rmse"}, zero, r_of, slpm_by_k);
  }
  {
    auto f = file("fig10.csv");  // detection success vs rate per K
    write_figure(res, f, "panel", "rate", {"detect_rate"}, zero, r_of, slpm_by_k);
  }
}

}  // namespace specmap::pipeline

#endif  // SPECMAP_PIPELINE_HPP
