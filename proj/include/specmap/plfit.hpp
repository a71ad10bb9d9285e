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
 * \file plfit.hpp
 *
 * Learns the urban path-loss parameters (A, B, sigma) from samples and a set
 * of known or estimated transmitters, and renders a full map from them.
 *
 * The measured loss of a sample is the total transmitted power (dBm) minus
 * its RSS. Two deterministic predictions are available for it:
 *
 *  - kSummedLoss: the per-source losses added together,
 *      sum_j (32.4 + 20 log10 f + 10 A h^B log10 d_ij)
 *  - kCombinedRss: total power minus the power-sum of the per-source RSS,
 *    which is what reconstruct_grid() renders.
 *
 * Both coincide for a single transmitter. (A, B) minimise the L2 norm of
 * the residual; sigma is the spread of the residuals at the optimum.
 */

#ifndef SPECMAP_PLFIT_HPP
#define SPECMAP_PLFIT_HPP

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <vector>

#include "specmap/error.hpp"
#include "specmap/scene.hpp"
#include "specmap/synthgen.hpp"

namespace specmap::plfit {

enum class Objective { kSummedLoss, kCombinedRss };

struct Bounds {
  double a_lo = 0.1, a_hi = 10.0;
  double b_lo = -2.0, b_hi = 2.0;
};

struct FitOptions {
  Objective objective = Objective::kCombinedRss;
  int multistarts = 8;
  int max_iters = 2000;
  double simplex_tol = 1e-10;  ///< stop once the simplex size drops below this
};

struct FitResult {
  UrbanPlParams params;
  double residual_norm = 0.0;  ///< objective value at params, dB
  int iterations = 0;          ///< simplex iterations summed over all starts
  bool converged = false;      ///< the winning start met the size tolerance
};

inline double total_power_dbm(const std::vector<Transmitter>& sources) {
  double mw = 0.0;
  for (const auto& s : sources) mw += s.power_watts * 1000.0;
  if (!(mw > 0.0)) throw InvalidArgument("total transmitted power must be > 0");
  return mw_to_dbm(mw);
}

/// Total transmitted power (dBm) minus the sample's RSS.
inline double measured_pl_db(const Sample& sample, const std::vector<Transmitter>& sources) {
  return total_power_dbm(sources) - sample.rss_dbm;
}

/// Sum of the per-source deterministic urban losses at `at`.
inline double theoretical_pl_db(Vec3 at, const std::vector<Transmitter>& sources, const UrbanPlParams& params) {
  double acc = 0.0;
  for (const auto& s : sources) acc += urban_path_loss_db(params, s.position, at, 0.0);
  return acc;
}

/// Mean-field RSS (dBm) at `at` from all sources.
inline double predicted_rss_dbm(Vec3 at, const std::vector<Transmitter>& sources, const UrbanPlParams& params) {
  const double h = detail::clamped_height(at.z);
  const double n = params.exponent_at(h);
  const double f_term = frequency_term_db(params.frequency_mhz);
  double peak = -std::numeric_limits<double>::infinity();
  std::array<double, 16> small{};
  std::vector<double> big;
  double* parts = small.data();
  if (sources.size() > small.size()) {
    big.resize(sources.size());
    parts = big.data();
  }
  for (std::size_t j = 0; j < sources.size(); ++j) {
    const double d_km = detail::clamped_distance_km(sources[j].position, at);
    parts[j] = watts_to_dbm(sources[j].power_watts) - (f_term + 10.0 * n * std::log10(d_km));
    peak = std::max(peak, parts[j]);
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < sources.size(); ++j) acc += std::pow(10.0, (parts[j] - peak) / 10.0);
  return peak + 10.0 * std::log10(acc);
}

namespace detail {

/// Precomputed per-sample geometry so each objective call is cheap.
struct FitProblem {
  std::vector<double> measured;   ///< L_real per sample
  std::vector<double> ln_height;  ///< ln of the clamped h per sample
  std::vector<double> sum_log_d;  ///< sum_j log10 d_ij[km]
  std::vector<double> log_d;      ///< row-major [sample][source] log10 d_ij[km]
  std::vector<double> power_dbm;  ///< per-source power
  double total_dbm = 0.0;
  double f_term = 0.0;
  Objective objective = Objective::kCombinedRss;
  Bounds bounds;

  std::size_t k() const { return power_dbm.size(); }

  double predict(std::size_t i, double a, double b) const {
    constexpr double kDbToNeper = 0.23025850929940458;  // ln(10) / 10
    const double n = a * std::exp(b * ln_height[i]);
    if (objective == Objective::kSummedLoss) return static_cast<double>(k()) * f_term + 10.0 * n * sum_log_d[i];
    const double* ld = log_d.data() + i * k();
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k(); ++j) peak = std::max(peak, power_dbm[j] - 10.0 * n * ld[j]);
    double acc = 0.0;
    for (std::size_t j = 0; j < k(); ++j) acc += std::exp((power_dbm[j] - 10.0 * n * ld[j] - peak) * kDbToNeper);
    const double rss = peak - f_term + std::log(acc) / kDbToNeper;
    return total_dbm - rss;
  }

  void residuals(double a, double b, std::vector<double>& out) const {
    out.resize(measured.size());
    for (std::size_t i = 0; i < measured.size(); ++i) out[i] = predict(i, a, b) - measured[i];
  }

  double norm(double a, double b) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < measured.size(); ++i) {
      const double r = predict(i, a, b) - measured[i];
      acc += r * r;
    }
    return std::sqrt(acc);
  }

  double clamp_a(double a) const { return std::clamp(a, bounds.a_lo, bounds.a_hi); }
  double clamp_b(double b) const { return std::clamp(b, bounds.b_lo, bounds.b_hi); }
};

inline double gsl_objective(const gsl_vector* x, void* params) {
  const auto* p = static_cast<const FitProblem*>(params);
  return p->norm(p->clamp_a(gsl_vector_get(x, 0)), p->clamp_b(gsl_vector_get(x, 1)));
}

struct GslVectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
struct GslMinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};

struct StartResult {
  double a, b, value;
  int iterations;
  bool converged;
};

inline StartResult run_simplex(const FitProblem& prob, double a0, double b0, const FitOptions& opt) {
  gsl_multimin_function fn{&gsl_objective, 2, const_cast<FitProblem*>(&prob)};
  std::unique_ptr<gsl_vector, GslVectorDeleter> x(gsl_vector_alloc(2));
  std::unique_ptr<gsl_vector, GslVectorDeleter> step(gsl_vector_alloc(2));
  gsl_vector_set(x.get(), 0, a0);
  gsl_vector_set(x.get(), 1, b0);
  gsl_vector_set(step.get(), 0, 0.1 * (prob.bounds.a_hi - prob.bounds.a_lo));
  gsl_vector_set(step.get(), 1, 0.1 * (prob.bounds.b_hi - prob.bounds.b_lo));
  std::unique_ptr<gsl_multimin_fminimizer, GslMinimizerDeleter> m(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2));
  gsl_multimin_fminimizer_set(m.get(), &fn, x.get(), step.get());

  int it = 0;
  bool converged = false;
  while (it < opt.max_iters) {
    ++it;
    if (gsl_multimin_fminimizer_iterate(m.get()) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m.get()), opt.simplex_tol) == GSL_SUCCESS) {
      converged = true;
      break;
    }
  }
  const double a = prob.clamp_a(gsl_vector_get(m->x, 0));
  const double b = prob.clamp_b(gsl_vector_get(m->x, 1));
  return {a, b, prob.norm(a, b), it, converged};
}

}  // namespace detail

/**
 * Fits (A, B) with a Nelder-Mead simplex restarted from `init` and from
 * `multistarts - 1` seeded points in the bounds; sigma is the population
 * standard deviation of the residuals at the winner.
 */
inline FitResult fit_pl_params(const std::vector<Sample>& samples, const std::vector<Transmitter>& sources,
                               double f_mhz, const UrbanPlParams& init = {}, const Bounds& bounds = {},
                               const FitOptions& opt = {}) {
  if (samples.size() < 3) throw InvalidArgument("fit_pl_params: need at least three samples");
  specmap::detail::require(!sources.empty(), "fit_pl_params: no transmitters");
  specmap::detail::require(f_mhz > 0.0, "fit_pl_params: frequency must be > 0");
  specmap::detail::require(bounds.a_lo > 0.0 && bounds.a_lo <= bounds.a_hi && bounds.b_lo <= bounds.b_hi,
                           "fit_pl_params: invalid bounds");
  specmap::detail::require(opt.multistarts >= 1, "fit_pl_params: multistarts must be >= 1");

  gsl_set_error_handler_off();
  detail::FitProblem prob;
  prob.objective = opt.objective;
  prob.bounds = bounds;
  prob.f_term = frequency_term_db(f_mhz);
  prob.total_dbm = total_power_dbm(sources);
  for (const auto& s : sources) {
    specmap::detail::require(s.power_watts > 0.0, "fit_pl_params: transmitter power must be > 0");
    prob.power_dbm.push_back(watts_to_dbm(s.power_watts));
  }
  double lo_feat = std::numeric_limits<double>::infinity(), hi_feat = -lo_feat;
  for (const auto& smp : samples) {
    prob.measured.push_back(prob.total_dbm - smp.rss_dbm);
    prob.ln_height.push_back(std::log(specmap::detail::clamped_height(smp.position.z)));
    double sum = 0.0;
    for (const auto& s : sources) {
      prob.log_d.push_back(std::log10(specmap::detail::clamped_distance_km(s.position, smp.position)));
      sum += prob.log_d.back();
    }
    prob.sum_log_d.push_back(sum);
    lo_feat = std::min(lo_feat, sum);
    hi_feat = std::max(hi_feat, sum);
  }
  if (!(hi_feat - lo_feat > 1e-12))
    throw DegenerateInput("fit_pl_params: samples have no distance spread; A and B are not identifiable");

  std::vector<std::array<double, 2>> starts{{prob.clamp_a(init.A), prob.clamp_b(init.B)}};
  std::mt19937_64 rng(0x9e3779b9ULL);
  std::uniform_real_distribution<double> ua(bounds.a_lo, bounds.a_hi), ub(bounds.b_lo, bounds.b_hi);
  while (static_cast<int>(starts.size()) < opt.multistarts) starts.push_back({ua(rng), ub(rng)});

  FitResult out;
  detail::StartResult best{starts[0][0], starts[0][1], prob.norm(starts[0][0], starts[0][1]), 0, false};
  for (const auto& st : starts) {
    const auto r = detail::run_simplex(prob, st[0], st[1], opt);
    out.iterations += r.iterations;
    if (r.value < best.value) best = r;
  }

  std::vector<double> res;
  prob.residuals(best.a, best.b, res);
  double mean = 0.0;
  for (double r : res) mean += r;
  mean /= static_cast<double>(res.size());
  double var = 0.0;
  for (double r : res) var += (r - mean) * (r - mean);
  var /= static_cast<double>(res.size());

  out.params = {best.a, best.b, std::sqrt(var), f_mhz};
  out.residual_norm = best.value;
  out.converged = best.converged;
  return out;
}

/// Objective value of a given parameter pair, for diagnostics and tests.
inline double fit_objective(const std::vector<Sample>& samples, const std::vector<Transmitter>& sources,
                            const UrbanPlParams& params, Objective objective = Objective::kCombinedRss) {
  double acc = 0.0;
  for (const auto& s : samples) {
    const double real = measured_pl_db(s, sources);
    const double theo = objective == Objective::kSummedLoss
                            ? theoretical_pl_db(s.position, sources, params)
                            : total_power_dbm(sources) - predicted_rss_dbm(s.position, sources, params);
    acc += (theo - real) * (theo - real);
  }
  return std::sqrt(acc);
}

/**
 * Renders the expectation map (no shadowing) for every cell center. With a
 * non-zero `shadow_seed` and params.sigma_db > 0, seeded shadow draws are
 * added per (cell, source) the same way the truth generator does.
 */
inline SpectrumGrid reconstruct_grid(const GridSpec& spec, const std::vector<Transmitter>& sources,
                                     const UrbanPlParams& params, std::uint64_t shadow_seed = 0) {
  specmap::detail::require(!sources.empty(), "reconstruct_grid: no transmitters");
  for (const auto& s : sources)
    specmap::detail::require(s.power_watts > 0.0, "reconstruct_grid: transmitter power must be > 0");
  SpectrumGrid grid(spec, 0.0, true);
  if (shadow_seed != 0 && params.sigma_db > 0.0) {
    Scene scene{spec, sources, params.frequency_mhz};
    return generate_truth_grid(scene, params, shadow_seed);
  }
  for (std::size_t lin = 0; lin < spec.cell_count(); ++lin)
    grid.set(lin, predicted_rss_dbm(spec.cell_center(lin), sources, params));
  return grid;
}

}  // namespace specmap::plfit

#endif  // SPECMAP_PLFIT_HPP
