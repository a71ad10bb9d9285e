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
 * \file sfla.hpp
 *
 * Joint location / power estimation of K transmitters with the shuffled
 * frog leaping algorithm.
 *
 * Each source j contributes eta_j * P_j * d_ij^-alpha milliwatts at sample
 * i; a frog is a full set of K (eta, x, y, z, P) tuples and its fitness is
 * the L2 norm of the mW residual over the samples.
 *
 * The population is sorted, dealt round-robin into memeplexes, and inside
 * each memeplex the worst frog leaps toward the memeplex best, then toward
 * the global best, and is otherwise replaced by a random frog.
 *
 * Leaps act on a search vector in which eta is stored as log10(eta); the
 * other four coordinates are used as-is (meters, watts).
 */

#ifndef SPECMAP_SFLA_HPP
#define SPECMAP_SFLA_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "specmap/error.hpp"
#include "specmap/scene.hpp"
#include "specmap/synthgen.hpp"

namespace specmap::sfla {

struct SourceEstimate {
  double eta = 1.0;  ///< linear propagation coefficient
  Vec3 position;
  double power_watts = 0.0;

  friend bool operator==(const SourceEstimate&, const SourceEstimate&) = default;
};

using Genome = std::vector<SourceEstimate>;

struct Frog {
  Genome genome;
  double fitness = std::numeric_limits<double>::infinity();
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  double clamp(double v) const { return std::clamp(v, lo, hi); }
};

inline constexpr std::size_t kDimsPerSource = 5;
enum Dim : std::size_t { kLogEta = 0, kX = 1, kY = 2, kZ = 3, kPower = 4 };

/// Search box for one source. The eta interval is linear; leaps work on log10.
struct SearchBox {
  Interval eta{1e-6, 1e2};
  Interval x{0.0, 500.0};
  Interval y{-450.0, 50.0};
  Interval z{0.0, 100.0};
  Interval power_watts{0.0, 10.0};

  static SearchBox around(const GridSpec& g) {
    SearchBox b;
    b.x = {g.origin().x, g.upper().x};
    b.y = {g.origin().y, g.upper().y};
    b.z = {g.origin().z, g.upper().z};
    return b;
  }

  /// Per-dimension interval in search coordinates.
  Interval dim(std::size_t d) const {
    switch (d) {
      case kLogEta: return {std::log10(eta.lo), std::log10(eta.hi)};
      case kX: return x;
      case kY: return y;
      case kZ: return z;
      default: return power_watts;
    }
  }

  bool contains(const SourceEstimate& s) const {
    constexpr double slack = 1e-9;
    return s.eta >= eta.lo * (1 - slack) && s.eta <= eta.hi * (1 + slack) && s.position.x >= x.lo &&
           s.position.x <= x.hi && s.position.y >= y.lo && s.position.y <= y.hi && s.position.z >= z.lo &&
           s.position.z <= z.hi && s.power_watts >= power_watts.lo && s.power_watts <= power_watts.hi;
  }
};

/// Residual domain of the fitness: linear power as in the model, or dB.
enum class Residual { kMilliwatt, kDecibel };

struct Config {
  int population = 200;
  int memeplexes = 20;
  int local_iters = 10;
  int global_iters = 500;
  double tol = 1e-6;   ///< relative improvement of the incumbent over `patience` iterations
  int patience = 50;
  double alpha = 2.5;
  Residual residual = Residual::kMilliwatt;
  SearchBox box;
  /// Leap magnitude bounds per search dimension. Empty step_max means a
  /// quarter of the box width.
  std::array<double, kDimsPerSource> step_min{0, 0, 0, 0, 0};
  std::array<double, kDimsPerSource> step_max{-1, -1, -1, -1, -1};
  /// When > 0, fitness uses a fixed seeded subset of at most this many samples.
  std::size_t max_fit_samples = 0;
  std::uint64_t seed = 0;

  double step_max_for(std::size_t d) const {
    return step_max[d] >= 0.0 ? step_max[d] : 0.25 * box.dim(d).width();
  }

  void validate() const {
    detail::require(population >= 1 && memeplexes >= 1, "sfla: population and memeplexes must be >= 1");
    detail::require(population >= memeplexes, "sfla: population must be >= memeplexes");
    detail::require(local_iters >= 1 && global_iters >= 1, "sfla: iteration counts must be >= 1");
    detail::require(patience >= 1, "sfla: patience must be >= 1");
    detail::require(alpha > 0.0, "sfla: alpha must be > 0");
    detail::require(box.eta.lo > 0.0 && box.eta.hi >= box.eta.lo, "sfla: eta interval must be positive and ordered");
    detail::require(box.x.hi >= box.x.lo && box.y.hi >= box.y.lo && box.z.hi >= box.z.lo,
                    "sfla: position intervals must be ordered");
    detail::require(box.power_watts.lo >= 0.0 && box.power_watts.hi >= box.power_watts.lo,
                    "sfla: power interval must be non-negative and ordered");
    for (std::size_t d = 0; d < kDimsPerSource; ++d)
      detail::require(step_min[d] >= 0.0 && step_min[d] <= step_max_for(d), "sfla: need 0 <= step_min <= step_max");
  }
};

// --- forward model -----------------------------------------------------------

/// Per-sample contribution sum in mW; distances in meters, clamped to 1 m.
inline double predicted_rss_mw(const Genome& genome, Vec3 at, double alpha) {
  double acc = 0.0;
  const double half = -0.5 * alpha;
  for (const auto& s : genome) {
    const double d2 = std::max(squared_distance(s.position, at), kMinDistanceM * kMinDistanceM);
    acc += s.eta * (s.power_watts * 1000.0) * std::pow(d2, half);
  }
  return acc;
}

/// Samples pre-converted for repeated fitness evaluation.
class FitnessData {
 public:
  FitnessData() = default;
  explicit FitnessData(std::span<const Sample> samples) {
    pos_.reserve(samples.size());
    mw_.reserve(samples.size());
    dbm_.reserve(samples.size());
    for (const auto& s : samples) {
      pos_.push_back(s.position);
      mw_.push_back(dbm_to_mw(s.rss_dbm));
      dbm_.push_back(s.rss_dbm);
    }
  }
  std::size_t size() const { return mw_.size(); }
  std::span<const Vec3> positions() const { return pos_; }
  std::span<const double> rss_mw() const { return mw_; }
  std::span<const double> rss_dbm() const { return dbm_; }

 private:
  std::vector<Vec3> pos_;
  std::vector<double> mw_;
  std::vector<double> dbm_;
};

/// Floor applied to predictions before taking logs in the dB residual.
inline constexpr double kPredictionFloorMw = 1e-30;

/// sqrt(sum_i (P_i - Phat_i)^2), both in mW, or both in dBm for Residual::kDecibel.
inline double fitness_of(const Genome& genome, const FitnessData& data, double alpha,
                         Residual residual = Residual::kMilliwatt) {
  const auto pos = data.positions();
  double acc = 0.0;
  if (residual == Residual::kMilliwatt) {
    const auto mw = data.rss_mw();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double r = mw[i] - predicted_rss_mw(genome, pos[i], alpha);
      acc += r * r;
    }
  } else {
    const auto dbm = data.rss_dbm();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double r = dbm[i] - 10.0 * std::log10(std::max(predicted_rss_mw(genome, pos[i], alpha), kPredictionFloorMw));
      acc += r * r;
    }
  }
  return std::sqrt(acc);
}

inline double fitness_of(const Genome& genome, std::span<const Sample> samples, double alpha,
                         Residual residual = Residual::kMilliwatt) {
  return fitness_of(genome, FitnessData(samples), alpha, residual);
}

// --- search-vector plumbing --------------------------------------------------

inline std::vector<double> to_search(const Genome& g) {
  std::vector<double> v;
  v.reserve(g.size() * kDimsPerSource);
  for (const auto& s : g) {
    v.push_back(std::log10(s.eta));
    v.push_back(s.position.x);
    v.push_back(s.position.y);
    v.push_back(s.position.z);
    v.push_back(s.power_watts);
  }
  return v;
}

inline Genome from_search(std::span<const double> v) {
  detail::require(v.size() % kDimsPerSource == 0, "sfla: search vector length must be a multiple of 5");
  Genome g(v.size() / kDimsPerSource);
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double* p = v.data() + j * kDimsPerSource;
    g[j] = {std::pow(10.0, p[kLogEta]), {p[kX], p[kY], p[kZ]}, p[kPower]};
  }
  return g;
}

/// Clamps every coordinate of a genome into the search box.
inline Genome project(const Genome& g, const SearchBox& box) {
  auto v = to_search(g);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = box.dim(i % kDimsPerSource).clamp(v[i]);
  return from_search(v);
}

inline Genome random_genome(std::size_t k, const SearchBox& box, std::mt19937_64& rng) {
  std::vector<double> v(k * kDimsPerSource);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Interval iv = box.dim(i % kDimsPerSource);
    v[i] = std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
  }
  return from_search(v);
}

/// Reorders `leader` so its j-th source is the one nearest (in total
/// distance) to the j-th source of `ref`. Genome order carries no meaning, so
/// leaps compare like with like. Exhaustive up to 7 sources, greedy beyond.
inline Genome align_to(const Genome& leader, const Genome& ref) {
  const std::size_t k = ref.size();
  if (k <= 1) return leader;
  std::vector<std::size_t> perm(k), best;
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (k <= 7) {
    double best_cost = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (std::size_t j = 0; j < k && c < best_cost; ++j) c += distance(ref[j].position, leader[perm[j]].position);
      if (c < best_cost) {
        best_cost = c;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    std::vector<char> used(k, 0);
    best.assign(k, 0);
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t pick = 0;
      double d_best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < k; ++i)
        if (!used[i] && distance(ref[j].position, leader[i].position) < d_best) {
          d_best = distance(ref[j].position, leader[i].position);
          pick = i;
        }
      used[pick] = 1;
      best[j] = pick;
    }
  }
  Genome out(k);
  for (std::size_t j = 0; j < k; ++j) out[j] = leader[best[j]];
  return out;
}

/// worst + lambda * (leader - worst) with the leader's sources aligned to the
/// worst frog's; each component's magnitude clipped to [step_min, step_max],
/// then projected into the box.
inline Genome propose_move(const Genome& worst, const Genome& leader, double lambda, const Config& cfg) {
  detail::require(worst.size() == leader.size(), "sfla: genome size mismatch");
  const auto w = to_search(worst);
  const auto l = to_search(align_to(leader, worst));
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const std::size_t d = i % kDimsPerSource;
    double step = lambda * (l[i] - w[i]);
    const double mag = std::abs(step);
    if (mag > 0.0) step = std::copysign(std::clamp(mag, cfg.step_min[d], cfg.step_max_for(d)), step);
    out[i] = cfg.box.dim(d).clamp(w[i] + step);
  }
  return from_search(out);
}

// --- population mechanics ----------------------------------------------------

/// Deals ranks 0,1,2,... round-robin into m groups. Input is the population
/// size; output holds rank indices.
inline std::vector<std::vector<std::size_t>> partition_memeplexes(std::size_t population, std::size_t m) {
  detail::require(m >= 1, "partition_memeplexes: need at least one memeplex");
  if (m > population) throw InvalidArgument("partition_memeplexes: more memeplexes than frogs");
  std::vector<std::vector<std::size_t>> groups(m);
  for (std::size_t r = 0; r < population; ++r) groups[r % m].push_back(r);
  return groups;
}

enum class StepOutcome { kLocalLeap, kGlobalLeap, kRandomReset };

/// Q rounds of worst-frog improvement inside one memeplex. `global_best` is
/// read for the second leap and refreshed whenever a better frog appears.
template <class Fitness>
void local_step(std::vector<Frog>& memeplex, Frog& global_best, std::mt19937_64& rng, const Config& cfg,
                Fitness&& fitness, std::vector<StepOutcome>* outcomes = nullptr) {
  detail::require(!memeplex.empty(), "local_step: empty memeplex");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t k = memeplex.front().genome.size();
  for (int t = 0; t < cfg.local_iters; ++t) {
    std::size_t best = 0, worst = 0;
    for (std::size_t i = 1; i < memeplex.size(); ++i) {
      if (memeplex[i].fitness < memeplex[best].fitness) best = i;
      if (memeplex[i].fitness >= memeplex[worst].fitness) worst = i;
    }
    Frog& w = memeplex[worst];

    StepOutcome outcome = StepOutcome::kRandomReset;
    Frog cand{propose_move(w.genome, memeplex[best].genome, unit(rng), cfg), 0.0};
    cand.fitness = fitness(cand.genome);
    if (cand.fitness < w.fitness) {
      outcome = StepOutcome::kLocalLeap;
    } else {
      cand.genome = propose_move(w.genome, global_best.genome, unit(rng), cfg);
      cand.fitness = fitness(cand.genome);
      if (cand.fitness < w.fitness) {
        outcome = StepOutcome::kGlobalLeap;
      } else {
        cand.genome = random_genome(k, cfg.box, rng);
        cand.fitness = fitness(cand.genome);
      }
    }
    w = std::move(cand);
    if (w.fitness < global_best.fitness) global_best = w;
    if (outcomes) outcomes->push_back(outcome);
  }
}

/// Orders sources by descending power, then lexicographic position.
inline void sort_sources(Genome& g) {
  std::sort(g.begin(), g.end(), [](const SourceEstimate& a, const SourceEstimate& b) {
    if (a.power_watts != b.power_watts) return a.power_watts > b.power_watts;
    return std::tie(a.position.x, a.position.y, a.position.z) < std::tie(b.position.x, b.position.y, b.position.z);
  });
}

/// eta that makes eta * P * d^-alpha (mW, meters) equal the reference loss
/// 32.4 + 20 log10 f + 10 alpha log10 d[km] for a transmitter of P mW.
inline double reference_eta(double alpha, double f_mhz) {
  return std::pow(10.0, -frequency_term_db(f_mhz) / 10.0) * std::pow(1000.0, alpha);
}

/// Only eta * P is observable. Rewrites each source so eta equals the
/// reference value and P carries the whole product; predictions are unchanged.
inline Genome canonicalize_power(Genome g, double alpha, double f_mhz) {
  const double eta_ref = reference_eta(alpha, f_mhz);
  for (auto& s : g) {
    s.power_watts = s.eta * s.power_watts / eta_ref;
    s.eta = eta_ref;
  }
  sort_sources(g);
  return g;
}

struct Result {
  Genome best;
  double fitness = std::numeric_limits<double>::infinity();
  std::vector<double> trace;  ///< incumbent fitness after each global iteration
  int iterations = 0;
  std::size_t evaluations = 0;
};

/// Seeded subset of at most `cap` samples (all of them when cap == 0).
inline std::vector<Sample> fit_subset(const std::vector<Sample>& samples, std::size_t cap, std::uint64_t seed) {
  if (cap == 0 || samples.size() <= cap) return samples;
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(detail::stream_seed(seed, 0x5eed));
  for (std::size_t i = 0; i < cap; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  std::vector<Sample> out;
  out.reserve(cap);
  for (auto i : idx) out.push_back(samples[i]);
  return out;
}

inline Result estimate_parameters(const std::vector<Sample>& samples, int k, const Config& cfg) {
  if (samples.empty()) throw InvalidArgument("estimate_parameters: no samples");
  detail::require(k >= 1, "estimate_parameters: K must be >= 1");
  cfg.validate();

  const FitnessData data(fit_subset(samples, cfg.max_fit_samples, cfg.seed));
  Result res;
  auto fitness = [&](const Genome& g) {
    ++res.evaluations;
    return fitness_of(g, data, cfg.alpha, cfg.residual);
  };

  std::mt19937_64 rng(cfg.seed);
  const auto pop_n = static_cast<std::size_t>(cfg.population);
  std::vector<Frog> pop(pop_n);
  for (auto& f : pop) {
    f.genome = random_genome(static_cast<std::size_t>(k), cfg.box, rng);
    f.fitness = fitness(f.genome);
  }
  auto by_fitness = [](const Frog& a, const Frog& b) { return a.fitness < b.fitness; };
  std::stable_sort(pop.begin(), pop.end(), by_fitness);
  Frog incumbent = pop.front();

  const auto groups = partition_memeplexes(pop_n, static_cast<std::size_t>(cfg.memeplexes));
  std::vector<Frog> plex;
  for (int g = 0; g < cfg.global_iters; ++g) {
    for (const auto& members : groups) {
      plex.clear();
      for (auto r : members) plex.push_back(std::move(pop[r]));
      local_step(plex, incumbent, rng, cfg, fitness);
      for (std::size_t i = 0; i < members.size(); ++i) pop[members[i]] = std::move(plex[i]);
    }
    // Shuffle: pool everything and re-rank before the next deal.
    std::stable_sort(pop.begin(), pop.end(), by_fitness);
    if (pop.front().fitness < incumbent.fitness) incumbent = pop.front();
    res.trace.push_back(incumbent.fitness);
    res.iterations = g + 1;

    if (g >= cfg.patience) {
      const double then = res.trace[static_cast<std::size_t>(g - cfg.patience)];
      if (then - incumbent.fitness <= cfg.tol * std::max(then, std::numeric_limits<double>::min())) break;
    }
  }

  res.best = incumbent.genome;
  sort_sources(res.best);
  res.fitness = incumbent.fitness;
  return res;
}

}  // namespace specmap::sfla

#endif  // SPECMAP_SFLA_HPP
