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
 * \file mmpld.hpp
 *
 * Source counting by maximum/minimum path-loss-difference clustering.
 *
 * For a center sample C the path-loss difference (PLD) of sample i is
 *
 *   delta_i^C = | L_fs(f, |t_C - t_i|) - |P_C - P_i| |
 *
 * i.e. how badly the RSS gap between the two points disagrees with the
 * free-space loss over their separation. New centers are taken where the
 * smallest PLD to any existing center is largest; points join the center
 * with the smallest PLD. The criterion
 *
 *   w(K) = 1/N sum_i d_min(i) / s(i),  s(i) = mean PLD to the other K-1 centers
 *
 * is tracked per K and the loop stops once it flattens out.
 */

#ifndef SPECMAP_MMPLD_HPP
#define SPECMAP_MMPLD_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <tuple>
#include <vector>

#include "specmap/error.hpp"
#include "specmap/scene.hpp"

namespace specmap::mmpld {

struct Thresholds {
  double sigma1 = 0.05;  ///< absolute change bound used while K < 3
  double sigma2 = 0.5;   ///< relative change bound used for K >= 3
};

struct Config {
  Thresholds thresholds;
  int k_max = 10;
  /// Log-distance exponent of the reference loss; 2 is free space.
  double exponent = 2.0;
};

/// Criterion value assigned to the single-cluster state, where no
/// between-class PLD exists to compare against.
inline constexpr double kSingleClusterCriterion = 1.0;

struct ClusteringState {
  std::vector<std::size_t> centers;       ///< sample indices C_1..C_q, in selection order
  std::vector<std::vector<double>> pld;   ///< pld[q][i] = delta_i^{C_q}
  std::vector<double> d_min;
  std::vector<int> assignment;            ///< class (position in centers) of each sample
  std::vector<double> criterion_history;  ///< criterion_history[K-1] = w(K)
  Thresholds thresholds;

  std::size_t k() const { return centers.size(); }
  std::size_t n() const { return d_min.size(); }
};

/// Reference loss 32.4 + 20 log10 f + 10 n log10 d, d clamped to 1 m.
inline double path_loss_db(double f_mhz, double d_km, double exponent = 2.0) {
  if (!(f_mhz > 0.0) || !(d_km > 0.0)) throw InvalidArgument("free-space loss: frequency and distance must be > 0");
  const double d = std::max(d_km, kMinDistanceM / 1000.0);
  return 32.4 + 20.0 * std::log10(f_mhz) + 10.0 * exponent * std::log10(d);
}

inline double free_space_pl_db(double f_mhz, double d_km) { return path_loss_db(f_mhz, d_km, 2.0); }

/// delta_i^C for every sample against the sample at center_idx.
inline std::vector<double> pld_vector(const std::vector<Sample>& samples, std::size_t center_idx, double f_mhz,
                                      double exponent = 2.0) {
  detail::require(center_idx < samples.size(), "pld_vector: center index out of range");
  const Sample& c = samples[center_idx];
  std::vector<double> delta(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double d_km = std::max(distance(c.position, samples[i].position), kMinDistanceM) / 1000.0;
    const double theo = path_loss_db(f_mhz, d_km, exponent);
    const double actual = std::abs(c.rss_dbm - samples[i].rss_dbm);
    delta[i] = std::abs(theo - actual);
  }
  return delta;
}

/// State after choosing the first center.
inline ClusteringState init_state(std::size_t first_center, std::vector<double> first_pld, Thresholds th = {}) {
  detail::require(first_center < first_pld.size(), "init_state: center index out of range");
  ClusteringState st;
  st.thresholds = th;
  st.centers = {first_center};
  st.d_min = first_pld;
  st.assignment.assign(first_pld.size(), 0);
  st.pld.push_back(std::move(first_pld));
  st.criterion_history = {kSingleClusterCriterion};
  return st;
}

/// argmax of d_min over non-center samples; ties go to the lowest index.
inline std::size_t select_next_center(const ClusteringState& st) {
  detail::require(!st.centers.empty(), "select_next_center: state has no first center");
  std::vector<char> is_center(st.n(), 0);
  for (std::size_t c : st.centers) is_center[c] = 1;
  std::size_t best = st.n();
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < st.n(); ++i) {
    if (is_center[i]) continue;
    if (st.d_min[i] > best_val) {
      best_val = st.d_min[i];
      best = i;
    }
  }
  if (best == st.n()) throw InvalidArgument("select_next_center: every sample is already a center");
  return best;
}

/// Registers a new center and folds its PLD into d_min / assignment.
/// Strict comparison keeps ties with the earlier center.
inline void update_and_assign(ClusteringState& st, std::size_t center_idx, std::vector<double> new_pld) {
  detail::require(new_pld.size() == st.n(), "update_and_assign: PLD vector length mismatch");
  detail::require(center_idx < st.n(), "update_and_assign: center index out of range");
  detail::require(std::find(st.centers.begin(), st.centers.end(), center_idx) == st.centers.end(),
                  "update_and_assign: sample is already a center");
  const int cls = static_cast<int>(st.centers.size());
  for (std::size_t i = 0; i < st.n(); ++i) {
    if (new_pld[i] < st.d_min[i]) {
      st.d_min[i] = new_pld[i];
      st.assignment[i] = cls;
    }
  }
  st.centers.push_back(center_idx);
  st.pld.push_back(std::move(new_pld));
}

/// w(K) for the current centers. Throws DegenerateInput when some sample has
/// zero mean PLD to the classes it does not belong to.
inline double criterion(const ClusteringState& st) {
  const std::size_t k = st.k();
  detail::require(k >= 2, "criterion: needs at least two clusters");
  detail::require(st.n() >= 1, "criterion: no samples");
  double acc = 0.0;
  for (std::size_t i = 0; i < st.n(); ++i) {
    double other = 0.0;
    for (std::size_t q = 0; q < k; ++q)
      if (static_cast<int>(q) != st.assignment[i]) other += st.pld[q][i];
    const double varsigma = other / static_cast<double>(k - 1);
    if (!(varsigma > 0.0)) throw DegenerateInput("criterion: zero between-class PLD (degenerate configuration)");
    acc += st.d_min[i] / varsigma;
  }
  return acc / static_cast<double>(st.n());
}

/// Stop test evaluated right after w(K) has been appended to the history.
inline bool should_stop(const std::vector<double>& history, const Thresholds& th) {
  const std::size_t k = history.size();
  if (k < 2) return false;
  const double step = history[k - 1] - history[k - 2];
  if (k < 3) return std::abs(step) <= th.sigma1;
  const double prev = history[k - 2] - history[k - 3];
  if (prev == 0.0) return true;
  return std::abs(step / prev) <= th.sigma2;
}

/// Merges samples at identical positions by averaging their power in mW.
inline std::vector<Sample> dedup_positions(const std::vector<Sample>& samples) {
  std::map<std::tuple<double, double, double>, std::pair<double, int>> acc;
  std::vector<std::tuple<double, double, double>> order;
  for (const auto& s : samples) {
    const auto key = std::make_tuple(s.position.x, s.position.y, s.position.z);
    auto [it, fresh] = acc.try_emplace(key, 0.0, 0);
    if (fresh) order.push_back(key);
    it->second.first += dbm_to_mw(s.rss_dbm);
    it->second.second += 1;
  }
  if (order.size() == samples.size()) return samples;
  std::vector<Sample> out;
  out.reserve(order.size());
  for (const auto& key : order) {
    const auto& [sum, cnt] = acc.at(key);
    out.push_back({{std::get<0>(key), std::get<1>(key), std::get<2>(key)}, mw_to_dbm(sum / cnt)});
  }
  return out;
}

struct Detection {
  int k = 1;
  ClusteringState state;
  std::vector<Sample> samples;  ///< deduplicated set the state refers to
  bool degenerate = false;      ///< loop ended on a zero between-class PLD
  bool hit_k_max = false;
};

inline Detection detect_source_count(const std::vector<Sample>& samples, double f_mhz, const Config& cfg = {}) {
  if (samples.size() < 2) throw InvalidArgument("detect_source_count: need at least two samples");
  detail::require(cfg.k_max >= 1, "detect_source_count: k_max must be >= 1");
  detail::require(f_mhz > 0.0, "detect_source_count: frequency must be > 0");

  Detection out;
  out.samples = dedup_positions(samples);
  const auto& s = out.samples;
  if (s.size() < 2) throw DegenerateInput("detect_source_count: fewer than two distinct sample positions");

  std::size_t first = 0;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i].rss_dbm > s[first].rss_dbm) first = i;
  out.state = init_state(first, pld_vector(s, first, f_mhz, cfg.exponent), cfg.thresholds);

  const int k_cap = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.k_max), s.size()));
  out.k = 1;
  while (out.k < k_cap) {
    const std::size_t next = select_next_center(out.state);
    update_and_assign(out.state, next, pld_vector(s, next, f_mhz, cfg.exponent));
    out.k = static_cast<int>(out.state.k());
    try {
      out.state.criterion_history.push_back(criterion(out.state));
    } catch (const DegenerateInput&) {
      out.degenerate = true;
      return out;
    }
    if (should_stop(out.state.criterion_history, cfg.thresholds)) return out;
  }
  out.hit_k_max = true;
  return out;
}

}  // namespace specmap::mmpld

#endif  // SPECMAP_MMPLD_HPP
