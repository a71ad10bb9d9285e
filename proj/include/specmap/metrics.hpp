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
 * \file metrics.hpp
 *
 * Map-quality and source-recovery scores.
 *
 *  - rmse(): mean absolute relative RSS error per cell, in linear mW. The
 *    name follows the literature even though no square/root pair survives.
 *  - zone rates: per transmitter, cells nearest to it are split into
 *    forbidden (RSS > tau) and permitted, and the estimate is scored by the
 *    correct-detection and false-alarm zone ratios.
 *  - loc_error() / ss_error(): mean position / power error over an optimal
 *    one-to-one matching of estimated to true transmitters.
 */

#ifndef SPECMAP_METRICS_HPP
#define SPECMAP_METRICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "specmap/error.hpp"
#include "specmap/scene.hpp"

namespace specmap::metrics {

inline void require_same_grid(const SpectrumGrid& a, const SpectrumGrid& b) {
  detail::require(a.spec() == b.spec(), "metrics: grids have different specs");
}

/// (1/N) sum_i |P_est - P_true| / P_true over all cells, powers in mW.
inline double rmse(const SpectrumGrid& est, const SpectrumGrid& truth) {
  require_same_grid(est, truth);
  const auto e = est.values();
  const auto t = truth.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double tm = dbm_to_mw(t[i]);
    if (tm == 0.0) throw InvalidArgument("rmse: truth power is exactly zero");
    acc += std::abs((dbm_to_mw(e[i]) - tm) / tm);
  }
  return acc / static_cast<double>(t.size());
}

/// Conventional root-mean-square error in dB, for diagnostics.
inline double rms_db(const SpectrumGrid& est, const SpectrumGrid& truth) {
  require_same_grid(est, truth);
  const auto e = est.values();
  const auto t = truth.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) acc += (e[i] - t[i]) * (e[i] - t[i]);
  return std::sqrt(acc / static_cast<double>(t.size()));
}

// --- zones -------------------------------------------------------------------

/// Per cell: nearest transmitter and whether RSS exceeds the threshold.
struct ZoneMap {
  std::vector<int> region;
  std::vector<std::uint8_t> forbidden;
  std::size_t sources = 0;
  double threshold_dbm = -90.0;
};

inline std::vector<int> nearest_source_regions(const GridSpec& spec, const std::vector<Transmitter>& sources) {
  detail::require(!sources.empty(), "zones: no transmitters");
  std::vector<int> region(spec.cell_count());
  for (std::size_t lin = 0; lin < spec.cell_count(); ++lin) {
    const Vec3 c = spec.cell_center(lin);
    int best = 0;
    double best_d = squared_distance(c, sources[0].position);
    for (std::size_t j = 1; j < sources.size(); ++j) {
      const double d = squared_distance(c, sources[j].position);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    region[lin] = best;
  }
  return region;
}

inline ZoneMap zone_map(const SpectrumGrid& grid, const std::vector<Transmitter>& regions_from, double threshold_dbm) {
  ZoneMap z;
  z.region = nearest_source_regions(grid.spec(), regions_from);
  z.sources = regions_from.size();
  z.threshold_dbm = threshold_dbm;
  const auto v = grid.values();
  z.forbidden.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) z.forbidden[i] = v[i] > threshold_dbm ? 1 : 0;
  return z;
}

enum class ZoneLabel : std::uint8_t {
  kCorrectForbidden,   ///< CD1: forbidden in both
  kCorrectPermitted,   ///< CD0: permitted in both
  kFalseAlarm,         ///< FA0: permitted in truth, forbidden in estimate
  kMissedDetection,    ///< MD1: forbidden in truth, permitted in estimate
};

struct ZonePartition {
  std::vector<int> region;
  std::vector<ZoneLabel> label;
  /// counts[j][label] = number of cells of source j carrying that label
  std::vector<std::array<std::size_t, 4>> counts;
  double threshold_dbm = -90.0;
};

inline ZonePartition label_zones(const ZoneMap& est, const ZoneMap& truth) {
  detail::require(est.region == truth.region, "zones: estimate and truth use different region attributions");
  ZonePartition p;
  p.region = truth.region;
  p.threshold_dbm = truth.threshold_dbm;
  p.counts.assign(truth.sources, {0, 0, 0, 0});
  p.label.resize(truth.region.size());
  for (std::size_t i = 0; i < p.label.size(); ++i) {
    const bool t = truth.forbidden[i] != 0;
    const bool e = est.forbidden[i] != 0;
    const ZoneLabel l = t ? (e ? ZoneLabel::kCorrectForbidden : ZoneLabel::kMissedDetection)
                          : (e ? ZoneLabel::kFalseAlarm : ZoneLabel::kCorrectPermitted);
    p.label[i] = l;
    ++p.counts[static_cast<std::size_t>(p.region[i])][static_cast<std::size_t>(l)];
  }
  return p;
}

struct ZoneRates {
  std::vector<double> cdzr_j;
  std::vector<double> fazr_j;
  std::vector<bool> cdzr_defined;  ///< false when the truth has no forbidden cells for j
  std::vector<bool> fazr_defined;  ///< false when the truth has no permitted cells for j
  double cdzr = 0.0;               ///< sum over defined per-source values
  double fazr = 0.0;
  bool skipped_any() const {
    return std::find(cdzr_defined.begin(), cdzr_defined.end(), false) != cdzr_defined.end() ||
           std::find(fazr_defined.begin(), fazr_defined.end(), false) != fazr_defined.end();
  }
};

inline ZoneRates zone_rates(const ZonePartition& p) {
  ZoneRates r;
  for (const auto& c : p.counts) {
    const auto cd1 = static_cast<double>(c[0]), cd0 = static_cast<double>(c[1]);
    const auto fa0 = static_cast<double>(c[2]), md1 = static_cast<double>(c[3]);
    const bool cd_ok = cd1 + md1 > 0.0;
    const bool fa_ok = fa0 + cd0 > 0.0;
    r.cdzr_defined.push_back(cd_ok);
    r.fazr_defined.push_back(fa_ok);
    r.cdzr_j.push_back(cd_ok ? cd1 / (cd1 + md1) : std::numeric_limits<double>::quiet_NaN());
    r.fazr_j.push_back(fa_ok ? fa0 / (fa0 + cd0) : std::numeric_limits<double>::quiet_NaN());
    if (cd_ok) r.cdzr += r.cdzr_j.back();
    if (fa_ok) r.fazr += r.fazr_j.back();
  }
  return r;
}

/// Zone rates of `est` against `truth`, regions taken from the true transmitters.
inline ZoneRates cdzr_fazr(const SpectrumGrid& est, const SpectrumGrid& truth,
                           const std::vector<Transmitter>& truth_sources, double threshold_dbm) {
  require_same_grid(est, truth);
  return zone_rates(label_zones(zone_map(est, truth_sources, threshold_dbm), zone_map(truth, truth_sources, threshold_dbm)));
}

// --- source matching -----------------------------------------------------------

/// Pairs (est index, truth index) with minimum total Euclidean distance,
/// min(|est|, |truth|) pairs. Exhaustive up to 8 on the smaller side, greedy
/// beyond. Ties keep the lexicographically first assignment.
inline std::vector<std::pair<std::size_t, std::size_t>> match_sources(const std::vector<Vec3>& est,
                                                                      const std::vector<Vec3>& truth) {
  if (est.empty() || truth.empty()) throw InvalidArgument("match_sources: empty source list");
  const bool est_small = est.size() <= truth.size();
  const auto& small = est_small ? est : truth;
  const auto& large = est_small ? truth : est;

  std::vector<std::size_t> best(small.size()), cur(small.size());
  std::vector<char> used(large.size(), 0);
  double best_cost = std::numeric_limits<double>::infinity();

  if (small.size() <= 8) {
    auto rec = [&](auto&& self, std::size_t i, double cost) -> void {
      if (cost >= best_cost) return;
      if (i == small.size()) {
        best_cost = cost;
        best = cur;
        return;
      }
      for (std::size_t j = 0; j < large.size(); ++j) {
        if (used[j]) continue;
        used[j] = 1;
        cur[i] = j;
        self(self, i + 1, cost + distance(small[i], large[j]));
        used[j] = 0;
      }
    };
    rec(rec, 0, 0.0);
  } else {
    for (std::size_t i = 0; i < small.size(); ++i) {
      std::size_t pick = large.size();
      double d_best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < large.size(); ++j) {
        if (used[j]) continue;
        const double d = distance(small[i], large[j]);
        if (d < d_best) {
          d_best = d;
          pick = j;
        }
      }
      used[pick] = 1;
      best[i] = pick;
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < small.size(); ++i)
    pairs.emplace_back(est_small ? i : best[i], est_small ? best[i] : i);
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

inline std::vector<Vec3> positions_of(const std::vector<Transmitter>& s) {
  std::vector<Vec3> p;
  p.reserve(s.size());
  for (const auto& t : s) p.push_back(t.position);
  return p;
}

/// Mean localisation error (m) over matched pairs.
inline double loc_error(const std::vector<Transmitter>& est, const std::vector<Transmitter>& truth) {
  const auto pairs = match_sources(positions_of(est), positions_of(truth));
  double acc = 0.0;
  for (auto [e, t] : pairs) acc += distance(est[e].position, truth[t].position);
  return acc / static_cast<double>(pairs.size());
}

/// Mean absolute power error (dB) over the same matching as loc_error().
inline double ss_error(const std::vector<Transmitter>& est, const std::vector<Transmitter>& truth) {
  const auto pairs = match_sources(positions_of(est), positions_of(truth));
  double acc = 0.0;
  for (auto [e, t] : pairs) acc += std::abs(watts_to_dbm(est[e].power_watts) - watts_to_dbm(truth[t].power_watts));
  return acc / static_cast<double>(pairs.size());
}

inline double detection_success_rate(const std::vector<std::pair<int, int>>& trials) {
  if (trials.empty()) throw InvalidArgument("detection_success_rate: no trials");
  std::size_t hit = 0;
  for (auto [k_est, k_true] : trials)
    if (k_est == k_true) ++hit;
  return static_cast<double>(hit) / static_cast<double>(trials.size());
}

struct MetricsReport {
  double rmse = 0.0;
  double rms_db = 0.0;
  double cdzr = 0.0;
  double fazr = 0.0;
  bool zones_skipped = false;
  /// NaN for methods that produce no source estimates.
  double loc_e = std::numeric_limits<double>::quiet_NaN();
  double ss_e = std::numeric_limits<double>::quiet_NaN();
  bool detect_success = false;
  int k_true = 0;
  int k_est = 0;
};

}  // namespace specmap::metrics

#endif  // SPECMAP_METRICS_HPP
