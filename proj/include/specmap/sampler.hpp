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

#ifndef SPECMAP_SAMPLER_HPP
#define SPECMAP_SAMPLER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "specmap/error.hpp"
#include "specmap/scene.hpp"

namespace specmap {

enum class SamplingStrategy { kUniformRandom };

struct SamplingPlan {
  double rate = 0.2;
  std::uint64_t seed = 0;
  SamplingStrategy strategy = SamplingStrategy::kUniformRandom;
};

struct SampleSet {
  std::vector<Sample> samples;
  std::vector<std::size_t> cells;  ///< linear cell index of each sample, ascending
  SpectrumGrid observed;           ///< truth values on sampled cells, mask marks them
};

/// round(rate * total) with ties going to the even neighbour.
inline std::size_t sample_count(double rate, std::size_t total) {
  const double want = rate * static_cast<double>(total);
  double lo = std::floor(want);
  const double frac = want - lo;
  if (frac > 0.5 || (frac == 0.5 && std::fmod(lo, 2.0) != 0.0)) lo += 1.0;
  return std::min(static_cast<std::size_t>(lo), total);
}

/// Uniform draw of distinct cells without replacement; samples sit on cell centers.
inline SampleSet draw_samples(const SpectrumGrid& truth, const SamplingPlan& plan) {
  if (!(plan.rate > 0.0 && plan.rate <= 1.0)) throw InvalidArgument("draw_samples: rate must lie in (0, 1]");
  detail::require(truth.fully_observed(), "draw_samples: truth grid must be fully observed");

  const std::size_t total = truth.size();
  const std::size_t n = sample_count(plan.rate, total);

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(plan.seed);
  // Partial Fisher-Yates: the first n slots end up as a uniform n-subset.
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, total - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(n);
  std::sort(order.begin(), order.end());

  SampleSet out;
  out.cells = order;
  out.observed = SpectrumGrid(truth.spec(), 0.0, false);
  out.samples.reserve(n);
  const auto values = truth.values();
  for (std::size_t lin : order) {
    out.samples.push_back({truth.spec().cell_center(lin), values[lin]});
    out.observed.set(lin, values[lin], true);
  }
  return out;
}

/// Grid carrying the given samples on the cells that contain them. Samples
/// that share a cell are power-averaged.
inline SpectrumGrid samples_to_grid(const GridSpec& spec, const std::vector<Sample>& samples) {
  SpectrumGrid g(spec, 0.0, false);
  std::vector<double> sum_mw(spec.cell_count(), 0.0);
  std::vector<int> hits(spec.cell_count(), 0);
  for (const auto& s : samples) {
    const std::size_t lin = spec.linear(spec.nearest_cell(s.position));
    sum_mw[lin] += dbm_to_mw(s.rss_dbm);
    ++hits[lin];
  }
  for (std::size_t lin = 0; lin < spec.cell_count(); ++lin)
    if (hits[lin] > 0) g.set(lin, mw_to_dbm(sum_mw[lin] / hits[lin]), true);
  return g;
}

}  // namespace specmap

#endif  // SPECMAP_SAMPLER_HPP
