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


#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "specmap/baselines.hpp"
#include "specmap/sampler.hpp"

namespace specmap::baselines {
namespace {

TEST(Idw, ExactAtSamples) {
  const GridSpec g({0, 0, 0}, {10, 10, 10}, {5, 5, 5});
  std::vector<Sample> s;
  for (std::size_t lin : {0u, 17u, 64u, 124u}) s.push_back({g.cell_center(lin), -40.0 - static_cast<double>(lin)});
  const auto out = idw_reconstruct(s, g);
  EXPECT_EQ(out.values()[17], -57.0);
  EXPECT_EQ(out.values()[124], -164.0);
  EXPECT_TRUE(out.fully_observed());
}

TEST(Idw, EquidistantMean) {
  const GridSpec g({0, 0, 0}, {3, 1, 1}, {3, 1, 1});
  const std::vector<Sample> s{{{0.5, 0.5, 0.5}, -40.0}, {{2.5, 0.5, 0.5}, -60.0}};
  IdwConfig c;
  c.neighbor_count = 2;
  EXPECT_DOUBLE_EQ(idw_reconstruct(s, g, c).values()[1], -50.0);
}

TEST(Idw, ConstantFieldAndBounds) {
  const GridSpec g({0, 0, 0}, {50, 50, 20}, {10, 10, 4});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Sample> same, mixed;
  for (int i = 0; i < 40; ++i) {
    const Vec3 p{50 * u(rng), 50 * u(rng), 20 * u(rng)};
    same.push_back({p, -71.5});
    mixed.push_back({p, -100.0 + 60.0 * u(rng)});
  }
  for (double v : idw_reconstruct(same, g).values()) EXPECT_NEAR(v, -71.5, 1e-12);
  double lo = 0, hi = -1000;
  for (const auto& s : mixed) {
    lo = std::min(lo, s.rss_dbm);
    hi = std::max(hi, s.rss_dbm);
  }
  for (double v : idw_reconstruct(mixed, g).values()) {
    EXPECT_GE(v, lo - 1e-12);
    EXPECT_LE(v, hi + 1e-12);
  }
  EXPECT_THROW(idw_reconstruct({}, g), InvalidArgument);
}

SpectrumGrid rank_one(const GridSpec& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  const auto n = g.counts();
  std::vector<double> a(n[0]), b(n[1]), c(n[2]);
  for (auto& x : a) x = u(rng);
  for (auto& x : b) x = u(rng);
  for (auto& x : c) x = u(rng);
  SpectrumGrid t(g, 0.0, true);
  for (int i = 0; i < n[0]; ++i)
    for (int j = 0; j < n[1]; ++j)
      for (int k = 0; k < n[2]; ++k) t.at(CellIndex{i, j, k}) = -60.0 * a[i] * b[j] * c[k];
  return t;
}

double relative_error(const SpectrumGrid& est, const SpectrumGrid& truth) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    num += (est.values()[i] - truth.values()[i]) * (est.values()[i] - truth.values()[i]);
    den += truth.values()[i] * truth.values()[i];
  }
  return std::sqrt(num / den);
}

TEST(Halrtc, FullyObservedIsFixedPoint) {
  const auto t = rank_one(GridSpec({0, 0, 0}, {1, 1, 1}, {6, 5, 4}), 1);
  const auto r = halrtc_reconstruct(t);
  EXPECT_TRUE(std::equal(t.values().begin(), t.values().end(), r.grid.values().begin()));
}

TEST(Halrtc, RecoversRankOneTensor) {
  const GridSpec g({0, 0, 0}, {1, 1, 1}, {20, 20, 10});
  const auto t = rank_one(g, 2);
  const auto obs = draw_samples(t, {0.5, 9}).observed;
  const auto r = halrtc_reconstruct(obs);
  EXPECT_LE(relative_error(r.grid, t), 1e-3);
  for (std::size_t i = 0; i < t.size(); ++i)
    if (obs.observed(i)) EXPECT_EQ(r.grid.values()[i], obs.values()[i]);
}

TEST(Halrtc, StoppingContract) {
  const GridSpec g({0, 0, 0}, {1, 1, 1}, {10, 8, 6});
  const auto obs = draw_samples(rank_one(g, 3), {0.4, 1}).observed;
  HalrtcConfig c;
  c.tol = 1e-5;
  const auto r = halrtc_reconstruct(obs, c);
  ASSERT_TRUE(r.converged);
  EXPECT_LE(r.last_change, c.tol);
  EXPECT_LE(r.last_residual, c.tol);
  EXPECT_LT(r.iterations, c.max_iters);
  c.max_iters = 3;
  c.tol = 1e-300;
  const auto capped = halrtc_reconstruct(obs, c);
  EXPECT_EQ(capped.iterations, 3);
  EXPECT_FALSE(capped.converged);
}

TEST(Halrtc, ObjectiveNonIncreasing) {
  const GridSpec g({0, 0, 0}, {1, 1, 1}, {8, 8, 5});
  const auto obs = draw_samples(rank_one(g, 4), {0.5, 2}).observed;
  HalrtcConfig c;
  c.track_objective = true;
  c.max_iters = 200;
  const auto r = halrtc_reconstruct(obs, c);
  ASSERT_GE(r.objective.size(), 3u);
  for (std::size_t i = 2; i < r.objective.size(); ++i) EXPECT_LE(r.objective[i], r.objective[i - 1] * (1 + 1e-9));
}

TEST(Halrtc, Validation) {
  const GridSpec g({0, 0, 0}, {1, 1, 1}, {2, 2, 2});
  EXPECT_THROW(halrtc_reconstruct(SpectrumGrid(g)), InvalidArgument);
  HalrtcConfig c;
  c.mode_weights = {0.5, 0.5, 0.5};
  EXPECT_THROW(halrtc_reconstruct(SpectrumGrid(g, 0.0, true), c), InvalidArgument);
}

TEST(Halrtc, UnfoldRoundTrip) {
  const std::array<int, 3> dims{3, 4, 5};
  std::vector<double> t(60);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  for (int mode = 0; mode < 3; ++mode) {
    std::vector<double> back;
    const auto m = detail::unfold(t, dims, mode);
    EXPECT_EQ(m.rows(), dims[mode]);
    detail::fold_into(m, dims, mode, back);
    EXPECT_EQ(back, t);
  }
}

}  // namespace
}  // namespace specmap::baselines
