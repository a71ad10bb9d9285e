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
#include <vector>

#include "specmap/plfit.hpp"
#include "specmap/sampler.hpp"
#include "specmap/synthgen.hpp"

namespace specmap::plfit {
namespace {

const std::vector<Transmitter> kOne{{{0, 0, 2}, 1.0}};
const std::vector<Transmitter> kTwo{{{0, 0, 2}, 1.0}, {{50, 0, 2}, 1.0}};

TEST(MeasuredLoss, Examples) {
  EXPECT_NEAR(measured_pl_db({{1, 1, 1}, -42.4}, kOne), 72.4, 1e-12);
  EXPECT_NEAR(measured_pl_db({{1, 1, 1}, 30.0}, kOne), 0.0, 1e-12);
  EXPECT_NEAR(measured_pl_db({{1, 1, 1}, -40.0}, kTwo), 10.0 * std::log10(2000.0) + 40.0, 1e-12);
  EXPECT_NEAR(measured_pl_db({{1, 1, 1}, -40.0}, kTwo), 73.0103, 1e-4);
}

TEST(TheoreticalLoss, SumStructure) {
  const UrbanPlParams p{2.5, -0.1, 0.0, 100.0};
  const Vec3 at{30, 40, 12};
  EXPECT_DOUBLE_EQ(theoretical_pl_db(at, kOne, p), urban_path_loss_db(p, kOne[0].position, at));
  const Vec3 mid{25, 60, 7};
  EXPECT_NEAR(theoretical_pl_db(mid, kTwo, p), 2.0 * urban_path_loss_db(p, kTwo[0].position, mid), 1e-12);
  const UrbanPlParams flat{3.0, 0.0, 0.0, 100.0};
  EXPECT_NEAR(theoretical_pl_db({100, 0, 1}, kOne, flat), theoretical_pl_db({100, 0, 3}, kOne, flat), 1e-12);
}

TEST(Predicted, SingleSourceMatchesGenerator) {
  const UrbanPlParams p{2.5, -0.1, 0.0, 100.0};
  for (Vec3 at : {Vec3{10, 10, 1}, Vec3{300, -40, 50}})
    EXPECT_NEAR(predicted_rss_dbm(at, kOne, p), source_rss_dbm(p, kOne[0], at), 1e-12);
}

struct Fixture {
  Scene scene;
  SpectrumGrid truth;
  std::vector<Sample> samples;
};

Fixture make(const std::vector<Transmitter>& sources, const UrbanPlParams& p, double rate, std::uint64_t seed) {
  Fixture f;
  f.scene.grid = GridSpec({0, 0, 0}, {200, 200, 50}, {20, 20, 5});
  f.scene.sources = sources;
  f.truth = generate_truth_grid(f.scene, p, seed);
  f.samples = draw_samples(f.truth, {rate, seed}).samples;
  return f;
}

TEST(Fit, RecoversParametersWithoutShadowing) {
  const UrbanPlParams truth{2.5, -0.1, 0.0, 100.0};
  const auto f = make({{{60, 130, 10}, 1.0}}, truth, 1.0, 1);
  const auto r = fit_pl_params(f.samples, f.scene.sources, 100.0);
  EXPECT_NEAR(r.params.A, 2.5, 0.025);
  EXPECT_NEAR(r.params.B, -0.1, 0.001);
  EXPECT_LE(r.params.sigma_db, 0.1);
  const auto g = reconstruct_grid(f.scene.grid, f.scene.sources, r.params);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(g.values()[i] - f.truth.values()[i]));
  EXPECT_LE(worst, 1e-3);
}

TEST(Fit, RecoversMultiSourceWithCombinedObjective) {
  const UrbanPlParams truth{2.5, -0.1, 0.0, 100.0};
  const auto f = make({{{60, 130, 10}, 1.0}, {{150, 40, 2}, 0.5}}, truth, 0.5, 2);
  const auto r = fit_pl_params(f.samples, f.scene.sources, 100.0);
  EXPECT_NEAR(r.params.A, 2.5, 0.025);
  EXPECT_NEAR(r.params.B, -0.1, 0.001);
}

TEST(Fit, ShadowSpreadEstimate) {
  const UrbanPlParams truth{2.5, -0.1, 4.0, 100.0};
  double sum = 0.0;
  const int seeds = 20;
  for (int s = 1; s <= seeds; ++s) {
    const auto f = make({{{60, 130, 10}, 1.0}}, truth, 1.0, static_cast<std::uint64_t>(s));
    ASSERT_GE(f.samples.size(), 2000u);
    FitOptions opt;
    opt.multistarts = 2;
    sum += fit_pl_params(f.samples, f.scene.sources, 100.0, {}, {}, opt).params.sigma_db;
  }
  EXPECT_NEAR(sum / seeds, 4.0, 0.15 * 4.0);
}

TEST(Fit, NeverWorseThanInit) {
  const UrbanPlParams truth{2.9, 0.05, 3.0, 100.0};
  const auto f = make({{{60, 130, 10}, 1.0}, {{150, 40, 2}, 1.0}}, truth, 0.1, 4);
  for (auto obj : {Objective::kCombinedRss, Objective::kSummedLoss}) {
    FitOptions opt;
    opt.objective = obj;
    const UrbanPlParams init{2.0, 0.0, 0.0, 100.0};
    const auto r = fit_pl_params(f.samples, f.scene.sources, 100.0, init, {}, opt);
    EXPECT_LE(r.residual_norm, fit_objective(f.samples, f.scene.sources, init, obj) + 1e-9);
    EXPECT_NEAR(r.residual_norm, fit_objective(f.samples, f.scene.sources, r.params, obj), 1e-6 * r.residual_norm);
  }
}

TEST(Fit, DegenerateInputs) {
  const std::vector<Sample> flat{{{5, 5, 2}, -40}, {{5, 5, 2}, -40}, {{5, 5, 2}, -40}};
  EXPECT_THROW(fit_pl_params(flat, kOne, 100.0), DegenerateInput);
  EXPECT_THROW(fit_pl_params({flat[0], flat[1]}, kOne, 100.0), InvalidArgument);
  EXPECT_THROW(fit_pl_params(flat, {}, 100.0), InvalidArgument);
}

TEST(Reconstruct, ExactInverseOfGeneration) {
  const UrbanPlParams p{2.5, -0.1, 0.0, 100.0};
  const Scene s = table1_scene(3);
  const auto truth = generate_truth_grid(s, p, 1);
  const auto g = reconstruct_grid(s.grid, s.sources, p);
  for (std::size_t i = 0; i < g.size(); ++i) ASSERT_NEAR(g.values()[i], truth.values()[i], 1e-6);
}

TEST(Reconstruct, DoublingPowerAddsThreeDecibels) {
  const UrbanPlParams p;
  auto sources = table1_scene(2).sources;
  const GridSpec grid({0, -450, 0}, {500, 500, 100}, {25, 25, 5});
  const auto a = reconstruct_grid(grid, sources, p);
  for (auto& s : sources) s.power_watts *= 2.0;
  const auto b = reconstruct_grid(grid, sources, p);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b.values()[i] - a.values()[i], 10.0 * std::log10(2.0), 1e-9);
}

TEST(Reconstruct, NegligibleDistantSource) {
  const UrbanPlParams p;
  const GridSpec grid({0, 0, 0}, {100, 100, 20}, {10, 10, 2});
  const std::vector<Transmitter> near{{{50, 50, 5}, 1.0}};
  auto both = near;
  both.push_back({{50000, 50000, 5}, 1e-3});
  const auto a = reconstruct_grid(grid, near, p);
  const auto b = reconstruct_grid(grid, both, p);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LT(std::abs(b.values()[i] - a.values()[i]), 0.1);
}

TEST(Reconstruct, ShadowedRenderingIsSeeded) {
  const UrbanPlParams p;
  const auto s = table1_scene(2);
  const GridSpec grid({0, -450, 0}, {500, 500, 100}, {10, 10, 2});
  const auto a = reconstruct_grid(grid, s.sources, p, 7);
  const auto b = reconstruct_grid(grid, s.sources, p, 7);
  const auto mean = reconstruct_grid(grid, s.sources, p);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  EXPECT_FALSE(std::equal(a.values().begin(), a.values().end(), mean.values().begin()));
}

}  // namespace
}  // namespace specmap::plfit
