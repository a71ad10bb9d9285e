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
 * \file synthgen.hpp
 *
 * Ground-truth spectrum maps from the height-dependent urban path-loss law
 *
 *   L = 32.4 + 20 log10(f[MHz]) + 10 (A h^B) log10(d[km]) + X_sigma
 *
 * with h the receiver height above ground and X_sigma a zero-mean Gaussian
 * shadowing term drawn independently per (cell, source).
 */

#ifndef SPECMAP_SYNTHGEN_HPP
#define SPECMAP_SYNTHGEN_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "specmap/error.hpp"
#include "specmap/scene.hpp"

namespace specmap {

struct UrbanPlParams {
  double A = 2.5;
  double B = -0.1;
  double sigma_db = 4.0;
  double frequency_mhz = 100.0;

  void validate() const {
    detail::require(std::isfinite(A) && std::isfinite(B), "UrbanPlParams: A and B must be finite");
    detail::require(sigma_db >= 0.0, "UrbanPlParams: sigma_db must be >= 0");
    detail::require(frequency_mhz > 0.0, "UrbanPlParams: frequency_mhz must be > 0");
    detail::require(A > 0.0, "UrbanPlParams: A must be > 0 so the exponent stays positive");
  }

  /// Effective log-distance exponent at receiver height h (meters).
  double exponent_at(double h) const { return A * std::pow(h, B); }
};

/// Receiver heights below one meter are treated as one meter.
inline constexpr double kMinHeightM = 1.0;

inline double frequency_term_db(double f_mhz) { return 32.4 + 20.0 * std::log10(f_mhz); }

namespace detail {

inline double clamped_height(double z) {
  if (!(z > 0.0)) throw InvalidArgument("path loss: receiver height must be > 0");
  return std::max(z, kMinHeightM);
}

inline double clamped_distance_km(Vec3 a, Vec3 b) { return std::max(distance(a, b), kMinDistanceM) / 1000.0; }

/// splitmix64 finalizer; used to derive independent per-cell RNG seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix_seed(mix_seed(seed) ^ (stream * 0xd1b54a32d192ed03ULL));
}

}  // namespace detail

/// Urban path loss (dB) between a transmitter and a receiver.
inline double urban_path_loss_db(const UrbanPlParams& params, Vec3 tx, Vec3 rx, double shadow_db = 0.0) {
  const double h = detail::clamped_height(rx.z);
  const double d_km = detail::clamped_distance_km(tx, rx);
  return frequency_term_db(params.frequency_mhz) + 10.0 * params.exponent_at(h) * std::log10(d_km) + shadow_db;
}

/// RSS (dBm) at rx from one transmitter of the given power.
inline double source_rss_dbm(const UrbanPlParams& params, const TruthSource& src, Vec3 rx, double shadow_db = 0.0) {
  return watts_to_dbm(src.power_watts) - urban_path_loss_db(params, src.position, rx, shadow_db);
}

/**
 * Evaluates every cell center against every source and power-sums the
 * contributions. Each cell draws its shadowing from its own RNG stream keyed
 * on (seed, cell), so the result does not depend on traversal order.
 */
inline SpectrumGrid generate_truth_grid(const Scene& scene, const UrbanPlParams& params, std::uint64_t seed) {
  if (scene.sources.empty()) throw InvalidArgument("generate_truth_grid: scene has no sources");
  params.validate();
  for (const auto& s : scene.sources)
    detail::require(s.power_watts > 0.0, "generate_truth_grid: source power must be > 0");

  const GridSpec& spec = scene.grid;
  SpectrumGrid grid(spec, 0.0, true);
  std::vector<double> parts(scene.sources.size());
  for (std::size_t lin = 0; lin < spec.cell_count(); ++lin) {
    const Vec3 c = spec.cell_center(lin);
    std::mt19937_64 rng(detail::stream_seed(seed, lin));
    std::normal_distribution<double> shadow(0.0, params.sigma_db);
    for (std::size_t j = 0; j < scene.sources.size(); ++j) {
      const double x = params.sigma_db > 0.0 ? shadow(rng) : 0.0;
      parts[j] = source_rss_dbm(params, scene.sources[j], c, x);
    }
    grid.set(lin, combine_rss_dbm(parts));
  }
  return grid;
}

/// Source layouts from the campus scenario: 2, 3 or 4 transmitters at 1 W, 100 MHz.
inline Scene table1_scene(int k) {
  Scene scene;
  scene.grid = campus_grid();
  scene.frequency_mhz = 100.0;
  switch (k) {
    case 2:
      scene.sources = {{{310, -239, 2}, 1.0}, {{235, -105, 2}, 1.0}};
      break;
    case 3:
      scene.sources = {{{345, -365, 33.77}, 1.0}, {{205, -265, 2}, 1.0}, {{245, -95, 2}, 1.0}};
      break;
    case 4:
      scene.sources = {{{330, -370, 33.77}, 1.0}, {{400, -140, 23.3}, 1.0}, {{185, -255, 2}, 1.0}, {{245, -85, 2}, 1.0}};
      break;
    default:
      throw InvalidArgument("table1_scene: k must be 2, 3 or 4");
  }
  return scene;
}

}  // namespace specmap

#endif  // SPECMAP_SYNTHGEN_HPP
