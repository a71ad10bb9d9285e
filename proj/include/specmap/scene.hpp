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
 * \file scene.hpp
 *
 * Region-of-interest grid, the dense RSS tensor that lives on it, point
 * samples, transmitters and the dBm/mW conversions every stage shares.
 *
 * RSS is stored in dBm. Linear milliwatts only appear transiently where
 * contributions are summed.
 */

#ifndef SPECMAP_SCENE_HPP
#define SPECMAP_SCENE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "specmap/error.hpp"

namespace specmap {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend constexpr bool operator==(Vec3 a, Vec3 b) = default;

  constexpr double operator[](std::size_t axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  constexpr double& operator[](std::size_t axis) { return axis == 0 ? x : (axis == 1 ? y : z); }
};

inline double squared_distance(Vec3 a, Vec3 b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

inline double distance(Vec3 a, Vec3 b) { return std::sqrt(squared_distance(a, b)); }

/// Smallest separation (meters) used anywhere a log-distance law is evaluated.
inline constexpr double kMinDistanceM = 1.0;

using CellIndex = std::array<int, 3>;

/// Axis-aligned box split into N1 x N2 x N3 equal cells.
class GridSpec {
 public:
  GridSpec() = default;

  GridSpec(Vec3 origin, Vec3 extent, std::array<int, 3> counts)
      : origin_(origin), extent_(extent), counts_(counts) {
    for (std::size_t a = 0; a < 3; ++a) {
      detail::require(counts_[a] >= 1, "GridSpec: cell counts must be >= 1");
      detail::require(extent_[a] > 0.0 && std::isfinite(extent_[a]), "GridSpec: extent must be positive");
      detail::require(std::isfinite(origin_[a]), "GridSpec: origin must be finite");
    }
  }

  Vec3 origin() const { return origin_; }
  Vec3 extent() const { return extent_; }
  const std::array<int, 3>& counts() const { return counts_; }
  Vec3 upper() const { return origin_ + extent_; }

  Vec3 cell_size() const {
    return {extent_.x / counts_[0], extent_.y / counts_[1], extent_.z / counts_[2]};
  }

  std::size_t cell_count() const {
    return static_cast<std::size_t>(counts_[0]) * counts_[1] * counts_[2];
  }

  bool valid_index(const CellIndex& idx) const {
    for (std::size_t a = 0; a < 3; ++a)
      if (idx[a] < 0 || idx[a] >= counts_[a]) return false;
    return true;
  }

  /// Row-major: k varies fastest.
  std::size_t linear(const CellIndex& idx) const {
    detail::require(valid_index(idx), "GridSpec: cell index out of range");
    return (static_cast<std::size_t>(idx[0]) * counts_[1] + idx[1]) * counts_[2] + idx[2];
  }

  CellIndex unravel(std::size_t lin) const {
    detail::require(lin < cell_count(), "GridSpec: linear index out of range");
    const int k = static_cast<int>(lin % counts_[2]);
    lin /= counts_[2];
    const int j = static_cast<int>(lin % counts_[1]);
    const int i = static_cast<int>(lin / counts_[1]);
    return {i, j, k};
  }

  Vec3 cell_center(const CellIndex& idx) const {
    detail::require(valid_index(idx), "GridSpec: cell index out of range");
    const Vec3 h = cell_size();
    return {origin_.x + (idx[0] + 0.5) * h.x, origin_.y + (idx[1] + 0.5) * h.y,
            origin_.z + (idx[2] + 0.5) * h.z};
  }

  Vec3 cell_center(std::size_t lin) const { return cell_center(unravel(lin)); }

  bool contains(Vec3 p) const {
    const Vec3 hi = upper();
    return p.x >= origin_.x && p.x <= hi.x && p.y >= origin_.y && p.y <= hi.y && p.z >= origin_.z &&
           p.z <= hi.z;
  }

  /// Cell whose closed box contains p; points on the upper face map to the last cell.
  CellIndex nearest_cell(Vec3 p) const {
    detail::require(contains(p), "GridSpec: point outside the region of interest");
    const Vec3 h = cell_size();
    CellIndex idx{};
    for (std::size_t a = 0; a < 3; ++a) {
      const int c = static_cast<int>(std::floor((p[a] - origin_[a]) / h[a]));
      idx[a] = std::clamp(c, 0, counts_[a] - 1);
    }
    return idx;
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  Vec3 origin_{};
  Vec3 extent_{1.0, 1.0, 1.0};
  std::array<int, 3> counts_{1, 1, 1};
};

/// Dense RSS tensor (dBm) with a per-cell observed flag.
class SpectrumGrid {
 public:
  SpectrumGrid() = default;

  explicit SpectrumGrid(GridSpec spec, double fill = 0.0, bool observed = false)
      : spec_(spec), values_(spec.cell_count(), fill), mask_(spec.cell_count(), observed ? 1 : 0) {}

  SpectrumGrid(GridSpec spec, std::vector<double> values, std::vector<std::uint8_t> mask)
      : spec_(spec), values_(std::move(values)), mask_(std::move(mask)) {
    detail::require(values_.size() == spec_.cell_count(), "SpectrumGrid: value count does not match grid");
    detail::require(mask_.size() == spec_.cell_count(), "SpectrumGrid: mask size does not match grid");
    for (std::size_t i = 0; i < values_.size(); ++i)
      detail::require(!mask_[i] || std::isfinite(values_[i]), "SpectrumGrid: observed cell holds a non-finite value");
  }

  const GridSpec& spec() const { return spec_; }
  std::size_t size() const { return values_.size(); }

  double& at(const CellIndex& idx) { return values_[spec_.linear(idx)]; }
  double at(const CellIndex& idx) const { return values_[spec_.linear(idx)]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<std::uint8_t> mask() { return mask_; }
  std::span<const std::uint8_t> mask() const { return mask_; }

  bool observed(std::size_t lin) const { return mask_[lin] != 0; }
  std::size_t observed_count() const {
    return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
  }
  bool fully_observed() const { return observed_count() == mask_.size(); }

  void set(std::size_t lin, double dbm, bool obs = true) {
    values_[lin] = dbm;
    mask_[lin] = obs ? 1 : 0;
  }

  friend bool operator==(const SpectrumGrid&, const SpectrumGrid&) = default;

 private:
  GridSpec spec_{};
  std::vector<double> values_;
  std::vector<std::uint8_t> mask_;
};

/// One measurement: position in meters and RSS in dBm.
struct Sample {
  Vec3 position;
  double rss_dbm = 0.0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct TruthSource {
  Vec3 position;
  double power_watts = 0.0;

  friend bool operator==(const TruthSource&, const TruthSource&) = default;
};

/// Any transmitter described by position and power, estimated or true.
using Transmitter = TruthSource;

struct Scene {
  GridSpec grid;
  std::vector<TruthSource> sources;
  double frequency_mhz = 100.0;
};

// --- unit conversions ------------------------------------------------------

inline double dbm_to_mw(double p_dbm) { return std::pow(10.0, p_dbm / 10.0); }

inline double mw_to_dbm(double p_mw) {
  if (!(p_mw > 0.0)) throw InvalidArgument("mw_to_dbm: power must be positive");
  return 10.0 * std::log10(p_mw);
}

inline double watts_to_dbm(double w) { return mw_to_dbm(w * 1000.0); }
inline double dbm_to_watts(double dbm) { return dbm_to_mw(dbm) / 1000.0; }

/// Power sum of several dBm contributions, returned in dBm.
inline double combine_rss_dbm(std::span<const double> parts_dbm) {
  if (parts_dbm.empty()) throw InvalidArgument("combine_rss_dbm: no contributions");
  // Factor out the strongest term so tiny addends do not underflow.
  const double peak = *std::max_element(parts_dbm.begin(), parts_dbm.end());
  if (!std::isfinite(peak)) throw InvalidArgument("combine_rss_dbm: non-finite contribution");
  double acc = 0.0;
  for (double p : parts_dbm) {
    if (!std::isfinite(p)) throw InvalidArgument("combine_rss_dbm: non-finite contribution");
    acc += std::pow(10.0, (p - peak) / 10.0);
  }
  return peak + 10.0 * std::log10(acc);
}

inline double combine_rss_dbm(std::initializer_list<double> parts) {
  return combine_rss_dbm(std::span<const double>(parts.begin(), parts.size()));
}

/// The campus region: X 0..500, Y -450..50, Z 0..100 m at 5 x 5 x 10 m cells.
inline GridSpec campus_grid() { return GridSpec({0.0, -450.0, 0.0}, {500.0, 500.0, 100.0}, {100, 100, 10}); }

}  // namespace specmap

#endif  // SPECMAP_SCENE_HPP
