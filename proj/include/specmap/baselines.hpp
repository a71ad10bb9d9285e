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
 * \file baselines.hpp
 *
 * Purely data-driven completion of a spectrum grid: inverse-distance
 * weighting over the k nearest samples, and HaLRTC low-rank tensor
 * completion (ADMM on the three mode unfoldings). Both work in dBm.
 */

#ifndef SPECMAP_BASELINES_HPP
#define SPECMAP_BASELINES_HPP

#include <Eigen/Dense>
#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include <array>
#include <cmath>
#include <iterator>
#include <numeric>
#include <utility>
#include <vector>

#include "specmap/error.hpp"
#include "specmap/scene.hpp"

namespace specmap::baselines {

struct IdwConfig {
  double power_exponent = 2.0;
  int neighbor_count = 8;
};

struct HalrtcConfig {
  std::array<double, 3> mode_weights{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  double rho = 1e-4;
  double rho_growth = 1.1;
  int max_iters = 500;
  double tol = 1e-6;
  bool track_objective = false;

  void validate() const {
    double sum = 0.0;
    for (double w : mode_weights) {
      detail::require(w >= 0.0, "HaLRTC: mode weights must be non-negative");
      sum += w;
    }
    detail::require(std::abs(sum - 1.0) <= 1e-12, "HaLRTC: mode weights must sum to 1");
    detail::require(rho > 0.0 && rho_growth >= 1.0, "HaLRTC: rho must be > 0 and growth >= 1");
    detail::require(max_iters >= 1 && tol > 0.0, "HaLRTC: max_iters >= 1 and tol > 0 required");
  }
};

// --- IDW -----------------------------------------------------------------------

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

/// Weighted dBm mean of the k nearest samples, weights d^-p. A cell center
/// that coincides with a sample takes that sample's value.
inline SpectrumGrid idw_reconstruct(const std::vector<Sample>& samples, const GridSpec& spec,
                                    const IdwConfig& cfg = {}) {
  if (samples.empty()) throw InvalidArgument("idw_reconstruct: no samples");
  detail::require(cfg.power_exponent > 0.0 && cfg.neighbor_count >= 1, "idw_reconstruct: need p > 0 and k >= 1");

  using Point = bg::model::point<double, 3, bg::cs::cartesian>;
  using Entry = std::pair<Point, std::size_t>;
  std::vector<Entry> entries;
  entries.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Vec3 p = samples[i].position;
    entries.emplace_back(Point(p.x, p.y, p.z), i);
  }
  const bgi::rtree<Entry, bgi::rstar<16>> tree(entries.begin(), entries.end());

  SpectrumGrid out(spec, 0.0, true);
  const auto k = static_cast<unsigned>(std::min<std::size_t>(static_cast<std::size_t>(cfg.neighbor_count), samples.size()));
  std::vector<Entry> hits;
  hits.reserve(k);
  for (std::size_t lin = 0; lin < spec.cell_count(); ++lin) {
    const Vec3 c = spec.cell_center(lin);
    hits.clear();
    tree.query(bgi::nearest(Point(c.x, c.y, c.z), k), std::back_inserter(hits));
    double num = 0.0, den = 0.0;
    bool exact = false;
    for (const auto& [pt, idx] : hits) {
      const double d = distance(c, samples[idx].position);
      if (d == 0.0) {
        out.set(lin, samples[idx].rss_dbm);
        exact = true;
        break;
      }
      const double w = std::pow(d, -cfg.power_exponent);
      num += w * samples[idx].rss_dbm;
      den += w;
    }
    if (!exact) out.set(lin, num / den);
  }
  return out;
}

// --- HaLRTC --------------------------------------------------------------------

struct HalrtcResult {
  SpectrumGrid grid;
  int iterations = 0;
  double last_change = 0.0;        ///< ||X_t - X_{t-1}||_F / ||X_{t-1}||_F at exit
  double last_residual = 0.0;      ///< mean_n ||M_n - X_t||_F / ||X_t||_F at exit
  bool converged = false;
  std::vector<double> objective;   ///< sum_n w_n ||X_(n)||_* per iterate, when tracked
};

namespace detail {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Mode-n unfolding of a row-major (k fastest) tensor: rows index mode n,
/// columns run over the remaining two modes in order.
inline Matrix unfold(const std::vector<double>& t, const std::array<int, 3>& dims, int mode) {
  const int n1 = dims[0], n2 = dims[1], n3 = dims[2];
  Matrix m(dims[mode], static_cast<Eigen::Index>(t.size()) / dims[mode]);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j)
      for (int k = 0; k < n3; ++k) {
        const double v = t[(static_cast<std::size_t>(i) * n2 + j) * n3 + k];
        switch (mode) {
          case 0: m(i, j * n3 + k) = v; break;
          case 1: m(j, i * n3 + k) = v; break;
          default: m(k, i * n2 + j) = v; break;
        }
      }
  return m;
}

inline void fold_into(const Matrix& m, const std::array<int, 3>& dims, int mode, std::vector<double>& t) {
  const int n1 = dims[0], n2 = dims[1], n3 = dims[2];
  t.resize(static_cast<std::size_t>(n1) * n2 * n3);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j)
      for (int k = 0; k < n3; ++k) {
        double& v = t[(static_cast<std::size_t>(i) * n2 + j) * n3 + k];
        switch (mode) {
          case 0: v = m(i, j * n3 + k); break;
          case 1: v = m(j, i * n3 + k); break;
          default: v = m(k, i * n2 + j); break;
        }
      }
}

/// Singular values of a (short, wide) matrix via its Gram matrix.
inline Eigen::VectorXd singular_values(const Matrix& a) {
  const Eigen::MatrixXd gram = a.rows() <= a.cols() ? Eigen::MatrixXd(a * a.transpose()) : Eigen::MatrixXd(a.transpose() * a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
}

/// Singular value thresholding U diag(max(s - tau, 0)) V^T.
inline Matrix shrink(const Matrix& a, double tau) {
  const bool wide = a.rows() <= a.cols();
  const Eigen::MatrixXd gram = wide ? Eigen::MatrixXd(a * a.transpose()) : Eigen::MatrixXd(a.transpose() * a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const Eigen::VectorXd s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::VectorXd scale(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) scale(i) = s(i) > tau ? (s(i) - tau) / s(i) : 0.0;
  const Eigen::MatrixXd& u = es.eigenvectors();
  const Eigen::MatrixXd p = u * scale.asDiagonal() * u.transpose();
  return wide ? Matrix(p * a) : Matrix(a * p);
}

inline double frobenius(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

}  // namespace detail

/// Weighted sum of the nuclear norms of the three unfoldings.
inline double halrtc_objective(const std::vector<double>& t, const std::array<int, 3>& dims,
                               const std::array<double, 3>& w) {
  double acc = 0.0;
  for (int n = 0; n < 3; ++n)
    if (w[n] > 0.0) acc += w[n] * detail::singular_values(detail::unfold(t, dims, n)).sum();
  return acc;
}

/**
 * Completes the unobserved cells of `observed`. Unobserved entries start at
 * the observed mean; observed entries are re-imposed after every update, so
 * they are returned bit-exact. Stops once both the relative change of X and
 * the mean relative gap between X and the shrunk unfoldings are within tol.
 */
inline HalrtcResult halrtc_reconstruct(const SpectrumGrid& observed, const HalrtcConfig& cfg = {}) {
  cfg.validate();
  const std::size_t n_obs = observed.observed_count();
  if (n_obs == 0) throw InvalidArgument("halrtc_reconstruct: no observed entries");

  const auto dims = observed.spec().counts();
  const auto vals = observed.values();
  const auto mask = observed.mask();
  const std::size_t n = vals.size();

  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (mask[i]) mean += vals[i];
  mean /= static_cast<double>(n_obs);

  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = mask[i] ? vals[i] : mean;

  HalrtcResult res;
  if (n_obs == n) {
    res.grid = SpectrumGrid(observed.spec(), std::vector<double>(vals.begin(), vals.end()),
                            std::vector<std::uint8_t>(n, 1));
    res.converged = true;
    return res;
  }

  std::array<std::vector<double>, 3> y, m;
  for (int k = 0; k < 3; ++k) {
    y[k].assign(n, 0.0);
    m[k].assign(n, 0.0);
  }
  std::vector<double> prev(n);
  double rho = cfg.rho;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    prev = x;
    for (int k = 0; k < 3; ++k) {
      std::vector<double> shifted(n);
      for (std::size_t i = 0; i < n; ++i) shifted[i] = x[i] + y[k][i] / rho;
      if (cfg.mode_weights[k] > 0.0) {
        detail::fold_into(detail::shrink(detail::unfold(shifted, dims, k), cfg.mode_weights[k] / rho), dims, k, m[k]);
      } else {
        m[k] = std::move(shifted);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (mask[i]) {
        x[i] = vals[i];
      } else {
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) acc += m[k][i] - y[k][i] / rho;
        x[i] = acc / 3.0;
      }
    }
    for (int k = 0; k < 3; ++k)
      for (std::size_t i = 0; i < n; ++i) y[k][i] -= rho * (m[k][i] - x[i]);
    rho *= cfg.rho_growth;

    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) diff += (x[i] - prev[i]) * (x[i] - prev[i]);
    const double base = detail::frobenius(prev);
    res.last_change = std::sqrt(diff) / (base > 0.0 ? base : 1.0);
    double gap = 0.0;
    for (int k = 0; k < 3; ++k) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += (m[k][i] - x[i]) * (m[k][i] - x[i]);
      gap += std::sqrt(acc);
    }
    const double scale = detail::frobenius(x);
    res.last_residual = gap / 3.0 / (scale > 0.0 ? scale : 1.0);
    res.iterations = it;
    if (cfg.track_objective) res.objective.push_back(halrtc_objective(x, dims, cfg.mode_weights));
    if (res.last_change <= cfg.tol && res.last_residual <= cfg.tol) {
      res.converged = true;
      break;
    }
  }
  res.grid = SpectrumGrid(observed.spec(), std::move(x), std::vector<std::uint8_t>(n, 1));
  return res;
}

}  // namespace specmap::baselines

#endif  // SPECMAP_BASELINES_HPP
