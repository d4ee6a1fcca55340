// SPDX-License-Identifier: Apache-2.0
//
// cran-split: functional-split evaluation for cloud radio access networks
// Copyright 2026 The cran-split Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "cran/channel.hpp"

#include "cran/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cran::channel {

namespace {

bool finite(Point p) { return std::isfinite(p.x) && std::isfinite(p.y); }

}  // namespace

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

void Geometry::validate() const {
  if (rrh_positions.empty() || ue_positions.empty()) {
    throw std::invalid_argument("geometry: need at least one RRH and one UE");
  }
  for (const auto& p : rrh_positions)
    if (!finite(p)) throw std::invalid_argument("geometry: non-finite RRH position");
  for (const auto& p : ue_positions)
    if (!finite(p)) throw std::invalid_argument("geometry: non-finite UE position");
  if (!(area_side > 0.0) || !std::isfinite(area_side)) throw std::invalid_argument("geometry: area_side must be > 0");
}

Geometry uniform_geometry(int n_rrh, int n_ue, double side, RandomStream& rng) {
  if (n_rrh < 1 || n_ue < 1 || !(side > 0.0)) throw std::invalid_argument("uniform_geometry: bad arguments");
  Geometry g;
  g.area_side = side;
  for (int i = 0; i < n_rrh; ++i) g.rrh_positions.push_back({side * rng.uniform(), side * rng.uniform()});
  for (int j = 0; j < n_ue; ++j) g.ue_positions.push_back({side * rng.uniform(), side * rng.uniform()});
  return g;
}

void PathLossParams::validate() const {
  if (!(d0 > 0.0) || !std::isfinite(d0)) throw std::invalid_argument("path loss: d0 must be > 0");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("path loss: eta must be >= 0");
}

void OneRingParams::validate() const {
  if (!(scattering_radius > 0.0) || !std::isfinite(scattering_radius)) {
    throw std::invalid_argument("one-ring: scattering radius must be > 0");
  }
}

double path_loss(double d, const PathLossParams& params) {
  params.validate();
  if (!std::isfinite(d) || d < 0.0) throw std::invalid_argument("path_loss: distance must be finite and >= 0");
  return 1.0 / (1.0 + std::pow(d / params.d0, params.eta));
}

AngleSpread angle_and_spread(Point rrh, Point ue, const OneRingParams& params) {
  params.validate();
  const double dx = ue.x - rrh.x;
  const double dy = ue.y - rrh.y;
  const double d = std::hypot(dx, dy);
  if (!(d > 0.0)) throw std::invalid_argument("angle_and_spread: coincident RRH and UE");
  return {std::atan2(dy, dx), std::atan(params.scattering_radius / d)};
}

MatrixXcd one_ring_correlation(double theta, double delta, double alpha, int n) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("one_ring_correlation: delta must be > 0");
  if (n < 1) throw std::invalid_argument("one_ring_correlation: n must be >= 1");
  if (!(alpha >= 0.0) || !std::isfinite(theta)) throw std::invalid_argument("one_ring_correlation: bad alpha/theta");

  MatrixXcd s(n, n);
  for (int m = 0; m < n; ++m) s(m, m) = cd(alpha, 0.0);
  // The entry depends only on k = m - n'. With phi = theta + delta u the
  // prefactor alpha/(2 delta) becomes alpha/2 over u in [-1, 1].
  const double tol = alpha > 0.0 ? 2e-10 / alpha : 1.0;
  for (int k = 1; k < n; ++k) {
    const std::function<cd(double)> f = [=](double u) {
      return std::exp(cd(0.0, -std::numbers::pi * k * std::sin(theta + delta * u)));
    };
    const auto q = optim::gauss_legendre<cd>(f, -1.0, 1.0, tol);
    const cd v = 0.5 * alpha * q.value;
    for (int m = k; m < n; ++m) {
      s(m, m - k) = v;
      s(m - k, m) = std::conj(v);
    }
  }
  return s;
}

MatrixXcd hermitian_sqrt(const MatrixXcd& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("hermitian_sqrt: matrix must be square");
  const double scale = std::max(1.0, a.norm());
  if ((a - a.adjoint()).norm() > 1e-12 * scale) throw std::invalid_argument("hermitian_sqrt: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(optim::hermitian_part(a));
  VectorXd lam = es.eigenvalues();
  for (int k = 0; k < lam.size(); ++k) {
    if (lam(k) < -1e-10 * scale) throw std::invalid_argument("hermitian_sqrt: matrix is not PSD");
    lam(k) = std::sqrt(std::max(0.0, lam(k)));
  }
  const MatrixXcd& u = es.eigenvectors();
  return optim::hermitian_part(u * lam.asDiagonal() * u.adjoint());
}

void LinkScenario::validate() const {
  geometry.validate();
  path_loss.validate();
  one_ring.validate();
  if (static_cast<int>(rrh_antennas.size()) != n_rrh() || static_cast<int>(ue_antennas.size()) != n_ue()) {
    throw std::invalid_argument("link scenario: antenna lists do not match geometry");
  }
  for (int a : rrh_antennas)
    if (a < 1) throw std::invalid_argument("link scenario: RRH antenna count must be >= 1");
  for (int a : ue_antennas)
    if (a < 1) throw std::invalid_argument("link scenario: UE antenna count must be >= 1");
}

LinkStatistics link_statistics(const LinkScenario& scenario) {
  scenario.validate();
  LinkStatistics st;
  st.n_rrh = scenario.n_rrh();
  st.n_ue = scenario.n_ue();
  for (int j = 0; j < st.n_ue; ++j) {
    for (int i = 0; i < st.n_rrh; ++i) {
      const Point r = scenario.geometry.rrh_positions[i];
      const Point u = scenario.geometry.ue_positions[j];
      const double a = path_loss(distance(r, u), scenario.path_loss);
      st.alpha.push_back(a);
      if (scenario.fading == Fading::OneRing) {
        const auto as = angle_and_spread(r, u, scenario.one_ring);
        MatrixXcd sigma = one_ring_correlation(as.theta, as.delta, a, scenario.cols(j, i));
        st.tx_sqrt.push_back(hermitian_sqrt(sigma));
        st.tx_correlation.push_back(std::move(sigma));
      }
    }
  }
  return st;
}

MatrixXcd ChannelBlock::ue_row(int j) const {
  int cols = 0;
  for (int i = 0; i < n_rrh; ++i) cols += static_cast<int>(at(j, i).cols());
  MatrixXcd row(at(j, 0).rows(), cols);
  int c = 0;
  for (int i = 0; i < n_rrh; ++i) {
    const MatrixXcd& b = at(j, i);
    row.middleCols(c, b.cols()) = b;
    c += static_cast<int>(b.cols());
  }
  return row;
}

ChannelBlock sample_channel(const LinkScenario& scenario, const LinkStatistics& stats, RandomStream& rng,
                            int coherence_index) {
  if (stats.n_rrh != scenario.n_rrh() || stats.n_ue != scenario.n_ue()) {
    throw std::invalid_argument("sample_channel: statistics do not match scenario");
  }
  ChannelBlock h;
  h.n_rrh = stats.n_rrh;
  h.n_ue = stats.n_ue;
  h.coherence_index = coherence_index;
  h.blocks.reserve(stats.alpha.size());
  const bool one_ring = scenario.fading == Fading::OneRing;
  if (one_ring && stats.tx_sqrt.size() != stats.alpha.size()) {
    throw std::invalid_argument("sample_channel: missing correlation statistics");
  }
  for (int j = 0; j < h.n_ue; ++j) {
    for (int i = 0; i < h.n_rrh; ++i) {
      const size_t k = static_cast<size_t>(j * h.n_rrh + i);
      const int rows = scenario.rows(j, i);
      const int cols = scenario.cols(j, i);
      if (one_ring) {
        h.blocks.push_back(rng.complex_normal_matrix(rows, cols) * stats.tx_sqrt[k]);
      } else {
        h.blocks.push_back(rng.complex_normal_matrix(rows, cols, stats.alpha[k]));
      }
    }
  }
  return h;
}

}  // namespace cran::channel
