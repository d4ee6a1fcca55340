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

#include "cran/downlink.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace cran::downlink {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log2det(const MatrixXcd& a) {
  double ld = 0.0;
  if (!optim::logdet_hpd(a, ld)) throw std::invalid_argument("log2det: matrix is not positive definite");
  return ld / std::numbers::ln2;
}

MatrixXcd total(const std::vector<MatrixXcd>& v, int n) {
  MatrixXcd s = MatrixXcd::Zero(n, n);
  for (const auto& x : v) s += x;
  return s;
}

MatrixXcd omega_matrix(const DownlinkScenario& s, const VectorXd& omega) {
  const int n = s.total_tx();
  MatrixXcd o = MatrixXcd::Zero(n, n);
  for (int i = 0; i < s.n_rrh(); ++i) {
    for (int a = 0; a < s.rrh_antennas[i]; ++a) o(s.row_offset(i) + a, s.row_offset(i) + a) = omega(i);
  }
  return o;
}

MatrixXcd rrh_block(const DownlinkScenario& s, const MatrixXcd& x, int i) {
  return x.block(s.row_offset(i), s.row_offset(i), s.rrh_antennas[i], s.rrh_antennas[i]);
}

void check_shapes(const DownlinkScenario& s, const std::vector<MatrixXcd>& v) {
  const int n = s.total_tx();
  if (static_cast<int>(v.size()) != s.n_ue()) throw std::invalid_argument("downlink: need one covariance per UE");
  for (const auto& x : v) {
    if (x.rows() != n || x.cols() != n) throw std::invalid_argument("downlink: covariance must be N_t x N_t");
  }
}

}  // namespace

std::string to_string(Approach a) { return a == Approach::Conventional ? "conventional" : "alt-split"; }

std::string to_string(CsiMode m) { return m == CsiMode::Instantaneous ? "instantaneous" : "stochastic"; }

Approach approach_from_string(const std::string& s) {
  if (s == "conventional") return Approach::Conventional;
  if (s == "alt-split") return Approach::AltSplit;
  throw std::invalid_argument("unknown downlink approach: " + s);
}

CsiMode csi_from_string(const std::string& s) {
  if (s == "instantaneous") return CsiMode::Instantaneous;
  if (s == "stochastic") return CsiMode::Stochastic;
  throw std::invalid_argument("unknown CSI mode: " + s);
}

int DownlinkScenario::total_tx() const { return std::accumulate(rrh_antennas.begin(), rrh_antennas.end(), 0); }

int DownlinkScenario::row_offset(int i) const {
  return std::accumulate(rrh_antennas.begin(), rrh_antennas.begin() + i, 0);
}

int DownlinkScenario::stream_count(int j) const { return streams.empty() ? ue_antennas[j] : streams[j]; }

double DownlinkScenario::weight(int j) const { return weights.empty() ? 1.0 : weights[j]; }

void DownlinkScenario::validate() const {
  if (rrh_antennas.empty() || ue_antennas.empty()) throw std::invalid_argument("downlink scenario: need RRHs and UEs");
  for (int a : rrh_antennas)
    if (a < 1) throw std::invalid_argument("downlink scenario: RRH antennas must be >= 1");
  for (int a : ue_antennas)
    if (a < 1) throw std::invalid_argument("downlink scenario: UE antennas must be >= 1");
  if (!streams.empty() && static_cast<int>(streams.size()) != n_ue()) {
    throw std::invalid_argument("downlink scenario: one stream count per UE");
  }
  int m = 0;
  for (int j = 0; j < n_ue(); ++j) {
    const int mj = stream_count(j);
    if (mj < 1 || mj > ue_antennas[j]) throw std::invalid_argument("downlink scenario: need 1 <= M_j <= N_r,j");
    m += mj;
  }
  if (m > total_tx()) throw std::invalid_argument("downlink scenario: total streams exceed transmit antennas");
  if (static_cast<int>(power.size()) != n_rrh() || static_cast<int>(capacity.size()) != n_rrh()) {
    throw std::invalid_argument("downlink scenario: one power and capacity per RRH");
  }
  for (double p : power)
    if (!(p > 0.0) || !std::isfinite(p)) throw std::invalid_argument("downlink scenario: powers must be positive");
  for (double c : capacity)
    if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("downlink scenario: capacities must be positive");
  if (T < 1) throw std::invalid_argument("downlink scenario: T must be >= 1");
  if (!weights.empty()) {
    if (static_cast<int>(weights.size()) != n_ue()) throw std::invalid_argument("downlink scenario: one weight per UE");
    for (double w : weights)
      if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("downlink scenario: weights must be >= 0");
  }
}

ChannelRows channel_rows(const channel::ChannelBlock& block) {
  ChannelRows rows;
  for (int j = 0; j < block.n_ue; ++j) rows.push_back(block.ue_row(j));
  return rows;
}

// ---------------------------------------------------------------------------
// Clustering
// ---------------------------------------------------------------------------

bool ClusterAssignment::serves(int i, int j) const {
  const auto& m = ue_sets[i];
  return std::binary_search(m.begin(), m.end(), j);
}

std::vector<int> ClusterAssignment::unserved() const {
  std::vector<int> out;
  for (int j = 0; j < n_ue(); ++j)
    if (rrh_sets[j].empty()) out.push_back(j);
  return out;
}

void ClusterAssignment::validate() const {
  for (int i = 0; i < n_rrh(); ++i) {
    if (!std::is_sorted(ue_sets[i].begin(), ue_sets[i].end())) throw std::invalid_argument("cluster: M_i not sorted");
    for (int j : ue_sets[i]) {
      if (j < 0 || j >= n_ue()) throw std::invalid_argument("cluster: UE index out of range");
      const auto& b = rrh_sets[j];
      if (!std::binary_search(b.begin(), b.end(), i)) throw std::invalid_argument("cluster: M_i and B_j disagree");
    }
  }
  size_t links = 0;
  for (const auto& b : rrh_sets) links += b.size();
  size_t links2 = 0;
  for (const auto& m : ue_sets) links2 += m.size();
  if (links != links2) throw std::invalid_argument("cluster: M_i and B_j disagree");
}

ClusterAssignment full_assignment(int n_rrh, int n_ue) {
  ClusterAssignment a;
  a.nc = n_ue;
  std::vector<int> all_ue(n_ue), all_rrh(n_rrh);
  std::iota(all_ue.begin(), all_ue.end(), 0);
  std::iota(all_rrh.begin(), all_rrh.end(), 0);
  a.ue_sets.assign(n_rrh, all_ue);
  a.rrh_sets.assign(n_ue, all_rrh);
  return a;
}

ClusterAssignment cluster_assign(const MatrixXd& norms, int nc) {
  const int n_rrh = static_cast<int>(norms.rows());
  const int n_ue = static_cast<int>(norms.cols());
  if (nc < 1 || nc > n_ue) throw std::invalid_argument("cluster_assign: need 1 <= N_c <= N_U");
  ClusterAssignment a;
  a.nc = nc;
  a.ue_sets.resize(n_rrh);
  a.rrh_sets.resize(n_ue);
  for (int i = 0; i < n_rrh; ++i) {
    std::vector<int> order(n_ue);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return norms(i, x) > norms(i, y); });
    order.resize(nc);
    std::sort(order.begin(), order.end());
    a.ue_sets[i] = order;
    for (int j : order) a.rrh_sets[j].push_back(i);
  }
  return a;
}

MatrixXd instantaneous_norms(const DownlinkScenario& s, const ChannelRows& h) {
  MatrixXd n(s.n_rrh(), s.n_ue());
  for (int i = 0; i < s.n_rrh(); ++i) {
    for (int j = 0; j < s.n_ue(); ++j) n(i, j) = h[j].middleCols(s.row_offset(i), s.rrh_antennas[i]).norm();
  }
  return n;
}

MatrixXd average_norms(const DownlinkScenario& s, const channel::LinkStatistics& stats) {
  MatrixXd n(s.n_rrh(), s.n_ue());
  for (int i = 0; i < s.n_rrh(); ++i) {
    for (int j = 0; j < s.n_ue(); ++j) {
      const size_t k = static_cast<size_t>(j * stats.n_rrh + i);
      const double tr = stats.tx_correlation.empty() ? stats.alpha[k] * s.rrh_antennas[i]
                                                     : stats.tx_correlation[k].trace().real();
      n(i, j) = std::sqrt(std::max(0.0, tr));
    }
  }
  return n;
}

Selectors selection_matrices(const DownlinkScenario& s, const ClusterAssignment& a) {
  if (a.n_rrh() != s.n_rrh() || a.n_ue() != s.n_ue()) throw std::invalid_argument("selection_matrices: size mismatch");
  Selectors out;
  const int nt = s.total_tx();
  for (int i = 0; i < s.n_rrh(); ++i) {
    MatrixXd d = MatrixXd::Zero(nt, s.rrh_antennas[i]);
    d.middleRows(s.row_offset(i), s.rrh_antennas[i]).setIdentity();
    out.rrh.push_back(d);
  }
  const int nr = std::accumulate(s.ue_antennas.begin(), s.ue_antennas.end(), 0);
  int off = 0;
  for (int j = 0; j < s.n_ue(); ++j) {
    MatrixXd d = MatrixXd::Zero(nr, s.ue_antennas[j]);
    d.middleRows(off, s.ue_antennas[j]).setIdentity();
    off += s.ue_antennas[j];
    out.ue.push_back(d);
  }
  for (int j = 0; j < s.n_ue(); ++j) {
    int cols = 0;
    for (int i : a.rrh_sets[j]) cols += s.rrh_antennas[i];
    MatrixXd e(nt, cols);
    int c = 0;
    for (int i : a.rrh_sets[j]) {
      e.middleCols(c, s.rrh_antennas[i]) = out.rrh[i];
      c += s.rrh_antennas[i];
    }
    out.cluster.push_back(e);
  }
  return out;
}

std::vector<int> serving_rows(const DownlinkScenario& s, const ClusterAssignment& a, int j) {
  std::vector<int> rows;
  for (int i : a.rrh_sets[j]) {
    for (int k = 0; k < s.rrh_antennas[i]; ++k) rows.push_back(s.row_offset(i) + k);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Functionals
// ---------------------------------------------------------------------------

VectorXd noise_levels(Approach approach, const DownlinkScenario& s, const ClusterAssignment& a,
                      const VectorXd& sigma2) {
  VectorXd omega = sigma2;
  if (approach == Approach::AltSplit) {
    for (int i = 0; i < s.n_rrh(); ++i) {
      int ns = 0;
      for (int j : a.ue_sets[i]) ns += s.stream_count(j);
      omega(i) = sigma2(i) * ns;
    }
  }
  return omega;
}

double rrh_power(const DownlinkScenario& s, const std::vector<MatrixXcd>& v, const VectorXd& omega, int i) {
  check_shapes(s, v);
  double p = 0.0;
  for (const auto& x : v) p += rrh_block(s, x, i).trace().real();
  return p + s.rrh_antennas[i] * omega(i);
}

std::vector<double> downlink_rate(const DownlinkScenario& s, const ChannelRows& h, const std::vector<MatrixXcd>& v,
                                  const VectorXd& omega) {
  check_shapes(s, v);
  const int nt = s.total_tx();
  const MatrixXcd all = total(v, nt) + omega_matrix(s, omega);
  std::vector<double> r(s.n_ue());
  for (int j = 0; j < s.n_ue(); ++j) {
    const MatrixXcd& hj = h[j];
    const MatrixXcd id = MatrixXcd::Identity(hj.rows(), hj.rows());
    const double a = log2det(id + hj * all * hj.adjoint());
    const double b = log2det(id + hj * (all - v[j]) * hj.adjoint());
    r[j] = std::max(0.0, a - b);
  }
  return r;
}

double fronthaul_cost_conventional(const DownlinkScenario& s, const std::vector<MatrixXcd>& v, double sigma2,
                                   int i) {
  check_shapes(s, v);
  const int n = s.rrh_antennas[i];
  const MatrixXcd b = rrh_block(s, total(v, s.total_tx()), i);
  if (!(sigma2 > 0.0)) return b.norm() > 0.0 ? kInf : 0.0;
  if (std::isinf(sigma2)) return 0.0;
  // log2 det(B + s I) - n log2 s = log2 det(I + B / s)
  return log2det(MatrixXcd::Identity(n, n) + b / sigma2);
}

double fronthaul_cost_alt(const DownlinkScenario& s, const std::vector<MatrixXcd>& v, double sigma2, int i) {
  return fronthaul_cost_conventional(s, v, sigma2, i) / s.T;
}

double logdet_linearize(const MatrixXcd& a, const MatrixXcd& b) {
  if (a.rows() != a.cols() || b.rows() != a.rows() || b.cols() != a.cols()) {
    throw std::invalid_argument("logdet_linearize: shape mismatch");
  }
  Eigen::LLT<MatrixXcd> llt(optim::hermitian_part(a));
  if (llt.info() != Eigen::Success) throw std::invalid_argument("logdet_linearize: A must be positive definite");
  const double ld = log2det(a);
  const MatrixXcd x = llt.solve(b - a);
  return ld + x.trace().real() / std::numbers::ln2;
}

std::vector<double> rate_lower_bound(const DownlinkScenario& s, const ChannelRows& h,
                                     const std::vector<MatrixXcd>& v, const VectorXd& omega,
                                     const std::vector<MatrixXcd>& anchor_v, const VectorXd& anchor_omega) {
  check_shapes(s, v);
  check_shapes(s, anchor_v);
  const int nt = s.total_tx();
  const MatrixXcd all = total(v, nt) + omega_matrix(s, omega);
  const MatrixXcd all0 = total(anchor_v, nt) + omega_matrix(s, anchor_omega);
  std::vector<double> r(s.n_ue());
  for (int j = 0; j < s.n_ue(); ++j) {
    const MatrixXcd& hj = h[j];
    const MatrixXcd id = MatrixXcd::Identity(hj.rows(), hj.rows());
    const double a = log2det(id + hj * all * hj.adjoint());
    const MatrixXcd b0 = id + hj * (all0 - anchor_v[j]) * hj.adjoint();
    const MatrixXcd b = id + hj * (all - v[j]) * hj.adjoint();
    r[j] = a - logdet_linearize(b0, b);
  }
  return r;
}

double fronthaul_upper_bound(const DownlinkScenario& s, const std::vector<MatrixXcd>& v, double sigma2,
                             const std::vector<MatrixXcd>& anchor_v, double anchor_sigma2, int i) {
  check_shapes(s, v);
  check_shapes(s, anchor_v);
  if (!(sigma2 > 0.0) || !(anchor_sigma2 > 0.0)) {
    throw std::invalid_argument("fronthaul_upper_bound: variances must be positive");
  }
  const int n = s.rrh_antennas[i];
  const MatrixXcd id = MatrixXcd::Identity(n, n);
  const MatrixXcd a = rrh_block(s, total(anchor_v, s.total_tx()), i) + anchor_sigma2 * id;
  const MatrixXcd b = rrh_block(s, total(v, s.total_tx()), i) + sigma2 * id;
  return logdet_linearize(a, b) - n * std::log2(sigma2);
}

MatrixXcd embed(const MatrixXcd& block, const std::vector<int>& rows, int n) {
  if (block.rows() != static_cast<int>(rows.size()) || block.cols() != block.rows()) {
    throw std::invalid_argument("embed: block does not match the row set");
  }
  MatrixXcd x = MatrixXcd::Zero(n, n);
  for (size_t a = 0; a < rows.size(); ++a) {
    for (size_t b = 0; b < rows.size(); ++b) x(rows[a], rows[b]) = block(a, b);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Rank reduction
// ---------------------------------------------------------------------------

MatrixXcd leading_factor(const MatrixXcd& v, int m) {
  const int n = static_cast<int>(v.rows());
  if (m < 1 || m > n) throw std::invalid_argument("leading_factor: need 1 <= m <= n");
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(optim::hermitian_part(v));
  MatrixXcd w(n, m);
  for (int k = 0; k < m; ++k) {
    const int idx = n - 1 - k;  // eigenvalues ascending
    w.col(k) = es.eigenvectors().col(idx) * std::sqrt(std::max(0.0, es.eigenvalues()(idx)));
  }
  return w;
}

std::vector<MatrixXcd> covariances(const std::vector<MatrixXcd>& w) {
  std::vector<MatrixXcd> v;
  for (const auto& x : w) v.push_back(x * x.adjoint());
  return v;
}

RankReduction rank_reduce(const DownlinkScenario& s, const std::vector<MatrixXcd>& v, const VectorXd& omega,
                          const std::function<bool(const std::vector<MatrixXcd>&)>& admissible) {
  check_shapes(s, v);
  RankReduction out;
  std::vector<MatrixXcd> base;
  for (int j = 0; j < s.n_ue(); ++j) base.push_back(leading_factor(v[j], s.stream_count(j)));
  const std::vector<MatrixXcd> cov = covariances(base);
  const VectorXd zero = VectorXd::Zero(s.n_rrh());
  double g2 = kInf;
  for (int i = 0; i < s.n_rrh(); ++i) {
    const double used = rrh_power(s, cov, zero, i);
    if (used > 0.0) g2 = std::min(g2, std::max(0.0, s.power[i] - s.rrh_antennas[i] * omega(i)) / used);
  }
  double gamma = std::isfinite(g2) ? std::sqrt(g2) : 0.0;
  auto scaled = [&](double g) {
    std::vector<MatrixXcd> w = base;
    for (auto& x : w) x *= g;
    return w;
  };
  if (admissible && gamma > 0.0 && !admissible(covariances(scaled(gamma)))) {
    double lo = (gamma > 1.0 && admissible(covariances(scaled(1.0)))) ? 1.0 : 0.0;
    double hi = gamma;
    for (int it = 0; it < 100 && hi - lo > 1e-13 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (admissible(covariances(scaled(mid))) ? lo : hi) = mid;
    }
    gamma = lo;
    out.capped = true;
  }
  out.gamma = gamma;
  out.w = scaled(gamma);
  return out;
}

}  // namespace cran::downlink
