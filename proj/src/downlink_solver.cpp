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
#include <memory>
#include <numbers>
#include <stdexcept>

namespace cran::downlink {

namespace {

using optim::Evaluation;
using optim::Order;

constexpr double kLn2 = std::numbers::ln2;
constexpr double kMaxSnrFactor = 1e6;  // cap on signal-to-quantization ratio at the start

// Index of the real coordinate of entry (a, b), a < b, in the packed n x n
// Hermitian layout; the imaginary coordinate follows it.
int packed_offdiag(int n, int a, int b) { return n + 2 * (a * (n - 1) - a * (a - 1) / 2 + (b - a - 1)); }

// ---------------------------------------------------------------------------
// Variable layout
// ---------------------------------------------------------------------------
//
// z = [V_j for every served UE (order |serving rows|)] [sigma_i^2 for every
// RRH with a quantizer] [R_j for every served UE, alternative split only].
// X-space is the packed N_t x N_t transmit covariance.

struct Layout {
  int nt = 0;
  int xdim = 0;
  std::vector<int> rrh_off, rrh_n;
  std::vector<std::vector<int>> rows;  // per UE
  std::vector<int> ue_block, block_ue;
  std::vector<int> zoff;
  std::vector<std::vector<int>> xmap;  // per block: compact coordinate -> X coordinate
  std::vector<int> sigma_rrh, rrh_sigma;
  VectorXd omega_coef;                 // per RRH
  std::vector<int> rate_ue, ue_rate;
  std::vector<int> psd_blocks;
  int sigma_off = 0, rate_off = 0, dim = 0;

  int blocks() const { return static_cast<int>(block_ue.size()); }
};

Layout make_layout(Approach approach, const DownlinkScenario& s, const ClusterAssignment& a, bool quantized) {
  Layout L;
  L.nt = s.total_tx();
  L.xdim = L.nt * L.nt;
  for (int i = 0; i < s.n_rrh(); ++i) {
    L.rrh_off.push_back(s.row_offset(i));
    L.rrh_n.push_back(s.rrh_antennas[i]);
  }
  L.ue_block.assign(s.n_ue(), -1);
  L.ue_rate.assign(s.n_ue(), -1);
  int off = 0;
  for (int j = 0; j < s.n_ue(); ++j) {
    L.rows.push_back(serving_rows(s, a, j));
    const auto& r = L.rows.back();
    if (r.empty()) continue;
    const int n = static_cast<int>(r.size());
    L.ue_block[j] = L.blocks();
    L.block_ue.push_back(j);
    L.psd_blocks.push_back(n);
    L.zoff.push_back(off);
    std::vector<int> map;
    for (int p = 0; p < n; ++p) map.push_back(r[p]);
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const int x = packed_offdiag(L.nt, r[p], r[q]);
        map.push_back(x);
        map.push_back(x + 1);
      }
    }
    L.xmap.push_back(std::move(map));
    off += n * n;
  }
  L.sigma_off = off;
  const VectorXd ones = VectorXd::Ones(s.n_rrh());
  L.omega_coef = noise_levels(approach, s, a, ones);
  L.rrh_sigma.assign(s.n_rrh(), -1);
  if (quantized) {
    for (int i = 0; i < s.n_rrh(); ++i) {
      if (a.ue_sets[i].empty()) continue;
      L.rrh_sigma[i] = static_cast<int>(L.sigma_rrh.size());
      L.sigma_rrh.push_back(i);
    }
  }
  off += static_cast<int>(L.sigma_rrh.size());
  L.rate_off = off;
  if (approach == Approach::AltSplit) {
    for (int j = 0; j < s.n_ue(); ++j) {
      if (L.ue_block[j] < 0) continue;
      L.ue_rate[j] = static_cast<int>(L.rate_ue.size());
      L.rate_ue.push_back(j);
    }
  }
  off += static_cast<int>(L.rate_ue.size());
  L.dim = off;
  return L;
}

int sigma_count(const Layout& L) { return static_cast<int>(L.sigma_rrh.size()); }

// Signal covariance sum_j E_j V_j E_j^T, optionally plus Omega.
MatrixXcd x_matrix(const Layout& L, const VectorXd& z, bool with_omega) {
  MatrixXcd x = MatrixXcd::Zero(L.nt, L.nt);
  for (int b = 0; b < L.blocks(); ++b) {
    const auto& r = L.rows[L.block_ue[b]];
    const int n = static_cast<int>(r.size());
    const MatrixXcd v = optim::unpack_hermitian(z.segment(L.zoff[b], n * n), n);
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) x(r[p], r[q]) += v(p, q);
  }
  if (with_omega) {
    for (int k = 0; k < sigma_count(L); ++k) {
      const int i = L.sigma_rrh[k];
      const double w = L.omega_coef(i) * z(L.sigma_off + k);
      for (int a = 0; a < L.rrh_n[i]; ++a) x(L.rrh_off[i] + a, L.rrh_off[i] + a) += w;
    }
  }
  return x;
}

MatrixXcd block_matrix(const Layout& L, const VectorXd& z, int b) {
  const int n = L.psd_blocks[b];
  return optim::unpack_hermitian(z.segment(L.zoff[b], n * n), n);
}

// gz += scale * A^T gx, where A maps z to packed X (with or without Omega).
void gather(const Layout& L, const VectorXd& gx, double scale, bool with_omega, VectorXd& gz) {
  for (int b = 0; b < L.blocks(); ++b) {
    const auto& m = L.xmap[b];
    for (size_t p = 0; p < m.size(); ++p) gz(L.zoff[b] + static_cast<int>(p)) += scale * gx(m[p]);
  }
  if (!with_omega) return;
  for (int k = 0; k < sigma_count(L); ++k) {
    const int i = L.sigma_rrh[k];
    double acc = 0.0;
    for (int a = 0; a < L.rrh_n[i]; ++a) acc += gx(L.rrh_off[i] + a);
    gz(L.sigma_off + k) += scale * L.omega_coef(i) * acc;
  }
}

// gz(block b) += scale * gx restricted to block b.
void gather_block(const Layout& L, const VectorXd& gx, double scale, int b, VectorXd& gz) {
  const auto& m = L.xmap[b];
  for (size_t p = 0; p < m.size(); ++p) gz(L.zoff[b] + static_cast<int>(p)) += scale * gx(m[p]);
}

// hz += scale * A^T hx A.
void gather_hessian(const Layout& L, const MatrixXd& hx, double scale, bool with_omega, MatrixXd& hz) {
  for (int b = 0; b < L.blocks(); ++b) {
    const auto& mb = L.xmap[b];
    for (int c = 0; c < L.blocks(); ++c) {
      const auto& mc = L.xmap[c];
      for (size_t p = 0; p < mb.size(); ++p) {
        const int zp = L.zoff[b] + static_cast<int>(p);
        for (size_t q = 0; q < mc.size(); ++q) hz(zp, L.zoff[c] + static_cast<int>(q)) += scale * hx(mb[p], mc[q]);
      }
    }
  }
  if (!with_omega) return;
  const int ns = sigma_count(L);
  std::vector<VectorXd> cols(ns);
  for (int k = 0; k < ns; ++k) {
    const int i = L.sigma_rrh[k];
    cols[k] = VectorXd::Zero(L.xdim);
    for (int a = 0; a < L.rrh_n[i]; ++a) cols[k] += hx.col(L.rrh_off[i] + a);
    cols[k] *= L.omega_coef(i);
  }
  for (int k = 0; k < ns; ++k) {
    const int zk = L.sigma_off + k;
    for (int b = 0; b < L.blocks(); ++b) {
      const auto& mb = L.xmap[b];
      for (size_t p = 0; p < mb.size(); ++p) {
        const double v = scale * cols[k](mb[p]);
        const int zp = L.zoff[b] + static_cast<int>(p);
        hz(zp, zk) += v;
        hz(zk, zp) += v;
      }
    }
    for (int l = 0; l < ns; ++l) {
      const int i = L.sigma_rrh[l];
      double acc = 0.0;
      for (int a = 0; a < L.rrh_n[i]; ++a) acc += cols[k](L.rrh_off[i] + a);
      hz(zk, L.sigma_off + l) += scale * L.omega_coef(i) * acc;
    }
  }
}

// ---------------------------------------------------------------------------
// Surrogate pieces
// ---------------------------------------------------------------------------

// weight * sum_l log2 det(I + H_l X H_l^H) - constant - Re tr(lin Lambda_j),
// Lambda_j = X - E_j V_j E_j^T (X with Omega).
struct RateModel {
  std::vector<MatrixXcd> h;
  double weight = 1.0;
  MatrixXcd lin;
  double constant = 0.0;
};

// Adds one realization's tangent of the interference log-det at the anchor.
void add_tangent(RateModel& m, const MatrixXcd& h, const MatrixXcd& lambda0, double weight) {
  const MatrixXcd a0 = MatrixXcd::Identity(h.rows(), h.rows()) + h * lambda0 * h.adjoint();
  Eigen::LLT<MatrixXcd> llt(optim::hermitian_part(a0));
  if (llt.info() != Eigen::Success) throw std::runtime_error("downlink: anchor interference matrix not positive definite");
  double ld = 0.0;
  optim::logdet_hpd(a0, ld);
  const MatrixXcd l = optim::hermitian_part(h.adjoint() * llt.solve(h)) / kLn2;
  m.lin += weight * l;
  m.constant += weight * (ld / kLn2 - (l * lambda0).trace().real());
}

// log2 det(D_i^T X_V D_i + s I) <= const + Re tr(lin X_V,ii) + s tr(lin).
struct FronthaulModel {
  MatrixXcd lin;  // B0^{-1} / ln 2
  double constant = 0.0;
};

FronthaulModel fronthaul_tangent(const MatrixXcd& b0) {
  Eigen::LLT<MatrixXcd> llt(optim::hermitian_part(b0));
  if (llt.info() != Eigen::Success) throw std::runtime_error("downlink: fronthaul anchor not positive definite");
  double ld = 0.0;
  optim::logdet_hpd(b0, ld);
  FronthaulModel f;
  const int n = static_cast<int>(b0.rows());
  f.lin = optim::hermitian_part(llt.solve(MatrixXcd::Identity(n, n))) / kLn2;
  f.constant = ld / kLn2 - n / kLn2;
  return f;
}

// Accumulates weight * sum_l log2 det(I + H_l X H_l^H) in X-space.
struct LogdetAccumulator {
  double value = 0.0;
  MatrixXcd grad;   // gradient matrix
  MatrixXd cols;    // Hessian = -cols cols^T
  int ncols = 0;

  LogdetAccumulator(int nt, int max_cols, bool hess) : grad(MatrixXcd::Zero(nt, nt)) {
    if (hess) cols.resize(nt * nt, max_cols);
  }

  bool add(const std::vector<MatrixXcd>& hs, double weight, const MatrixXcd& x, Order order) {
    for (const auto& h : hs) {
      const int r = static_cast<int>(h.rows());
      const MatrixXcd m = MatrixXcd::Identity(r, r) + h * x * h.adjoint();
      Eigen::LLT<MatrixXcd> llt(optim::hermitian_part(m));
      if (llt.info() != Eigen::Success) return false;
      double ld = 0.0;
      for (int k = 0; k < r; ++k) {
        const double d = llt.matrixLLT()(k, k).real();
        if (!(d > 0.0)) return false;
        ld += 2.0 * std::log(d);
      }
      value += weight * ld / kLn2;
      if (order == Order::Value) continue;
      const MatrixXcd y = llt.matrixL().solve(h);  // L^{-1} H, so H^H R^{-1} H = Y^H Y
      grad += (weight / kLn2) * (y.adjoint() * y);
      if (order == Order::Hessian) {
        const MatrixXcd u = y.adjoint();
        optim::logdet_hessian_columns(u, cols.middleCols(ncols, r * r));
        cols.middleCols(ncols, r * r) *= std::sqrt(weight / kLn2);
        ncols += r * r;
      }
    }
    return true;
  }

  MatrixXd hessian() const {
    const int d = static_cast<int>(grad.rows() * grad.rows());
    MatrixXd hx = MatrixXd::Zero(d, d);
    if (ncols > 0) hx.selfadjointView<Eigen::Lower>().rankUpdate(cols.leftCols(ncols), -1.0);
    return hx.selfadjointView<Eigen::Lower>();
  }
};

int column_budget(const std::vector<MatrixXcd>& hs) {
  int c = 0;
  for (const auto& h : hs) c += static_cast<int>(h.rows() * h.rows());
  return c;
}

// ---------------------------------------------------------------------------
// The convex surrogate problem
// ---------------------------------------------------------------------------

struct Surrogate {
  Approach approach = Approach::Conventional;
  DownlinkScenario s;
  ClusterAssignment a;
  Layout L;
  bool quantized = true;              // sigma variables present
  std::vector<RateModel> rates;       // per UE (unused for UEs without a block)
  std::vector<FronthaulModel> fh;     // per sigma variable

  // Surrogate rate of UE j with value/gradient/Hessian in z-space.
  bool rate(int j, const VectorXd& z, const MatrixXcd& x, Order order, Evaluation& out) const {
    const RateModel& m = rates[j];
    const int b = L.ue_block[j];
    const bool hess = order == Order::Hessian;
    LogdetAccumulator acc(L.nt, column_budget(m.h), hess);
    if (!acc.add(m.h, m.weight, x, order)) return false;
    const MatrixXcd vj = embed(block_matrix(L, z, b), L.rows[j], L.nt);
    out.value = acc.value - m.constant - (m.lin * (x - vj)).trace().real();
    if (order == Order::Value) return true;
    out.gradient = VectorXd::Zero(L.dim);
    gather(L, optim::pack_gradient(acc.grad - m.lin), 1.0, true, out.gradient);
    gather_block(L, optim::pack_gradient(m.lin), 1.0, b, out.gradient);
    if (hess) {
      out.hessian = MatrixXd::Zero(L.dim, L.dim);
      gather_hessian(L, acc.hessian(), 1.0, true, out.hessian);
    }
    return true;
  }

  bool objective(const VectorXd& z, Order order, Evaluation& out) const {
    if (approach == Approach::AltSplit) {
      out.value = 0.0;
      if (order != Order::Value) out.gradient = VectorXd::Zero(L.dim);
      if (order == Order::Hessian) out.hessian = MatrixXd::Zero(L.dim, L.dim);
      for (size_t k = 0; k < L.rate_ue.size(); ++k) {
        const double mu = s.weight(L.rate_ue[k]);
        out.value += mu * z(L.rate_off + static_cast<int>(k));
        if (order != Order::Value) out.gradient(L.rate_off + static_cast<int>(k)) = mu;
      }
      return true;
    }
    const MatrixXcd x = x_matrix(L, z, true);
    const bool hess = order == Order::Hessian;
    int budget = 0;
    for (int j = 0; j < s.n_ue(); ++j) budget += column_budget(rates[j].h);
    LogdetAccumulator acc(L.nt, budget, hess);
    MatrixXcd lin = MatrixXcd::Zero(L.nt, L.nt);
    double value = 0.0;
    for (int j = 0; j < s.n_ue(); ++j) {
      const double mu = s.weight(j);
      if (mu == 0.0 || L.ue_block[j] < 0) continue;
      const RateModel& m = rates[j];
      if (!acc.add(m.h, mu * m.weight, x, order)) return false;
      const MatrixXcd vj = embed(block_matrix(L, z, L.ue_block[j]), L.rows[j], L.nt);
      value -= mu * (m.constant + (m.lin * (x - vj)).trace().real());
      lin += mu * m.lin;
    }
    out.value = acc.value + value;
    if (order == Order::Value) return true;
    out.gradient = VectorXd::Zero(L.dim);
    gather(L, optim::pack_gradient(acc.grad - lin), 1.0, true, out.gradient);
    for (int j = 0; j < s.n_ue(); ++j) {
      const double mu = s.weight(j);
      if (mu == 0.0 || L.ue_block[j] < 0) continue;
      gather_block(L, optim::pack_gradient(rates[j].lin), mu, L.ue_block[j], out.gradient);
    }
    if (hess) {
      out.hessian = MatrixXd::Zero(L.dim, L.dim);
      gather_hessian(L, acc.hessian(), 1.0, true, out.hessian);
    }
    return true;
  }

  // Linearized fronthaul usage of sigma variable k (bits, before any 1/T).
  void fronthaul(int k, const VectorXd& z, const MatrixXcd& xv, Order order, Evaluation& out) const {
    const int i = L.sigma_rrh[k];
    const FronthaulModel& f = fh[k];
    const double sig = z(L.sigma_off + k);
    const int n = L.rrh_n[i];
    const MatrixXcd xi = xv.block(L.rrh_off[i], L.rrh_off[i], n, n);
    const double trl = f.lin.trace().real();
    out.value = f.constant + (f.lin * xi).trace().real() + sig * trl - n * std::log2(sig);
    if (order == Order::Value) return;
    out.gradient = VectorXd::Zero(L.dim);
    MatrixXcd g = MatrixXcd::Zero(L.nt, L.nt);
    g.block(L.rrh_off[i], L.rrh_off[i], n, n) = f.lin;
    gather(L, optim::pack_gradient(g), 1.0, false, out.gradient);
    out.gradient(L.sigma_off + k) = trl - n / (sig * kLn2);
    if (order == Order::Hessian) {
      out.hessian = MatrixXd::Zero(L.dim, L.dim);
      out.hessian(L.sigma_off + k, L.sigma_off + k) = n / (sig * sig * kLn2);
    }
  }

  double sigma_of(const VectorXd& z, int i) const {
    return L.rrh_sigma[i] >= 0 ? z(L.sigma_off + L.rrh_sigma[i]) : 0.0;
  }

  optim::ConvexSubproblem build(const VectorXd& start, std::vector<std::string>* names) const {
    optim::ConvexSubproblem p;
    p.psd_blocks = L.psd_blocks;
    p.scalar_count = sigma_count(L) + static_cast<int>(L.rate_ue.size());
    p.start = start;
    auto self = std::make_shared<Surrogate>(*this);
    p.objective = [self](const VectorXd& z, Order o, Evaluation& e) { return self->objective(z, o, e); };

    // Power.
    for (int i = 0; i < s.n_rrh(); ++i) {
      p.constraints.push_back([self, i](const VectorXd& z, Order o, Evaluation& e) {
        const Layout& L = self->L;
        const MatrixXcd xv = x_matrix(L, z, false);
        const int n = L.rrh_n[i];
        const double om = L.omega_coef(i) * self->sigma_of(z, i);
        e.value = xv.block(L.rrh_off[i], L.rrh_off[i], n, n).trace().real() + n * om - self->s.power[i];
        if (o == Order::Value) return true;
        e.gradient = VectorXd::Zero(L.dim);
        VectorXd gx = VectorXd::Zero(L.xdim);
        for (int a = 0; a < n; ++a) gx(L.rrh_off[i] + a) = 1.0;
        gather(L, gx, 1.0, false, e.gradient);
        if (L.rrh_sigma[i] >= 0) e.gradient(L.sigma_off + L.rrh_sigma[i]) = n * L.omega_coef(i);
        if (o == Order::Hessian) e.hessian.resize(0, 0);
        return true;
      });
      if (names) names->push_back("power[" + std::to_string(i) + "]");
    }

    if (approach == Approach::Conventional) {
      for (int k = 0; k < sigma_count(L); ++k) {
        p.constraints.push_back([self, k](const VectorXd& z, Order o, Evaluation& e) {
          self->fronthaul(k, z, x_matrix(self->L, z, false), o, e);
          e.value -= self->s.capacity[self->L.sigma_rrh[k]];
          return std::isfinite(e.value);
        });
        if (names) names->push_back("fronthaul[" + std::to_string(L.sigma_rrh[k]) + "]");
      }
      return p;
    }

    // Alternative split: rate epigraph and per-RRH budget.
    for (size_t r = 0; r < L.rate_ue.size(); ++r) {
      const int j = L.rate_ue[r];
      p.constraints.push_back([self, j, r](const VectorXd& z, Order o, Evaluation& e) {
        const Layout& L = self->L;
        Evaluation re;
        if (!self->rate(j, z, x_matrix(L, z, true), o, re)) return false;
        e.value = z(L.rate_off + static_cast<int>(r)) - re.value;
        if (o == Order::Value) return true;
        e.gradient = -re.gradient;
        e.gradient(L.rate_off + static_cast<int>(r)) += 1.0;
        if (o == Order::Hessian) e.hessian = -re.hessian;
        return true;
      });
      if (names) names->push_back("rate[" + std::to_string(j) + "]");
    }
    for (int i = 0; i < s.n_rrh(); ++i) {
      if (a.ue_sets[i].empty()) continue;
      p.constraints.push_back([self, i](const VectorXd& z, Order o, Evaluation& e) {
        const Layout& L = self->L;
        e.value = -self->s.capacity[i];
        if (o != Order::Value) e.gradient = VectorXd::Zero(L.dim);
        if (o == Order::Hessian) e.hessian.resize(0, 0);
        const int k = L.rrh_sigma[i];
        if (k >= 0) {
          Evaluation f;
          self->fronthaul(k, z, x_matrix(L, z, false), o, f);
          const double inv_t = 1.0 / self->s.T;
          e.value += inv_t * f.value;
          if (o != Order::Value) e.gradient += inv_t * f.gradient;
          if (o == Order::Hessian) e.hessian = inv_t * f.hessian;
        }
        for (int j : self->a.ue_sets[i]) {
          const int r = L.ue_rate[j];
          e.value += z(L.rate_off + r);
          if (o != Order::Value) e.gradient(L.rate_off + r) += 1.0;
        }
        return std::isfinite(e.value);
      });
      if (names) names->push_back("budget[" + std::to_string(i) + "]");
    }
    return p;
  }
};

// ---------------------------------------------------------------------------
// Conversions between solutions and packed points
// ---------------------------------------------------------------------------

VectorXd pack_point(const Layout& L, const CovarianceSolution& sol) {
  VectorXd z = VectorXd::Zero(L.dim);
  for (int b = 0; b < L.blocks(); ++b) {
    const int j = L.block_ue[b];
    const auto& r = L.rows[j];
    const int n = static_cast<int>(r.size());
    MatrixXcd v(n, n);
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) v(p, q) = sol.v[j](r[p], r[q]);
    optim::pack_hermitian(v, z.segment(L.zoff[b], n * n));
  }
  for (int k = 0; k < sigma_count(L); ++k) z(L.sigma_off + k) = sol.sigma2(L.sigma_rrh[k]);
  for (size_t r = 0; r < L.rate_ue.size(); ++r) z(L.rate_off + static_cast<int>(r)) = sol.rates[L.rate_ue[r]];
  return z;
}

void unpack_point(const Layout& L, const VectorXd& z, CovarianceSolution& sol) {
  for (int j = 0; j < static_cast<int>(sol.v.size()); ++j) sol.v[j].setZero();
  for (int b = 0; b < L.blocks(); ++b) {
    const int j = L.block_ue[b];
    sol.v[j] = embed(block_matrix(L, z, b), L.rows[j], L.nt);
  }
  for (int k = 0; k < sigma_count(L); ++k) sol.sigma2(L.sigma_rrh[k]) = z(L.sigma_off + k);
  for (size_t r = 0; r < L.rate_ue.size(); ++r) sol.rates[L.rate_ue[r]] = z(L.rate_off + static_cast<int>(r));
}

int barrier_terms(const optim::ConvexSubproblem& p) {
  int m = p.scalar_count + static_cast<int>(p.constraints.size());
  for (int n : p.psd_blocks) m += n;
  return m;
}

MatrixXcd signal_total(const std::vector<MatrixXcd>& v, int n) {
  MatrixXcd x = MatrixXcd::Zero(n, n);
  for (const auto& m : v) x += m;
  return x;
}

MatrixXcd with_omega(const DownlinkScenario& s, MatrixXcd x, const VectorXd& omega) {
  for (int i = 0; i < s.n_rrh(); ++i)
    for (int a = 0; a < s.rrh_antennas[i]; ++a) x(s.row_offset(i) + a, s.row_offset(i) + a) += omega(i);
  return x;
}

// Surrogate for an anchor: rate tangents on the given realizations and
// fronthaul tangents at the anchor.
Surrogate make_surrogate(Approach approach, const DownlinkScenario& s, const ClusterAssignment& a, const Layout& L,
                         bool quantized, const CovarianceSolution& anchor) {
  Surrogate sp;
  sp.approach = approach;
  sp.s = s;
  sp.a = a;
  sp.L = L;
  sp.quantized = quantized;
  sp.rates.resize(s.n_ue());
  for (auto& r : sp.rates) r.lin = MatrixXcd::Zero(L.nt, L.nt);
  const MatrixXcd xv = signal_total(anchor.v, L.nt);
  for (int k = 0; k < sigma_count(L); ++k) {
    const int i = L.sigma_rrh[k];
    const int n = s.rrh_antennas[i];
    const MatrixXcd b0 = xv.block(s.row_offset(i), s.row_offset(i), n, n) + anchor.sigma2(i) * MatrixXcd::Identity(n, n);
    sp.fh.push_back(fronthaul_tangent(b0));
  }
  return sp;
}

void add_realization(Surrogate& sp, const DownlinkScenario& s, const ChannelRows& h, const CovarianceSolution& anchor,
                     double weight) {
  const MatrixXcd x0 = with_omega(s, signal_total(anchor.v, sp.L.nt), anchor.omega);
  for (int j = 0; j < s.n_ue(); ++j) {
    if (sp.L.ue_block[j] < 0) continue;
    sp.rates[j].h.push_back(h[j]);
    add_tangent(sp.rates[j], h[j], x0 - anchor.v[j], weight);
  }
}

double weighted_sum(const DownlinkScenario& s, const std::vector<double>& r) {
  double acc = 0.0;
  for (int j = 0; j < s.n_ue(); ++j) acc += s.weight(j) * r[j];
  return acc;
}

double true_objective(Approach approach, const DownlinkScenario& s, const ChannelRows& h,
                      const CovarianceSolution& sol) {
  if (approach == Approach::AltSplit) return weighted_sum(s, sol.rates);
  return weighted_sum(s, downlink_rate(s, h, sol.v, sol.omega));
}

// Pulls an anchor that sits on the boundary of the PSD cones back inside.
// Blocks shrink by delta and gain a diagonal floor on each RRH's rows; with
// quantization the floor is a fraction of sigma_i^2, which keeps the
// fronthaul tangent below its value at the anchor. Message rates shrink by
// 3 delta. Returns false when no trial is strictly feasible.
bool recenter(const Layout& L, const ClusterAssignment& a, optim::ConvexSubproblem& p) {
  for (double delta : {1e-2, 1e-3, 1e-4}) {
    VectorXd z = p.start;
    for (int b = 0; b < L.blocks(); ++b) {
      const int n = L.psd_blocks[b];
      MatrixXcd v = optim::unpack_hermitian(z.segment(L.zoff[b], n * n), n);
      const double tr = v.trace().real();
      v *= 1.0 - delta;
      const auto& rows = L.rows[L.block_ue[b]];
      for (int k = 0; k < n; ++k) {
        int i = 0;
        while (i + 1 < static_cast<int>(L.rrh_off.size()) && rows[k] >= L.rrh_off[i + 1]) ++i;
        const int sk = L.rrh_sigma[i];
        const double floor = sk >= 0 ? 0.1 * delta * z(L.sigma_off + sk) / static_cast<double>(a.ue_sets[i].size())
                                     : delta * tr / n;
        v(k, k) += floor;
      }
      optim::pack_hermitian(v, z.segment(L.zoff[b], n * n));
    }
    for (size_t k = 0; k < L.rate_ue.size(); ++k) z(L.rate_off + static_cast<int>(k)) *= 1.0 - 3.0 * delta;
    if (optim::strictly_feasible(p, z)) {
      p.start = z;
      return true;
    }
  }
  return false;
}

// `gain` is the surrogate improvement of the previous step; the barrier
// starts where its gap matches it.
optim::ConcaveSolution solve_step(const SolverOptions& opt, const Layout& L, const ClusterAssignment& a,
                                  optim::ConvexSubproblem p, double gain,
                                  double gap) {
  optim::BarrierOptions b = opt.barrier;
  b.gap_tolerance = gap;
  const double t0 = barrier_terms(p) / std::max(opt.warm_gap, gain);
  if (std::isfinite(gain) && t0 > b.initial_t && recenter(L, a, p)) b.initial_t = t0;
  return optim::maximize_concave(p, b);
}
}  // namespace

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

optim::BarrierOptions default_barrier() {
  optim::BarrierOptions b;
  b.stage_centering_tolerance = 1e-2;
  return b;
}

double SolverTrace::max_residual() const {
  double r = -std::numeric_limits<double>::infinity();
  for (const auto& e : entries) r = std::max(r, e.max_residual);
  return r;
}

double SolverTrace::worst_decrease() const {
  double w = 0.0;
  for (size_t k = 1; k < entries.size(); ++k) {
    if (entries[k].outer != entries[k - 1].outer) continue;
    w = std::max(w, entries[k - 1].objective - entries[k].objective);
  }
  return w;
}

CovarianceSolution initial_point(Approach approach, const DownlinkScenario& s, const ChannelRows* h,
                                 const ClusterAssignment& assignment) {
  s.validate();
  const ClusterAssignment a = approach == Approach::Conventional ? full_assignment(s.n_rrh(), s.n_ue()) : assignment;
  a.validate();
  if (a.n_rrh() != s.n_rrh() || a.n_ue() != s.n_ue()) throw std::invalid_argument("initial_point: assignment size");
  const bool quantized = approach == Approach::Conventional || h != nullptr;
  CovarianceSolution sol;
  sol.approach = approach;
  sol.assignment = a;
  const int nt = s.total_tx();
  sol.v.assign(s.n_ue(), MatrixXcd::Zero(nt, nt));
  sol.sigma2 = VectorXd::Zero(s.n_rrh());
  sol.rates.assign(s.n_ue(), 0.0);
  const VectorXd coef = noise_levels(approach, s, a, VectorXd::Ones(s.n_rrh()));

  VectorXd scale = VectorXd::Zero(s.n_rrh());
  VectorXd fh_used = VectorXd::Zero(s.n_rrh());
  for (int i = 0; i < s.n_rrh(); ++i) {
    const int m = static_cast<int>(a.ue_sets[i].size());
    if (m == 0) continue;
    const int n = s.rrh_antennas[i];
    if (!quantized) {
      scale(i) = 0.5 * s.power[i] / (n * m);
      continue;
    }
    const double share = approach == Approach::Conventional ? 0.5 * s.capacity[i] : 0.5 * s.capacity[i] * s.T;
    const double kappa = std::min(std::exp2(share / n) - 1.0, kMaxSnrFactor);
    scale(i) = 0.5 * s.power[i] / (n * m * (1.0 + coef(i) / kappa));
    sol.sigma2(i) = scale(i) * m / kappa;
    fh_used(i) = n * std::log2(1.0 + kappa);
  }
  for (int j = 0; j < s.n_ue(); ++j) {
    for (int i : a.rrh_sets[j]) {
      for (int k = 0; k < s.rrh_antennas[i]; ++k) sol.v[j](s.row_offset(i) + k, s.row_offset(i) + k) = scale(i);
    }
  }
  sol.omega = noise_levels(approach, s, a, sol.sigma2);
  if (approach == Approach::AltSplit) {
    std::vector<double> achievable(s.n_ue(), std::numeric_limits<double>::infinity());
    if (h) achievable = downlink_rate(s, *h, sol.v, sol.omega);
    for (int j = 0; j < s.n_ue(); ++j) {
      if (a.rrh_sets[j].empty()) continue;
      double r = std::numeric_limits<double>::infinity();
      for (int i : a.rrh_sets[j]) {
        const double budget = s.capacity[i] - (h ? fh_used(i) / s.T : 0.0);
        r = std::min(r, 0.5 * budget / static_cast<double>(a.ue_sets[i].size()));
      }
      sol.rates[j] = std::min(r, 0.5 * achievable[j]);
    }
  } else if (h) {
    sol.rates = downlink_rate(s, *h, sol.v, sol.omega);
  }
  sol.feasible = true;
  return sol;
}

double max_residual(const DownlinkScenario& s, const CovarianceSolution& sol, const ChannelRows* h) {
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < s.n_rrh(); ++i) worst = std::max(worst, rrh_power(s, sol.v, sol.omega, i) - s.power[i]);
  if (sol.approach == Approach::Conventional) {
    for (int i = 0; i < s.n_rrh(); ++i) {
      worst = std::max(worst, fronthaul_cost_conventional(s, sol.v, sol.sigma2(i), i) - s.capacity[i]);
    }
    return worst;
  }
  const auto& a = sol.assignment;
  for (int i = 0; i < s.n_rrh(); ++i) {
    if (a.ue_sets[i].empty()) continue;
    double used = 0.0;
    for (int j : a.ue_sets[i]) used += sol.rates[j];
    if (h) used += fronthaul_cost_alt(s, sol.v, sol.sigma2(i), i);
    worst = std::max(worst, used - s.capacity[i]);
  }
  if (h) {
    const auto r = downlink_rate(s, *h, sol.v, sol.omega);
    for (int j = 0; j < s.n_ue(); ++j) {
      if (!a.rrh_sets[j].empty()) worst = std::max(worst, sol.rates[j] - r[j]);
    }
  }
  return worst;
}

SubproblemView instantaneous_subproblem(Approach approach, const DownlinkScenario& s, const ChannelRows& h,
                                        const CovarianceSolution& anchor) {
  const Layout L = make_layout(approach, s, anchor.assignment, true);
  Surrogate sp = make_surrogate(approach, s, anchor.assignment, L, true, anchor);
  add_realization(sp, s, h, anchor, 1.0);
  SubproblemView view;
  view.problem = sp.build(pack_point(L, anchor), &view.constraint_names);
  return view;
}

CovarianceSolution solve_instantaneous(Approach approach, const DownlinkScenario& s, const ChannelRows& h,
                                       const ClusterAssignment& assignment, const SolverOptions& opt) {
  if (static_cast<int>(h.size()) != s.n_ue()) throw std::invalid_argument("solve_instantaneous: one channel row per UE");
  for (int j = 0; j < s.n_ue(); ++j) {
    if (h[j].rows() != s.ue_antennas[j] || h[j].cols() != s.total_tx()) {
      throw std::invalid_argument("solve_instantaneous: channel row has the wrong shape");
    }
  }
  CovarianceSolution sol = initial_point(approach, s, &h, assignment);
  const Layout L = make_layout(approach, s, sol.assignment, true);
  double prev = true_objective(approach, s, h, sol);
  double gain = std::numeric_limits<double>::infinity();

  for (int it = 1; it <= opt.max_mm_iterations; ++it) {
    Surrogate sp = make_surrogate(approach, s, sol.assignment, L, true, sol);
    add_realization(sp, s, h, sol, 1.0);
    const optim::ConvexSubproblem p = sp.build(pack_point(L, sol), nullptr);
    optim::ConcaveSolution res;
    try {
      res = solve_step(opt, L, sol.assignment, p, gain, opt.barrier.gap_tolerance);
    } catch (const optim::InfeasibleStart&) {
      sol.trace.message = "anchor lost strict feasibility at iteration " + std::to_string(it);
      break;
    }
    Evaluation anchor_eval;
    p.objective(p.start, Order::Value, anchor_eval);
    CovarianceSolution next = sol;
    unpack_point(L, res.z, next);
    next.omega = noise_levels(approach, s, next.assignment, next.sigma2);
    if (approach == Approach::Conventional) next.rates = downlink_rate(s, h, next.v, next.omega);
    const double obj = true_objective(approach, s, h, next);

    TraceEntry e;
    e.outer = 0;
    e.inner = it;
    e.anchor_value = anchor_eval.value;
    e.surrogate = res.objective;
    e.objective = obj;
    e.max_residual = max_residual(s, next, &h);
    e.newton_steps = res.newton_steps;
    e.solver_converged = res.converged;
    sol.trace.entries.push_back(e);
    sol.trace.inner_iterations = it;

    if (e.max_residual > opt.feasibility_tolerance) {
      sol.trace.message = "iterate violates the true constraints at iteration " + std::to_string(it);
      break;
    }
    next.trace = std::move(sol.trace);
    next.surrogate = res.objective;
    sol = std::move(next);
    gain = std::abs(e.surrogate - e.anchor_value);
    if (obj - prev < opt.mm_tolerance) {
      sol.trace.converged = true;
      break;
    }
    prev = obj;
  }
  sol.converged = sol.trace.converged;
  sol.feasible = max_residual(s, sol, &h) <= opt.feasibility_tolerance;
  return sol;
}

CovarianceSolution solve_stochastic(Approach approach, const DownlinkScenario& s, const ChannelSampler& sampler,
                                    const ClusterAssignment& assignment, RandomStream& rng,
                                    const SolverOptions& opt) {
  if (!sampler) throw std::invalid_argument("solve_stochastic: missing channel sampler");
  CovarianceSolution sol = initial_point(approach, s, nullptr, assignment);
  const bool quantized = approach == Approach::Conventional;
  const Layout L = make_layout(approach, s, sol.assignment, quantized);

  // Running sums of the per-realization tangents; weights are applied when
  // the surrogate is assembled.
  std::vector<RateModel> running(s.n_ue());
  for (auto& r : running) {
    r.lin = MatrixXcd::Zero(L.nt, L.nt);
    r.weight = 1.0;
  }
  std::vector<double> history;
  const int inner = approach == Approach::Conventional ? std::max(1, opt.inner_iterations) : 1;
  double gain = std::numeric_limits<double>::infinity();

  for (int n = 1; n <= opt.max_outer; ++n) {
    const ChannelRows h = sampler(rng);
    {
      Surrogate tmp = make_surrogate(approach, s, sol.assignment, L, quantized, sol);
      tmp.rates = std::move(running);
      add_realization(tmp, s, h, sol, 1.0);
      running = std::move(tmp.rates);
    }
    double last_value = 0.0;
    for (int r = 1; r <= inner; ++r) {
      Surrogate sp = make_surrogate(approach, s, sol.assignment, L, quantized, sol);
      sp.rates = running;
      for (auto& m : sp.rates) {
        m.weight = 1.0 / n;
        m.lin /= n;
        m.constant /= n;
      }
      VectorXd start = pack_point(L, sol);
      if (approach == Approach::AltSplit) {
        // The new realization can lower the averaged bound below the current
        // message rates; pull them inside before solving.
        const MatrixXcd x = x_matrix(L, start, true);
        for (size_t k = 0; k < L.rate_ue.size(); ++k) {
          Evaluation re;
          if (!sp.rate(L.rate_ue[k], start, x, Order::Value, re) || !(re.value > 0.0)) {
            throw std::runtime_error("solve_stochastic: averaged rate bound is not positive at the anchor");
          }
          double& rk = start(L.rate_off + static_cast<int>(k));
          rk = std::min(rk, 0.999 * re.value);
        }
      }
      const optim::ConvexSubproblem p = sp.build(start, nullptr);
      optim::ConcaveSolution res;
      try {
        res = solve_step(opt, L, sol.assignment, p, gain, opt.ssum_gap);
      } catch (const optim::InfeasibleStart&) {
        sol.trace.message = "anchor lost strict feasibility at outer iteration " + std::to_string(n);
        sol.converged = false;
        return sol;
      }
      Evaluation anchor_eval;
      p.objective(start, Order::Value, anchor_eval);
      CovarianceSolution next = sol;
      unpack_point(L, res.z, next);
      next.omega = noise_levels(approach, s, next.assignment, next.sigma2);
      TraceEntry e;
      e.outer = n;
      e.inner = r;
      e.anchor_value = anchor_eval.value;
      e.surrogate = res.objective;
      e.objective = res.objective;
      e.max_residual = max_residual(s, next, nullptr);
      e.newton_steps = res.newton_steps;
      e.solver_converged = res.converged;
      next.trace = std::move(sol.trace);
      next.trace.entries.push_back(e);
      ++next.trace.inner_iterations;
      next.surrogate = res.objective;
      if (e.max_residual > opt.feasibility_tolerance) {
        sol.trace = std::move(next.trace);
        sol.trace.message = "iterate violates the true constraints at outer iteration " + std::to_string(n);
        sol.converged = false;
        return sol;
      }
      sol = std::move(next);
      gain = std::abs(e.surrogate - e.anchor_value);
      last_value = res.objective;
      if (approach == Approach::Conventional) {
        // Per-UE averaged bounds at the new point.
        const VectorXd z = pack_point(L, sol);
        const MatrixXcd x = x_matrix(L, z, true);
        for (int j = 0; j < s.n_ue(); ++j) {
          Evaluation re;
          sp.rate(j, z, x, Order::Value, re);
          sol.rates[j] = std::max(0.0, re.value);
        }
      }
    }
    sol.trace.outer_iterations = n;
    history.push_back(last_value);
    const int w = opt.window;
    if (static_cast<int>(history.size()) > w) {
      const size_t m = history.size();
      const double change = (history[m - 1] - history[m - 1 - w]) / w;
      if (std::abs(change) < opt.ssum_tolerance) {
        sol.trace.converged = true;
        break;
      }
    }
  }
  sol.converged = sol.trace.converged;
  sol.feasible = max_residual(s, sol, nullptr) <= opt.feasibility_tolerance;
  return sol;
}

}  // namespace cran::downlink
