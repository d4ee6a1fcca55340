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

#include "cran/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace cran::optim {

// ---------------------------------------------------------------------------
// line_search_1d
// ---------------------------------------------------------------------------

LineSearchResult line_search_1d(const std::function<double(double)>& f, const LineSearchSpec& spec) {
  if (!(spec.lower < spec.upper)) throw std::invalid_argument("line_search_1d: empty interval");
  if (!(spec.tolerance > 0.0)) throw std::invalid_argument("line_search_1d: tolerance must be positive");
  if (spec.grid_points < 3) throw std::invalid_argument("line_search_1d: need at least 3 grid points");

  LineSearchResult out;
  const double neg_inf = -std::numeric_limits<double>::infinity();
  auto eval = [&](double x) {
    ++out.evaluations;
    const double v = f(x);
    if (!std::isfinite(v)) {
      out.skipped_nonfinite = true;
      return neg_inf;
    }
    return v;
  };

  const int n = spec.grid_points;
  const double step = (spec.upper - spec.lower) / (n - 1);
  int best = -1;
  double best_value = neg_inf;
  for (int k = 0; k < n; ++k) {
    const double x = (k == n - 1) ? spec.upper : spec.lower + k * step;
    const double v = eval(x);
    if (v > best_value) {
      best_value = v;
      best = k;
    }
  }
  if (best < 0) throw std::runtime_error("line_search_1d: objective non-finite on the whole grid");

  const double x_best = (best == n - 1) ? spec.upper : spec.lower + best * step;
  out.x = x_best;
  out.value = best_value;
  out.best_grid_value = best_value;

  double lo = std::max(spec.lower, x_best - step);
  double hi = std::min(spec.upper, x_best + step);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = eval(c);
  double fd = eval(d);
  while (hi - lo > spec.tolerance) {
    if (fc >= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = eval(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = eval(d);
    }
  }
  const double xm = 0.5 * (lo + hi);
  const double fm = eval(xm);
  for (auto [x, v] : {std::pair{c, fc}, std::pair{d, fd}, std::pair{xm, fm}}) {
    if (v > out.value) {
      out.value = v;
      out.x = x;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gauss-Legendre rules
// ---------------------------------------------------------------------------

namespace {

GaussLegendreRule build_rule(int n) {
  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

}  // namespace

const GaussLegendreRule& gauss_legendre_rule(int order) {
  if (order < 1) throw std::invalid_argument("gauss_legendre_rule: order must be positive");
  static std::mutex mu;
  static std::map<int, std::unique_ptr<GaussLegendreRule>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, std::make_unique<GaussLegendreRule>(build_rule(order))).first;
  return *it->second;
}

// ---------------------------------------------------------------------------
// Barrier method
// ---------------------------------------------------------------------------

int ConvexSubproblem::dimension() const {
  int n = scalar_count;
  for (int b : psd_blocks) n += hermitian_dim(b);
  return n;
}

int ConvexSubproblem::block_offset(int b) const {
  int off = 0;
  for (int k = 0; k < b; ++k) off += hermitian_dim(psd_blocks[k]);
  return off;
}

int ConvexSubproblem::scalar_offset() const { return block_offset(static_cast<int>(psd_blocks.size())); }

namespace {

bool blocks_positive_definite(const ConvexSubproblem& p, const VectorXd& z) {
  int off = 0;
  for (int n : p.psd_blocks) {
    const int d = hermitian_dim(n);
    const MatrixXcd v = unpack_hermitian(z.segment(off, d), n);
    Eigen::LLT<MatrixXcd> llt(v);
    if (llt.info() != Eigen::Success) return false;
    for (int i = 0; i < n; ++i) {
      if (!(llt.matrixLLT()(i, i).real() > 0.0)) return false;
    }
    off += d;
  }
  return true;
}

struct BarrierState {
  double phi = 0.0;
  double objective = 0.0;
  double barrier = 0.0;
  double max_constraint = 0.0;
  VectorXd grad;
  MatrixXd hess;
};

// Evaluates phi = t f + sum log(-g) + sum log det V + sum log s.
bool evaluate_barrier(const ConvexSubproblem& p, const VectorXd& z, double t, bool derivs, BarrierState& st) {
  const int n = static_cast<int>(z.size());
  if (!z.allFinite()) return false;
  const int soff = p.scalar_offset();
  for (int k = 0; k < p.scalar_count; ++k) {
    if (!(z(soff + k) > 0.0)) return false;
  }
  if (derivs) {
    st.grad.setZero(n);
    st.hess.setZero(n, n);
  }
  double barrier = 0.0;
  st.max_constraint = -std::numeric_limits<double>::infinity();

  Evaluation ev;
  for (const auto& g : p.constraints) {
    ev.gradient.resize(0);
    if (!g(z, derivs ? Order::Hessian : Order::Value, ev)) return false;
    if (!(ev.value < 0.0) || !std::isfinite(ev.value)) return false;
    st.max_constraint = std::max(st.max_constraint, ev.value);
    barrier += std::log(-ev.value);
    if (derivs) {
      const VectorXd gs = ev.gradient / ev.value;
      st.grad += gs;
      if (ev.hessian.size() > 0) st.hess += ev.hessian / ev.value;
      st.hess.noalias() -= gs * gs.transpose();
    }
  }

  int off = 0;
  for (int nb : p.psd_blocks) {
    const int d = hermitian_dim(nb);
    const MatrixXcd v = unpack_hermitian(z.segment(off, d), nb);
    Eigen::LLT<MatrixXcd> llt(v);
    if (llt.info() != Eigen::Success) return false;
    double ld = 0.0;
    for (int i = 0; i < nb; ++i) {
      const double diag = llt.matrixLLT()(i, i).real();
      if (!(diag > 0.0)) return false;
      ld += 2.0 * std::log(diag);
    }
    barrier += ld;
    if (derivs) {
      const MatrixXcd vinv = hermitian_part(llt.solve(MatrixXcd::Identity(nb, nb)));
      st.grad.segment(off, d) += pack_gradient(vinv);
      add_logdet_hessian(vinv, 1.0, st.hess.block(off, off, d, d));
    }
    off += d;
  }
  for (int k = 0; k < p.scalar_count; ++k) {
    const double s = z(soff + k);
    barrier += std::log(s);
    if (derivs) {
      st.grad(soff + k) += 1.0 / s;
      st.hess(soff + k, soff + k) -= 1.0 / (s * s);
    }
  }

  ev.gradient.resize(0);
  if (!p.objective(z, derivs ? Order::Hessian : Order::Value, ev)) return false;
  if (!std::isfinite(ev.value)) return false;
  st.objective = ev.value;
  st.barrier = barrier;
  st.phi = t * ev.value + barrier;
  if (derivs) {
    st.grad += t * ev.gradient;
    if (ev.hessian.size() > 0) st.hess += t * ev.hessian;
  }
  return true;
}

// Solves (-H) dx = g with a Cholesky factorization, regularizing if needed.
bool newton_direction(const MatrixXd& hess, const VectorXd& grad, VectorXd& dx) {
  MatrixXd a = -hess;
  a = 0.5 * (a + a.transpose());
  const double scale = std::max(1.0, a.diagonal().cwiseAbs().maxCoeff());
  double reg = 0.0;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::LLT<MatrixXd> llt(reg > 0.0 ? MatrixXd(a + reg * MatrixXd::Identity(a.rows(), a.cols())) : a);
    if (llt.info() == Eigen::Success) {
      dx = llt.solve(grad);
      if (dx.allFinite()) return true;
    }
    reg = (reg == 0.0) ? 1e-14 * scale : reg * 100.0;
  }
  return false;
}

}  // namespace

bool strictly_feasible(const ConvexSubproblem& p, const VectorXd& z) {
  if (z.size() != p.dimension() || !z.allFinite()) return false;
  const int soff = p.scalar_offset();
  for (int k = 0; k < p.scalar_count; ++k) {
    if (!(z(soff + k) > 0.0)) return false;
  }
  if (!blocks_positive_definite(p, z)) return false;
  Evaluation ev;
  for (const auto& g : p.constraints) {
    if (!g(z, Order::Value, ev)) return false;
    if (!(ev.value < 0.0)) return false;
  }
  return true;
}

ConcaveSolution maximize_concave(const ConvexSubproblem& p, const BarrierOptions& opt) {
  if (!p.objective) throw std::invalid_argument("maximize_concave: missing objective");
  if (p.start.size() != p.dimension()) throw std::invalid_argument("maximize_concave: start has wrong dimension");
  if (!strictly_feasible(p, p.start)) throw InfeasibleStart("maximize_concave: start is not strictly feasible");

  int m = p.scalar_count + static_cast<int>(p.constraints.size());
  for (int nb : p.psd_blocks) m += nb;

  ConcaveSolution sol;
  VectorXd z = p.start;
  double t = opt.initial_t;
  BarrierState st, trial;
  VectorXd dx;
  bool stalled = false;

  while (true) {
    double lambda2 = std::numeric_limits<double>::infinity();
    double prev_lambda2 = std::numeric_limits<double>::infinity();
    const bool last = m / t < opt.gap_tolerance;
    const double tol = last ? opt.centering_tolerance : std::max(opt.centering_tolerance, opt.stage_centering_tolerance);
    for (int it = 0; it < opt.max_newton_per_stage; ++it) {
      if (sol.newton_steps >= opt.max_total_newton) break;
      if (!evaluate_barrier(p, z, t, true, st)) {
        sol.message = "barrier evaluation failed at an accepted iterate";
        stalled = true;
        break;
      }
      if (!newton_direction(st.hess, st.grad, dx)) {
        sol.message = "Newton system could not be factorized";
        stalled = true;
        break;
      }
      lambda2 = st.grad.dot(dx);
      if (lambda2 / 2.0 <= tol) break;
      // Round-off floor of phi differences at this barrier weight.
      const double floor = 1e3 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(t * st.objective) +
                                                                           std::abs(st.barrier));
      if (lambda2 < floor && lambda2 >= 0.5 * prev_lambda2) break;
      prev_lambda2 = lambda2;

      double step = 1.0;
      bool accepted = false;
      while (step > 1e-14) {
        const VectorXd cand = z + step * dx;
        if (evaluate_barrier(p, cand, t, false, trial)) {
          const double gain = t * (trial.objective - st.objective) + (trial.barrier - st.barrier);
          if (gain >= 0.25 * step * lambda2 || (lambda2 < 1e-4 && step == 1.0) || (lambda2 < floor)) {
            z = cand;
            accepted = true;
            break;
          }
        }
        step *= 0.5;
      }
      ++sol.newton_steps;
      if (!accepted) {
        if (lambda2 < 1e-6) break;  // already centered to round-off
        sol.message = "line search failed";
        stalled = true;
        break;
      }
    }
    sol.stationarity = std::sqrt(std::max(0.0, lambda2));
    Evaluation ev;
    p.objective(z, Order::Value, ev);
    sol.stage_objectives.push_back(ev.value);
    sol.gap = m / t;
    if (stalled || sol.newton_steps >= opt.max_total_newton) break;
    if (sol.gap < opt.gap_tolerance) {
      sol.converged = true;
      break;
    }
    t *= opt.t_growth;
  }

  sol.z = z;
  Evaluation ev;
  p.objective(z, Order::Value, ev);
  sol.objective = ev.value;
  sol.max_residual = -std::numeric_limits<double>::infinity();
  for (const auto& g : p.constraints) {
    g(z, Order::Value, ev);
    sol.max_residual = std::max(sol.max_residual, ev.value);
  }
  if (p.constraints.empty()) sol.max_residual = 0.0;
  if (!sol.converged && sol.message.empty()) sol.message = "iteration budget exhausted";
  return sol;
}

// ---------------------------------------------------------------------------
// Derivative checks
// ---------------------------------------------------------------------------

GradientCheck check_gradient(const SmoothFunction& f, const VectorXd& z, double step) {
  Evaluation base;
  if (!f(z, Order::Gradient, base)) throw std::invalid_argument("check_gradient: point outside domain");
  GradientCheck out;
  Evaluation ep, em;
  for (int k = 0; k < z.size(); ++k) {
    VectorXd zp = z, zm = z;
    zp(k) += step;
    zm(k) -= step;
    if (!f(zp, Order::Value, ep) || !f(zm, Order::Value, em)) throw std::invalid_argument("check_gradient: step leaves domain");
    const double fd = (ep.value - em.value) / (2.0 * step);
    const double an = base.gradient(k);
    const double err = std::abs(fd - an) / std::max({1.0, std::abs(an), std::abs(fd)});
    if (err > out.max_relative_error) {
      out.max_relative_error = err;
      out.worst_index = k;
    }
  }
  return out;
}

GradientCheck check_hessian(const SmoothFunction& f, const VectorXd& z, double step) {
  Evaluation base;
  if (!f(z, Order::Hessian, base)) throw std::invalid_argument("check_hessian: point outside domain");
  GradientCheck out;
  Evaluation ep, em;
  for (int k = 0; k < z.size(); ++k) {
    VectorXd zp = z, zm = z;
    zp(k) += step;
    zm(k) -= step;
    if (!f(zp, Order::Gradient, ep) || !f(zm, Order::Gradient, em)) throw std::invalid_argument("check_hessian: step leaves domain");
    const VectorXd fd = (ep.gradient - em.gradient) / (2.0 * step);
    for (int r = 0; r < z.size(); ++r) {
      const double an = base.hessian.size() == 0 ? 0.0 : base.hessian(r, k);  // empty means zero
      const double err = std::abs(fd(r) - an) / std::max({1.0, std::abs(an), std::abs(fd(r))});
      if (err > out.max_relative_error) {
        out.max_relative_error = err;
        out.worst_index = k;
      }
    }
  }
  return out;
}

}  // namespace cran::optim
