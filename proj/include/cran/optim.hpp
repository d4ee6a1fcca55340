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

#ifndef CRAN_OPTIM_HPP
#define CRAN_OPTIM_HPP

#include "cran/hermitian.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cran::optim {

// ---------------------------------------------------------------------------
// One-dimensional search
// ---------------------------------------------------------------------------

struct LineSearchSpec {
  double lower = 0.0;
  double upper = 1.0;
  int grid_points = 64;
  double tolerance = 1e-6;  // final bracket width
};

struct LineSearchResult {
  double x = 0.0;
  double value = 0.0;
  double best_grid_value = 0.0;
  int evaluations = 0;
  bool skipped_nonfinite = false;
};

// Maximizes f over [lower, upper]: a uniform grid locates the best bracket,
// golden-section search refines it. The returned value is never below the
// best grid value.
LineSearchResult line_search_1d(const std::function<double(double)>& f, const LineSearchSpec& spec);

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

struct GaussLegendreRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// Cached rule of the given order; thread-safe.
const GaussLegendreRule& gauss_legendre_rule(int order);

template <typename T>
struct QuadratureResult {
  T value{};
  int order = 0;
  bool converged = false;
};

inline constexpr int kQuadratureStartOrder = 64;
inline constexpr int kQuadratureMaxOrder = 1024;

template <typename T>
T apply_rule(const std::function<T(double)>& f, double a, double b, int order) {
  const auto& rule = gauss_legendre_rule(order);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (b + a);
  T acc{};
  for (size_t k = 0; k < rule.nodes.size(); ++k) acc += rule.weights[k] * f(mid + half * rule.nodes[k]);
  return half * acc;
}

// Integrates f over [a, b], doubling the Gauss-Legendre order from 64 until
// successive estimates differ by less than tol (or order 1024 is reached,
// in which case converged is false).
template <typename T>
QuadratureResult<T> gauss_legendre(const std::function<T(double)>& f, double a, double b, double tol) {
  QuadratureResult<T> out;
  int order = kQuadratureStartOrder;
  T prev = apply_rule<T>(f, a, b, order);
  while (order < kQuadratureMaxOrder) {
    order *= 2;
    const T cur = apply_rule<T>(f, a, b, order);
    if (std::abs(cur - prev) < tol) {
      out.value = cur;
      out.order = order;
      out.converged = true;
      return out;
    }
    prev = cur;
  }
  out.value = prev;
  out.order = order;
  out.converged = false;
  return out;
}

// ---------------------------------------------------------------------------
// Feasible-start barrier method for concave maximization
// ---------------------------------------------------------------------------

// Value, gradient and (optionally) Hessian of a smooth function of the
// packed variable vector. An empty Hessian stands for zero.
struct Evaluation {
  double value = 0.0;
  VectorXd gradient;
  MatrixXd hessian;
};

// Derivative order requested from a SmoothFunction.
enum class Order { Value = 0, Gradient = 1, Hessian = 2 };

// Evaluates into `out` up to the requested order; higher-order fields may be
// left untouched. Returns false if z is outside the function's domain.
using SmoothFunction = std::function<bool(const VectorXd& z, Order order, Evaluation& out)>;

// Variable layout: Hermitian PSD blocks first (each packed with n^2 reals),
// then strictly positive scalars.
struct ConvexSubproblem {
  std::vector<int> psd_blocks;
  int scalar_count = 0;
  SmoothFunction objective;                 // concave, maximized
  std::vector<SmoothFunction> constraints;  // convex, each must stay <= 0
  VectorXd start;

  int dimension() const;
  int block_offset(int b) const;
  int scalar_offset() const;
};

struct BarrierOptions {
  double gap_tolerance = 1e-7;   // stop once m / t falls below this
  double initial_t = 1.0;
  double t_growth = 10.0;
  int max_newton_per_stage = 100;
  int max_total_newton = 2000;
  double centering_tolerance = 1e-9;  // on lambda^2 / 2, final stage
  double stage_centering_tolerance = 1e-9;  // earlier stages
};

struct ConcaveSolution {
  VectorXd z;
  double objective = 0.0;
  double gap = 0.0;            // m / t at exit
  double stationarity = 0.0;   // Newton decrement of the final centering
  double max_residual = 0.0;   // max constraint value (<= 0 when feasible)
  bool converged = false;
  int newton_steps = 0;
  std::vector<double> stage_objectives;
  std::string message;
};

class InfeasibleStart : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Throws InfeasibleStart if the start violates a constraint, leaves the
// scalar orthant or has a non-positive-definite PSD block.
ConcaveSolution maximize_concave(const ConvexSubproblem& problem, const BarrierOptions& options = {});

// Strict-interior test used by the barrier line search.
bool strictly_feasible(const ConvexSubproblem& problem, const VectorXd& z);

// ---------------------------------------------------------------------------
// Debug surface
// ---------------------------------------------------------------------------

struct GradientCheck {
  double max_relative_error = 0.0;
  int worst_index = -1;
};

// Central differences with the given step; relative error per coordinate
// is |fd - analytic| / max(1, |analytic|, |fd|).
GradientCheck check_gradient(const SmoothFunction& f, const VectorXd& z, double step = 1e-5);

// Same check applied to the Hessian (differences of analytic gradients).
GradientCheck check_hessian(const SmoothFunction& f, const VectorXd& z, double step = 1e-5);

}  // namespace cran::optim

#endif  // CRAN_OPTIM_HPP
