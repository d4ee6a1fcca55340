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

#ifndef CRAN_HERMITIAN_HPP
#define CRAN_HERMITIAN_HPP

#include <Eigen/Dense>

#include <complex>

namespace cran {

using cd = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace optim {

// Real coordinates of an n x n Hermitian matrix. The n diagonal entries come
// first, followed by (Re, Im) of every strictly upper entry in row-major
// order, for a total of n*n reals. The coordinate basis E_p is
//   diag a   : e_a e_a^T
//   re (a,b) : e_a e_b^T + e_b e_a^T
//   im (a,b) : i e_a e_b^T - i e_b e_a^T
// so that X = sum_p z_p E_p.

constexpr int hermitian_dim(int n) { return n * n; }

void pack_hermitian(const MatrixXcd& x, Eigen::Ref<VectorXd> out);
VectorXd pack_hermitian(const MatrixXcd& x);
MatrixXcd unpack_hermitian(const Eigen::Ref<const VectorXd>& z, int n);

// out_p = Re tr(G E_p), i.e. the packed gradient of X -> Re tr(G X).
void pack_gradient(const MatrixXcd& g, Eigen::Ref<VectorXd> out);
VectorXd pack_gradient(const MatrixXcd& g);

// Packed Hessian of X -> log det(M0 + X) style terms:
//   out(p,q) = -Re tr(G E_p G E_q)
// for Hermitian G. Accumulated into `out` (which must be n^2 x n^2).
void add_logdet_hessian(const MatrixXcd& g, double scale, Eigen::Ref<MatrixXd> out);

// Same quantity when G = U U^H with U of shape n x r (r small). Costs
// O(r^2 n^4) instead of forming every trace separately.
void add_logdet_hessian_factored(const MatrixXcd& u, double scale, Eigen::Ref<MatrixXd> out);

// Writes r*r columns c_k with sum_k c_k c_k^T = -(factored Hessian above at
// scale 1). `cols` must have n^2 rows and at least r*r columns.
void logdet_hessian_columns(const MatrixXcd& u, Eigen::Ref<MatrixXd> cols);

// Makes a square matrix exactly Hermitian by averaging with its adjoint.
MatrixXcd hermitian_part(const MatrixXcd& a);

// log det of a Hermitian positive definite matrix (natural log). Returns
// false when the Cholesky factorization fails.
bool logdet_hpd(const MatrixXcd& a, double& out);

}  // namespace optim
}  // namespace cran

#endif  // CRAN_HERMITIAN_HPP
