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

#include "cran/hermitian.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace cran::optim {

namespace {

// One basis matrix written as at most two weighted unit entries.
struct BasisTerm {
  int count;
  std::array<cd, 2> coef;
  std::array<int, 2> row;
  std::array<int, 2> col;
};

std::vector<BasisTerm> basis_terms(int n) {
  std::vector<BasisTerm> terms;
  terms.reserve(static_cast<size_t>(n) * n);
  for (int a = 0; a < n; ++a) terms.push_back({1, {cd(1, 0), cd(0, 0)}, {a, 0}, {a, 0}});
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      terms.push_back({2, {cd(1, 0), cd(1, 0)}, {a, b}, {b, a}});
      terms.push_back({2, {cd(0, 1), cd(0, -1)}, {a, b}, {b, a}});
    }
  }
  return terms;
}

}  // namespace

void pack_hermitian(const MatrixXcd& x, Eigen::Ref<VectorXd> out) {
  const int n = static_cast<int>(x.rows());
  if (x.cols() != n || out.size() != hermitian_dim(n)) {
    throw std::invalid_argument("pack_hermitian: shape mismatch");
  }
  int k = 0;
  for (int a = 0; a < n; ++a) out(k++) = x(a, a).real();
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const cd v = 0.5 * (x(a, b) + std::conj(x(b, a)));
      out(k++) = v.real();
      out(k++) = v.imag();
    }
  }
}

VectorXd pack_hermitian(const MatrixXcd& x) {
  VectorXd z(hermitian_dim(static_cast<int>(x.rows())));
  pack_hermitian(x, z);
  return z;
}

MatrixXcd unpack_hermitian(const Eigen::Ref<const VectorXd>& z, int n) {
  if (z.size() != hermitian_dim(n)) throw std::invalid_argument("unpack_hermitian: size mismatch");
  MatrixXcd x(n, n);
  int k = 0;
  for (int a = 0; a < n; ++a) x(a, a) = cd(z(k++), 0.0);
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const cd v(z(k), z(k + 1));
      k += 2;
      x(a, b) = v;
      x(b, a) = std::conj(v);
    }
  }
  return x;
}

void pack_gradient(const MatrixXcd& g, Eigen::Ref<VectorXd> out) {
  const int n = static_cast<int>(g.rows());
  if (out.size() != hermitian_dim(n)) throw std::invalid_argument("pack_gradient: size mismatch");
  int k = 0;
  for (int a = 0; a < n; ++a) out(k++) = g(a, a).real();
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      // tr(G E_re) = G_ba + G_ab, tr(G E_im) = i (G_ba - G_ab)
      const cd re = g(b, a) + g(a, b);
      const cd im = cd(0, 1) * (g(b, a) - g(a, b));
      out(k++) = re.real();
      out(k++) = im.real();
    }
  }
}

VectorXd pack_gradient(const MatrixXcd& g) {
  VectorXd out(hermitian_dim(static_cast<int>(g.rows())));
  pack_gradient(g, out);
  return out;
}

void add_logdet_hessian(const MatrixXcd& g, double scale, Eigen::Ref<MatrixXd> out) {
  const int n = static_cast<int>(g.rows());
  const int dim = hermitian_dim(n);
  if (out.rows() != dim || out.cols() != dim) throw std::invalid_argument("add_logdet_hessian: shape mismatch");
  const auto terms = basis_terms(n);
  for (int p = 0; p < dim; ++p) {
    const BasisTerm& ep = terms[p];
    for (int q = p; q < dim; ++q) {
      const BasisTerm& eq = terms[q];
      // tr(G e_a e_b^T G e_c e_d^T) = G(d,a) G(b,c)
      cd acc(0, 0);
      for (int s = 0; s < ep.count; ++s) {
        for (int t = 0; t < eq.count; ++t) {
          acc += ep.coef[s] * eq.coef[t] * g(eq.col[t], ep.row[s]) * g(ep.col[s], eq.row[t]);
        }
      }
      const double v = -scale * acc.real();
      out(p, q) += v;
      if (q != p) out(q, p) += v;
    }
  }
}

void add_logdet_hessian_factored(const MatrixXcd& u, double scale, Eigen::Ref<MatrixXd> out) {
  const int n = static_cast<int>(u.rows());
  const int r = static_cast<int>(u.cols());
  const int dim = hermitian_dim(n);
  if (out.rows() != dim || out.cols() != dim) {
    throw std::invalid_argument("add_logdet_hessian_factored: shape mismatch");
  }
  VectorXd re(dim), im(dim);
  for (int s = 0; s < r; ++s) {
    for (int t = 0; t < r; ++t) {
      // c(p) = u_s^H E_p u_t
      int k = 0;
      for (int a = 0; a < n; ++a) {
        const cd c = std::conj(u(a, s)) * u(a, t);
        re(k) = c.real();
        im(k) = c.imag();
        ++k;
      }
      for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
          const cd x = std::conj(u(a, s)) * u(b, t);
          const cd y = std::conj(u(b, s)) * u(a, t);
          const cd cre = x + y;
          const cd cim = cd(0, 1) * (x - y);
          re(k) = cre.real();
          im(k) = cre.imag();
          ++k;
          re(k) = cim.real();
          im(k) = cim.imag();
          ++k;
        }
      }
      out.noalias() -= scale * (re * re.transpose() + im * im.transpose());
    }
  }
}

void logdet_hessian_columns(const MatrixXcd& u, Eigen::Ref<MatrixXd> cols) {
  const int n = static_cast<int>(u.rows());
  const int r = static_cast<int>(u.cols());
  if (cols.rows() != hermitian_dim(n) || cols.cols() < r * r) {
    throw std::invalid_argument("logdet_hessian_columns: shape mismatch");
  }
  // The (s,t) and (t,s) terms coincide, so off-diagonal pairs are folded
  // into sqrt(2)-weighted real and imaginary columns; for s == t the
  // imaginary part vanishes.
  int c = 0;
  for (int s = 0; s < r; ++s) {
    for (int t = s; t < r; ++t) {
      const double w = (s == t) ? 1.0 : std::sqrt(2.0);
      int k = 0;
      for (int a = 0; a < n; ++a) {
        const cd v = std::conj(u(a, s)) * u(a, t);
        cols(k, c) = w * v.real();
        if (s != t) cols(k, c + 1) = w * v.imag();
        ++k;
      }
      for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
          const cd x = std::conj(u(a, s)) * u(b, t);
          const cd y = std::conj(u(b, s)) * u(a, t);
          const cd cre = x + y;
          const cd cim = cd(0, 1) * (x - y);
          cols(k, c) = w * cre.real();
          if (s != t) cols(k, c + 1) = w * cre.imag();
          ++k;
          cols(k, c) = w * cim.real();
          if (s != t) cols(k, c + 1) = w * cim.imag();
          ++k;
        }
      }
      c += (s == t) ? 1 : 2;
    }
  }
}

MatrixXcd hermitian_part(const MatrixXcd& a) { return 0.5 * (a + a.adjoint()); }

bool logdet_hpd(const MatrixXcd& a, double& out) {
  Eigen::LLT<MatrixXcd> llt(hermitian_part(a));
  if (llt.info() != Eigen::Success) return false;
  double s = 0.0;
  const auto& l = llt.matrixLLT();
  for (int i = 0; i < a.rows(); ++i) {
    const double d = l(i, i).real();
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    s += std::log(d);
  }
  out = 2.0 * s;
  return true;
}

}  // namespace cran::optim
