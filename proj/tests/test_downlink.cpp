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

#include "doctest.h"

#include "cran/channel.hpp"
#include "cran/downlink.hpp"

#include <cmath>
#include <numbers>

using namespace cran;
using namespace cran::downlink;

namespace {

constexpr auto kConv = Approach::Conventional;
constexpr auto kAlt = Approach::AltSplit;
const double kLn2 = std::numbers::ln2;

DownlinkScenario make_scenario(std::vector<int> nt, std::vector<int> nr, double power, double capacity, int T = 20) {
  DownlinkScenario s;
  s.rrh_antennas = std::move(nt);
  s.ue_antennas = std::move(nr);
  s.power.assign(s.rrh_antennas.size(), power);
  s.capacity.assign(s.rrh_antennas.size(), capacity);
  s.T = T;
  return s;
}

// One RRH, one UE, single antennas, channel h.
DownlinkScenario scalar_scenario(double power, double capacity) { return make_scenario({1}, {1}, power, capacity); }

ChannelRows scalar_channel(cd h) { return {MatrixXcd::Constant(1, 1, h)}; }

MatrixXcd random_psd(RandomStream& rng, int n, int rank, double scale = 1.0) {
  const MatrixXcd g = rng.complex_normal_matrix(n, rank);
  return scale * g * g.adjoint();
}

struct Layout {
  channel::LinkScenario link;
  channel::LinkStatistics stats;
  DownlinkScenario s;
};

// 4 RRHs x 2 antennas, 4 single-antenna UEs, placed uniformly at random.
Layout layout(RandomStream& rng, double capacity) {
  Layout f;
  f.link.geometry = channel::uniform_geometry(4, 4, 500.0, rng);
  f.link.rrh_antennas = {2, 2, 2, 2};
  f.link.ue_antennas = {1, 1, 1, 1};
  f.stats = channel::link_statistics(f.link);
  f.s = make_scenario({2, 2, 2, 2}, {1, 1, 1, 1}, 10.0, capacity);
  return f;
}

// Brute-force optimum of the scalar conventional problem over (v, sigma2):
// a coarse grid, then a finer grid around the best feasible cell.
double scalar_grid_oracle(double g, double power, double capacity) {
  auto rate = [&](double v, double q) { return std::log2((1.0 + g * (v + q)) / (1.0 + g * q)); };
  auto feasible = [&](double v, double q) { return v + q <= power && std::log2(1.0 + v / q) <= capacity; };
  double best = 0.0, bv = 0.0, bq = power;
  double lo_v = 0.0, hi_v = power, lo_q = 1e-9, hi_q = power;
  for (int pass = 0; pass < 3; ++pass) {
    const int n = 400;
    const double dv = (hi_v - lo_v) / n, dq = (hi_q - lo_q) / n;
    for (int a = 0; a <= n; ++a) {
      for (int b = 0; b <= n; ++b) {
        const double v = lo_v + a * dv, q = lo_q + b * dq;
        if (q > 0.0 && feasible(v, q) && rate(v, q) > best) {
          best = rate(v, q);
          bv = v;
          bq = q;
        }
      }
    }
    lo_v = std::max(0.0, bv - 3 * dv);
    hi_v = std::min(power, bv + 3 * dv);
    lo_q = std::max(1e-9, bq - 3 * dq);
    hi_q = std::min(power, bq + 3 * dq);
  }
  return best;
}

}  // namespace

TEST_CASE("selection matrices") {
  SUBCASE("single RRH and UE gives identities") {
    const auto s = make_scenario({3}, {2}, 1.0, 1.0);
    const auto sel = selection_matrices(s, full_assignment(1, 1));
    CHECK(sel.rrh[0].isApprox(MatrixXd::Identity(3, 3)));
    CHECK(sel.ue[0].isApprox(MatrixXd::Identity(2, 2)));
    CHECK(sel.cluster[0].isApprox(MatrixXd::Identity(3, 3)));
  }
  SUBCASE("RRH selectors have orthonormal columns") {
    const auto s = make_scenario({2, 3, 1}, {1, 2}, 1.0, 1.0);
    const auto sel = selection_matrices(s, full_assignment(3, 2));
    for (int i = 0; i < 3; ++i) {
      const MatrixXd g = sel.rrh[i].transpose() * sel.rrh[i];
      CHECK((g - MatrixXd::Identity(s.rrh_antennas[i], s.rrh_antennas[i])).norm() == 0.0);
    }
  }
  SUBCASE("cluster selector stacks the serving RRHs") {
    // B_1 = {1}, B_2 = {1, 2} (zero-based below).
    const auto s = make_scenario({2, 3}, {1, 1}, 1.0, 1.0);
    ClusterAssignment a;
    a.nc = 2;
    a.ue_sets = {{0, 1}, {1}};
    a.rrh_sets = {{0}, {0, 1}};
    a.validate();
    const auto sel = selection_matrices(s, a);
    CHECK(sel.cluster[0].rows() == 5);
    CHECK(sel.cluster[0].cols() == 2);
    CHECK(sel.cluster[1].cols() == 5);
    VectorXd tagged(5);
    tagged << 11, 12, 21, 22, 23;
    CHECK(sel.cluster[0].transpose() * tagged == tagged.head(2));
    CHECK(sel.cluster[1].transpose() * tagged == tagged);
    MatrixXd w = MatrixXd::Zero(2, 1);
    w << 7, 8;
    VectorXd placed = sel.cluster[0] * w;
    CHECK(placed.head(2) == w.col(0));
    CHECK(placed.tail(3).norm() == 0.0);
  }
}

TEST_CASE("rrh_power") {
  const auto s = make_scenario({2}, {1, 1}, 10.0, 1.0);
  std::vector<MatrixXcd> zero(2, MatrixXcd::Zero(2, 2));
  CHECK(rrh_power(s, zero, VectorXd::Zero(1), 0) == 0.0);
  std::vector<MatrixXcd> v = {MatrixXcd::Identity(2, 2), MatrixXcd::Zero(2, 2)};
  CHECK(rrh_power(s, v, VectorXd::Constant(1, 0.5), 0) == doctest::Approx(3.0).epsilon(1e-12));

  RandomStream rng(3);
  std::vector<MatrixXcd> a = {random_psd(rng, 2, 2), random_psd(rng, 2, 1)};
  const double p0 = rrh_power(s, {a[0], zero[1]}, VectorXd::Zero(1), 0);
  const double p1 = rrh_power(s, {zero[0], a[1]}, VectorXd::Zero(1), 0);
  CHECK(rrh_power(s, a, VectorXd::Zero(1), 0) == doctest::Approx(p0 + p1).epsilon(1e-12));
}

TEST_CASE("downlink_rate") {
  RandomStream rng(5);
  SUBCASE("single UE without noise is log det(I + H V H^H)") {
    const auto s = make_scenario({3}, {2}, 1.0, 1.0);
    const ChannelRows h = {rng.complex_normal_matrix(2, 3)};
    const std::vector<MatrixXcd> v = {random_psd(rng, 3, 2)};
    const MatrixXcd m = MatrixXcd::Identity(2, 2) + h[0] * v[0] * h[0].adjoint();
    const double expect = std::log2(m.determinant().real());
    CHECK(downlink_rate(s, h, v, VectorXd::Zero(1))[0] == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("scalar two-UE example") {
    const auto s = make_scenario({1}, {1, 1}, 1.0, 1.0);
    const ChannelRows h = {MatrixXcd::Ones(1, 1), MatrixXcd::Ones(1, 1)};
    const std::vector<MatrixXcd> v = {MatrixXcd::Ones(1, 1), MatrixXcd::Ones(1, 1)};
    const auto r = downlink_rate(s, h, v, VectorXd::Constant(1, 0.5));
    CHECK(r[0] == doctest::Approx(std::log2(3.5) - std::log2(2.5)).epsilon(1e-12));
    CHECK(r[0] == doctest::Approx(0.485427).epsilon(1e-6));
  }
  SUBCASE("zero covariances give zero rates") {
    const auto s = make_scenario({2, 2}, {1, 1, 1}, 1.0, 1.0);
    ChannelRows h;
    for (int j = 0; j < 3; ++j) h.push_back(rng.complex_normal_matrix(1, 4));
    const std::vector<MatrixXcd> v(3, MatrixXcd::Zero(4, 4));
    for (double r : downlink_rate(s, h, v, VectorXd::Constant(2, 0.3))) CHECK(r == 0.0);
  }
  SUBCASE("rates are invariant to a common rotation of the transmit space") {
    const auto s = make_scenario({2, 1}, {1, 2}, 1.0, 1.0);
    const ChannelRows h = {rng.complex_normal_matrix(1, 3), rng.complex_normal_matrix(2, 3)};
    const std::vector<MatrixXcd> v = {random_psd(rng, 3, 1), random_psd(rng, 3, 2)};
    const Eigen::HouseholderQR<MatrixXcd> qr(rng.complex_normal_matrix(3, 3));
    const MatrixXcd u = qr.householderQ();
    const ChannelRows hr = {h[0] * u.adjoint(), h[1] * u.adjoint()};
    const std::vector<MatrixXcd> vr = {u * v[0] * u.adjoint(), u * v[1] * u.adjoint()};
    // Equal noise levels keep Omega a multiple of the identity, which commutes with u.
    const VectorXd omega = VectorXd::Constant(2, 0.4);
    const auto r0 = downlink_rate(s, h, v, omega);
    const auto r1 = downlink_rate(s, hr, vr, omega);
    for (int j = 0; j < 2; ++j) CHECK(r1[j] == doctest::Approx(r0[j]).epsilon(1e-10));
  }
}

TEST_CASE("fronthaul cost") {
  const auto s = make_scenario({1}, {1}, 1.0, 1.0, 10);
  const std::vector<MatrixXcd> v = {MatrixXcd::Ones(1, 1)};
  CHECK(fronthaul_cost_conventional(s, v, 1.0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fronthaul_cost_alt(s, v, 1.0, 0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(std::isinf(fronthaul_cost_conventional(s, v, 0.0, 0)));

  const auto s2 = make_scenario({3, 2}, {1, 2}, 1.0, 1.0, 7);
  RandomStream rng(8);
  const std::vector<MatrixXcd> zero(2, MatrixXcd::Zero(5, 5));
  for (double q : {0.01, 1.0, 50.0}) CHECK(std::abs(fronthaul_cost_conventional(s2, zero, q, 0)) < 1e-12);
  for (int draw = 0; draw < 20; ++draw) {
    const std::vector<MatrixXcd> w = {random_psd(rng, 5, 1), random_psd(rng, 5, 2)};
    double prev = std::numeric_limits<double>::infinity();
    for (double q : {0.01, 0.1, 1.0, 10.0}) {
      const double c = fronthaul_cost_conventional(s2, w, q, 1);
      CHECK(c < prev);
      CHECK(fronthaul_cost_alt(s2, w, q, 1) == doctest::Approx(c / 7.0).epsilon(1e-12));
      prev = c;
    }
  }
}

TEST_CASE("logdet_linearize") {
  RandomStream rng(9);
  const MatrixXcd a = random_psd(rng, 3, 3) + MatrixXcd::Identity(3, 3);
  CHECK(logdet_linearize(a, a) == doctest::Approx(std::log2(a.determinant().real())).epsilon(1e-12));
  const MatrixXcd b = random_psd(rng, 3, 2);
  CHECK(logdet_linearize(MatrixXcd::Identity(3, 3), b) ==
        doctest::Approx((b - MatrixXcd::Identity(3, 3)).trace().real() / kLn2).epsilon(1e-12));

  MatrixXcd d1 = MatrixXcd::Zero(2, 2), d2 = MatrixXcd::Zero(2, 2);
  d1.diagonal() << 1.0, 2.0;
  d2.diagonal() << 2.0, 2.0;
  CHECK(logdet_linearize(d1, d2) == doctest::Approx(1.0 + 1.0 / kLn2).epsilon(1e-12));
  CHECK(logdet_linearize(d1, d2) == doctest::Approx(2.442695).epsilon(1e-6));

  for (int draw = 0; draw < 100; ++draw) {
    const MatrixXcd x = random_psd(rng, 3, 3) + 0.1 * MatrixXcd::Identity(3, 3);
    const MatrixXcd y = random_psd(rng, 3, 3) + 0.1 * MatrixXcd::Identity(3, 3);
    CHECK(logdet_linearize(x, y) >= std::log2(y.determinant().real()) - 1e-12);
  }
  CHECK_THROWS_AS(logdet_linearize(MatrixXcd::Zero(2, 2), d2), std::invalid_argument);
}

TEST_CASE("rate and fronthaul surrogates") {
  SUBCASE("scalar hand checks") {
    const auto s = make_scenario({1}, {1, 1}, 10.0, 10.0);
    const ChannelRows h = {MatrixXcd::Ones(1, 1), MatrixXcd::Ones(1, 1)};
    const std::vector<MatrixXcd> anchor = {MatrixXcd::Ones(1, 1), MatrixXcd::Ones(1, 1)};
    std::vector<MatrixXcd> query = anchor;
    query[1](0, 0) = 2.0;
    const VectorXd q = VectorXd::Constant(1, 0.5);
    // UE 1: exact log2(1 + 1 + 2 + 0.5); interference 1 + 2 + 0.5 against the tangent at 2.5.
    const double expect = std::log2(4.5) - (std::log2(2.5) + 1.0 / (2.5 * kLn2));
    CHECK(rate_lower_bound(s, h, query, q, anchor, q)[0] == doctest::Approx(expect).epsilon(1e-12));

    const auto s1 = make_scenario({1}, {1}, 1.0, 1.0);
    const std::vector<MatrixXcd> a1 = {MatrixXcd::Ones(1, 1)};
    const std::vector<MatrixXcd> b1 = {MatrixXcd::Constant(1, 1, 2.0)};
    CHECK(fronthaul_upper_bound(s1, a1, 1.0, a1, 1.0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fronthaul_upper_bound(s1, b1, 1.0, a1, 1.0, 0) == doctest::Approx(1.0 + 0.5 / kLn2).epsilon(1e-12));
  }
  SUBCASE("tangency and dominance on random draws") {
    RandomStream rng(10);
    const auto s = make_scenario({2, 2}, {1, 2}, 10.0, 4.0);
    int rate_ok = 0, fh_ok = 0;
    for (int draw = 0; draw < 100; ++draw) {
      const ChannelRows h = {rng.complex_normal_matrix(1, 4), rng.complex_normal_matrix(2, 4)};
      const std::vector<MatrixXcd> a = {random_psd(rng, 4, 2), random_psd(rng, 4, 3)};
      const std::vector<MatrixXcd> b = {random_psd(rng, 4, 1), random_psd(rng, 4, 4)};
      const VectorXd qa = (VectorXd(2) << 0.1 + rng.uniform(), 0.1 + rng.uniform()).finished();
      const VectorXd qb = (VectorXd(2) << 0.1 + rng.uniform(), 0.1 + rng.uniform()).finished();

      const auto at_anchor = rate_lower_bound(s, h, a, qa, a, qa);
      const auto exact_a = downlink_rate(s, h, a, qa);
      const auto bound = rate_lower_bound(s, h, b, qb, a, qa);
      const auto exact_b = downlink_rate(s, h, b, qb);
      bool ok = true;
      for (int j = 0; j < 2; ++j) {
        CHECK(std::abs(at_anchor[j] - exact_a[j]) < 1e-10);
        ok = ok && bound[j] <= exact_b[j] + 1e-12;
      }
      rate_ok += ok;

      for (int i = 0; i < 2; ++i) {
        CHECK(std::abs(fronthaul_upper_bound(s, a, qa(i), a, qa(i), i) -
                       fronthaul_cost_conventional(s, a, qa(i), i)) < 1e-10);
      }
      fh_ok += fronthaul_upper_bound(s, b, qb(1), a, qa(1), 1) >= fronthaul_cost_conventional(s, b, qb(1), 1) - 1e-12;
    }
    CHECK(rate_ok == 100);
    CHECK(fh_ok == 100);
  }
}

TEST_CASE("clustering") {
  RandomStream rng(11);
  MatrixXd norms = MatrixXd::NullaryExpr(3, 4, [&] { return rng.uniform(); });
  const auto full = cluster_assign(norms, 4);
  for (int i = 0; i < 3; ++i) CHECK(full.ue_sets[i] == std::vector<int>{0, 1, 2, 3});
  CHECK(full.unserved().empty());

  MatrixXd two(2, 2);
  two << 3, 1, 1, 3;
  const auto a = cluster_assign(two, 1);
  CHECK(a.ue_sets[0] == std::vector<int>{0});
  CHECK(a.ue_sets[1] == std::vector<int>{1});
  CHECK(a.rrh_sets[0] == std::vector<int>{0});
  CHECK(a.rrh_sets[1] == std::vector<int>{1});

  const auto tie = cluster_assign(MatrixXd::Ones(2, 3), 2);
  CHECK(tie.ue_sets[0] == std::vector<int>{0, 1});
  CHECK(tie.unserved() == std::vector<int>{2});
  CHECK_THROWS_AS(cluster_assign(two, 3), std::invalid_argument);
}

TEST_CASE("rank_reduce") {
  SUBCASE("rank-one covariance") {
    const auto s = make_scenario({2}, {1}, 4.0, 1.0);
    VectorXcd u(2);
    u << cd(0.6, 0.0), cd(0.0, 0.8);
    const std::vector<MatrixXcd> v = {4.0 * u * u.adjoint()};
    const auto r = rank_reduce(s, v, VectorXd::Zero(1));
    // Power 4 is already met, so gamma = 1 and W = 2 gamma u up to a phase.
    CHECK(r.gamma == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.w[0].norm() == doctest::Approx(2.0 * r.gamma).epsilon(1e-12));
    CHECK(std::abs((u.adjoint() * r.w[0])(0, 0)) == doctest::Approx(2.0).epsilon(1e-12));
    const auto half = rank_reduce(s, {v[0] / 4.0}, VectorXd::Zero(1));
    CHECK(half.gamma == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("binding RRH meets its budget") {
    RandomStream rng(12);
    const auto s = make_scenario({2, 3, 2}, {1, 2, 1}, 5.0, 1.0);
    for (int draw = 0; draw < 20; ++draw) {
      std::vector<MatrixXcd> v;
      for (int j = 0; j < 3; ++j) v.push_back(random_psd(rng, 7, 3, 0.1));
      const VectorXd omega = VectorXd::Constant(3, 0.2);
      const auto r = rank_reduce(s, v, omega);
      const auto cov = covariances(r.w);
      double worst = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < 3; ++i) worst = std::max(worst, rrh_power(s, cov, omega, i) - s.power[i]);
      CHECK(std::abs(worst) < 1e-8);
    }
  }
  SUBCASE("full stream count keeps the rate") {
    // Regression pin on optimized covariances with M_j = N_r,j.
    RandomStream rng(13);
    const auto s = make_scenario({2, 2}, {2, 2}, 10.0, 6.0);
    double worst = 0.0;
    for (int draw = 0; draw < 5; ++draw) {
      const ChannelRows h = {rng.complex_normal_matrix(2, 4), rng.complex_normal_matrix(2, 4)};
      const auto sol = solve_instantaneous(kConv, s, h, full_assignment(2, 2));
      const auto rep = report_instantaneous(s, h, sol);
      worst = std::max(worst, std::abs(rep.relaxed_sum() - rep.reduced_sum()) / rep.relaxed_sum());
    }
    CHECK(worst < 0.05);
  }
  SUBCASE("admissible caps gamma") {
    const auto s = make_scenario({1}, {1}, 100.0, 1.0);
    const std::vector<MatrixXcd> v = {MatrixXcd::Ones(1, 1)};
    const auto r = rank_reduce(s, v, VectorXd::Zero(1),
                               [](const std::vector<MatrixXcd>& c) { return c[0](0, 0).real() <= 9.0; });
    CHECK(r.capped);
    CHECK(r.gamma == doctest::Approx(3.0).epsilon(1e-9));
  }
}

TEST_CASE("solve_instantaneous: scalar oracles") {
  const cd h(0.8, 0.6);
  SUBCASE("large fronthaul reaches point-to-point capacity") {
    const auto s = scalar_scenario(10.0, 1e3);
    const auto sol = solve_instantaneous(kConv, s, scalar_channel(h), full_assignment(1, 1));
    CHECK(sol.feasible);
    CHECK(std::abs(sol.rates[0] - std::log2(1.0 + std::norm(h) * 10.0)) < 1e-4);
  }
  SUBCASE("finite fronthaul matches a grid search") {
    for (double c : {0.5, 1.0, 2.0, 4.0}) {
      const auto s = scalar_scenario(10.0, c);
      const auto sol = solve_instantaneous(kConv, s, scalar_channel(h), full_assignment(1, 1));
      CAPTURE(c);
      CHECK(sol.feasible);
      CHECK(sol.converged);
      CHECK(std::abs(sol.rates[0] - scalar_grid_oracle(std::norm(h), 10.0, c)) < 1e-3);
    }
  }
  SUBCASE("infeasible inputs are rejected") {
    auto s = scalar_scenario(10.0, 1.0);
    CHECK_THROWS_AS(solve_instantaneous(kConv, s, {}, full_assignment(1, 1)), std::invalid_argument);
    s.power[0] = -1.0;
    CHECK_THROWS_AS(solve_instantaneous(kConv, s, scalar_channel(h), full_assignment(1, 1)), std::invalid_argument);
  }
}

TEST_CASE("solve_instantaneous: MM contract on random placements") {
  for (int seed = 1; seed <= 2; ++seed) {
    RandomStream rng(100 + seed);
    auto f = layout(rng, 4.0);
    const auto h = channel_rows(channel::sample_channel(f.link, f.stats, rng));
    for (Approach ap : {kConv, kAlt}) {
      const auto a = ap == kConv ? full_assignment(4, 4) : cluster_assign(instantaneous_norms(f.s, h), 2);
      const auto sol = solve_instantaneous(ap, f.s, h, a);
      CAPTURE(seed);
      CAPTURE(to_string(ap));
      CHECK(sol.converged);
      CHECK(sol.feasible);
      CHECK(sol.trace.max_residual() <= 1e-6);
      CHECK(sol.trace.worst_decrease() <= 1e-6);
      for (const auto& e : sol.trace.entries) CHECK(e.surrogate >= e.anchor_value - 1e-6);
      const auto rep = report_instantaneous(f.s, h, sol);
      for (int j = 0; j < 4; ++j) {
        CHECK(rep.reduced[j] >= 0.0);
        CHECK(rep.reduced[j] <= rep.relaxed[j] + 1e-6);
      }
    }
  }
}

TEST_CASE("conventional and full-cluster alternative split agree without quantization") {
  RandomStream rng(21);
  auto s = make_scenario({2, 2}, {1, 1}, 10.0, 1e3);
  ChannelRows h = {rng.complex_normal_matrix(1, 4), rng.complex_normal_matrix(1, 4)};
  const auto conv = solve_instantaneous(kConv, s, h, full_assignment(2, 2));
  const auto alt = solve_instantaneous(kAlt, s, h, full_assignment(2, 2));
  const double rc = conv.rates[0] + conv.rates[1];
  const double ra = alt.rates[0] + alt.rates[1];
  CHECK(conv.sigma2.maxCoeff() < 1e-4);
  CHECK(std::abs(rc - ra) < 1e-3);
}

TEST_CASE("solve_stochastic") {
  SUBCASE("a fixed channel reproduces the instantaneous solution") {
    const cd hv(0.8, 0.6);
    const auto s = scalar_scenario(10.0, 2.0);
    const auto inst = solve_instantaneous(kConv, s, scalar_channel(hv), full_assignment(1, 1));
    RandomStream rng(31);
    const auto sto = solve_stochastic(kConv, s, [&](RandomStream&) { return scalar_channel(hv); },
                                      full_assignment(1, 1), rng);
    CHECK(sto.feasible);
    const double r = downlink_rate(s, scalar_channel(hv), sto.v, sto.omega)[0];
    CHECK(std::abs(r - inst.rates[0]) < 1e-3);
  }
  SUBCASE("alternative split respects the message budget over 200 outer iterations") {
    RandomStream rng(32);
    auto f = layout(rng, 4.0);
    const auto a = cluster_assign(average_norms(f.s, f.stats), 1);
    SolverOptions opt;
    opt.ssum_tolerance = 0.0;
    auto sampler = [&](RandomStream& r) { return channel_rows(channel::sample_channel(f.link, f.stats, r)); };
    const auto sol = solve_stochastic(kAlt, f.s, sampler, a, rng, opt);
    CHECK(sol.trace.outer_iterations == 200);
    CHECK(sol.feasible);
    for (int i = 0; i < 4; ++i) {
      double used = 0.0;
      for (int j : a.ue_sets[i]) used += sol.rates[j];
      CHECK(used <= f.s.capacity[i] + 1e-9);
    }
    for (const auto& e : sol.trace.entries) {
      CHECK(std::isfinite(e.surrogate));
      CHECK(std::isfinite(e.anchor_value));
      CHECK(e.max_residual <= 1e-6);
    }
  }
}

TEST_CASE("surrogate subproblem derivatives") {
  RandomStream rng(41);
  auto f = layout(rng, 4.0);
  const auto h = channel_rows(channel::sample_channel(f.link, f.stats, rng));
  for (Approach ap : {kConv, kAlt}) {
    const auto a = ap == kConv ? full_assignment(4, 4) : cluster_assign(instantaneous_norms(f.s, h), 2);
    const auto anchor = initial_point(ap, f.s, &h, a);
    const auto view = instantaneous_subproblem(ap, f.s, h, anchor);
    const auto& p = view.problem;
    CHECK(view.constraint_names.size() == p.constraints.size());
    double worst_g = 0.0, worst_h = 0.0;
    int points = 0;
    RandomStream pr(42);
    while (points < 20) {
      // Random interior points: the anchor with a small Hermitian perturbation of every block.
      VectorXd z = p.start;
      for (int b = 0; b < static_cast<int>(p.psd_blocks.size()); ++b) {
        const int n = p.psd_blocks[b];
        const MatrixXcd v = optim::unpack_hermitian(z.segment(p.block_offset(b), n * n), n);
        const MatrixXcd d = random_psd(pr, n, n, 0.02 * v.trace().real() / n);
        optim::pack_hermitian(v + d, z.segment(p.block_offset(b), n * n));
      }
      // Scalars well away from zero so the finite-difference stencil stays in the domain.
      for (int k = 0; k < p.scalar_count; ++k) z(p.scalar_offset() + k) = 0.05 + 0.5 * pr.uniform();
      optim::Evaluation ev;
      if (!p.objective(z, optim::Order::Value, ev)) continue;
      ++points;
      std::vector<optim::SmoothFunction> fns = {p.objective};
      fns.insert(fns.end(), p.constraints.begin(), p.constraints.end());
      for (const auto& fn : fns) {
        worst_g = std::max(worst_g, optim::check_gradient(fn, z).max_relative_error);
        worst_h = std::max(worst_h, optim::check_hessian(fn, z).max_relative_error);
      }
    }
    CAPTURE(to_string(ap));
    CHECK(worst_g < 1e-4);
    CHECK(worst_h < 1e-4);
  }
}

TEST_CASE("names and validation") {
  CHECK(approach_from_string(to_string(kAlt)) == kAlt);
  CHECK(csi_from_string(to_string(CsiMode::Stochastic)) == CsiMode::Stochastic);
  CHECK_THROWS_AS(approach_from_string("joint"), std::invalid_argument);
  auto s = make_scenario({2}, {1}, 1.0, 1.0);
  s.T = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}
