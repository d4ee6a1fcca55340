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

#include "cran/uplink.hpp"

#include "cran/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cran::uplink {

namespace {

constexpr double kLn2 = std::numbers::ln2;

double log2_1p(double x) { return std::log1p(x) / kLn2; }

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

// Solves decreasing f(v) = target for v > 0 by bisection on log v.
template <typename F>
double solve_decreasing_log(F f, double target, double lo, double hi) {
  double a = std::log(lo), b = std::log(hi);
  for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
    const double m = 0.5 * (a + b);
    (f(std::exp(m)) > target ? a : b) = m;
  }
  return std::exp(0.5 * (a + b));
}

struct Moments {
  double sum = 0.0, sum2 = 0.0;
  int n = 0;
  void add(double v) {
    sum += v;
    sum2 += v * v;
    ++n;
  }
  double mean() const { return n ? sum / n : 0.0; }
  double std_error() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double var = std::max(0.0, (sum2 - n * m * m) / (n - 1));
    return std::sqrt(var / n);
  }
};

}  // namespace

std::string to_string(Approach a) { return a == Approach::Conventional ? "conventional" : "estimate-at-rrh"; }

Approach approach_from_string(const std::string& s) {
  if (s == "conventional") return Approach::Conventional;
  if (s == "estimate-at-rrh") return Approach::EstimateAtRRH;
  throw std::invalid_argument("unknown uplink approach: " + s);
}

void UplinkScenario::validate() const {
  require(nt >= 1 && nr >= 1, "uplink scenario: antenna counts must be >= 1");
  require(tp >= nt, "uplink scenario: training length must be >= N_t");
  require(T - tp >= 1, "uplink scenario: need at least one data channel use");
  require(alpha > 0.0 && std::isfinite(alpha), "uplink scenario: alpha must be > 0");
  require(power > 0.0 && std::isfinite(power), "uplink scenario: power must be > 0");
  require(capacity > 0.0 && std::isfinite(capacity), "uplink scenario: capacity must be > 0");
}

double mmse_error_variance(Approach approach, double alpha, int nt, int tp, double pp, double sigma_p2,
                           ErrorModel model) {
  require(alpha > 0.0 && nt >= 1 && tp >= 1 && pp >= 0.0, "mmse_error_variance: bad arguments");
  const double snr = tp * pp * (model == ErrorModel::PathLossScaled ? alpha : 1.0);
  if (approach == Approach::EstimateAtRRH) return alpha * nt / (snr + nt);
  require(sigma_p2 >= 0.0, "mmse_error_variance: sigma_p^2 must be >= 0");
  if (std::isinf(sigma_p2)) return alpha;
  const double q = nt * (1.0 + sigma_p2);
  return alpha * q / (snr + q);
}

double effective_snr(Approach approach, double pd, int nt, double sigma_d2, double sigma_e2, double sigma_p2) {
  require(pd >= 0.0 && nt >= 1, "effective_snr: bad arguments");
  require(sigma_d2 >= 0.0 && sigma_e2 >= 0.0, "effective_snr: variances must be >= 0");
  double noise = 1.0 + sigma_d2 + pd * sigma_e2;
  if (approach == Approach::EstimateAtRRH) {
    require(sigma_p2 >= 0.0, "effective_snr: sigma_p^2 must be >= 0");
    noise += pd * sigma_p2;
  }
  if (std::isinf(noise)) return 0.0;
  return pd / (nt * noise);
}

FronthaulRate fronthaul_rate(Approach approach, Field field, const UplinkScenario& s, double sigma2, double power,
                             double sigma_e2) {
  require(sigma2 > 0.0, "fronthaul_rate: variance must be > 0");
  FronthaulRate out;
  if (std::isinf(sigma2)) {
    out.saturated = approach == Approach::EstimateAtRRH && field == Field::Pilot;
    return out;
  }
  const double inv_t = 1.0 / s.T;
  if (field == Field::Data) {
    out.rate = s.td() * s.nr * inv_t * log2_1p((power * s.alpha + 1.0) / sigma2);
  } else if (approach == Approach::Conventional) {
    out.rate = s.tp * s.nr * inv_t * log2_1p((power * s.alpha + 1.0) / sigma2);
  } else {
    const double src = s.alpha - sigma_e2;
    if (sigma2 >= src) {
      out.saturated = true;
    } else {
      out.rate = s.nr * s.nt * inv_t * std::log2(src / sigma2);
    }
  }
  return out;
}

double quantization_from_rate(Approach approach, Field field, const UplinkScenario& s, double c, double power,
                              double sigma_e2) {
  require(c >= 0.0 && std::isfinite(c), "quantization_from_rate: rate must be finite and >= 0");
  if (c == 0.0) return kInfiniteVariance;
  if (field == Field::Data) return (power * s.alpha + 1.0) / std::expm1(c * s.T * kLn2 / (s.td() * s.nr));
  if (approach == Approach::Conventional) {
    return (power * s.alpha + 1.0) / std::expm1(c * s.T * kLn2 / (s.tp * s.nr));
  }
  return (s.alpha - sigma_e2) * std::exp2(-c * s.T / (s.nr * s.nt));
}

UplinkDesign evaluate_design(Approach approach, const UplinkScenario& s, double pp, double pd, double cp,
                             SplitObjective objective) {
  UplinkDesign d;
  d.approach = approach;
  d.pp = pp;
  d.pd = pd;
  d.cp = std::clamp(cp, 0.0, s.capacity);
  d.cd = s.capacity - d.cp;
  d.sigma_d2 = quantization_from_rate(approach, Field::Data, s, d.cd, pd, 0.0);
  if (approach == Approach::Conventional) {
    d.sigma_p2 = quantization_from_rate(approach, Field::Pilot, s, d.cp, pp, 0.0);
    d.sigma_e2 = mmse_error_variance(approach, s.alpha, s.nt, s.tp, pp, d.sigma_p2, s.error_model);
    d.sigma_hhat2 = s.alpha - d.sigma_e2;
    d.rho_eff = effective_snr(approach, pd, s.nt, d.sigma_d2, d.sigma_e2, 0.0);
  } else {
    d.sigma_e2 = mmse_error_variance(approach, s.alpha, s.nt, s.tp, pp, 0.0, s.error_model);
    const double tilde = s.alpha - d.sigma_e2;
    d.sigma_p2 = std::min(quantization_from_rate(approach, Field::Pilot, s, d.cp, pp, d.sigma_e2), tilde);
    d.sigma_hhat2 = tilde - d.sigma_p2;
    d.rho_eff = effective_snr(approach, pd, s.nt, d.sigma_d2, d.sigma_e2, d.sigma_p2);
  }
  d.objective = objective == SplitObjective::EffectiveSnr ? d.rho_eff : d.effective_gain();
  return d;
}

UplinkDesign optimize_fronthaul_split(Approach approach, const UplinkScenario& s, double pp, double pd,
                                      SplitObjective objective) {
  s.validate();
  require(pp >= 0.0 && pd >= 0.0, "optimize_fronthaul_split: powers must be >= 0");
  const auto r = optim::line_search_1d(
      [&](double cp) { return evaluate_design(approach, s, pp, pd, cp, objective).objective; },
      {0.0, s.capacity, 64, 1e-6 * s.capacity});
  return evaluate_design(approach, s, pp, pd, r.x, objective);
}

UplinkDesign optimize_power_split(Approach approach, const UplinkScenario& s, SplitObjective objective) {
  s.validate();
  const double pp_max = s.power * s.T / s.tp;
  auto inner = [&](double pp) {
    const double pd = std::max(0.0, (s.power * s.T - s.tp * pp) / s.td());
    return optimize_fronthaul_split(approach, s, pp, pd, objective);
  };
  const auto r = optim::line_search_1d([&](double pp) { return inner(pp).effective_gain(); },
                                       {0.0, pp_max, 64, 1e-6 * pp_max});
  return inner(r.x);
}

double log2det_gram(const MatrixXcd& a, double scale) {
  const Eigen::Index n = std::min(a.rows(), a.cols());
  MatrixXcd g = MatrixXcd::Identity(n, n);
  if (a.rows() <= a.cols()) {
    g.noalias() += scale * a * a.adjoint();
  } else {
    g.noalias() += scale * a.adjoint() * a;
  }
  double ld = 0.0;
  if (!optim::logdet_hpd(g, ld)) throw std::runtime_error("log2det_gram: matrix not positive definite");
  return ld / kLn2;
}

RateEstimate ergodic_rate_mc(double rho, double sigma_hhat2, int nt, int nr, double td_over_t, int n_samples,
                             RandomStream& rng) {
  require(n_samples >= 1 && nt >= 1 && nr >= 1, "ergodic_rate_mc: bad dimensions");
  require(rho >= 0.0 && sigma_hhat2 >= 0.0 && td_over_t >= 0.0, "ergodic_rate_mc: bad parameters");
  Moments m;
  for (int k = 0; k < n_samples; ++k) {
    const MatrixXcd g = rng.complex_normal_matrix(nr, nt);
    m.add(td_over_t * log2det_gram(g, rho * sigma_hhat2));
  }
  RateEstimate out;
  out.mean = m.mean();
  out.std_error = m.std_error();
  out.samples = m.n;
  out.per_ue = {out.mean};
  return out;
}

// ---------------------------------------------------------------------------

void MultiLinkScenario::validate() const {
  require(n_rrh >= 1 && n_ue >= 1, "multi-link scenario: need at least one RRH and one UE");
  require(nt >= 1 && nr >= 1, "multi-link scenario: antenna counts must be >= 1");
  require(tp >= n_ue * nt, "multi-link scenario: training length must cover every UE antenna");
  require(T - tp >= 1, "multi-link scenario: need at least one data channel use");
  require(alpha.rows() == n_rrh && alpha.cols() == n_ue, "multi-link scenario: alpha has wrong shape");
  require(alpha.allFinite() && alpha.minCoeff() > 0.0, "multi-link scenario: alpha must be > 0");
  require(power > 0.0 && std::isfinite(power), "multi-link scenario: power must be > 0");
  require(capacity > 0.0 && std::isfinite(capacity), "multi-link scenario: capacity must be > 0");
}

RrhDesign evaluate_rrh(Approach approach, const MultiLinkScenario& s, int i, double pp, double pd, double cp) {
  RrhDesign r;
  r.cp = std::clamp(cp, 0.0, s.capacity);
  r.cd = s.capacity - r.cp;
  const double inv_t = 1.0 / s.T;
  const int nu = s.n_ue;
  r.error.resize(nu);
  r.estimate.resize(nu);

  double alpha_sum = 0.0;
  for (int j = 0; j < nu; ++j) alpha_sum += s.alpha(i, j);

  if (approach == Approach::Conventional) {
    r.sigma_p2 = r.cp == 0.0 ? kInfiniteVariance
                             : (pp * alpha_sum + 1.0) / std::expm1(r.cp * s.T * kLn2 / (s.tp * s.nr));
    for (int j = 0; j < nu; ++j) {
      r.error[j] = mmse_error_variance(approach, s.alpha(i, j), s.nt, s.tp, pp, r.sigma_p2, s.error_model);
      r.estimate[j] = s.alpha(i, j) - r.error[j];
    }
  } else {
    std::vector<double> tilde(nu), se(nu);
    double top = 0.0;
    for (int j = 0; j < nu; ++j) {
      se[j] = mmse_error_variance(approach, s.alpha(i, j), s.nt, s.tp, pp, 0.0, s.error_model);
      tilde[j] = s.alpha(i, j) - se[j];
      top = std::max(top, tilde[j]);
    }
    // Reverse water-filling: one distortion level D, per-link error min(D, var).
    auto rate = [&](double dist) {
      double c = 0.0;
      for (int j = 0; j < nu; ++j)
        if (dist < tilde[j]) c += std::log2(tilde[j] / dist);
      return s.nr * s.nt * inv_t * c;
    };
    if (r.cp == 0.0 || !(top > 0.0)) {
      r.sigma_p2 = top;
    } else if (nu == 1) {
      r.sigma_p2 = tilde[0] * std::exp2(-r.cp * s.T / (s.nr * s.nt));
    } else {
      r.sigma_p2 = solve_decreasing_log(rate, r.cp, 1e-300, top);
    }
    for (int j = 0; j < nu; ++j) {
      const double q = std::min(r.sigma_p2, tilde[j]);
      r.error[j] = se[j] + q;
      r.estimate[j] = tilde[j] - q;
    }
  }

  r.sigma_d2 = r.cd == 0.0 ? kInfiniteVariance
                           : (pd * alpha_sum + 1.0) / std::expm1(r.cd * s.T * kLn2 / (s.td() * s.nr));
  double err = 0.0;
  for (double e : r.error) err += e;
  r.noise = 1.0 + r.sigma_d2 + pd * err;
  return r;
}

MultiLinkDesign design_multi_link(Approach approach, const MultiLinkScenario& s, double pp, double pd,
                                  SplitObjective objective) {
  s.validate();
  require(pp >= 0.0 && pd >= 0.0, "design_multi_link: powers must be >= 0");
  MultiLinkDesign d;
  d.approach = approach;
  d.pp = pp;
  d.pd = pd;
  for (int i = 0; i < s.n_rrh; ++i) {
    const auto r = optim::line_search_1d(
        [&](double cp) {
          const RrhDesign r = evaluate_rrh(approach, s, i, pp, pd, cp);
          if (std::isinf(r.noise)) return 0.0;
          double gain = 1.0;
          if (objective == SplitObjective::ExactRate) {
            gain = 0.0;
            for (double e : r.estimate) gain += e;
          }
          return gain / r.noise;
        },
        {0.0, s.capacity, 64, 1e-6 * s.capacity});
    d.rrh.push_back(evaluate_rrh(approach, s, i, pp, pd, r.x));
  }
  return d;
}

std::vector<MatrixXcd> standard_draws(const MultiLinkScenario& s, int n, RandomStream& rng) {
  std::vector<MatrixXcd> out;
  out.reserve(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) out.push_back(rng.complex_normal_matrix(s.n_rrh * s.nr, s.n_ue * s.nt));
  return out;
}

namespace {

MatrixXcd whitened_channel(const MultiLinkScenario& s, const MultiLinkDesign& d, const MatrixXcd& g) {
  MatrixXcd h(g.rows(), g.cols());
  for (int i = 0; i < s.n_rrh; ++i) {
    const RrhDesign& r = d.rrh[static_cast<size_t>(i)];
    for (int j = 0; j < s.n_ue; ++j) {
      const double w = std::isinf(r.noise) ? 0.0 : std::sqrt(r.estimate[j] / r.noise);
      h.block(i * s.nr, j * s.nt, s.nr, s.nt) = w * g.block(i * s.nr, j * s.nt, s.nr, s.nt);
    }
  }
  return h;
}

RateEstimate sum_rate_impl(const MultiLinkScenario& s, const MultiLinkDesign& d, const std::vector<MatrixXcd>& draws,
                           bool per_ue) {
  require(static_cast<int>(d.rrh.size()) == s.n_rrh, "multi_link_sum_rate: design does not match scenario");
  for (const auto& r : d.rrh) {
    require(static_cast<int>(r.estimate.size()) == s.n_ue, "multi_link_sum_rate: design does not match scenario");
  }
  require(!draws.empty(), "multi_link_sum_rate: need at least one draw");
  const double frac = static_cast<double>(s.td()) / s.T;
  const double scale = d.pd / s.nt;
  Moments m;
  std::vector<double> ue(static_cast<size_t>(s.n_ue), 0.0);
  for (const auto& g : draws) {
    require(g.rows() == s.n_rrh * s.nr && g.cols() == s.n_ue * s.nt, "multi_link_sum_rate: draw has wrong shape");
    const MatrixXcd h = whitened_channel(s, d, g);
    if (!per_ue) {
      m.add(frac * log2det_gram(h, scale));
      continue;
    }
    // Successive decoding in UE index order; the terms telescope to the sum.
    double prev = 0.0, total = 0.0;
    for (int j = 0; j < s.n_ue; ++j) {
      const double cur = log2det_gram(h.leftCols((j + 1) * s.nt), scale);
      ue[static_cast<size_t>(j)] += frac * (cur - prev);
      total += frac * (cur - prev);
      prev = cur;
    }
    m.add(total);
  }
  RateEstimate out;
  out.mean = m.mean();
  out.std_error = m.std_error();
  out.samples = m.n;
  if (per_ue) {
    for (double& v : ue) v /= m.n;
    out.per_ue = std::move(ue);
  }
  return out;
}

}  // namespace

RateEstimate multi_link_sum_rate(const MultiLinkScenario& s, const MultiLinkDesign& d,
                                 const std::vector<MatrixXcd>& draws) {
  s.validate();
  return sum_rate_impl(s, d, draws, true);
}

RateEstimate multi_link_sum_rate(const MultiLinkScenario& s, const MultiLinkDesign& d, int n_samples,
                                 RandomStream& rng) {
  require(n_samples >= 1, "multi_link_sum_rate: n_samples must be >= 1");
  return multi_link_sum_rate(s, d, standard_draws(s, n_samples, rng));
}

MultiLinkDesign optimize_multi_link(Approach approach, const MultiLinkScenario& s,
                                    const std::vector<MatrixXcd>& tuning_draws, SplitObjective objective) {
  s.validate();
  const double pp_max = s.power * s.T / s.tp;
  auto design = [&](double pp) {
    const double pd = std::max(0.0, (s.power * s.T - s.tp * pp) / s.td());
    return design_multi_link(approach, s, pp, pd, objective);
  };
  const auto r = optim::line_search_1d(
      [&](double pp) { return sum_rate_impl(s, design(pp), tuning_draws, false).mean; },
      {0.0, pp_max, 64, 1e-6 * pp_max});
  return design(r.x);
}

}  // namespace cran::uplink
