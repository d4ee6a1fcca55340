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
#include <numeric>
#include <stdexcept>

namespace cran::downlink {

namespace {

// Slack allowed on the true constraints when rescaling the reduced precoders.
constexpr double kSlack = 1e-9;

using Admissible = std::function<bool(const std::vector<MatrixXcd>&)>;

// Fronthaul check applied while rank_reduce grows gamma. The stochastic
// alternative split carries no precoder cost, so nothing is checked.
Admissible fronthaul_check(const DownlinkScenario& s, const CovarianceSolution& sol, bool stochastic) {
  if (sol.approach == Approach::Conventional) {
    return [&s, &sol](const std::vector<MatrixXcd>& v) {
      for (int i = 0; i < s.n_rrh(); ++i) {
        if (fronthaul_cost_conventional(s, v, sol.sigma2(i), i) > s.capacity[i] + kSlack) return false;
      }
      return true;
    };
  }
  if (stochastic) return {};
  return [&s, &sol](const std::vector<MatrixXcd>& v) {
    for (int i = 0; i < s.n_rrh(); ++i) {
      const auto& m = sol.assignment.ue_sets[i];
      if (m.empty()) continue;
      double used = fronthaul_cost_alt(s, v, sol.sigma2(i), i);
      for (int j : m) used += sol.rates[j];
      if (used > s.capacity[i] + kSlack) return false;
    }
    return true;
  };
}

std::vector<double> allocated_min(const CovarianceSolution& sol, std::vector<double> achievable) {
  if (sol.approach != Approach::AltSplit) return achievable;
  for (size_t j = 0; j < achievable.size(); ++j) {
    achievable[j] = sol.assignment.rrh_sets[j].empty() ? 0.0 : std::min(achievable[j], sol.rates[j]);
  }
  return achievable;
}

}  // namespace

double ReportedRates::relaxed_sum() const { return std::accumulate(relaxed.begin(), relaxed.end(), 0.0); }

double ReportedRates::reduced_sum() const { return std::accumulate(reduced.begin(), reduced.end(), 0.0); }

ReportedRates report_instantaneous(const DownlinkScenario& s, const ChannelRows& h, const CovarianceSolution& sol) {
  ReportedRates out;
  out.reduction = rank_reduce(s, sol.v, sol.omega, fronthaul_check(s, sol, false));
  out.relaxed = allocated_min(sol, downlink_rate(s, h, sol.v, sol.omega));
  out.reduced = allocated_min(sol, downlink_rate(s, h, covariances(out.reduction.w), sol.omega));
  return out;
}

ReportedRates report_stochastic(const DownlinkScenario& s, const ChannelSampler& sampler, int blocks,
                                const CovarianceSolution& sol, RandomStream& rng) {
  if (!sampler) throw std::invalid_argument("report_stochastic: missing channel sampler");
  if (blocks < 1) throw std::invalid_argument("report_stochastic: blocks must be positive");
  ReportedRates out;
  out.reduction = rank_reduce(s, sol.v, sol.omega, fronthaul_check(s, sol, true));
  const std::vector<MatrixXcd> reduced = covariances(out.reduction.w);
  out.relaxed.assign(s.n_ue(), 0.0);
  out.reduced.assign(s.n_ue(), 0.0);
  for (int b = 0; b < blocks; ++b) {
    const ChannelRows h = sampler(rng);
    const auto r1 = downlink_rate(s, h, sol.v, sol.omega);
    const auto r2 = downlink_rate(s, h, reduced, sol.omega);
    for (int j = 0; j < s.n_ue(); ++j) {
      out.relaxed[j] += r1[j] / blocks;
      out.reduced[j] += r2[j] / blocks;
    }
  }
  out.relaxed = allocated_min(sol, std::move(out.relaxed));
  out.reduced = allocated_min(sol, std::move(out.reduced));
  return out;
}

}  // namespace cran::downlink
