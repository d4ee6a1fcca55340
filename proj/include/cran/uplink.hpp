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

#ifndef CRAN_UPLINK_HPP
#define CRAN_UPLINK_HPP

#include "cran/hermitian.hpp"
#include "cran/random.hpp"

#include <limits>
#include <string>
#include <vector>

namespace cran::uplink {

// Where the channel is estimated: at the BBU from quantized pilots, or at
// the RRH, which then forwards a compressed estimate.
enum class Approach { Conventional, EstimateAtRRH };

enum class Field { Pilot, Data };

// Pilot SNR entering the MMSE error variance.
//   PathLossScaled: alpha T_p P_p / N_t, consistent with a received pilot
//                   power of P_p alpha + 1 per sample.
//   Unscaled:       T_p P_p / N_t, independent of alpha.
// Both agree at alpha = 1.
enum class ErrorModel { PathLossScaled, Unscaled };

// Objective driving the fronthaul split.
//   EffectiveSnr: maximize rho_eff.
//   ExactRate:    maximize rho_eff * sigma_hhat^2. The ergodic rate is
//                 E log det(I + rho sigma_hhat^2 G G^H) with G standard
//                 Gaussian, so this product orders designs exactly as the
//                 rate does.
enum class SplitObjective { EffectiveSnr, ExactRate };

std::string to_string(Approach a);
Approach approach_from_string(const std::string& s);

inline constexpr double kInfiniteVariance = std::numeric_limits<double>::infinity();

struct UplinkScenario {
  int nt = 4;          // UE transmit antennas
  int nr = 4;          // RRH receive antennas
  int T = 10;          // coherence length
  int tp = 4;          // training length
  double alpha = 1.0;  // path-loss gain
  double power = 10.0; // per-block average power (linear)
  double capacity = 6.0;
  ErrorModel error_model = ErrorModel::PathLossScaled;

  int td() const { return T - tp; }
  void validate() const;
};

struct UplinkDesign {
  Approach approach = Approach::Conventional;
  double pp = 0.0, pd = 0.0;
  double cp = 0.0, cd = 0.0;
  double sigma_p2 = 0.0, sigma_d2 = 0.0;
  double sigma_e2 = 0.0;
  double sigma_hhat2 = 0.0;
  double rho_eff = 0.0;
  double objective = 0.0;

  // rho_eff * sigma_hhat^2: the per-entry SNR of the usable channel.
  double effective_gain() const { return rho_eff * sigma_hhat2; }
};

double mmse_error_variance(Approach approach, double alpha, int nt, int tp, double pp, double sigma_p2,
                           ErrorModel model = ErrorModel::PathLossScaled);

double effective_snr(Approach approach, double pd, int nt, double sigma_d2, double sigma_e2, double sigma_p2);

struct FronthaulRate {
  double rate = 0.0;
  bool saturated = false;  // RRH pilot distortion at or above the estimate variance
};

// `power` is P_p for the pilot field and P_d for the data field.
FronthaulRate fronthaul_rate(Approach approach, Field field, const UplinkScenario& s, double sigma2, double power,
                             double sigma_e2);

// Exact inverse of fronthaul_rate; C = 0 returns kInfiniteVariance.
double quantization_from_rate(Approach approach, Field field, const UplinkScenario& s, double c, double power,
                              double sigma_e2);

// Resolves every variance of a design from (P_p, P_d, C_p). The RRH pilot
// distortion is capped at the estimate variance, where no fronthaul is used.
UplinkDesign evaluate_design(Approach approach, const UplinkScenario& s, double pp, double pd, double cp,
                             SplitObjective objective = SplitObjective::EffectiveSnr);

UplinkDesign optimize_fronthaul_split(Approach approach, const UplinkScenario& s, double pp, double pd,
                                      SplitObjective objective = SplitObjective::EffectiveSnr);

// Outer search over P_p in [0, P T / T_p]; the inner fronthaul split uses
// `objective`, the outer search always maximizes the rate.
UplinkDesign optimize_power_split(Approach approach, const UplinkScenario& s,
                                  SplitObjective objective = SplitObjective::EffectiveSnr);

struct RateEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int samples = 0;
  std::vector<double> per_ue;  // successive-decoding split of the mean
};

// log2 det(I + scale A A^H), via the smaller Gram matrix.
double log2det_gram(const MatrixXcd& a, double scale);

RateEstimate ergodic_rate_mc(double rho, double sigma_hhat2, int nt, int nr, double td_over_t, int n_samples,
                             RandomStream& rng);

// ---------------------------------------------------------------------------
// Several RRHs and UEs
// ---------------------------------------------------------------------------
//
// Model: every UE has nt antennas and uses the same (P_p, P_d), spread
// evenly over its antennas. Training sequences are orthogonal across all
// n_ue nt antennas, so T_p >= n_ue nt. A pilot sample at RRH i has power
// P_p sum_j alpha_ij + 1. RRH i forwards either its quantized pilot
// signal (conventional) or the estimates of every H_ij compressed with a
// common distortion level (reverse water-filling), plus the quantized data
// signal. Its fronthaul split maximizes sum_j est_ij / noise_i (ExactRate,
// the single-link rate order) or 1 / noise_i (EffectiveSnr), where
// noise_i = 1 + sigma_d^2 + P_d sum_j err_ij. The BBU whitens each RRH's
// rows and decodes all UEs jointly.

struct MultiLinkScenario {
  int n_rrh = 1;
  int n_ue = 1;
  int nt = 4;  // per UE
  int nr = 4;  // per RRH
  int T = 10;
  int tp = 4;  // total training length
  MatrixXd alpha;  // n_rrh x n_ue
  double power = 10.0;
  double capacity = 6.0;
  ErrorModel error_model = ErrorModel::PathLossScaled;

  int td() const { return T - tp; }
  void validate() const;
};

struct RrhDesign {
  double cp = 0.0, cd = 0.0;
  double sigma_p2 = 0.0;  // conventional pilot variance, or common distortion at the RRH
  double sigma_d2 = 0.0;
  double noise = 1.0;     // equivalent noise power per receive antenna
  std::vector<double> error;     // per UE: variance not captured by the usable estimate
  std::vector<double> estimate;  // per UE: variance of the usable estimate
};

struct MultiLinkDesign {
  Approach approach = Approach::Conventional;
  double pp = 0.0, pd = 0.0;
  std::vector<RrhDesign> rrh;
};

RrhDesign evaluate_rrh(Approach approach, const MultiLinkScenario& s, int i, double pp, double pd, double cp);

MultiLinkDesign design_multi_link(Approach approach, const MultiLinkScenario& s, double pp, double pd,
                                  SplitObjective objective = SplitObjective::ExactRate);

// Standard draws G of shape (n_rrh nr) x (n_ue nt) with CN(0, 1) entries.
std::vector<MatrixXcd> standard_draws(const MultiLinkScenario& s, int n, RandomStream& rng);

RateEstimate multi_link_sum_rate(const MultiLinkScenario& s, const MultiLinkDesign& d,
                                 const std::vector<MatrixXcd>& draws);

RateEstimate multi_link_sum_rate(const MultiLinkScenario& s, const MultiLinkDesign& d, int n_samples,
                                 RandomStream& rng);

// Power split maximizing the sum-rate over a fixed set of tuning draws.
MultiLinkDesign optimize_multi_link(Approach approach, const MultiLinkScenario& s,
                                    const std::vector<MatrixXcd>& tuning_draws,
                                    SplitObjective objective = SplitObjective::ExactRate);

}  // namespace cran::uplink

#endif  // CRAN_UPLINK_HPP
