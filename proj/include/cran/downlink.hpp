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

#ifndef CRAN_DOWNLINK_HPP
#define CRAN_DOWNLINK_HPP

#include "cran/channel.hpp"
#include "cran/hermitian.hpp"
#include "cran/optim.hpp"
#include "cran/random.hpp"

#include <functional>
#include <string>
#include <vector>

namespace cran::downlink {

// Conventional: the BBU precodes and quantizes the per-RRH baseband signal.
// AltSplit: the BBU sends messages plus quantized precoders; each RRH
// encodes and precodes the UEs assigned to it.
enum class Approach { Conventional, AltSplit };

enum class CsiMode { Instantaneous, Stochastic };

std::string to_string(Approach a);
std::string to_string(CsiMode m);
Approach approach_from_string(const std::string& s);
CsiMode csi_from_string(const std::string& s);

struct DownlinkScenario {
  std::vector<int> rrh_antennas;  // N_t,i
  std::vector<int> ue_antennas;   // N_r,j
  std::vector<int> streams;       // M_j; empty means N_r,j
  std::vector<double> power;      // per-RRH budget, linear
  std::vector<double> capacity;   // per-RRH fronthaul, bits/s/Hz
  int T = 20;
  std::vector<double> weights;    // mu_j; empty means 1
  CsiMode csi = CsiMode::Instantaneous;

  int n_rrh() const { return static_cast<int>(rrh_antennas.size()); }
  int n_ue() const { return static_cast<int>(ue_antennas.size()); }
  int total_tx() const;
  int row_offset(int i) const;
  int stream_count(int j) const;
  double weight(int j) const;
  void validate() const;
};

// Downlink channel rows H_j (N_r,j x N_t), one per UE.
using ChannelRows = std::vector<MatrixXcd>;

ChannelRows channel_rows(const channel::ChannelBlock& block);

// ---------------------------------------------------------------------------
// Clustering and selection
// ---------------------------------------------------------------------------

struct ClusterAssignment {
  int nc = 0;
  std::vector<std::vector<int>> ue_sets;   // M_i, ascending
  std::vector<std::vector<int>> rrh_sets;  // B_j, ascending

  int n_rrh() const { return static_cast<int>(ue_sets.size()); }
  int n_ue() const { return static_cast<int>(rrh_sets.size()); }
  bool serves(int i, int j) const;
  std::vector<int> unserved() const;
  void validate() const;
};

// Every RRH serves every UE.
ClusterAssignment full_assignment(int n_rrh, int n_ue);

// M_i = the nc UEs with the largest norms(i, j); ties go to the lower index.
ClusterAssignment cluster_assign(const MatrixXd& norms, int nc);

// norms(i, j) = ||H_ji||_F on one channel realization.
MatrixXd instantaneous_norms(const DownlinkScenario& s, const ChannelRows& h);

// norms(i, j) = sqrt(tr Sigma_T,ji), from the link statistics.
MatrixXd average_norms(const DownlinkScenario& s, const channel::LinkStatistics& stats);

struct Selectors {
  std::vector<MatrixXd> rrh;  // D_i^r: N_t x N_t,i
  std::vector<MatrixXd> ue;   // D_j^c: N_r x N_r,j
  std::vector<MatrixXd> cluster;  // E_j^c: N_t x N_t,B_j
};

Selectors selection_matrices(const DownlinkScenario& s, const ClusterAssignment& a);

// Global transmit rows of the RRHs in B_j.
std::vector<int> serving_rows(const DownlinkScenario& s, const ClusterAssignment& a, int j);

// ---------------------------------------------------------------------------
// Functionals (all rates in bits)
// ---------------------------------------------------------------------------

// Per-RRH noise level in the transmit covariance, Omega = blockdiag(omega_i I):
// sigma_x,i^2 for the conventional split, N_s,i sigma_w,i^2 for the
// alternative split (N_s,i streams of the UEs in M_i share the quantized
// precoder columns).
VectorXd noise_levels(Approach approach, const DownlinkScenario& s, const ClusterAssignment& a,
                      const VectorXd& sigma2);

// tr(D_i^T (sum_j V_j) D_i) + N_t,i omega_i.
double rrh_power(const DownlinkScenario& s, const std::vector<MatrixXcd>& v, const VectorXd& omega, int i);

// R_j = log2 det(I + H_j (S + Omega) H_j^H) - log2 det(I + H_j (S - V_j + Omega) H_j^H), S = sum_k V_k.
std::vector<double> downlink_rate(const DownlinkScenario& s, const ChannelRows& h, const std::vector<MatrixXcd>& v,
                                  const VectorXd& omega);

// log2 det(D_i^T S D_i + sigma2 I) - N_t,i log2 sigma2; +inf when sigma2 <= 0
// and the signal is nonzero.
double fronthaul_cost_conventional(const DownlinkScenario& s, const std::vector<MatrixXcd>& v, double sigma2,
                                   int i);

// Precoder part of the alternative split, amortized over T.
double fronthaul_cost_alt(const DownlinkScenario& s, const std::vector<MatrixXcd>& v, double sigma2, int i);

// f(A, B) = log2 det A + tr(A^{-1}(B - A)) / ln 2.
double logdet_linearize(const MatrixXcd& a, const MatrixXcd& b);

// Second log-det of each rate replaced by its tangent at the anchor.
std::vector<double> rate_lower_bound(const DownlinkScenario& s, const ChannelRows& h,
                                     const std::vector<MatrixXcd>& v, const VectorXd& omega,
                                     const std::vector<MatrixXcd>& anchor_v, const VectorXd& anchor_omega);

// Fronthaul log-det replaced by its tangent at the anchor.
double fronthaul_upper_bound(const DownlinkScenario& s, const std::vector<MatrixXcd>& v, double sigma2,
                             const std::vector<MatrixXcd>& anchor_v, double anchor_sigma2, int i);

// Embeds a covariance on the rows `rows` into an n x n matrix.
MatrixXcd embed(const MatrixXcd& block, const std::vector<int>& rows, int n);

// ---------------------------------------------------------------------------
// Rank reduction
// ---------------------------------------------------------------------------

// Leading m eigenvectors scaled by the square roots of their eigenvalues.
MatrixXcd leading_factor(const MatrixXcd& v, int m);

struct RankReduction {
  std::vector<MatrixXcd> w;  // N_t x M_j
  double gamma = 0.0;
  bool capped = false;       // gamma lowered below power equality by `admissible`
};

// W_j = gamma * leading_factor(V_j, M_j) with one gamma for all UEs, chosen
// so the most loaded RRH meets its power budget with equality. When
// `admissible` is given and rejects that gamma, the largest admissible
// gamma in [1, gamma_power] is used instead (bisection).
RankReduction rank_reduce(const DownlinkScenario& s, const std::vector<MatrixXcd>& v, const VectorXd& omega,
                          const std::function<bool(const std::vector<MatrixXcd>&)>& admissible = {});

std::vector<MatrixXcd> covariances(const std::vector<MatrixXcd>& w);

// ---------------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------------

// Barrier settings for the MM surrogates: loose centering before the last
// stage.
optim::BarrierOptions default_barrier();

struct SolverOptions {
  int max_mm_iterations = 200;
  double mm_tolerance = 1e-6;
  int max_outer = 200;           // SSUM outer iterations
  int inner_iterations = 2;      // MM steps per SSUM outer iteration
  int window = 20;               // SSUM moving-average window
  double ssum_tolerance = 1e-4;
  double feasibility_tolerance = 1e-6;
  optim::BarrierOptions barrier = default_barrier();
  double warm_gap = 1e-2;        // barrier gap the recentred warm starts begin at
  double ssum_gap = 1e-5;        // barrier gap of the SSUM inner solves
};

struct TraceEntry {
  int outer = 0;
  int inner = 0;
  double anchor_value = 0.0;   // surrogate objective at the anchor
  double surrogate = 0.0;      // surrogate objective at the new iterate
  double objective = 0.0;      // true weighted sum-rate at the new iterate
  double max_residual = 0.0;   // worst true constraint violation (<= 0 feasible)
  int newton_steps = 0;
  bool solver_converged = false;
};

struct SolverTrace {
  std::vector<TraceEntry> entries;
  int outer_iterations = 0;
  int inner_iterations = 0;
  bool converged = false;
  std::string message;

  double max_residual() const;
  // Largest decrease of the true objective between consecutive inner iterates.
  double worst_decrease() const;
};

struct CovarianceSolution {
  Approach approach = Approach::Conventional;
  ClusterAssignment assignment;
  std::vector<MatrixXcd> v;     // per UE, order N_t, zero off the serving rows
  VectorXd sigma2;              // sigma_x^2 or sigma_w^2 per RRH
  VectorXd omega;               // noise_levels(approach, sigma2)
  std::vector<double> rates;    // relaxed per-UE rates
  double surrogate = 0.0;       // final surrogate objective
  bool feasible = false;
  bool converged = false;
  SolverTrace trace;
};

// MM on one channel realization.
CovarianceSolution solve_instantaneous(Approach approach, const DownlinkScenario& s, const ChannelRows& h,
                                       const ClusterAssignment& assignment, const SolverOptions& options = {});

using ChannelSampler = std::function<ChannelRows(RandomStream&)>;

// SSUM with one fresh realization per outer iteration.
CovarianceSolution solve_stochastic(Approach approach, const DownlinkScenario& s, const ChannelSampler& sampler,
                                    const ClusterAssignment& assignment, RandomStream& rng,
                                    const SolverOptions& options = {});

// Worst true-constraint value of a solution (<= 0 when feasible). For the
// alternative split, h selects the instantaneous form (quantized precoders,
// rates bounded by the achievable rates on h); h == nullptr checks the
// stochastic form (sigma_w = 0, linear fronthaul budget).
double max_residual(const DownlinkScenario& s, const CovarianceSolution& sol, const ChannelRows* h);

// ---------------------------------------------------------------------------
// Reported rates
// ---------------------------------------------------------------------------

// Per-UE rates of a solution as optimized (relaxed) and after rank_reduce.
// For the alternative split each entry is the smaller of the allocated
// message rate and the rate the precoders achieve.
struct ReportedRates {
  std::vector<double> relaxed;
  std::vector<double> reduced;
  RankReduction reduction;

  double relaxed_sum() const;
  double reduced_sum() const;
};

ReportedRates report_instantaneous(const DownlinkScenario& s, const ChannelRows& h, const CovarianceSolution& sol);

// Achievable rates averaged over `blocks` fresh realizations.
ReportedRates report_stochastic(const DownlinkScenario& s, const ChannelSampler& sampler, int blocks,
                                const CovarianceSolution& sol, RandomStream& rng);

// ---------------------------------------------------------------------------
// Debug surface: the convex subproblem of one MM step
// ---------------------------------------------------------------------------

struct SubproblemView {
  optim::ConvexSubproblem problem;
  std::vector<std::string> constraint_names;
};

// Surrogate problem anchored at `anchor` (its v, sigma2 and, for the
// alternative split, rates) on realization h.
SubproblemView instantaneous_subproblem(Approach approach, const DownlinkScenario& s, const ChannelRows& h,
                                        const CovarianceSolution& anchor);

// Strictly feasible starting point used by the solvers: per-RRH scaled
// identities using half of each power budget and quantization noise leaving
// half of each fronthaul budget. For the alternative split, h == nullptr
// selects the stochastic form.
CovarianceSolution initial_point(Approach approach, const DownlinkScenario& s, const ChannelRows* h,
                                 const ClusterAssignment& assignment);

}  // namespace cran::downlink

#endif  // CRAN_DOWNLINK_HPP
