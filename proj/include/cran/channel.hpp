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

#ifndef CRAN_CHANNEL_HPP
#define CRAN_CHANNEL_HPP

#include "cran/hermitian.hpp"
#include "cran/random.hpp"

#include <vector>

namespace cran::channel {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(Point a, Point b);

struct Geometry {
  std::vector<Point> rrh_positions;
  std::vector<Point> ue_positions;
  double area_side = 500.0;

  void validate() const;
};

// Places RRHs and UEs uniformly at random in [0, side]^2.
Geometry uniform_geometry(int n_rrh, int n_ue, double side, RandomStream& rng);

struct PathLossParams {
  double d0 = 50.0;
  double eta = 3.0;

  void validate() const;
};

struct OneRingParams {
  double scattering_radius = 10.0;

  void validate() const;
};

// alpha = 1 / (1 + (d / d0)^eta)
double path_loss(double d, const PathLossParams& params);

struct AngleSpread {
  double theta = 0.0;  // bearing of the UE seen from the RRH, from +x
  double delta = 0.0;  // arctan(r_s / d)
};

AngleSpread angle_and_spread(Point rrh, Point ue, const OneRingParams& params);

// Transmit correlation of an n-element half-wavelength array:
//   S(m, k) = alpha / (2 delta) * int_{theta-delta}^{theta+delta} exp(-j pi (m-k) sin phi) dphi
MatrixXcd one_ring_correlation(double theta, double delta, double alpha, int n);

// Principal square root of a Hermitian PSD matrix. Eigenvalues down to
// -1e-10 (relative) are clamped to zero; anything more negative is rejected.
MatrixXcd hermitian_sqrt(const MatrixXcd& a);

enum class Fading {
  Iid,      // entries i.i.d. CN(0, alpha)
  OneRing,  // H = Htilde * Sigma_T^{1/2}, Sigma_R = I
};

// Link layout shared by both directions. Block (j, i) couples UE j and
// RRH i; its shape is rx_antennas x tx_antennas of the direction in use:
// uplink N_r,i x N_t,j, downlink N_r,j x N_t,i.
struct LinkScenario {
  Geometry geometry;
  PathLossParams path_loss;
  OneRingParams one_ring;
  std::vector<int> rrh_antennas;
  std::vector<int> ue_antennas;
  bool downlink = true;
  Fading fading = Fading::OneRing;

  int n_rrh() const { return static_cast<int>(geometry.rrh_positions.size()); }
  int n_ue() const { return static_cast<int>(geometry.ue_positions.size()); }
  int rows(int j, int i) const { return downlink ? ue_antennas[j] : rrh_antennas[i]; }
  int cols(int j, int i) const { return downlink ? rrh_antennas[i] : ue_antennas[j]; }

  void validate() const;
};

// Second-order statistics of every link, computed once per placement.
struct LinkStatistics {
  int n_rrh = 0;
  int n_ue = 0;
  std::vector<double> alpha;              // [j * n_rrh + i]
  std::vector<MatrixXcd> tx_correlation;  // Sigma_T (one-ring only)
  std::vector<MatrixXcd> tx_sqrt;         // Sigma_T^{1/2}

  double alpha_at(int j, int i) const { return alpha[static_cast<size_t>(j * n_rrh + i)]; }
};

LinkStatistics link_statistics(const LinkScenario& scenario);

struct ChannelBlock {
  int n_rrh = 0;
  int n_ue = 0;
  std::vector<MatrixXcd> blocks;  // [j * n_rrh + i]
  int coherence_index = 0;

  const MatrixXcd& at(int j, int i) const { return blocks[static_cast<size_t>(j * n_rrh + i)]; }
  MatrixXcd& at(int j, int i) { return blocks[static_cast<size_t>(j * n_rrh + i)]; }

  // Downlink row of UE j, [H_j1 ... H_jNR].
  MatrixXcd ue_row(int j) const;
};

ChannelBlock sample_channel(const LinkScenario& scenario, const LinkStatistics& stats, RandomStream& rng,
                            int coherence_index = 0);

}  // namespace cran::channel

#endif  // CRAN_CHANNEL_HPP
