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

#ifndef CRAN_RANDOM_HPP
#define CRAN_RANDOM_HPP

#include "cran/hermitian.hpp"

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cran {

// Deterministic random stream. Independent sub-streams are derived from a
// master seed and an index path, so Monte-Carlo work can be split into
// tasks whose results do not depend on execution order.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(mix(seed)), seed_(seed) {}

  static RandomStream derive(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = mix(master);
    for (std::uint64_t p : path) s = mix(s ^ (p + 0x9e3779b97f4a7c15ULL));
    return RandomStream(s);
  }

  RandomStream substream(std::initializer_list<std::uint64_t> path) const { return derive(seed_, path); }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  // Circularly-symmetric complex Gaussian with the given variance.
  cd complex_normal(double variance = 1.0) {
    const double s = std::sqrt(0.5 * variance);
    const double re = normal_(engine_);
    const double im = normal_(engine_);
    return {s * re, s * im};
  }

  MatrixXcd complex_normal_matrix(int rows, int cols, double variance = 1.0) {
    MatrixXcd m(rows, cols);
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r) m(r, c) = complex_normal(variance);
    return m;
  }

  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::uint64_t seed_;
};

}  // namespace cran

#endif  // CRAN_RANDOM_HPP
