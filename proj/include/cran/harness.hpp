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

#ifndef CRAN_HARNESS_HPP
#define CRAN_HARNESS_HPP

#include "cran/channel.hpp"
#include "cran/downlink.hpp"
#include "cran/random.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cran::harness {

enum class Direction { Uplink, Downlink };

std::string to_string(Direction d);

// Thrown for malformed or inconsistent scenario files; the message carries
// the offending key path.
class ScenarioError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GeometrySpec {
  bool explicit_positions = false;
  double side = 500.0;
  int n_rrh = 0;
  int n_ue = 0;
  std::vector<channel::Point> rrh;  // used when explicit_positions
  std::vector<channel::Point> ue;
};

// Scenario after ingestion. Powers are linear here; files carry dB.
struct Scenario {
  std::string experiment = "custom";
  Direction direction = Direction::Downlink;
  GeometrySpec geometry;
  channel::PathLossParams path_loss;
  channel::OneRingParams one_ring;
  int rrh_antennas = 2;  // per RRH
  int ue_antennas = 1;   // per UE
  int T = 10;
  int tp = 0;            // training length; 0 means the total UE antenna count
  double power = 10.0;   // linear
  double capacity = 4.0; // bits/s/Hz per fronthaul link
  std::vector<double> weights;
  downlink::CsiMode csi = downlink::CsiMode::Instantaneous;  // for variants that do not name one
  int nc = 1;            // for alternative-split variants that do not name one
  int mc_samples = 0;    // 0 selects default_samples()
  int eval_blocks = 500; // stochastic CSI: blocks per placement for the reported rates
  int outer_iterations = 200;
  int tuning_draws = 100;  // uplink power-split search
  std::uint64_t seed = 1;

  int n_rrh() const { return geometry.n_rrh; }
  int n_ue() const { return geometry.n_ue; }
  int training_length() const { return tp > 0 ? tp : n_ue() * ue_antennas; }
  double power_db() const;
  void validate() const;
};

// 500 channel blocks (uplink), 100 placements (downlink instantaneous),
// 20 placements (downlink stochastic, each running its own SSUM).
int default_samples(Direction d, downlink::CsiMode csi);

struct Sweep {
  std::string variable;  // T, capacity, power_db, n_ue or tp
  std::vector<double> values;
};

// Uplink variants: "conventional" or "estimate-at-rrh". Downlink variants:
// "<approach>:<csi>[:<nc>]", e.g. "alt-split:stochastic:1".
struct Variant {
  std::string approach;
  downlink::CsiMode csi = downlink::CsiMode::Instantaneous;
  int nc = 0;  // alternative split only

  std::string label(Direction d) const;
};

Variant parse_variant(Direction d, const std::string& text, const Scenario& defaults);
std::vector<Variant> parse_variants(Direction d, const std::string& comma_list, const Scenario& defaults);

struct Preset {
  std::string name;
  std::string description;
  Scenario scenario;
  Sweep sweep;
  std::vector<Variant> variants;
};

std::vector<std::string> preset_names();
Preset preset(const std::string& name);

// Scenario file ingestion (JSON). The file may also carry "sweep" and
// "variants"; when absent the caller's values are kept.
Preset load_config(const std::string& path);
Preset parse_config(const std::string& text, const std::string& origin = "<config>");
std::string dump_config(const Preset& p);

// Returns s with one sweep variable set.
Scenario apply_sweep_value(Scenario s, const std::string& variable, double value);

struct Row {
  std::string experiment;
  std::string sweep;
  double value = 0.0;
  std::string approach;
  std::string csi;
  int nc = 0;
  double sum_rate = 0.0;
  std::vector<double> rates;
  double stderr_ = 0.0;
  std::uint64_t seed = 0;
  int samples = 0;
  double wall_ms = 0.0;
  int unconverged = 0;  // trials whose solver stopped without converging (not emitted)
};

struct SweepResult {
  std::vector<Row> rows;
};

struct RunOptions {
  int threads = 1;
  bool timing = false;  // wall_ms stays 0 otherwise, keeping output byte-stable
  std::function<void(const std::string&)> progress;
};

// Substream for one purpose of one Monte-Carlo trial. Depends only on the
// seed, so every variant and sweep point sees the same draws.
enum class StreamPurpose : std::uint64_t { Placement = 1, Channel = 2, Ssum = 3, Evaluation = 4, Tuning = 5, Blocks = 6 };
RandomStream trial_stream(std::uint64_t seed, StreamPurpose purpose, int trial);

SweepResult run_sweep(const Scenario& scenario, const Sweep& sweep, const std::vector<Variant>& variants,
                      const RunOptions& options = {});

enum class Format { Csv, Json };

Format format_from_string(const std::string& s);
std::string csv_header();
std::string to_csv(const SweepResult& r);
std::string to_json(const SweepResult& r);
void emit(const SweepResult& r, Format f, const std::string& path);

// Parses what to_csv writes.
SweepResult read_csv(const std::string& text);

}  // namespace cran::harness

#endif  // CRAN_HARNESS_HPP
