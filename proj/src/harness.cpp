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

#include "cran/harness.hpp"

#include "cran/uplink.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace cran::harness {

using json = nlohmann::ordered_json;
using downlink::CsiMode;

namespace {

constexpr int kSignificant = 9;

[[noreturn]] void fail(const std::string& where, const std::string& what) { throw ScenarioError(where + ": " + what); }

double round_sig(double x) {
  if (!std::isfinite(x) || x == 0.0) return x;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", kSignificant, x);
  return std::stod(buf);
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", kSignificant, x);
  return buf;
}

// Sample mean and standard error.
std::pair<double, double> mean_and_error(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  if (x.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  if (x.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace

std::string to_string(Direction d) { return d == Direction::Uplink ? "uplink" : "downlink"; }

double Scenario::power_db() const { return 10.0 * std::log10(power); }

void Scenario::validate() const {
  if (experiment.empty()) fail("experiment", "must not be empty");
  if (geometry.n_rrh < 1) fail("geometry.n_rrh", "need at least one RRH");
  if (geometry.n_ue < 1) fail("geometry.n_ue", "need at least one UE");
  if (!(geometry.side > 0.0)) fail("geometry.side", "must be positive");
  if (geometry.explicit_positions) {
    if (static_cast<int>(geometry.rrh.size()) != geometry.n_rrh) fail("geometry.rrh", "count mismatch");
    if (static_cast<int>(geometry.ue.size()) != geometry.n_ue) fail("geometry.ue", "count mismatch");
  }
  try {
    path_loss.validate();
  } catch (const std::invalid_argument& e) {
    fail("path_loss", e.what());
  }
  try {
    one_ring.validate();
  } catch (const std::invalid_argument& e) {
    fail("one_ring", e.what());
  }
  if (rrh_antennas < 1) fail("antennas.rrh", "must be >= 1");
  if (ue_antennas < 1) fail("antennas.ue", "must be >= 1");
  if (T < 1) fail("T", "must be >= 1");
  if (tp < 0) fail("T_p", "must be >= 0");
  if (direction == Direction::Uplink) {
    if (training_length() < n_ue() * ue_antennas) fail("T_p", "orthogonal training needs T_p >= total UE antennas");
    if (training_length() >= T) fail("T_p", "training must leave data symbols (T_p < T)");
  }
  if (!(power > 0.0) || !std::isfinite(power)) fail("power_db", "must be finite");
  if (!(capacity >= 0.0) || !std::isfinite(capacity)) fail("capacity", "must be finite and >= 0");
  if (!weights.empty()) {
    if (static_cast<int>(weights.size()) != n_ue()) fail("weights", "need one weight per UE");
    for (double w : weights)
      if (!(w >= 0.0)) fail("weights", "must be >= 0");
  }
  if (nc < 1) fail("nc", "must be >= 1");
  if (mc_samples < 0) fail("mc_samples", "must be >= 0");
  if (eval_blocks < 1) fail("eval_blocks", "must be >= 1");
  if (outer_iterations < 1) fail("outer_iterations", "must be >= 1");
  if (tuning_draws < 1) fail("tuning_draws", "must be >= 1");
}

int default_samples(Direction d, CsiMode csi) {
  if (d == Direction::Uplink) return 500;
  return csi == CsiMode::Instantaneous ? 100 : 20;
}

// ---------------------------------------------------------------------------
// Variants
// ---------------------------------------------------------------------------

std::string Variant::label(Direction d) const {
  if (d == Direction::Uplink) return approach;
  std::string s = approach + ":" + downlink::to_string(csi);
  if (approach == "alt-split") s += ":" + std::to_string(nc);
  return s;
}

Variant parse_variant(Direction d, const std::string& text, const Scenario& defaults) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.empty()) fail("variants", "empty variant");
  Variant v;
  v.approach = parts[0];
  if (d == Direction::Uplink) {
    if (parts.size() != 1) fail("variants", "uplink variants take no options: " + text);
    uplink::approach_from_string(v.approach);
    return v;
  }
  try {
    downlink::approach_from_string(v.approach);
    v.csi = parts.size() > 1 ? downlink::csi_from_string(parts[1]) : defaults.csi;
  } catch (const std::invalid_argument& e) {
    fail("variants", e.what());
  }
  if (v.approach == "alt-split") {
    v.nc = defaults.nc;
    if (parts.size() > 2) {
      try {
        v.nc = std::stoi(parts[2]);
      } catch (const std::exception&) {
        fail("variants", "bad cluster size in " + text);
      }
    }
    if (v.nc < 1) fail("variants", "cluster size must be >= 1 in " + text);
    if (parts.size() > 3) fail("variants", "too many fields in " + text);
  } else if (parts.size() > 2) {
    fail("variants", "conventional variants take no cluster size: " + text);
  }
  return v;
}

std::vector<Variant> parse_variants(Direction d, const std::string& comma_list, const Scenario& defaults) {
  std::vector<Variant> out;
  std::stringstream ss(comma_list);
  for (std::string p; std::getline(ss, p, ',');) {
    if (!p.empty()) out.push_back(parse_variant(d, p, defaults));
  }
  if (out.empty()) fail("variants", "no variants given");
  return out;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

namespace {

Scenario uplink_base() {
  Scenario s;
  s.direction = Direction::Uplink;
  s.geometry.explicit_positions = true;
  s.geometry.n_rrh = 2;
  s.geometry.n_ue = 2;
  s.geometry.rrh = {{307.50, 233.18}, {430.3, 192.64}};
  s.geometry.ue = {{363.7, 316.66}, {438.17, 107.09}};
  // Four antennas in total on the UE side, split over the two UEs.
  s.rrh_antennas = 4;
  s.ue_antennas = 2;
  s.power = 10.0;
  return s;
}

Scenario downlink_base() {
  Scenario s;
  s.direction = Direction::Downlink;
  s.geometry.n_rrh = 4;
  s.geometry.n_ue = 4;
  s.rrh_antennas = 2;
  s.ue_antennas = 1;
  s.power = 10.0;
  return s;
}

std::vector<Variant> downlink_variants(std::initializer_list<int> ncs) {
  std::vector<Variant> v;
  for (CsiMode m : {CsiMode::Instantaneous, CsiMode::Stochastic}) {
    v.push_back({"conventional", m, 0});
    for (int nc : ncs) v.push_back({"alt-split", m, nc});
  }
  return v;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"uplink-vs-T", "uplink-vs-C", "downlink-vs-C", "downlink-vs-T", "downlink-vs-NU"};
}

Preset preset(const std::string& name) {
  Preset p;
  p.name = name;
  const std::vector<Variant> up = {{"conventional", CsiMode::Instantaneous, 0},
                                   {"estimate-at-rrh", CsiMode::Instantaneous, 0}};
  if (name == "uplink-vs-T") {
    p.description = "uplink sum-rate vs coherence time; N_R = N_U = 2, N_t = N_r = 4, C = 6, P = 10 dB";
    p.scenario = uplink_base();
    p.scenario.capacity = 6.0;
    p.sweep = {"T", {6, 10, 20, 40}};
    p.variants = up;
  } else if (name == "uplink-vs-C") {
    p.description = "uplink sum-rate vs fronthaul capacity; N_R = N_U = 2, N_t = N_r = 4, P = 10 dB, T = 10";
    p.scenario = uplink_base();
    p.scenario.T = 10;
    p.sweep = {"capacity", {1, 2, 4, 6, 8, 12, 16, 24, 32}};
    p.variants = up;
  } else if (name == "downlink-vs-C") {
    p.description = "downlink sum-rate vs fronthaul capacity; N_R = N_U = 4, N_t,i = 2, N_r,j = 1, P = 10 dB, T = 20";
    p.scenario = downlink_base();
    p.scenario.T = 20;
    p.sweep = {"capacity", {1, 2, 4, 6, 8}};
    p.variants = downlink_variants({1, 2, 4});
  } else if (name == "downlink-vs-T") {
    p.description = "downlink sum-rate vs coherence time; N_R = N_U = 4, N_t,i = 2, N_r,j = 1, C = 2, P = 20 dB";
    p.scenario = downlink_base();
    p.scenario.capacity = 2.0;
    p.scenario.power = 100.0;
    p.sweep = {"T", {5, 10, 20, 40, 80}};
    p.variants = downlink_variants({1, 2});
  } else if (name == "downlink-vs-NU") {
    p.description = "downlink sum-rate vs number of UEs; N_R = 4, N_t,i = 2, N_r,j = 1, C = 4, P = 10 dB, T = 10";
    p.scenario = downlink_base();
    p.scenario.capacity = 4.0;
    p.scenario.T = 10;
    p.sweep = {"n_ue", {2, 4, 6, 8}};
    p.variants = downlink_variants({1, 2});
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  p.scenario.experiment = name;
  p.scenario.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Config files
// ---------------------------------------------------------------------------

namespace {

template <typename T>
T get_as(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    fail(where, "has the wrong type");
  }
}

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) fail(where, "must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) fail(where.empty() ? k : where + "." + k, "unknown key");
  }
}

std::vector<channel::Point> read_points(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "must be an array of [x, y] pairs");
  std::vector<channel::Point> out;
  for (size_t k = 0; k < j.size(); ++k) {
    const auto& e = j[k];
    const std::string w = where + "[" + std::to_string(k) + "]";
    if (!e.is_array() || e.size() != 2) fail(w, "must be [x, y]");
    out.push_back({get_as<double>(e[0], w), get_as<double>(e[1], w)});
  }
  return out;
}

json write_points(const std::vector<channel::Point>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.x, p.y});
  return a;
}

}  // namespace

Preset parse_config(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(origin, std::string("not valid JSON: ") + e.what());
  }
  check_keys(j, "", {"preset", "experiment", "direction", "geometry", "path_loss", "one_ring", "antennas", "T",
                     "T_p", "power_db", "capacity", "weights", "csi_mode", "nc", "mc_samples", "eval_blocks",
                     "outer_iterations", "tuning_draws", "seed", "sweep", "variants"});
  Preset p;
  if (j.contains("preset")) {
    try {
      p = preset(get_as<std::string>(j["preset"], "preset"));
    } catch (const ScenarioError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      fail("preset", e.what());
    }
  } else {
    p.name = "custom";
    p.scenario = downlink_base();
  }
  Scenario& s = p.scenario;
  if (j.contains("experiment")) s.experiment = get_as<std::string>(j["experiment"], "experiment");
  if (j.contains("direction")) {
    const auto d = get_as<std::string>(j["direction"], "direction");
    if (d == "uplink") s.direction = Direction::Uplink;
    else if (d == "downlink") s.direction = Direction::Downlink;
    else fail("direction", "must be uplink or downlink");
  }
  if (j.contains("geometry")) {
    const json& g = j["geometry"];
    check_keys(g, "geometry", {"mode", "side", "n_rrh", "n_ue", "rrh", "ue"});
    const std::string mode = g.contains("mode") ? get_as<std::string>(g["mode"], "geometry.mode") : "uniform";
    if (mode == "explicit") {
      s.geometry.explicit_positions = true;
      if (!g.contains("rrh") || !g.contains("ue")) fail("geometry", "explicit mode needs rrh and ue positions");
      s.geometry.rrh = read_points(g["rrh"], "geometry.rrh");
      s.geometry.ue = read_points(g["ue"], "geometry.ue");
      s.geometry.n_rrh = static_cast<int>(s.geometry.rrh.size());
      s.geometry.n_ue = static_cast<int>(s.geometry.ue.size());
    } else if (mode == "uniform") {
      s.geometry.explicit_positions = false;
      s.geometry.rrh.clear();
      s.geometry.ue.clear();
      if (g.contains("n_rrh")) s.geometry.n_rrh = get_as<int>(g["n_rrh"], "geometry.n_rrh");
      if (g.contains("n_ue")) s.geometry.n_ue = get_as<int>(g["n_ue"], "geometry.n_ue");
    } else {
      fail("geometry.mode", "must be explicit or uniform");
    }
    if (g.contains("side")) s.geometry.side = get_as<double>(g["side"], "geometry.side");
  }
  if (j.contains("path_loss")) {
    check_keys(j["path_loss"], "path_loss", {"d0", "eta"});
    if (j["path_loss"].contains("d0")) s.path_loss.d0 = get_as<double>(j["path_loss"]["d0"], "path_loss.d0");
    if (j["path_loss"].contains("eta")) s.path_loss.eta = get_as<double>(j["path_loss"]["eta"], "path_loss.eta");
  }
  if (j.contains("one_ring")) {
    check_keys(j["one_ring"], "one_ring", {"scattering_radius"});
    if (j["one_ring"].contains("scattering_radius"))
      s.one_ring.scattering_radius = get_as<double>(j["one_ring"]["scattering_radius"], "one_ring.scattering_radius");
  }
  if (j.contains("antennas")) {
    check_keys(j["antennas"], "antennas", {"rrh", "ue"});
    if (j["antennas"].contains("rrh")) s.rrh_antennas = get_as<int>(j["antennas"]["rrh"], "antennas.rrh");
    if (j["antennas"].contains("ue")) s.ue_antennas = get_as<int>(j["antennas"]["ue"], "antennas.ue");
  }
  if (j.contains("T")) s.T = get_as<int>(j["T"], "T");
  if (j.contains("T_p")) s.tp = get_as<int>(j["T_p"], "T_p");
  if (j.contains("power_db")) {
    const double db = get_as<double>(j["power_db"], "power_db");
    if (!std::isfinite(db)) fail("power_db", "must be finite");
    s.power = std::pow(10.0, db / 10.0);
  }
  if (j.contains("capacity")) s.capacity = get_as<double>(j["capacity"], "capacity");
  if (j.contains("weights")) s.weights = get_as<std::vector<double>>(j["weights"], "weights");
  if (j.contains("csi_mode")) {
    try {
      s.csi = downlink::csi_from_string(get_as<std::string>(j["csi_mode"], "csi_mode"));
    } catch (const ScenarioError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      fail("csi_mode", e.what());
    }
  }
  if (j.contains("nc")) s.nc = get_as<int>(j["nc"], "nc");
  if (j.contains("mc_samples")) s.mc_samples = get_as<int>(j["mc_samples"], "mc_samples");
  if (j.contains("eval_blocks")) s.eval_blocks = get_as<int>(j["eval_blocks"], "eval_blocks");
  if (j.contains("outer_iterations")) s.outer_iterations = get_as<int>(j["outer_iterations"], "outer_iterations");
  if (j.contains("tuning_draws")) s.tuning_draws = get_as<int>(j["tuning_draws"], "tuning_draws");
  if (j.contains("seed")) s.seed = get_as<std::uint64_t>(j["seed"], "seed");
  if (j.contains("sweep")) {
    check_keys(j["sweep"], "sweep", {"variable", "values"});
    if (!j["sweep"].contains("variable") || !j["sweep"].contains("values")) fail("sweep", "needs variable and values");
    p.sweep.variable = get_as<std::string>(j["sweep"]["variable"], "sweep.variable");
    p.sweep.values = get_as<std::vector<double>>(j["sweep"]["values"], "sweep.values");
  }
  if (j.contains("variants")) {
    const auto list = get_as<std::vector<std::string>>(j["variants"], "variants");
    p.variants.clear();
    for (const auto& v : list) p.variants.push_back(parse_variant(s.direction, v, s));
  }
  s.validate();
  if (p.sweep.variable.empty()) p.sweep = {"capacity", {s.capacity}};
  if (p.sweep.values.empty()) fail("sweep.values", "must not be empty");
  for (double v : p.sweep.values) apply_sweep_value(s, p.sweep.variable, v).validate();
  if (p.variants.empty()) {
    if (s.direction == Direction::Uplink) {
      p.variants = {{"conventional", CsiMode::Instantaneous, 0}, {"estimate-at-rrh", CsiMode::Instantaneous, 0}};
    } else {
      p.variants = {{"conventional", s.csi, 0}, {"alt-split", s.csi, s.nc}};
    }
  }
  return p;
}

Preset load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

std::string dump_config(const Preset& p) {
  const Scenario& s = p.scenario;
  json j;
  j["experiment"] = s.experiment;
  j["direction"] = to_string(s.direction);
  json g;
  g["mode"] = s.geometry.explicit_positions ? "explicit" : "uniform";
  g["side"] = s.geometry.side;
  if (s.geometry.explicit_positions) {
    g["rrh"] = write_points(s.geometry.rrh);
    g["ue"] = write_points(s.geometry.ue);
  } else {
    g["n_rrh"] = s.geometry.n_rrh;
    g["n_ue"] = s.geometry.n_ue;
  }
  j["geometry"] = g;
  j["path_loss"] = {{"d0", s.path_loss.d0}, {"eta", s.path_loss.eta}};
  j["one_ring"] = {{"scattering_radius", s.one_ring.scattering_radius}};
  j["antennas"] = {{"rrh", s.rrh_antennas}, {"ue", s.ue_antennas}};
  j["T"] = s.T;
  j["T_p"] = s.tp;
  j["power_db"] = round_sig(s.power_db());
  j["capacity"] = s.capacity;
  j["weights"] = s.weights;
  j["csi_mode"] = downlink::to_string(s.csi);
  j["nc"] = s.nc;
  j["mc_samples"] = s.mc_samples;
  j["eval_blocks"] = s.eval_blocks;
  j["outer_iterations"] = s.outer_iterations;
  j["tuning_draws"] = s.tuning_draws;
  j["seed"] = s.seed;
  j["sweep"] = {{"variable", p.sweep.variable}, {"values", p.sweep.values}};
  json v = json::array();
  for (const auto& x : p.variants) v.push_back(x.label(s.direction));
  j["variants"] = v;
  return j.dump(2) + "\n";
}

Scenario apply_sweep_value(Scenario s, const std::string& variable, double value) {
  auto as_int = [&](const char* what) {
    if (value != std::round(value)) fail("sweep.values", std::string(what) + " needs integer values");
    return static_cast<int>(value);
  };
  if (variable == "T") {
    s.T = as_int("T");
  } else if (variable == "capacity") {
    s.capacity = value;
  } else if (variable == "power_db") {
    s.power = std::pow(10.0, value / 10.0);
  } else if (variable == "tp") {
    s.tp = as_int("tp");
  } else if (variable == "n_ue") {
    if (s.geometry.explicit_positions) fail("sweep.variable", "n_ue sweeps need uniform geometry");
    s.geometry.n_ue = as_int("n_ue");
    if (!s.weights.empty()) fail("weights", "cannot be combined with an n_ue sweep");
  } else {
    fail("sweep.variable", "unknown sweep variable '" + variable + "'");
  }
  return s;
}

RandomStream trial_stream(std::uint64_t seed, StreamPurpose purpose, int trial) {
  return RandomStream::derive(seed, {static_cast<std::uint64_t>(purpose), static_cast<std::uint64_t>(trial)});
}

// ---------------------------------------------------------------------------
// Monte-Carlo evaluation
// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Runs body(k) for k in [0, n) on up to `threads` workers; rethrows the
// first failure.
void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int k = 0; k < n; ++k) body(k);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex m;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int k = next++; k < n; k = next++) {
        try {
          body(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(m);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

Row base_row(const Scenario& s, const Sweep& sweep, double value) {
  Row r;
  r.experiment = s.experiment;
  r.sweep = sweep.variable;
  r.value = value;
  r.seed = s.seed;
  return r;
}

uplink::MultiLinkScenario uplink_model(const Scenario& s) {
  uplink::MultiLinkScenario m;
  m.n_rrh = s.n_rrh();
  m.n_ue = s.n_ue();
  m.nt = s.ue_antennas;
  m.nr = s.rrh_antennas;
  m.T = s.T;
  m.tp = s.training_length();
  m.power = s.power;
  m.capacity = s.capacity;
  channel::Geometry g;
  if (s.geometry.explicit_positions) {
    g.rrh_positions = s.geometry.rrh;
    g.ue_positions = s.geometry.ue;
  } else {
    RandomStream rng = trial_stream(s.seed, StreamPurpose::Placement, 0);
    g = channel::uniform_geometry(s.n_rrh(), s.n_ue(), s.geometry.side, rng);
  }
  m.alpha.resize(m.n_rrh, m.n_ue);
  for (int i = 0; i < m.n_rrh; ++i)
    for (int j = 0; j < m.n_ue; ++j)
      m.alpha(i, j) = channel::path_loss(channel::distance(g.rrh_positions[i], g.ue_positions[j]), s.path_loss);
  m.validate();
  return m;
}

SweepResult run_uplink(const Scenario& base, const Sweep& sweep, const std::vector<Variant>& variants,
                       const RunOptions& opt) {
  const int samples = base.mc_samples > 0 ? base.mc_samples : default_samples(Direction::Uplink, base.csi);
  const int nv = static_cast<int>(variants.size());
  const int np = static_cast<int>(sweep.values.size());
  std::vector<Row> rows(static_cast<size_t>(np * nv));
  std::mutex m;
  parallel_for(np * nv, opt.threads, [&](int k) {
    const int p = k / nv, v = k % nv;
    const Scenario s = apply_sweep_value(base, sweep.variable, sweep.values[p]);
    const auto t0 = Clock::now();
    const auto model = uplink_model(s);
    RandomStream tune = trial_stream(s.seed, StreamPurpose::Tuning, 0);
    RandomStream blocks = trial_stream(s.seed, StreamPurpose::Blocks, 0);
    const auto tuning = uplink::standard_draws(model, s.tuning_draws, tune);
    const auto draws = uplink::standard_draws(model, samples, blocks);
    const auto approach = uplink::approach_from_string(variants[v].approach);
    const auto design = uplink::optimize_multi_link(approach, model, tuning);
    const auto est = uplink::multi_link_sum_rate(model, design, draws);
    Row r = base_row(s, sweep, sweep.values[p]);
    r.approach = variants[v].approach;
    r.csi = "na";
    r.rates = est.per_ue;
    r.sum_rate = 0.0;
    for (double x : r.rates) r.sum_rate += x;
    r.stderr_ = est.std_error;
    r.samples = est.samples;
    if (opt.timing) r.wall_ms = elapsed_ms(t0);
    rows[static_cast<size_t>(k)] = std::move(r);
    if (opt.progress) {
      std::lock_guard<std::mutex> lock(m);
      opt.progress(sweep.variable + "=" + fmt(sweep.values[p]) + " " + variants[v].approach + " done");
    }
  });
  return {std::move(rows)};
}

struct TrialOutcome {
  std::vector<double> reduced;
  std::vector<double> relaxed;
  bool converged = true;
  double ms = 0.0;
};

// Whether a variant's result depends on the sweep variable. The conventional
// downlink split sends baseband samples every block, so T never enters it.
bool depends_on(const Variant& v, const std::string& variable) {
  return !(variable == "T" && v.approach == "conventional");
}

TrialOutcome downlink_trial(const Scenario& s, const Variant& v, int trial, const channel::LinkScenario& link,
                            const channel::LinkStatistics& stats) {
  using namespace downlink;
  DownlinkScenario d;
  d.rrh_antennas.assign(s.n_rrh(), s.rrh_antennas);
  d.ue_antennas.assign(s.n_ue(), s.ue_antennas);
  d.power.assign(s.n_rrh(), s.power);
  d.capacity.assign(s.n_rrh(), s.capacity);
  d.T = s.T;
  d.weights = s.weights;
  d.csi = v.csi;
  d.validate();
  SolverOptions so;
  so.max_outer = s.outer_iterations;
  const Approach ap = approach_from_string(v.approach);
  const int nc = std::min(v.nc, s.n_ue());

  TrialOutcome out;
  CovarianceSolution sol;
  ReportedRates rep;
  if (v.csi == CsiMode::Instantaneous) {
    RandomStream rng = trial_stream(s.seed, StreamPurpose::Channel, trial);
    const ChannelRows h = channel_rows(channel::sample_channel(link, stats, rng));
    const auto a = ap == Approach::Conventional ? full_assignment(s.n_rrh(), s.n_ue())
                                                : cluster_assign(instantaneous_norms(d, h), nc);
    sol = solve_instantaneous(ap, d, h, a, so);
    rep = report_instantaneous(d, h, sol);
  } else {
    const auto a = ap == Approach::Conventional ? full_assignment(s.n_rrh(), s.n_ue())
                                                : cluster_assign(average_norms(d, stats), nc);
    const ChannelSampler sampler = [&](RandomStream& r) { return channel_rows(channel::sample_channel(link, stats, r)); };
    RandomStream ssum = trial_stream(s.seed, StreamPurpose::Ssum, trial);
    sol = solve_stochastic(ap, d, sampler, a, ssum, so);
    RandomStream eval = trial_stream(s.seed, StreamPurpose::Evaluation, trial);
    rep = report_stochastic(d, sampler, s.eval_blocks, sol, eval);
  }
  out.reduced = rep.reduced;
  out.relaxed = rep.relaxed;
  out.converged = sol.converged && sol.feasible;
  return out;
}

SweepResult run_downlink(const Scenario& base, const Sweep& sweep, const std::vector<Variant>& variants,
                         const RunOptions& opt) {
  const int nv = static_cast<int>(variants.size());
  const int np = static_cast<int>(sweep.values.size());
  // Trials per variant follow that variant's CSI mode unless set explicitly.
  std::vector<int> trials(nv);
  int max_trials = 0;
  for (int v = 0; v < nv; ++v) {
    trials[v] = base.mc_samples > 0 ? base.mc_samples : default_samples(Direction::Downlink, variants[v].csi);
    max_trials = std::max(max_trials, trials[v]);
  }
  std::vector<Scenario> points;
  for (double x : sweep.values) points.push_back(apply_sweep_value(base, sweep.variable, x));

  // outcome[(trial * np + p) * nv + v]
  std::vector<TrialOutcome> outcome(static_cast<size_t>(max_trials * np * nv));
  std::mutex m;
  int finished = 0;
  parallel_for(max_trials, opt.threads, [&](int t) {
    std::map<std::string, int> computed;  // variant label + point key -> outcome index
    for (int p = 0; p < np; ++p) {
      const Scenario& s = points[p];
      channel::LinkScenario link;
      if (s.geometry.explicit_positions) {
        link.geometry.rrh_positions = s.geometry.rrh;
        link.geometry.ue_positions = s.geometry.ue;
        link.geometry.area_side = s.geometry.side;
      } else {
        RandomStream rng = trial_stream(s.seed, StreamPurpose::Placement, t);
        link.geometry = channel::uniform_geometry(s.n_rrh(), s.n_ue(), s.geometry.side, rng);
      }
      link.path_loss = s.path_loss;
      link.one_ring = s.one_ring;
      link.rrh_antennas.assign(s.n_rrh(), s.rrh_antennas);
      link.ue_antennas.assign(s.n_ue(), s.ue_antennas);
      link.downlink = true;
      link.fading = channel::Fading::OneRing;
      std::unique_ptr<channel::LinkStatistics> stats;
      for (int v = 0; v < nv; ++v) {
        if (t >= trials[v]) continue;
        const size_t idx = static_cast<size_t>((t * np + p) * nv + v);
        const std::string key =
            variants[v].label(Direction::Downlink) + (depends_on(variants[v], sweep.variable) ? "@" + fmt(sweep.values[p]) : "");
        if (auto it = computed.find(key); it != computed.end()) {
          outcome[idx] = outcome[static_cast<size_t>(it->second)];
          outcome[idx].ms = 0.0;
          continue;
        }
        if (!stats) stats = std::make_unique<channel::LinkStatistics>(channel::link_statistics(link));
        const auto t0 = Clock::now();
        outcome[idx] = downlink_trial(s, variants[v], t, link, *stats);
        outcome[idx].ms = elapsed_ms(t0);
        computed[key] = static_cast<int>(idx);
      }
    }
    if (opt.progress) {
      std::lock_guard<std::mutex> lock(m);
      opt.progress("trial " + std::to_string(++finished) + "/" + std::to_string(max_trials) + " done");
    }
  });

  SweepResult res;
  for (int p = 0; p < np; ++p) {
    for (int v = 0; v < nv; ++v) {
      const int n = trials[v];
      const int nu = points[p].n_ue();
      for (bool relaxed : {false, true}) {
        Row r = base_row(points[p], sweep, sweep.values[p]);
        r.approach = variants[v].approach + (relaxed ? "-relaxed" : "");
        r.csi = downlink::to_string(variants[v].csi);
        r.nc = variants[v].approach == "alt-split" ? variants[v].nc : 0;
        r.rates.assign(nu, 0.0);
        std::vector<double> sums;
        double ms = 0.0;
        for (int t = 0; t < n; ++t) {
          const auto& o = outcome[static_cast<size_t>((t * np + p) * nv + v)];
          const auto& x = relaxed ? o.relaxed : o.reduced;
          double sum = 0.0;
          for (int j = 0; j < nu; ++j) {
            r.rates[j] += x[j] / n;
            sum += x[j];
          }
          sums.push_back(sum);
          ms += o.ms;
          r.unconverged += o.converged ? 0 : 1;
        }
        r.sum_rate = 0.0;
        for (double x : r.rates) r.sum_rate += x;
        r.stderr_ = mean_and_error(sums).second;
        r.samples = n;
        if (opt.timing) r.wall_ms = ms;
        res.rows.push_back(std::move(r));
      }
    }
  }
  return res;
}

}  // namespace

SweepResult run_sweep(const Scenario& scenario, const Sweep& sweep, const std::vector<Variant>& variants,
                      const RunOptions& options) {
  scenario.validate();
  if (sweep.values.empty()) throw ScenarioError("sweep.values: must not be empty");
  for (double x : sweep.values) apply_sweep_value(scenario, sweep.variable, x).validate();
  if (variants.empty()) throw ScenarioError("variants: no variants given");
  SweepResult r = scenario.direction == Direction::Uplink ? run_uplink(scenario, sweep, variants, options)
                                                           : run_downlink(scenario, sweep, variants, options);
  // Rows are produced in (sweep value, variant) order already; keep that order stable.
  std::stable_sort(r.rows.begin(), r.rows.end(), [](const Row& a, const Row& b) { return a.value < b.value; });
  return r;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

Format format_from_string(const std::string& s) {
  if (s == "csv") return Format::Csv;
  if (s == "json") return Format::Json;
  throw std::invalid_argument("unknown format '" + s + "' (expected csv or json)");
}

std::string csv_header() { return "experiment,sweep,value,approach,csi,nc,sum_rate,rates,stderr,seed,samples,wall_ms"; }

std::string to_csv(const SweepResult& r) {
  std::string out = csv_header() + "\n";
  for (const auto& row : r.rows) {
    std::string rates;
    for (size_t j = 0; j < row.rates.size(); ++j) rates += (j ? ";" : "") + fmt(row.rates[j]);
    out += row.experiment + "," + row.sweep + "," + fmt(row.value) + "," + row.approach + "," + row.csi + "," +
           std::to_string(row.nc) + "," + fmt(row.sum_rate) + "," + rates + "," + fmt(row.stderr_) + "," +
           std::to_string(row.seed) + "," + std::to_string(row.samples) + "," + fmt(row.wall_ms) + "\n";
  }
  return out;
}

std::string to_json(const SweepResult& r) {
  json a = json::array();
  for (const auto& row : r.rows) {
    json o;
    o["experiment"] = row.experiment;
    o["sweep"] = row.sweep;
    o["value"] = round_sig(row.value);
    o["approach"] = row.approach;
    o["csi"] = row.csi;
    o["nc"] = row.nc;
    o["sum_rate"] = round_sig(row.sum_rate);
    json rates = json::array();
    for (double x : row.rates) rates.push_back(round_sig(x));
    o["rates"] = rates;
    o["stderr"] = round_sig(row.stderr_);
    o["seed"] = row.seed;
    o["samples"] = row.samples;
    o["wall_ms"] = round_sig(row.wall_ms);
    a.push_back(o);
  }
  return a.dump(2) + "\n";
}

void emit(const SweepResult& r, Format f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << (f == Format::Csv ? to_csv(r) : to_json(r));
  out.close();
  if (!out) throw std::runtime_error(path + ": write failed");
}

SweepResult read_csv(const std::string& text) {
  std::stringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) throw std::invalid_argument("read_csv: unexpected header");
  SweepResult r;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 12) throw std::invalid_argument("read_csv: line " + std::to_string(lineno) + " has wrong field count");
    Row row;
    try {
      row.experiment = f[0];
      row.sweep = f[1];
      row.value = std::stod(f[2]);
      row.approach = f[3];
      row.csi = f[4];
      row.nc = std::stoi(f[5]);
      row.sum_rate = std::stod(f[6]);
      std::stringstream rs(f[7]);
      for (std::string x; std::getline(rs, x, ';');) row.rates.push_back(std::stod(x));
      row.stderr_ = std::stod(f[8]);
      row.seed = std::stoull(f[9]);
      row.samples = std::stoi(f[10]);
      row.wall_ms = std::stod(f[11]);
    } catch (const std::logic_error&) {
      throw std::invalid_argument("read_csv: line " + std::to_string(lineno) + " has a malformed number");
    }
    r.rows.push_back(std::move(row));
  }
  return r;
}

}  // namespace cran::harness
