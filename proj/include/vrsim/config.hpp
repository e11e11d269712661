#pragma once

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "vrsim/agents.hpp"
#include "vrsim/core.hpp"
#include "vrsim/env.hpp"
#include "vrsim/latency.hpp"
#include "vrsim/mobility.hpp"
#include "vrsim/predictor.hpp"

namespace vrsim {

enum class Algorithm { CentralizedDqn, DistributedDqn, CentralizedAc, DistributedAc, Nearest };

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "cdqn") return Algorithm::CentralizedDqn;
  if (s == "ddqn") return Algorithm::DistributedDqn;
  if (s == "cac") return Algorithm::CentralizedAc;
  if (s == "dac") return Algorithm::DistributedAc;
  if (s == "nearest") return Algorithm::Nearest;
  throw std::invalid_argument("unknown algorithm: " + s);
}

inline std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::CentralizedDqn: return "cdqn";
    case Algorithm::DistributedDqn: return "ddqn";
    case Algorithm::CentralizedAc: return "cac";
    case Algorithm::DistributedAc: return "dac";
    case Algorithm::Nearest: return "nearest";
  }
  throw std::logic_error("algorithm_name");
}

inline Scheme parse_scheme(const std::string& s) {
  if (s == "mec-no-migration") return Scheme::MecNoMigration;
  if (s == "mec-migration") return Scheme::MecMigration;
  if (s == "vr-device") return Scheme::VrDevice;
  throw std::invalid_argument("unknown scheme: " + s);
}

inline std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::MecNoMigration: return "mec-no-migration";
    case Scheme::MecMigration: return "mec-migration";
    case Scheme::VrDevice: return "vr-device";
  }
  throw std::logic_error("scheme_name");
}

struct AgentBlock {
  Algorithm algorithm = Algorithm::CentralizedDqn;
  DqnConfig dqn;       // gamma 0.9, lr 0.05, replay 1e4, target period 100
  AcConfig ac;         // lr_actor 0.005, lr_critic 0.05
  EpsSchedule eps;     // 1.0 -> 0.05 over first 60%
  int episodes = 100;
  int slots = 200;
};

/// Full experiment description; every default is the reference parameter set.
struct ExperimentConfig {
  TopologyConfig topology;
  double noise_dbm = -110.0;
  PhyParams phy;  // noise_power derived from noise_dbm at load time
  RenderingParams rendering;
  FovGrid grid;
  double diffusion = 3.0;
  PredictorConfig predictor;
  int predictor_trace_slots = 2000;  // Brownian trace length for predictor training
  AgentBlock agent;
  Scheme scheme = Scheme::MecNoMigration;
  bool prediction = false;
  bool freeze_channels = false;
  std::uint64_t seed = 1;

  void finalize() {
    phy.noise_power = dbm_to_watts(noise_dbm);
    predictor.n_fov = grid.n_fov();
  }
};

namespace detail {
inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline double to_double(const std::string& v, const std::string& key) {
  std::size_t pos = 0;
  double d;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for " + key + ": " + v);
  }
  if (pos != v.size()) throw std::invalid_argument("config: bad number for " + key + ": " + v);
  return d;
}

inline int to_int(const std::string& v, const std::string& key) {
  const double d = to_double(v, key);
  const int i = static_cast<int>(d);
  if (static_cast<double>(i) != d) throw std::invalid_argument("config: expected integer for " + key);
  return i;
}

inline bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": " + v);
}
}  // namespace detail

/// Applies one key=value in the given section; throws on any unknown section
/// or key so drift from the defaults is always loud.
inline void apply_config_key(ExperimentConfig& c, const std::string& section, const std::string& key,
                             const std::string& value) {
  using detail::to_bool;
  using detail::to_double;
  using detail::to_int;
  const std::string where = "[" + section + "] " + key;
  if (section == "topology") {
    if (key == "mecs") c.topology.mecs = to_int(value, where);
    else if (key == "users") c.topology.users = to_int(value, where);
    else if (key == "arena_side") c.topology.arena_side = to_double(value, where);
    else if (key == "f_mec_min") c.topology.f_mec_min = to_double(value, where);
    else if (key == "f_mec_max") c.topology.f_mec_max = to_double(value, where);
    else if (key == "f_vr") c.topology.f_vr = to_double(value, where);
    else if (key == "cycles_per_bit_mec") c.topology.cycles_per_bit_mec = to_double(value, where);
    else if (key == "cycles_per_bit_vr") c.topology.cycles_per_bit_vr = to_double(value, where);
    else if (key == "antennas") c.topology.antennas = to_int(value, where);
    else if (key == "fiber_rate") c.topology.fiber_rate = to_double(value, where);
    else throw std::invalid_argument("config: unknown key " + where);
  } else if (section == "phy") {
    if (key == "noise_dbm") c.noise_dbm = to_double(value, where);
    else if (key == "alpha") c.phy.pathloss_exponent_mul = to_double(value, where);
    else if (key == "beta") c.phy.pathloss_exponent_uni = to_double(value, where);
    else if (key == "tx_power") c.phy.tx_power_per_group = to_double(value, where);
    else if (key == "bandwidth") c.phy.bandwidth = to_double(value, where);
    else if (key == "literal_fading") c.phy.literal_fading = to_bool(value, where);
    else throw std::invalid_argument("config: unknown key " + where);
  } else if (section == "rendering") {
    if (key == "resolution") c.rendering.resolution = to_double(value, where);
    else if (key == "compression_ratio") c.rendering.compression_ratio = to_double(value, where);
    else if (key == "latency_threshold_ms") c.rendering.latency_threshold = to_double(value, where) * 1e-3;
    else if (key == "uplink_latency_ms") c.rendering.uplink_latency = to_double(value, where) * 1e-3;
    else throw std::invalid_argument("config: unknown key " + where);
  } else if (section == "mobility") {
    if (key == "grid_cols") c.grid.cols = to_int(value, where);
    else if (key == "grid_rows") c.grid.rows = to_int(value, where);
    else if (key == "tile_side") c.grid.tile_side = to_double(value, where);
    else if (key == "diffusion") c.diffusion = to_double(value, where);
    else throw std::invalid_argument("config: unknown key " + where);
  } else if (section == "predictor") {
    if (key == "window") c.predictor.window = to_int(value, where);
    else if (key == "hidden") c.predictor.hidden = to_int(value, where);
    else if (key == "learning_rate") c.predictor.learning_rate = to_double(value, where);
    else if (key == "batch_size") c.predictor.batch_size = to_int(value, where);
    else if (key == "epochs") c.predictor.epochs = to_int(value, where);
    else if (key == "batches_per_epoch") c.predictor.batches_per_epoch = to_int(value, where);
    else if (key == "holdout_fraction") c.predictor.holdout_fraction = to_double(value, where);
    else if (key == "early_stop_accuracy") c.predictor.early_stop_accuracy = to_double(value, where);
    else if (key == "trace_slots") c.predictor_trace_slots = to_int(value, where);
    else throw std::invalid_argument("config: unknown key " + where);
  } else if (section == "agent") {
    if (key == "algorithm") c.agent.algorithm = parse_algorithm(value);
    else if (key == "gamma") { c.agent.dqn.gamma = to_double(value, where); c.agent.ac.gamma = c.agent.dqn.gamma; }
    else if (key == "lr_dqn") c.agent.dqn.learning_rate = to_double(value, where);
    else if (key == "lr_actor") c.agent.ac.lr_actor = to_double(value, where);
    else if (key == "lr_critic") c.agent.ac.lr_critic = to_double(value, where);
    else if (key == "eps_start") c.agent.eps.start = to_double(value, where);
    else if (key == "eps_end") c.agent.eps.end = to_double(value, where);
    else if (key == "eps_decay_fraction") c.agent.eps.decay_fraction = to_double(value, where);
    else if (key == "replay_capacity") c.agent.dqn.replay_capacity = to_int(value, where);
    else if (key == "batch_size") c.agent.dqn.batch_size = to_int(value, where);
    else if (key == "target_period") c.agent.dqn.target_period = to_int(value, where);
    else if (key == "episodes") c.agent.episodes = to_int(value, where);
    else if (key == "slots") c.agent.slots = to_int(value, where);
    else throw std::invalid_argument("config: unknown key " + where);
  } else if (section == "experiment") {
    if (key == "scheme") c.scheme = parse_scheme(value);
    else if (key == "prediction") c.prediction = to_bool(value, where);
    else if (key == "freeze_channels") c.freeze_channels = to_bool(value, where);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_double(value, where));
    else throw std::invalid_argument("config: unknown key " + where);
  } else {
    throw std::invalid_argument("config: unknown section [" + section + "]");
  }
}

inline void validate_config(const ExperimentConfig& c) {
  if (c.topology.users > c.topology.mecs)
    throw std::invalid_argument("config: users must not exceed mecs");
  if (c.topology.mecs < 1 || c.topology.users < 1)
    throw std::invalid_argument("config: mecs and users must be positive");
  if (c.grid.cols < 1 || c.grid.rows < 1) throw std::invalid_argument("config: bad FoV grid");
  if (c.agent.episodes < 1 || c.agent.slots < 1)
    throw std::invalid_argument("config: episodes and slots must be positive");
  if (c.rendering.latency_threshold <= 0.0)
    throw std::invalid_argument("config: latency threshold must be positive");
  if (c.prediction && c.predictor.epochs < 1)
    throw std::invalid_argument("config: prediction requires predictor epochs >= 1");
}

/// Parses the key-value text format: [section] headers, key = value lines,
/// '#' comments, blank lines. Strict: unknown sections or keys are errors.
inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw std::invalid_argument("config: bad section header at line " + std::to_string(lineno));
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key = value at line " + std::to_string(lineno));
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (section.empty()) throw std::invalid_argument("config: key before any section at line " + std::to_string(lineno));
    apply_config_key(c, section, key, value);
  }
  c.finalize();
  validate_config(c);
  return c;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  return parse_config(f);
}

}  // namespace vrsim
