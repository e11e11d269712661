#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "vrsim/rng.hpp"

namespace vrsim {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Point2& a, const Point2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Index of a field-of-view tile, always in [0, n_fov).
struct FovIndex {
  int value = 0;
};

struct MecNode {
  int id = 0;
  Point2 position;
  double compute = 0.0;         // cycles/s
  double cycles_per_bit = 0.0;  // cycles/bit
  int antennas = 1;
};

struct VrUser {
  int id = 0;
  Point2 position;
  double device_compute = 0.0;         // cycles/s
  double device_cycles_per_bit = 0.0;  // cycles/bit
};

struct NetworkTopology {
  std::vector<MecNode> mecs;
  std::vector<VrUser> users;
  double arena_side = 0.0;   // m
  double fiber_rate = 0.0;   // bits/s
  // MEC-to-MEC fiber distances, symmetric with zero diagonal.
  std::vector<std::vector<double>> fiber_distance;

  int mec_count() const { return static_cast<int>(mecs.size()); }
  int user_count() const { return static_cast<int>(users.size()); }
  double arena_diagonal() const { return arena_side * std::sqrt(2.0); }

  double user_mec_distance(int user, int mec) const {
    return distance(users.at(user).position, mecs.at(mec).position);
  }
};

struct PhyParams {
  double noise_power = 0.0;          // W
  double pathloss_exponent_mul = 3;  // alpha
  double pathloss_exponent_uni = 3;  // beta
  double tx_power_per_group = 1.0;   // W
  double bandwidth = 1e8;            // Hz
  // Literal mode: channel variance is the constant alpha/beta instead of the
  // distance-dependent d^-alpha law.
  bool literal_fading = false;
};

inline double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) * 1e-3; }

struct RenderingParams {
  double resolution = 1080;       // single-eye side, pixels
  int viewpoints = 2;
  int bits_per_pixel = 8;
  double compression_ratio = 200;
  double latency_threshold = 0.03;  // s
  double uplink_latency = 0.0;      // s
};

struct TopologyConfig {
  int mecs = 8;
  int users = 8;
  double arena_side = 100.0;
  double f_mec_min = 4e9;
  double f_mec_max = 5e9;
  double f_vr = 2e9;
  double cycles_per_bit_mec = 1000.0;
  double cycles_per_bit_vr = 1000.0;
  int antennas = 4;
  double fiber_rate = 1e10;
};

/// Draws MEC and user positions uniformly in the arena and MEC computes
/// uniformly in [f_mec_min, f_mec_max]. Pure function of (config, rng state).
inline NetworkTopology build_topology(const TopologyConfig& cfg, Rng& rng) {
  if (cfg.mecs < 1 || cfg.users < 1) throw std::invalid_argument("build_topology: counts must be positive");
  if (cfg.arena_side <= 0.0) throw std::invalid_argument("build_topology: arena_side must be positive");
  NetworkTopology topo;
  topo.arena_side = cfg.arena_side;
  topo.fiber_rate = cfg.fiber_rate;
  topo.mecs.reserve(cfg.mecs);
  for (int i = 0; i < cfg.mecs; ++i) {
    MecNode m;
    m.id = i;
    m.position = {rng.uniform(0.0, cfg.arena_side), rng.uniform(0.0, cfg.arena_side)};
    m.compute = rng.uniform(cfg.f_mec_min, cfg.f_mec_max);
    m.cycles_per_bit = cfg.cycles_per_bit_mec;
    m.antennas = cfg.antennas;
    topo.mecs.push_back(m);
  }
  topo.users.reserve(cfg.users);
  for (int k = 0; k < cfg.users; ++k) {
    VrUser u;
    u.id = k;
    u.position = {rng.uniform(0.0, cfg.arena_side), rng.uniform(0.0, cfg.arena_side)};
    u.device_compute = cfg.f_vr;
    u.device_cycles_per_bit = cfg.cycles_per_bit_vr;
    topo.users.push_back(u);
  }
  topo.fiber_distance.assign(cfg.mecs, std::vector<double>(cfg.mecs, 0.0));
  for (int i = 0; i < cfg.mecs; ++i)
    for (int j = 0; j < cfg.mecs; ++j)
      topo.fiber_distance[i][j] = distance(topo.mecs[i].position, topo.mecs[j].position);
  return topo;
}

}  // namespace vrsim
