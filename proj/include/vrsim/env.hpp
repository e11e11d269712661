#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vrsim/channel.hpp"
#include "vrsim/core.hpp"
#include "vrsim/latency.hpp"
#include "vrsim/mobility.hpp"
#include "vrsim/neural.hpp"
#include "vrsim/predictor.hpp"
#include "vrsim/rng.hpp"

namespace vrsim {

/// POMDP observation: predicted FoVs, user-MEC distances normalized by the
/// arena diagonal, MEC computes normalized by F_max.
struct EnvState {
  int n_fov = 0;
  int users = 0;
  int mecs = 0;
  std::vector<int> fovs;          // per user
  std::vector<double> dist_norm;  // users x mecs
  std::vector<double> comp_norm;  // mecs

  /// Flat encoding for the centralized networks: one-hot FoVs, then
  /// distances (user-major), then computes.
  Vec encode_global() const {
    Vec x;
    x.reserve(static_cast<std::size_t>(users) * n_fov + dist_norm.size() + comp_norm.size());
    for (int k = 0; k < users; ++k) {
      for (int f = 0; f < n_fov; ++f) x.push_back(fovs[k] == f ? 1.0 : 0.0);
    }
    x.insert(x.end(), dist_norm.begin(), dist_norm.end());
    x.insert(x.end(), comp_norm.begin(), comp_norm.end());
    return x;
  }

  /// Local observation of one MEC: all FoVs one-hot, own distance column,
  /// own compute. Coincides with encode_global when mecs == 1.
  Vec encode_local(int mec) const {
    Vec x;
    x.reserve(static_cast<std::size_t>(users) * n_fov + users + 1);
    for (int k = 0; k < users; ++k)
      for (int f = 0; f < n_fov; ++f) x.push_back(fovs[k] == f ? 1.0 : 0.0);
    for (int k = 0; k < users; ++k) x.push_back(dist_norm[k * mecs + mec]);
    x.push_back(comp_norm[mec]);
    return x;
  }

  std::size_t global_dim() const {
    return static_cast<std::size_t>(users) * n_fov + dist_norm.size() + comp_norm.size();
  }
  std::size_t local_dim() const { return static_cast<std::size_t>(users) * n_fov + users + 1; }
};

inline EnvState build_state(const NetworkTopology& topo, const std::vector<int>& predictions,
                            int n_fov, double f_max) {
  EnvState s;
  s.n_fov = n_fov;
  s.users = topo.user_count();
  s.mecs = topo.mec_count();
  s.fovs = predictions;
  const double diag = topo.arena_diagonal();
  s.dist_norm.resize(static_cast<std::size_t>(s.users) * s.mecs);
  for (int k = 0; k < s.users; ++k)
    for (int b = 0; b < s.mecs; ++b)
      s.dist_norm[k * s.mecs + b] = topo.user_mec_distance(k, b) / diag;
  s.comp_norm.resize(s.mecs);
  for (int b = 0; b < s.mecs; ++b) s.comp_norm[b] = topo.mecs[b].compute / f_max;
  return s;
}

/// Joint action: one serving MEC per user plus, under the migration scheme,
/// one rendering MEC per requested FoV (entries for absent FoVs are -1).
struct ActionVector {
  std::vector<int> serving;
  std::vector<int> rendering;
};

struct GroupAssignment {
  std::vector<TxGroup> groups;
  std::vector<int> user_group;  // per user, index into groups
  int multicast_count = 0;
  int unicast_count = 0;
};

/// Groups users by (FoV, serving MEC): sizes >= 2 multicast, singletons
/// unicast, unused MECs inactive.
inline GroupAssignment group_users(const std::vector<int>& serving, const std::vector<int>& fovs,
                                   int mecs) {
  if (serving.size() != fovs.size()) throw std::invalid_argument("group_users: size mismatch");
  GroupAssignment ga;
  ga.user_group.assign(serving.size(), -1);
  for (std::size_t k = 0; k < serving.size(); ++k) {
    if (serving[k] < 0 || serving[k] >= mecs) throw std::out_of_range("group_users: serving index out of range");
    int gi = -1;
    for (std::size_t g = 0; g < ga.groups.size(); ++g)
      if (ga.groups[g].mec == serving[k] && ga.groups[g].fov == fovs[k]) {
        gi = static_cast<int>(g);
        break;
      }
    if (gi < 0) {
      TxGroup g;
      g.mec = serving[k];
      g.fov = fovs[k];
      ga.groups.push_back(g);
      gi = static_cast<int>(ga.groups.size()) - 1;
    }
    ga.groups[gi].users.push_back(static_cast<int>(k));
    ga.user_group[k] = gi;
  }
  for (TxGroup& g : ga.groups) {
    g.multicast = g.users.size() >= 2;
    if (g.multicast)
      ++ga.multicast_count;
    else
      ++ga.unicast_count;
  }
  return ga;
}

struct StepResult {
  EnvState next;
  double reward = 0.0;
  std::vector<LatencyBreakdown> latency;  // per user
  std::vector<double> psnr_values;        // per user
  std::vector<int> true_fovs;             // ground truth for the acted slot
};

struct EnvConfig {
  Scheme scheme = Scheme::MecMigration;
  bool prediction = false;
  FovGrid grid;
  double diffusion = 3.0;
  double f_mec_max = 5e9;  // normalization constant for the state
  bool freeze_channels = false;
  std::uint64_t seed = 0;
};

struct EpisodeLogRow {
  int slot, user, serving_mec, rendering_mec, fov_pred, fov_true;
  LatencyBreakdown latency;
  double psnr_value;
};

class Environment {
 public:
  Environment(NetworkTopology topo, PhyParams phy, RenderingParams rendering, EnvConfig cfg,
              const PredictorModel* predictor = nullptr)
      : topo_(std::move(topo)),
        phy_(phy),
        rendering_(rendering),
        cfg_(cfg),
        predictor_(predictor),
        mobility_rng_(Rng::stream(cfg.seed, "mobility")),
        channel_rng_(Rng::stream(cfg.seed, "channel")) {
    if (topo_.user_count() > topo_.mec_count())
      throw std::invalid_argument("Environment: requires K_VR <= B so that M + U <= B holds");
    if (cfg_.prediction && predictor_ == nullptr)
      throw std::invalid_argument("Environment: prediction mode requires a predictor");
    reset();
  }

  void reset() {
    slot_ = 0;
    mobility_rng_ = Rng::stream(cfg_.seed, "mobility");
    channel_rng_ = Rng::stream(cfg_.seed, "channel");
    eyes_.clear();
    windows_.clear();
    for (int k = 0; k < topo_.user_count(); ++k) {
      EyeState e;
      e.x = mobility_rng_.uniform(0.0, cfg_.grid.width());
      e.y = mobility_rng_.uniform(0.0, cfg_.grid.height());
      e.diffusion = cfg_.diffusion;
      e.current_fov = fov_of(e.x, e.y, cfg_.grid);
      eyes_.push_back(e);
      ObservationWindow w;
      w.capacity = predictor_ != nullptr ? predictor_->window : 1;
      windows_.push_back(w);
    }
    if (cfg_.freeze_channels)
      frozen_ = ChannelRealization::sample(topo_, 0, channel_rng_);
    refresh_state();
    log_.clear();
  }

  const EnvState& state() const { return state_; }
  const NetworkTopology& topology() const { return topo_; }
  const PhyParams& phy() const { return phy_; }
  const RenderingParams& rendering_params() const { return rendering_; }
  Scheme scheme() const { return cfg_.scheme; }
  bool prediction() const { return cfg_.prediction; }
  int slot() const { return slot_; }
  const std::vector<EpisodeLogRow>& log() const { return log_; }

  bool action_valid(const ActionVector& a, std::string* why = nullptr) const {
    const int B = topo_.mec_count();
    if (static_cast<int>(a.serving.size()) != topo_.user_count())
      return explain(why, "serving size mismatch");
    for (int s : a.serving)
      if (s < 0 || s >= B) return explain(why, "serving MEC out of range");
    if (cfg_.scheme == Scheme::MecMigration) {
      if (static_cast<int>(a.rendering.size()) != state_.n_fov)
        return explain(why, "rendering size mismatch");
      for (int q = 0; q < state_.n_fov; ++q) {
        bool requested = false;
        bool serves_q = false;
        for (int k = 0; k < state_.users; ++k)
          if (state_.fovs[k] == q) {
            requested = true;
            if (a.serving[k] == a.rendering[q]) serves_q = true;
          }
        if (requested && (a.rendering[q] < 0 || a.rendering[q] >= B || !serves_q))
          return explain(why, "rendering MEC must serve a group requesting that FoV");
        if (!requested && a.rendering[q] != -1)
          return explain(why, "rendering set for an unrequested FoV");
      }
    }
    return true;
  }

  /// All valid joint actions for the current state (small instances only).
  std::vector<ActionVector> enumerate_actions() const {
    const int B = topo_.mec_count();
    const int K = topo_.user_count();
    std::vector<ActionVector> out;
    std::vector<int> serving(K, 0);
    enumerate_serving(0, B, K, serving, out);
    return out;
  }

  /// Nearest-MEC baseline: lowest-index tie-break; the rendering MEC of each
  /// FoV is the lowest-index serving MEC of that FoV.
  ActionVector nearest_association() const {
    ActionVector a;
    a.serving.resize(topo_.user_count());
    for (int k = 0; k < topo_.user_count(); ++k) {
      int best = 0;
      double bd = topo_.user_mec_distance(k, 0);
      for (int b = 1; b < topo_.mec_count(); ++b) {
        const double d = topo_.user_mec_distance(k, b);
        if (d < bd) {
          bd = d;
          best = b;
        }
      }
      a.serving[k] = best;
    }
    a.rendering.assign(state_.n_fov, -1);
    for (int q = 0; q < state_.n_fov; ++q) {
      int lowest = -1;
      for (int k = 0; k < state_.users; ++k)
        if (state_.fovs[k] == q && (lowest < 0 || a.serving[k] < lowest)) lowest = a.serving[k];
      a.rendering[q] = lowest;
    }
    if (cfg_.scheme != Scheme::MecMigration) a.rendering.clear();
    return a;
  }

  StepResult step(const ActionVector& action) {
    std::string why;
    if (!action_valid(action, &why)) throw std::invalid_argument("Environment::step: invalid action: " + why);

    const GroupAssignment ga = group_users(action.serving, state_.fovs, topo_.mec_count());
    const ChannelRealization channels =
        cfg_.freeze_channels ? *frozen_ : ChannelRealization::sample(topo_, slot_, channel_rng_);

    std::vector<TxGroup> groups = ga.groups;
    for (TxGroup& g : groups) {
      std::vector<CxVec> members;
      const double e = g.multicast ? phy_.pathloss_exponent_mul : phy_.pathloss_exponent_uni;
      for (int k : g.users) members.push_back(channels.faded(k, g.mec, e, phy_));
      g.precoder = mrt_precoder(members, phy_.tx_power_per_group);
    }

    StepResult res;
    res.latency.resize(topo_.user_count());
    res.psnr_values.resize(topo_.user_count());
    res.true_fovs.resize(topo_.user_count());
    for (int k = 0; k < topo_.user_count(); ++k) res.true_fovs[k] = eyes_[k].current_fov.value;

    for (int k = 0; k < topo_.user_count(); ++k) {
      const int gi = ga.user_group[k];
      const double sinr = sinr_for(k, gi, groups, channels, phy_);
      const double down_rate = rate(sinr, phy_);
      LatencyInputs in;
      in.params = &rendering_;
      in.downlink_rate = down_rate;
      RenderRole role = RenderRole::RendersItself;
      int rendering_mec = -1;
      if (cfg_.scheme == Scheme::VrDevice) {
        in.render_cycles_per_bit = topo_.users[k].device_cycles_per_bit;
        in.render_compute = topo_.users[k].device_compute;
      } else {
        rendering_mec = action.serving[k];
        if (cfg_.scheme == Scheme::MecMigration) rendering_mec = action.rendering[state_.fovs[k]];
        in.render_cycles_per_bit = topo_.mecs[rendering_mec].cycles_per_bit;
        in.render_compute = topo_.mecs[rendering_mec].compute;
        if (rendering_mec != action.serving[k]) {
          role = RenderRole::ReceivesMigration;
          in.fiber_distance = topo_.fiber_distance[action.serving[k]][rendering_mec];
          in.fiber_rate = topo_.fiber_rate;
        }
      }
      res.latency[k] = interaction_latency(cfg_.scheme, cfg_.prediction, role, in);
      QoeSample q = psnr(res.latency[k].total, rendering_.latency_threshold);
      if (cfg_.prediction && state_.fovs[k] != res.true_fovs[k]) {
        // a mispredicted FoV cannot satisfy the request
        q.mse = 1.0;
        q.psnr = 10.0 * std::log10((1.0 + q.delta) / (1.0 + q.delta));
      }
      res.psnr_values[k] = q.psnr;
      res.reward += q.psnr;

      log_.push_back(EpisodeLogRow{slot_, k, action.serving[k], rendering_mec, state_.fovs[k],
                                   res.true_fovs[k], res.latency[k], q.psnr});
    }

    // observe truth, then advance the eye process
    for (int k = 0; k < topo_.user_count(); ++k) windows_[k].push(eyes_[k].current_fov.value);
    for (int k = 0; k < topo_.user_count(); ++k) eyes_[k] = step_eye(eyes_[k], cfg_.grid, mobility_rng_);
    ++slot_;
    refresh_state();
    res.next = state_;
    return res;
  }

  void write_log_csv(const std::string& path) const {
    std::ostringstream out;
    out << "slot,user,serving_mec,rendering_mec,fov_pred,fov_true,t_uplink,t_render,t_migration,"
           "t_downlink,t_total,psnr\n";
    out.precision(17);
    for (const EpisodeLogRow& r : log_)
      out << r.slot << ',' << r.user << ',' << r.serving_mec << ',' << r.rendering_mec << ','
          << r.fov_pred << ',' << r.fov_true << ',' << r.latency.uplink << ',' << r.latency.render
          << ',' << r.latency.migration << ',' << r.latency.downlink << ',' << r.latency.total
          << ',' << r.psnr_value << '\n';
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_log_csv: cannot open " + path);
    f << out.str();
  }

 private:
  static bool explain(std::string* why, const char* msg) {
    if (why != nullptr) *why = msg;
    return false;
  }

  void refresh_state() {
    std::vector<int> fovs(topo_.user_count());
    for (int k = 0; k < topo_.user_count(); ++k) {
      if (cfg_.prediction)
        fovs[k] = predict_next(*predictor_, windows_[k]).fov;
      else
        fovs[k] = eyes_[k].current_fov.value;  // uplink truth
    }
    state_ = build_state(topo_, fovs, cfg_.grid.n_fov(), cfg_.f_mec_max);
  }

  void enumerate_serving(int k, int B, int K, std::vector<int>& serving,
                         std::vector<ActionVector>& out) const {
    if (k == K) {
      if (cfg_.scheme != Scheme::MecMigration) {
        out.push_back(ActionVector{serving, {}});
        return;
      }
      std::vector<ActionVector> partial{ActionVector{serving, std::vector<int>(state_.n_fov, -1)}};
      for (int q = 0; q < state_.n_fov; ++q) {
        std::vector<int> hosts;
        for (int u = 0; u < K; ++u)
          if (state_.fovs[u] == q &&
              std::find(hosts.begin(), hosts.end(), serving[u]) == hosts.end())
            hosts.push_back(serving[u]);
        if (hosts.empty()) continue;
        std::sort(hosts.begin(), hosts.end());
        std::vector<ActionVector> expanded;
        for (const ActionVector& a : partial)
          for (int h : hosts) {
            ActionVector b = a;
            b.rendering[q] = h;
            expanded.push_back(std::move(b));
          }
        partial = std::move(expanded);
      }
      for (ActionVector& a : partial) out.push_back(std::move(a));
      return;
    }
    for (int b = 0; b < B; ++b) {
      serving[k] = b;
      enumerate_serving(k + 1, B, K, serving, out);
    }
  }

  NetworkTopology topo_;
  PhyParams phy_;
  RenderingParams rendering_;
  EnvConfig cfg_;
  const PredictorModel* predictor_ = nullptr;
  Rng mobility_rng_;
  Rng channel_rng_;
  std::vector<EyeState> eyes_;
  std::vector<ObservationWindow> windows_;
  std::optional<ChannelRealization> frozen_;
  EnvState state_;
  int slot_ = 0;
  std::vector<EpisodeLogRow> log_;
};

/// Discounted return, slots indexed from 1: sum gamma^(t-1) R_t.
inline double episode_return(const std::vector<double>& rewards, double gamma) {
  double v = 0.0;
  double w = 1.0;
  for (double r : rewards) {
    v += w * r;
    w *= gamma;
  }
  return v;
}

}  // namespace vrsim
