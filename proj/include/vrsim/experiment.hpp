#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vrsim/agents.hpp"
#include "vrsim/config.hpp"
#include "vrsim/env.hpp"
#include "vrsim/predictor.hpp"

namespace vrsim {

/// One metrics line per episode. wall_time is the cumulative count of
/// parameter-update steps, a deterministic proxy for training effort (real
/// timing would break reproducible output); it stays 0 for the non-learning
/// baseline.
struct MetricsRow {
  int episode = 0;
  double total_reward = 0.0;
  double avg_qoe_per_user = 0.0;
  double avg_interaction_latency = 0.0;
  double prediction_accuracy = 0.0;
  long long wall_time = 0;
};

struct ExperimentResult {
  std::vector<MetricsRow> rows;
  double predictor_accuracy = 0.0;  // held-out percent, 0 when prediction is off
  std::string metrics_path;
};

namespace detail {
inline void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("write_atomic: cannot open " + tmp);
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "episode,total_reward,avg_qoe_per_user,avg_interaction_latency,prediction_accuracy,wall_time\n";
  for (const MetricsRow& r : rows)
    out << r.episode << ',' << r.total_reward << ',' << r.avg_qoe_per_user << ','
        << r.avg_interaction_latency << ',' << r.prediction_accuracy << ',' << r.wall_time << '\n';
  return out.str();
}

inline ParameterSet prefixed(const ParameterSet& p, const std::string& prefix) {
  ParameterSet out;
  for (const Array& a : p.arrays) {
    Array& c = out.add(prefix + a.name, a.shape);
    c.data = a.data;
  }
  return out;
}

inline ParameterSet merged(const ParameterSet& a, const ParameterSet& b) {
  ParameterSet out = a;
  for (const Array& arr : b.arrays) out.arrays.push_back(arr);
  return out;
}
}  // namespace detail

inline std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_metrics_csv: cannot open " + path);
  std::vector<MetricsRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f;
    MetricsRow r;
    std::getline(ls, f, ',');
    r.episode = std::stoi(f);
    std::getline(ls, f, ',');
    r.total_reward = std::stod(f);
    std::getline(ls, f, ',');
    r.avg_qoe_per_user = std::stod(f);
    std::getline(ls, f, ',');
    r.avg_interaction_latency = std::stod(f);
    std::getline(ls, f, ',');
    r.prediction_accuracy = std::stod(f);
    std::getline(ls, f, ',');
    r.wall_time = std::stoll(f);
    rows.push_back(r);
  }
  return rows;
}

/// Runs one full experiment: builds the topology, optionally trains the FoV
/// predictor, trains/evaluates the configured controller, and writes
/// metrics.csv plus final checkpoints into out_dir. Deterministic given
/// (config, seed): re-runs produce byte-identical files.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  validate_config(cfg);
  std::filesystem::create_directories(out_dir);

  Rng topo_rng = Rng::stream(cfg.seed, "topology");
  const NetworkTopology topo = build_topology(cfg.topology, topo_rng);

  std::optional<TrainedPredictor> predictor;
  if (cfg.prediction) {
    Rng trace_rng = Rng::stream(cfg.seed, "predictor-data");
    std::vector<EyeState> eyes(cfg.topology.users);
    for (EyeState& e : eyes) {
      e.x = trace_rng.uniform(0.0, cfg.grid.width());
      e.y = trace_rng.uniform(0.0, cfg.grid.height());
      e.diffusion = cfg.diffusion;
    }
    const auto traces = generate_trace(eyes, cfg.grid, cfg.predictor_trace_slots, trace_rng);
    Rng pred_rng = Rng::stream(cfg.seed, "predictor-init");
    predictor = train_predictor(traces, cfg.predictor, pred_rng);
    predictor->model.checkpoint().save(out_dir + "/predictor.ckpt");
  }

  EnvConfig base_env;
  base_env.scheme = cfg.scheme;
  base_env.prediction = cfg.prediction;
  base_env.grid = cfg.grid;
  base_env.diffusion = cfg.diffusion;
  base_env.f_mec_max = cfg.topology.f_mec_max;
  base_env.freeze_channels = cfg.freeze_channels;

  const PredictorModel* model = predictor ? &predictor->model : nullptr;
  auto make_env = [&](std::uint64_t ep_seed) {
    EnvConfig ec = base_env;
    ec.seed = ep_seed;
    return Environment(topo, cfg.phy, cfg.rendering, ec, model);
  };

  Rng ep_seed_rng = Rng::stream(cfg.seed, "episode-seeds");
  std::vector<std::uint64_t> ep_seeds;
  ep_seeds.reserve(cfg.agent.episodes);
  for (int e = 0; e < cfg.agent.episodes; ++e) ep_seeds.push_back(ep_seed_rng.raw());

  const int slots = cfg.agent.slots;
  const int users = cfg.topology.users;
  const int mecs = cfg.topology.mecs;
  const int n_fov = cfg.grid.n_fov();
  const HeadLayout layout{users, mecs, n_fov, cfg.scheme == Scheme::MecMigration};
  const int global_dim = users * n_fov + users * mecs + mecs;
  const int local_dim = users * n_fov + users + 1;
  const std::size_t total_steps = static_cast<std::size_t>(cfg.agent.episodes) * slots;

  ExperimentResult result;
  if (predictor) result.predictor_accuracy = predictor->final_accuracy;
  long long updates = 0;

  auto finish_episode = [&](int e, const Environment& env, double total_reward) {
    MetricsRow r;
    r.episode = e;
    r.total_reward = total_reward;
    double lat = 0.0;
    int hits = 0, n = 0;
    for (const EpisodeLogRow& row : env.log()) {
      lat += row.latency.total;
      hits += row.fov_pred == row.fov_true ? 1 : 0;
      ++n;
    }
    r.avg_qoe_per_user = total_reward / (static_cast<double>(slots) * users);
    r.avg_interaction_latency = lat / n;
    r.prediction_accuracy = 100.0 * hits / n;
    r.wall_time = updates;
    result.rows.push_back(r);
  };

  Rng init_rng = Rng::stream(cfg.seed, "agent-init");
  Rng explore = Rng::stream(cfg.seed, "exploration");
  Rng replay_rng = Rng::stream(cfg.seed, "replay");

  switch (cfg.agent.algorithm) {
    case Algorithm::Nearest: {
      for (int e = 0; e < cfg.agent.episodes; ++e) {
        Environment env = make_env(ep_seeds[e]);
        double total_reward = 0.0;
        for (int t = 0; t < slots; ++t) total_reward += env.step(env.nearest_association()).reward;
        finish_episode(e, env, total_reward);
      }
      break;
    }
    case Algorithm::CentralizedDqn: {
      DqnAgent agent(global_dim, layout, cfg.agent.dqn, init_rng);
      std::size_t gstep = 0;
      for (int e = 0; e < cfg.agent.episodes; ++e) {
        Environment env = make_env(ep_seeds[e]);
        double total_reward = 0.0;
        for (int t = 0; t < slots; ++t) {
          const EnvState s = env.state();
          const Vec enc = s.encode_global();
          const double eps = cfg.agent.eps.at(gstep, total_steps);
          const ActionVector a = agent.select_action(enc, s.fovs, eps, explore);
          const StepResult res = env.step(a);
          total_reward += res.reward;
          agent.buffer().push(
              Transition{enc, a, res.reward, res.next.encode_global(), res.next.fovs, t + 1 == slots});
          if (agent.buffer().size() >= cfg.agent.dqn.batch_size) {
            agent.update(agent.buffer().sample(cfg.agent.dqn.batch_size, replay_rng));
            ++updates;
          }
          ++gstep;
        }
        finish_episode(e, env, total_reward);
      }
      agent.q_network().params.save(out_dir + "/agent.ckpt");
      break;
    }
    case Algorithm::DistributedDqn: {
      std::vector<DqnAgent> agents;
      agents.reserve(mecs);
      for (int b = 0; b < mecs; ++b) agents.emplace_back(local_dim, layout, cfg.agent.dqn, init_rng);
      std::vector<const ParameterSet*> qs;
      for (DqnAgent& a : agents) qs.push_back(&a.q_network().params);
      ParameterSet central = average_parameters(qs);
      std::size_t gstep = 0;
      for (int e = 0; e < cfg.agent.episodes; ++e) {
        for (DqnAgent& a : agents) {
          a.q_network().params = central;
          a.sync_target();
        }
        Environment env = make_env(ep_seeds[e]);
        double total_reward = 0.0;
        for (int t = 0; t < slots; ++t) {
          const EnvState s = env.state();
          const double eps = cfg.agent.eps.at(gstep, total_steps);
          Vec mean(layout.output_dim(), 0.0);
          for (int b = 0; b < mecs; ++b) {
            const Vec hv = agents[b].head_values(s.encode_local(b));
            for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += hv[i] / mecs;
          }
          const ActionVector a = explore.uniform() < eps ? random_action(s.fovs, layout, explore)
                                                         : greedy_action(mean, s.fovs, layout);
          const StepResult res = env.step(a);
          total_reward += res.reward;
          for (int b = 0; b < mecs; ++b) {
            double local_reward = 0.0;
            for (int k = 0; k < users; ++k)
              if (a.serving[k] == b) local_reward += res.psnr_values[k];
            agents[b].buffer().push(Transition{s.encode_local(b), a, local_reward,
                                               res.next.encode_local(b), res.next.fovs,
                                               t + 1 == slots});
            if (agents[b].buffer().size() >= cfg.agent.dqn.batch_size) {
              agents[b].update(agents[b].buffer().sample(cfg.agent.dqn.batch_size, replay_rng));
              ++updates;
            }
          }
          ++gstep;
        }
        central = average_parameters(qs);
        finish_episode(e, env, total_reward);
      }
      central.save(out_dir + "/agent.ckpt");
      break;
    }
    case Algorithm::CentralizedAc: {
      AcAgent agent(global_dim, layout, cfg.agent.ac, init_rng);
      for (int e = 0; e < cfg.agent.episodes; ++e) {
        Environment env = make_env(ep_seeds[e]);
        double total_reward = 0.0;
        for (int t = 0; t < slots; ++t) {
          const EnvState s = env.state();
          const Vec enc = s.encode_global();
          const ActionVector a = agent.sample_action(enc, s.fovs, explore);
          const StepResult res = env.step(a);
          total_reward += res.reward;
          agent.update(
              Transition{enc, a, res.reward, res.next.encode_global(), res.next.fovs, t + 1 == slots},
              s.fovs);
          ++updates;
        }
        finish_episode(e, env, total_reward);
      }
      detail::merged(detail::prefixed(agent.actor().params, "actor."),
                     detail::prefixed(agent.critic().params, "critic."))
          .save(out_dir + "/agent.ckpt");
      break;
    }
    case Algorithm::DistributedAc: {
      std::vector<AcAgent> agents;
      agents.reserve(mecs);
      for (int b = 0; b < mecs; ++b) agents.emplace_back(local_dim, layout, cfg.agent.ac, init_rng);
      std::vector<const ParameterSet*> critics;
      for (AcAgent& a : agents) critics.push_back(&a.critic().params);
      ParameterSet central_critic = average_parameters(critics);
      for (int e = 0; e < cfg.agent.episodes; ++e) {
        for (AcAgent& a : agents) a.critic().params = central_critic;
        Environment env = make_env(ep_seeds[e]);
        double total_reward = 0.0;
        for (int t = 0; t < slots; ++t) {
          const EnvState s = env.state();
          Vec mean(layout.output_dim(), 0.0);
          for (int b = 0; b < mecs; ++b) {
            const Vec logits = agents[b].actor().forward(s.encode_local(b));
            for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += logits[i] / mecs;
          }
          const ActionVector a = sample_from_logits(mean, s.fovs, layout, explore);
          const StepResult res = env.step(a);
          total_reward += res.reward;
          for (int b = 0; b < mecs; ++b) {
            double local_reward = 0.0;
            for (int k = 0; k < users; ++k)
              if (a.serving[k] == b) local_reward += res.psnr_values[k];
            agents[b].update(Transition{s.encode_local(b), a, local_reward, res.next.encode_local(b),
                                        res.next.fovs, t + 1 == slots},
                             s.fovs);
            ++updates;
          }
        }
        central_critic = average_parameters(critics);
        finish_episode(e, env, total_reward);
      }
      central_critic.save(out_dir + "/agent.ckpt");
      break;
    }
  }

  result.metrics_path = out_dir + "/metrics.csv";
  detail::write_atomic(result.metrics_path, detail::metrics_csv(result.rows));
  return result;
}

struct SweepPoint {
  std::string value;
  std::string dir;
  MetricsRow final_row;
};

/// Runs one experiment per axis value ("section.key" form) under its own
/// subdirectory and writes summary.csv (value, final avg QoE, final avg
/// latency) in input order.
inline std::vector<SweepPoint> run_sweep(const ExperimentConfig& base, const std::string& axis,
                                         const std::vector<std::string>& values,
                                         const std::string& out_dir) {
  if (values.empty()) throw std::invalid_argument("run_sweep: empty value list");
  const std::size_t dot = axis.find('.');
  if (dot == std::string::npos)
    throw std::invalid_argument("run_sweep: axis must be section.key, got " + axis);
  const std::string section = axis.substr(0, dot);
  const std::string key = axis.substr(dot + 1);
  std::filesystem::create_directories(out_dir);
  std::vector<SweepPoint> points;
  for (const std::string& v : values) {
    ExperimentConfig cfg = base;
    apply_config_key(cfg, section, key, v);
    cfg.finalize();
    validate_config(cfg);
    SweepPoint p;
    p.value = v;
    p.dir = out_dir + "/" + key + "=" + v;
    const ExperimentResult res = run_experiment(cfg, p.dir);
    if (res.rows.empty()) throw std::runtime_error("run_sweep: experiment produced no metrics");
    p.final_row = res.rows.back();
    points.push_back(p);
  }
  std::ostringstream out;
  out.precision(17);
  out << "value,final_avg_qoe,final_avg_latency\n";
  for (const SweepPoint& p : points)
    out << p.value << ',' << p.final_row.avg_qoe_per_user << ','
        << p.final_row.avg_interaction_latency << '\n';
  detail::write_atomic(out_dir + "/summary.csv", out.str());
  return points;
}

struct ReportRow {
  std::string name;
  double mean_final_reward = 0.0;
  std::vector<double> per_seed;
};

/// Ranks labelled runs by mean final-episode reward (descending), breaking
/// ties by name order.
inline std::vector<ReportRow> compare_report(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& inputs) {
  if (inputs.empty()) throw std::invalid_argument("compare_report: no inputs");
  std::vector<ReportRow> rows;
  for (const auto& [name, files] : inputs) {
    if (files.empty()) throw std::invalid_argument("compare_report: no metrics files for " + name);
    ReportRow r;
    r.name = name;
    for (const std::string& f : files) {
      const std::vector<MetricsRow> m = read_metrics_csv(f);
      if (m.empty()) throw std::runtime_error("compare_report: empty metrics in " + f);
      r.per_seed.push_back(m.back().total_reward);
    }
    for (double v : r.per_seed) r.mean_final_reward += v;
    r.mean_final_reward /= static_cast<double>(r.per_seed.size());
    rows.push_back(std::move(r));
  }
  std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    if (a.mean_final_reward != b.mean_final_reward) return a.mean_final_reward > b.mean_final_reward;
    return a.name < b.name;
  });
  return rows;
}

inline std::string report_table(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "algorithm,mean_final_reward,per_seed\n";
  for (const ReportRow& r : rows) {
    out << r.name << ',' << r.mean_final_reward << ',';
    for (std::size_t i = 0; i < r.per_seed.size(); ++i)
      out << (i ? ";" : "") << r.per_seed[i];
    out << '\n';
  }
  return out.str();
}

}  // namespace vrsim
