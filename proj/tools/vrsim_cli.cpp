// Command-line harness: predictor training, controller training/evaluation,
// parameter sweeps, and cross-run comparison reports.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vrsim/experiment.hpp"

namespace {

vrsim::ExperimentConfig load_or_default(const std::string& config_path) {
  if (config_path.empty()) {
    vrsim::ExperimentConfig cfg;
    cfg.finalize();
    return cfg;
  }
  return vrsim::load_config(config_path);
}

void apply_overrides(vrsim::ExperimentConfig& cfg, const std::string& seed,
                     const std::string& algorithm, const std::string& scheme,
                     const std::string& prediction) {
  if (!seed.empty()) cfg.seed = std::stoull(seed);
  if (!algorithm.empty()) cfg.agent.algorithm = vrsim::parse_algorithm(algorithm);
  if (!scheme.empty()) cfg.scheme = vrsim::parse_scheme(scheme);
  if (!prediction.empty()) cfg.prediction = prediction == "true" || prediction == "1";
  vrsim::validate_config(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MEC-assisted wireless VR simulator"};
  app.require_subcommand(1);
  app.fallthrough();  // allow the global options after the subcommand name

  std::string config_path, out_dir = "out", seed, algorithm, scheme, prediction;
  app.add_option("--config", config_path, "configuration file")->capture_default_str();
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--algorithm", algorithm, "cdqn|ddqn|cac|dac|nearest");
  app.add_option("--scheme", scheme, "mec-no-migration|mec-migration|vr-device");
  app.add_option("--prediction", prediction, "true|false");

  CLI::App* train_predictor = app.add_subcommand("train-predictor", "train the FoV predictor alone");
  CLI::App* train_agent = app.add_subcommand("train-agent", "train a controller and emit metrics");
  CLI::App* evaluate = app.add_subcommand("evaluate", "run the non-learning baseline (or any "
                                          "algorithm) and emit metrics");
  CLI::App* sweep = app.add_subcommand("sweep", "run one experiment per axis value");
  std::string axis;
  std::vector<std::string> values;
  sweep->add_option("--axis", axis, "parameter to sweep, section.key form")->required();
  sweep->add_option("--values", values, "axis values")->required();
  CLI::App* report = app.add_subcommand("report", "rank runs by mean final reward");
  std::vector<std::string> inputs;
  report->add_option("--inputs", inputs, "label=metrics.csv[,metrics.csv...] entries")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      std::vector<std::pair<std::string, std::vector<std::string>>> labelled;
      for (const std::string& item : inputs) {
        const std::size_t eq = item.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("expected label=files: " + item);
        std::vector<std::string> files;
        std::string rest = item.substr(eq + 1);
        std::size_t pos = 0;
        while (pos <= rest.size()) {
          const std::size_t comma = rest.find(',', pos);
          files.push_back(rest.substr(pos, comma - pos));
          if (comma == std::string::npos) break;
          pos = comma + 1;
        }
        labelled.emplace_back(item.substr(0, eq), files);
      }
      const auto rows = vrsim::compare_report(labelled);
      const std::string table = vrsim::report_table(rows);
      std::filesystem::create_directories(out_dir);
      std::ofstream(out_dir + "/report.csv") << table;
      std::cout << table;
      return 0;
    }

    vrsim::ExperimentConfig cfg = load_or_default(config_path);
    apply_overrides(cfg, seed, algorithm, scheme, prediction);

    if (train_predictor->parsed()) {
      cfg.prediction = true;
      // a one-episode nearest run exercises only topology + predictor training
      vrsim::ExperimentConfig p = cfg;
      p.agent.algorithm = vrsim::Algorithm::Nearest;
      p.agent.episodes = 1;
      p.agent.slots = std::max(p.agent.slots, p.predictor.window + 1);
      const auto res = vrsim::run_experiment(p, out_dir);
      std::cout << "held-out accuracy: " << res.predictor_accuracy << "%\n";
      std::cout << "checkpoint: " << out_dir << "/predictor.ckpt\n";
      return 0;
    }
    if (train_agent->parsed() || evaluate->parsed()) {
      if (evaluate->parsed() && algorithm.empty()) cfg.agent.algorithm = vrsim::Algorithm::Nearest;
      const auto res = vrsim::run_experiment(cfg, out_dir);
      std::cout << "episodes: " << res.rows.size() << "\n";
      if (!res.rows.empty()) {
        const vrsim::MetricsRow& last = res.rows.back();
        std::cout << "final reward: " << last.total_reward
                  << "  avg QoE/user: " << last.avg_qoe_per_user
                  << "  avg latency: " << last.avg_interaction_latency << " s\n";
      }
      std::cout << "metrics: " << res.metrics_path << "\n";
      return 0;
    }
    if (sweep->parsed()) {
      const auto points = vrsim::run_sweep(cfg, axis, values, out_dir);
      std::cout << "sweep points: " << points.size() << "\n";
      std::cout << "summary: " << out_dir << "/summary.csv\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
