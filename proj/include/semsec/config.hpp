#pragma once

#include "semsec/ddpg.hpp"
#include "semsec/trainer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace semsec {

struct DataConfig {
  std::string source = "synthetic";  // synthetic | cifar10 | flat_u8
  std::string train_path;
  std::string test_path;
  int height = 32;
  int width = 32;
  int channels = 3;
  Index train_size = 2000;
  Index test_size = 500;
  std::uint64_t seed = 7;   // synthetic generator only
  std::string corpus_path;  // empty: bundled corpus

  void validate() const;
};

struct SweepConfig {
  std::vector<double> snr_grid{0, 5, 10, 15, 20};
  std::vector<int> cu_grid{1, 2, 3, 4, 5};
  std::vector<std::uint64_t> seeds;  // empty: the master seed only
};

struct ExperimentConfig {
  EnvConfig env;
  StagePlan plan;
  ddpg::AgentConfig agent;
  DataConfig data;
  SweepConfig sweep;
  std::uint64_t seed = 1;
  double scale = 1.0;  // epoch multiplier applied by effective_plan()
  std::string out_dir = "runs";

  void validate() const;
  StagePlan effective_plan() const { return plan.scaled(scale); }
  std::vector<std::uint64_t> sweep_seeds() const {
    return sweep.seeds.empty() ? std::vector<std::uint64_t>{seed} : sweep.seeds;
  }

  // Full-size settings.
  static ExperimentConfig defaults();
  // Desk-scale settings used by the property runs: epochs x0.04, T=60, K=5,
  // agent minibatch 32 so the agent starts learning inside the run.
  static ExperimentConfig ci();
};

/// YAML with one mapping per section (channel, env, arch, plan, agent, data,
/// sweep) plus top-level seed, scale and out_dir. Missing keys keep their
/// defaults; unknown keys and bad values raise ConfigError naming the line.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::string& path);

// Renders every key; parse_config(render_config(c)) reproduces c.
std::string render_config(const ExperimentConfig& cfg);

// "0,10,20" style lists for the CLI grid flags.
std::vector<double> parse_double_list(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);

}  // namespace semsec
