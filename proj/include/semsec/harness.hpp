#pragma once

#include "semsec/config.hpp"
#include "semsec/trainer.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace semsec {

struct Dataset {
  std::shared_ptr<const ImageSet> train;
  std::shared_ptr<const ImageSet> test;
  std::shared_ptr<const TextCorpus> corpus;
};

Dataset load_dataset(const ExperimentConfig& cfg);

// PSNR on the test set of always predicting the mean training image.
double constant_mean_psnr(const Dataset& data);

struct RunOptions {
  std::string out_dir;           // empty: no files are written
  bool checkpoints = true;
  std::ostream* progress = nullptr;
};

struct TrainingRun {
  PolicyLog policy;
  FinalModel final;
  double constant_mean_psnr_db = 0.0;
};

/// The five stages for one seed. With an output directory this writes
/// epochs.csv, decisions.csv, stage<n>.ckpt after every stage and agent.ckpt.
TrainingRun run_training(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed, const RunOptions& opts);

/// Stage 4 and 5 continued from a model trained through stage 3.
TrainingRun continue_training(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t env_seed,
                              std::uint64_t agent_seed, SemComModel model, const RunOptions& opts);

struct SweepRow {
  double x = 0.0;
  double psnr_leg_db = 0.0;
  double psnr_eve_db = 0.0;
  double gap_db = 0.0;
  std::uint64_t seed = 0;
};

struct SweepResult {
  std::string x_label;
  std::vector<SweepRow> rows;

  void add(double x, double psnr_leg_db, double psnr_eve_db, std::uint64_t seed);
};

/// One shared stage 1-3 model per seed (trained at the configured SNR), then
/// stages 4 and 5 at every grid point with SNR_leg = SNR_eve = x.
SweepResult sweep_snr(const ExperimentConfig& cfg, const Dataset& data, const RunOptions& opts);

/// Full five-stage runs per CU value (network shapes change with CU). The x
/// column holds the compression ratio CU/96.
SweepResult sweep_cr(const ExperimentConfig& cfg, const Dataset& data, const RunOptions& opts);

EvalReport run_baseline_svd(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed,
                            const RunOptions& opts);

/// Loads a checkpoint written by run_training and evaluates it on the test set.
EvalReport evaluate_checkpoint(const ExperimentConfig& cfg, const Dataset& data, const std::string& path);

// Shortest decimal text that reads back to the same double.
std::string format_number(double x);

void emit_csv(const SweepResult& result, const std::string& path);
// Standalone SVG line chart of both PSNR series against x.
void emit_plot(const SweepResult& result, const std::string& path, const std::string& title);
std::string render_plot(const SweepResult& result, const std::string& title);

}  // namespace semsec
