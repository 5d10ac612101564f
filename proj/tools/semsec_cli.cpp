// Command-line front end: training, evaluation, sweeps and self-checks.
#include "semsec/config.hpp"
#include "semsec/harness.hpp"
#include "semsec/selftest.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace semsec;

namespace {

enum Exit { kOk = 0, kConfigError = 1, kNumericalError = 2, kCheckFailed = 3 };

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<double> scale;
  std::string snr_grid;
  std::string cu_grid;
  bool quiet = false;
};

ExperimentConfig resolve(const Flags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig::defaults() : load_config(f.config);
  if (f.seed) {
    cfg.seed = *f.seed;
    cfg.sweep.seeds.clear();
  }
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.scale) cfg.scale = *f.scale;
  if (!f.snr_grid.empty()) cfg.sweep.snr_grid = parse_double_list(f.snr_grid);
  if (!f.cu_grid.empty()) cfg.sweep.cu_grid = parse_int_list(f.cu_grid);
  cfg.validate();
  return cfg;
}

RunOptions options(const ExperimentConfig& cfg, const Flags& f, const std::string& sub) {
  RunOptions o;
  o.out_dir = (fs::path(cfg.out_dir) / sub).string();
  o.progress = f.quiet ? nullptr : &std::cerr;
  return o;
}

void write_config_copy(const ExperimentConfig& cfg, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream(fs::path(dir) / "config.yaml") << render_config(cfg);
}

void print_report(const char* what, const EvalReport& r) {
  std::printf("%s: psnr_leg_db=%.4f psnr_eve_db=%.4f gap_db=%.4f\n", what, r.psnr_leg_db, r.psnr_eve_db,
              r.psnr_leg_db - r.psnr_eve_db);
}

int emit_sweep(const SweepResult& res, const ExperimentConfig& cfg, const std::string& name, const std::string& title) {
  const auto csv = (fs::path(cfg.out_dir) / (name + ".csv")).string();
  const auto svg = (fs::path(cfg.out_dir) / (name + ".svg")).string();
  emit_csv(res, csv);
  emit_plot(res, svg, title);
  for (const auto& r : res.rows) {
    std::printf("x=%s seed=%llu psnr_leg_db=%.4f psnr_eve_db=%.4f gap_db=%.4f\n", format_number(r.x).c_str(),
                static_cast<unsigned long long>(r.seed), r.psnr_leg_db, r.psnr_eve_db, r.gap_db);
  }
  std::printf("wrote %s and %s\n", csv.c_str(), svg.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Secure semantic communication simulator"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "Experiment config (YAML); defaults when omitted");
  app.add_option("--seed", f.seed, "Master seed (overrides config seed and sweep seeds)");
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--scale", f.scale, "Epoch scale factor for stages 1-3 and 5");
  app.add_option("--snr-grid", f.snr_grid, "Comma-separated SNR grid in dB");
  app.add_option("--cu-grid", f.cu_grid, "Comma-separated CU grid");
  app.add_flag("-q,--quiet", f.quiet, "No progress output on stderr");

  auto* train = app.add_subcommand("train", "Run the five training stages");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test set");
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint path (default: <out>/train/stage5.ckpt)");
  auto* snr = app.add_subcommand("sweep-snr", "PSNR against channel SNR");
  auto* cr = app.add_subcommand("sweep-cr", "PSNR against compression ratio");
  auto* selftest = app.add_subcommand("selftest", "Run the built-in oracle checks");
  auto* baseline = app.add_subcommand("baseline-svd", "SVD-precoded reference without jamming");
  auto* init = app.add_subcommand("init-config", "Print a fully populated config");
  std::string preset = "default";
  init->add_option("--preset", preset, "default | ci")->check(CLI::IsMember({"default", "ci"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (init->parsed()) {
      ExperimentConfig cfg = preset == "ci" ? ExperimentConfig::ci() : ExperimentConfig::defaults();
      if (f.seed) cfg.seed = *f.seed;
      if (!f.out.empty()) cfg.out_dir = f.out;
      std::cout << render_config(cfg);
      return kOk;
    }
    if (selftest->parsed()) {
      const std::uint64_t seed = f.seed.value_or(1);
      bool ok = true;
      for (const auto& c : run_selftest(seed)) {
        std::printf("%-24s %s value=%.3e bound=%.1e  %s\n", c.name.c_str(), c.passed ? "PASS" : "FAIL", c.value,
                    c.threshold, c.detail.c_str());
        ok = ok && c.passed;
      }
      return ok ? kOk : kCheckFailed;
    }

    const ExperimentConfig cfg = resolve(f);
    const Dataset data = load_dataset(cfg);
    if (train->parsed()) {
      const auto opts = options(cfg, f, "train");
      write_config_copy(cfg, opts.out_dir);
      const auto run = run_training(cfg, data, cfg.seed, opts);
      print_report("test", run.final.test);
      std::printf("constant_mean_psnr_db=%.4f\n", run.constant_mean_psnr_db);
      return kOk;
    }
    if (eval->parsed()) {
      const auto path = checkpoint.empty() ? (fs::path(cfg.out_dir) / "train" / "stage5.ckpt").string() : checkpoint;
      print_report("test", evaluate_checkpoint(cfg, data, path));
      return kOk;
    }
    if (snr->parsed()) {
      write_config_copy(cfg, cfg.out_dir);
      return emit_sweep(sweep_snr(cfg, data, options(cfg, f, "sweep_snr")), cfg, "sweep_snr",
                        "PSNR vs channel SNR (CU = " + std::to_string(cfg.env.cu) + ")");
    }
    if (cr->parsed()) {
      write_config_copy(cfg, cfg.out_dir);
      return emit_sweep(sweep_cr(cfg, data, options(cfg, f, "sweep_cr")), cfg, "sweep_cr",
                        "PSNR vs compression ratio (SNR = " + format_number(cfg.env.channel.snr_leg_db) + " dB)");
    }
    if (baseline->parsed()) {
      print_report("svd baseline", run_baseline_svd(cfg, data, cfg.seed, options(cfg, f, "baseline_svd")));
      return kOk;
    }
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumericalError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  }
  return kOk;
}
