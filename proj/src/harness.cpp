#include "semsec/harness.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace semsec {

namespace fs = std::filesystem;

Dataset load_dataset(const ExperimentConfig& cfg) {
  const auto& d = cfg.data;
  d.validate();
  Dataset out;
  if (d.source == "synthetic") {
    Rng train_rng = make_stream(d.seed, Stream::dataset, 0);
    Rng test_rng = make_stream(d.seed, Stream::dataset, 1);
    out.train = std::make_shared<const ImageSet>(make_synthetic_images(d.train_size, d.height, d.width, d.channels, train_rng));
    out.test = std::make_shared<const ImageSet>(make_synthetic_images(d.test_size, d.height, d.width, d.channels, test_rng));
  } else if (d.source == "cifar10") {
    out.train = std::make_shared<const ImageSet>(load_cifar10_bin(d.train_path, d.train_size));
    out.test = std::make_shared<const ImageSet>(load_cifar10_bin(d.test_path, d.test_size));
  } else {
    out.train = std::make_shared<const ImageSet>(load_flat_u8(d.train_path, d.height, d.width, d.channels, d.train_size));
    out.test = std::make_shared<const ImageSet>(load_flat_u8(d.test_path, d.height, d.width, d.channels, d.test_size));
  }
  if (out.train->size() == 0 || out.test->size() == 0) throw ConfigError("dataset files contain no images");
  const std::string corpus = d.corpus_path.empty() ? default_corpus_path() : d.corpus_path;
  out.corpus = std::make_shared<const TextCorpus>(TextCorpus::from_file(corpus, cfg.env.arch.vocab));
  return out;
}

double constant_mean_psnr(const Dataset& data) {
  const Vector mean = mean_image(*data.train);
  const Matrix guess = mean.replicate(1, data.test->size());
  return psnr(data.test->pixels, guess);
}

std::string format_number(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, end};
}

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

void save_checkpoint(const fs::path& path, const SemComModel& model, const Vector& action) {
  auto out = open_out(path);
  save_model(out, model, action);
}

// Per-run CSV logs, attached to the trainer through its hooks.
class RunLogger {
 public:
  RunLogger(const RunOptions& opts, std::string label) : opts_(opts), label_(std::move(label)) {
    if (!opts.out_dir.empty()) {
      epochs_ = open_out(fs::path(opts.out_dir) / "epochs.csv");
      epochs_ << "stage,epoch,train_loss,learning_rate\n";
    }
  }

  TrainingHooks hooks() {
    TrainingHooks h;
    h.on_epoch = [this](const EpochRecord& r) {
      if (epochs_.is_open()) {
        epochs_ << r.stage << ',' << r.epoch << ',' << format_number(r.train_loss) << ','
                << format_number(r.learning_rate) << '\n';
      }
      if (opts_.progress && r.stage != 4) {
        *opts_.progress << label_ << "stage " << r.stage << " epoch " << r.epoch << " loss " << r.train_loss << '\n';
      }
    };
    h.on_decision = [this](const DecisionRecord& r) {
      if (!opts_.out_dir.empty()) {
        if (!decisions_.is_open()) {
          decisions_ = open_out(fs::path(opts_.out_dir) / "decisions.csv");
          decisions_ << "step,reward,psnr_leg_db,psnr_eve_db,loss,agent_updated";
          for (Index i = 0; i < r.action.size(); ++i) decisions_ << ",a" << i;
          decisions_ << '\n';
        }
        decisions_ << r.step << ',' << format_number(r.reward) << ',' << format_number(r.psnr_leg_db) << ','
                   << format_number(r.psnr_eve_db) << ',' << format_number(r.loss) << ',' << (r.agent_updated ? 1 : 0);
        for (Index i = 0; i < r.action.size(); ++i) decisions_ << ',' << format_number(r.action[i]);
        decisions_ << '\n';
      }
      if (opts_.progress) {
        *opts_.progress << label_ << "decision " << r.step << " reward " << r.reward << " leg " << r.psnr_leg_db
                        << " eve " << r.psnr_eve_db << '\n';
      }
    };
    h.on_stage_end = [this](int stage, const Environment& env) {
      if (opts_.out_dir.empty() || !opts_.checkpoints || stage > 3) return;
      const int n = env.config().channel.n_m;
      const PrecoderSet p = stage == 1 ? PrecoderSet::semantic_only(n) : PrecoderSet::identity_sum(n);
      save_checkpoint(fs::path(opts_.out_dir) / ("stage" + std::to_string(stage) + ".ckpt"), env.model(), flatten(p));
    };
    return h;
  }

  void flush() {
    if (epochs_.is_open()) epochs_.flush();
    if (decisions_.is_open()) decisions_.flush();
  }

 private:
  RunOptions opts_;
  std::string label_;
  std::ofstream epochs_;
  std::ofstream decisions_;
};

TrainingRun finish_run(const ExperimentConfig& cfg, const Dataset& data, Environment& env, std::uint64_t agent_seed,
                       const RunOptions& opts, RunLogger& logger) {
  const StagePlan plan = cfg.effective_plan();
  ddpg::Agent agent(cfg.agent, agent_seed);
  TrainingRun run;
  run.constant_mean_psnr_db = constant_mean_psnr(data);
  run.policy = stage4(env, agent, plan, logger.hooks());
  const Vector best = run.policy.steps.at(run.policy.best_index()).action;
  if (!opts.out_dir.empty() && opts.checkpoints) {
    save_checkpoint(fs::path(opts.out_dir) / "stage4.ckpt", env.model(), best);
    auto out = open_out(fs::path(opts.out_dir) / "agent.ckpt");
    agent.save(out);
  }
  run.final = stage5(env, best, plan, logger.hooks());
  if (!opts.out_dir.empty() && opts.checkpoints) {
    save_checkpoint(fs::path(opts.out_dir) / "stage5.ckpt", env.model(), run.final.action);
  }
  logger.flush();
  return run;
}

}  // namespace

TrainingRun run_training(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed, const RunOptions& opts) {
  cfg.validate();
  const StagePlan plan = cfg.effective_plan();
  RunLogger logger(opts, "");
  Environment env(cfg.env, data.train, data.test, data.corpus, seed);
  const auto hooks = logger.hooks();
  stage1(env, plan, hooks);
  stage2(env, plan, hooks);
  stage3(env, plan, hooks);
  return finish_run(cfg, data, env, seed, opts, logger);
}

TrainingRun continue_training(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t env_seed,
                              std::uint64_t agent_seed, SemComModel model, const RunOptions& opts) {
  cfg.validate();
  RunLogger logger(opts, "");
  Environment env(cfg.env, data.train, data.test, data.corpus, env_seed, std::move(model));
  return finish_run(cfg, data, env, agent_seed, opts, logger);
}

void SweepResult::add(double x, double psnr_leg_db, double psnr_eve_db, std::uint64_t seed) {
  rows.push_back({x, psnr_leg_db, psnr_eve_db, psnr_leg_db - psnr_eve_db, seed});
}

namespace {

fs::path sub_dir(const RunOptions& opts, const std::string& name) {
  return opts.out_dir.empty() ? fs::path() : fs::path(opts.out_dir) / name;
}

RunOptions with_dir(const RunOptions& opts, const fs::path& dir) {
  RunOptions o = opts;
  o.out_dir = dir.string();
  return o;
}

}  // namespace

SweepResult sweep_snr(const ExperimentConfig& cfg, const Dataset& data, const RunOptions& opts) {
  cfg.validate();
  const StagePlan plan = cfg.effective_plan();
  SweepResult result{"SNR (dB)", {}};
  for (const auto seed : cfg.sweep_seeds()) {
    const std::string tag = "seed" + std::to_string(seed);
    Environment base(cfg.env, data.train, data.test, data.corpus, seed);
    {
      RunLogger logger(with_dir(opts, sub_dir(opts, tag + "/shared")), tag + " ");
      const auto hooks = logger.hooks();
      stage1(base, plan, hooks);
      stage2(base, plan, hooks);
      stage3(base, plan, hooks);
    }
    for (std::size_t i = 0; i < cfg.sweep.snr_grid.size(); ++i) {
      const double snr = cfg.sweep.snr_grid[i];
      ExperimentConfig point = cfg;
      point.env.channel.snr_leg_db = snr;
      point.env.channel.snr_eve_db = snr;
      const auto dir = sub_dir(opts, tag + "/snr" + format_number(snr));
      const auto run = continue_training(point, data, seed, derive_seed(seed, Stream::init, 1000 + i), base.model(),
                                         with_dir(opts, dir));
      result.add(snr, run.final.test.psnr_leg_db, run.final.test.psnr_eve_db, seed);
      if (opts.progress) {
        *opts.progress << tag << " snr " << snr << " dB: leg " << run.final.test.psnr_leg_db << " eve "
                       << run.final.test.psnr_eve_db << '\n';
      }
    }
  }
  return result;
}

SweepResult sweep_cr(const ExperimentConfig& cfg, const Dataset& data, const RunOptions& opts) {
  cfg.validate();
  SweepResult result{"compression ratio (CU/96)", {}};
  for (const auto seed : cfg.sweep_seeds()) {
    for (const int cu : cfg.sweep.cu_grid) {
      ExperimentConfig point = cfg;
      point.env.cu = cu;
      point.validate();
      const auto dir = sub_dir(opts, "seed" + std::to_string(seed) + "/cu" + std::to_string(cu));
      const auto run = run_training(point, data, seed, with_dir(opts, dir));
      result.add(cu / 96.0, run.final.test.psnr_leg_db, run.final.test.psnr_eve_db, seed);
      if (opts.progress) {
        *opts.progress << "seed" << seed << " cu " << cu << ": leg " << run.final.test.psnr_leg_db << " eve "
                       << run.final.test.psnr_eve_db << '\n';
      }
    }
  }
  return result;
}

EvalReport run_baseline_svd(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed,
                            const RunOptions& opts) {
  cfg.validate();
  RunLogger logger(opts, "");
  Environment env(cfg.env, data.train, data.test, data.corpus, seed);
  auto rep = baseline_svd(env, cfg.effective_plan(), logger.hooks());
  logger.flush();
  return rep;
}

EvalReport evaluate_checkpoint(const ExperimentConfig& cfg, const Dataset& data, const std::string& path) {
  cfg.validate();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path);
  const auto& ch = cfg.env.channel;
  const CodeShape shape = code_shape(cfg.env.cu, data.train->height, data.train->width, data.train->channels, ch.n_m);
  auto [model, action] = load_model(in, shape);
  Environment env(cfg.env, data.train, data.test, data.corpus, cfg.seed, std::move(model));
  return env.evaluate(env.test_set(), TxMode::superposed, reshape_action(action, ch.n_m, ch.n_n), cfg.plan.lambda_r);
}

void emit_csv(const SweepResult& result, const std::string& path) {
  if (result.rows.empty()) throw ConfigError("nothing to write: empty sweep result");
  auto out = open_out(path);
  out << "x,psnr_leg_db,psnr_eve_db,gap_db,seed\n";
  for (const auto& r : result.rows) {
    out << format_number(r.x) << ',' << format_number(r.psnr_leg_db) << ',' << format_number(r.psnr_eve_db) << ','
        << format_number(r.gap_db) << ',' << r.seed << '\n';
  }
  if (!out) throw ConfigError("failed writing " + path);
}

void emit_plot(const SweepResult& result, const std::string& path, const std::string& title) {
  if (result.rows.empty()) throw ConfigError("nothing to plot: empty sweep result");
  auto out = open_out(path);
  out << render_plot(result, title);
  if (!out) throw ConfigError("failed writing " + path);
}

}  // namespace semsec
