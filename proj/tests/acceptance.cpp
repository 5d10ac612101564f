// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// nonzero when any selected criterion fails.
//
//   acceptance [--only 1,2,...] [--cli PATH] [--tiny PATH] [--work DIR]
#include "oracles.hpp"

#include "semsec/channel.hpp"
#include "semsec/config.hpp"
#include "semsec/ddpg.hpp"
#include "semsec/harness.hpp"
#include "semsec/trainer.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

using namespace semsec;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Criterion 1: MMSE against an explicit inverse.
Outcome mmse_oracle() {
  Rng rng = make_stream(101, Stream::channel_leg);
  std::uniform_real_distribution<double> s2(1e-3, 1.0);
  const ChannelConfig cfg;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Matrix h = oracle::gaussian(4, 4, rng);
    const Matrix y = oracle::gaussian(4, 8, rng);
    const double sigma2 = s2(rng);
    worst = std::max(worst, (mmse_equalize(y, h, sigma2, cfg.power) - oracle::mmse_textbook(y, h, sigma2, cfg.power)).norm());
  }
  return {worst <= 1e-9, fmt("max Frobenius error %.3e (bound 1e-9)", worst)};
}

double end_to_end_grad_error() {
  EnvConfig cfg;
  cfg.channel.snr_leg_db = cfg.channel.snr_eve_db = 300.0;
  cfg.arch = {6, 6, 5, 5, 2, 3, 11};
  SemComModel model = SemComModel::create(cfg, 8, 8, 6, 77);
  Rng rng = make_stream(102, Stream::data);
  const Index batch = 2;
  std::uniform_real_distribution<double> pix(0.05, 0.95);
  Matrix images(model.shape.source_dim, batch);
  for (auto& v : images.reshaped()) v = pix(rng);
  FrameDraws draws;
  std::uniform_int_distribution<int> tok(0, 10);
  draws.text.resize(3, batch);
  for (auto& v : draws.text.reshaped()) v = tok(rng);
  draws.gauss = oracle::gaussian(model.shape.source_dim, batch, rng);
  for (Index i = 0; i < batch; ++i) {
    draws.h_leg.push_back(oracle::gaussian(4, 4, rng));
    draws.h_eve.push_back(oracle::gaussian(4, 4, rng));
  }
  draws.noise_leg = Matrix::Zero(model.shape.code_dim(), batch);
  draws.noise_eve = draws.noise_leg;
  const PrecoderSet v = reshape_action(Vector(oracle::gaussian(48, 1, rng).array().tanh()), 4, 4);

  std::vector<nn::Network*> nets = {&model.encoder, &model.text_jammer, &model.gauss_jammer, &model.bob, &model.eve};
  for (auto* n : nets) {
    n->set_trainable(true);
    n->zero_grad();
  }
  PassOptions opts;
  opts.objective = Objective::secrecy;
  opts.backward = true;
  run_pass(model, cfg.channel, images, draws, v, opts);
  opts.backward = false;
  double worst = 0.0;
  for (auto* n : nets) {
    const Vector analytic = n->grads();
    const Vector numerical = oracle::central_difference(
        [&] { return run_pass(model, cfg.channel, images, draws, v, opts).loss; }, n->params(), 1e-6);
    worst = std::max(worst, oracle::relative_error(analytic, numerical));
  }
  return worst;
}

// Criterion 2: gradients per layer kind and through the whole link.
Outcome gradient_suite() {
  using nn::LayerSpec;
  Rng rng = make_stream(102, Stream::init);
  const std::vector<std::vector<LayerSpec>> stacks = {
      {LayerSpec::dense(5, 3)},
      {LayerSpec::dense(5, 6), LayerSpec::relu(6), LayerSpec::dense(6, 3)},
      {LayerSpec::dense(5, 6), LayerSpec::tanh(6), LayerSpec::dense(6, 3)},
      {LayerSpec::dense(5, 6), LayerSpec::sigmoid(6), LayerSpec::dense(6, 3)},
      {LayerSpec::dense(5, 6), LayerSpec::reshape(6), LayerSpec::dense(6, 3)},
  };
  double layers = 0.0;
  std::uint64_t k = 0;
  for (const auto& spec : stacks) {
    nn::Network net = nn::init_network(spec, 200 + k++);
    layers = std::max(layers, oracle::layer_grad_error(net, oracle::gaussian(5, 4, rng), oracle::gaussian(3, 4, rng)));
  }
  nn::Network emb = nn::init_network({LayerSpec::embedding(7, 2, 4), LayerSpec::dense(8, 3)}, 210);
  Matrix tokens(4, 5);
  std::uniform_int_distribution<int> tok(0, 6);
  for (auto& t : tokens.reshaped()) t = tok(rng);
  layers = std::max(layers, oracle::layer_grad_error(emb, tokens, oracle::gaussian(3, 5, rng)));
  const double e2e = end_to_end_grad_error();
  return {layers <= 1e-4 && e2e <= 1e-3,
          fmt("layers max rel err %.3e (bound 1e-4), end-to-end %.3e (bound 1e-3)", layers, e2e)};
}

// Criterion 3: exact per-frame transmit power.
Outcome power_constraint() {
  Rng rng = make_stream(103, Stream::data);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  const double power = 1.0;
  const CodeShape shape = code_shape(1, 32, 32, 3, 4);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Matrix y = scale(rng) * oracle::gaussian(4, shape.l_c, rng);
    const Matrix z = normalize_power(y, power);
    worst = std::max(worst, std::abs(z.squaredNorm() / static_cast<double>(4 * shape.l_c) - power));
  }
  return {worst <= 1e-9, fmt("max |energy/(N_m L_c) - P| %.3e over 10000 frames (bound 1e-9)", worst)};
}

// Criterion 4: stateless quadratic-reward environment in 48 dimensions.
Outcome ddpg_toy() {
  const std::uint64_t seed = 1;
  ddpg::AgentConfig cfg = ExperimentConfig::ci().agent;
  const int steps = 200;
  Rng rng = make_stream(seed, Stream::eval, 400);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Vector optimum(cfg.action_dim);
  for (auto& v : optimum) v = u(rng);

  ddpg::Agent agent(cfg, seed);
  const Vector state = Vector::Constant(cfg.state_dim, 0.5);
  double best = std::numeric_limits<double>::infinity();
  int reached = -1;
  for (int t = 0; t < steps; ++t) {
    const Vector a = agent.act(state, true, ddpg::noise_scale(t, steps, cfg.noise_decay_fraction));
    agent.observe({state, a, -(a - optimum).squaredNorm(), state, true});
    const double dist = (agent.act(state, false) - optimum).cwiseAbs().maxCoeff();
    best = std::min(best, dist);
    if (dist < 0.1 && reached < 0) reached = t + 1;
  }
  const Vector final_action = agent.act(state, false);
  const double linf = (final_action - optimum).cwiseAbs().maxCoeff();
  const double l2 = (final_action - optimum).norm();
  const double start_l2 = optimum.norm();
  return {reached > 0,
          fmt("final l_inf %.3f, l2 %.3f (optimum norm %.3f), best l_inf %.3f, first step under 0.1: %d (bound 0.1 "
              "within 200 steps)",
              linf, l2, start_l2, best, reached)};
}

// Criterion 5: OU stationary standard deviation.
Outcome ou_statistics() {
  ddpg::OUProcess ou(1, 0.15, 0.2, 1.0);
  Rng rng = make_stream(105, Stream::ou);
  for (int i = 0; i < 1000; ++i) ou.step(rng);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = ou.step(rng)[0];
    sum += x;
    sq += x * x;
  }
  const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
  const double expect = 0.2 / std::sqrt(2.0 * 0.15);
  const double rel = std::abs(sd / expect - 1.0);
  return {rel <= 0.10, fmt("empirical std %.4f vs %.4f, relative deviation %.3f (bound 0.10)", sd, expect, rel)};
}

// Criterion 6: FIFO eviction and soft-update contraction.
Outcome replay_and_soft_update() {
  Rng rng = make_stream(106, Stream::buffer);
  std::uniform_int_distribution<int> cap_dist(1, 100);
  long ops = 0, mismatches = 0;
  while (ops < 20000) {
    ddpg::ReplayBuffer buf(static_cast<std::size_t>(cap_dist(rng)));
    std::deque<double> ref;
    for (int i = 0; i < 400; ++i, ++ops) {
      const double tag = static_cast<double>(ops);
      buf.push({Vector::Constant(1, tag), Vector::Constant(1, tag), tag, Vector::Constant(1, tag), false});
      ref.push_back(tag);
      if (ref.size() > buf.capacity()) ref.pop_front();
    }
    const auto items = buf.contents();
    if (items.size() != ref.size()) ++mismatches;
    for (std::size_t j = 0; j < std::min(items.size(), ref.size()); ++j)
      if (items[j].reward != ref[j]) ++mismatches;
  }

  ddpg::AgentConfig cfg;
  const nn::Network main = nn::init_network(ddpg::critic_layers(cfg), 61);
  nn::Network target = nn::init_network(ddpg::critic_layers(cfg), 62);
  const Vector gap0 = target.params() - main.params();
  for (int i = 0; i < 1000; ++i) ddpg::soft_update(target, main, cfg.tau);
  const double err = (target.params() - main.params() - std::pow(1.0 - cfg.tau, 1000) * gap0).cwiseAbs().maxCoeff();
  return {mismatches == 0 && err <= 1e-12,
          fmt("FIFO mismatches %ld over %ld pushes; contraction error %.3e (bound 1e-12)", mismatches, ops, err)};
}

// Criterion 7: security gap after all five stages at desk scale.
Outcome security_gap() {
  ExperimentConfig cfg = ExperimentConfig::ci();
  cfg.env.cu = 1;
  cfg.env.channel.snr_leg_db = cfg.env.channel.snr_eve_db = 10.0;
  cfg.validate();
  const Dataset data = load_dataset(cfg);
  const double baseline = oracle::constant_mean_psnr(data.train->pixels, data.test->pixels);
  int good = 0;
  std::string detail = fmt("constant-mean PSNR %.3f dB;", baseline);
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto t0 = std::chrono::steady_clock::now();
    const TrainingRun run = run_training(cfg, data, seed, {});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double leg = run.final.test.psnr_leg_db, eve = run.final.test.psnr_eve_db;
    const bool ok = leg - eve >= 5.0 && eve <= baseline + 2.0;
    good += ok ? 1 : 0;
    detail += fmt(" seed %llu: leg %.2f eve %.2f gap %.2f %s (%.0fs);", static_cast<unsigned long long>(seed), leg,
                  eve, leg - eve, ok ? "ok" : "no", secs);
    std::fprintf(stderr, "  [7] seed %llu leg %.3f eve %.3f\n", static_cast<unsigned long long>(seed), leg, eve);
  }
  detail += fmt(" %d of 3 seeds meet gap >= 5 dB and eve <= baseline + 2 dB", good);
  return {good >= 2, detail};
}

// Criterion 8: Bob's PSNR against SNR, Eve flat.
Outcome snr_monotonicity() {
  ExperimentConfig cfg = ExperimentConfig::ci();
  cfg.env.cu = 1;
  cfg.sweep.snr_grid = {0, 10, 20};
  cfg.validate();
  const Dataset data = load_dataset(cfg);
  const SweepResult res = sweep_snr(cfg, data, {});
  std::vector<double> leg, eve;
  std::string detail;
  for (const auto& r : res.rows) {
    leg.push_back(r.psnr_leg_db);
    eve.push_back(r.psnr_eve_db);
    detail += fmt("snr %g: leg %.2f eve %.2f; ", r.x, r.psnr_leg_db, r.psnr_eve_db);
  }
  int inversions = 0;
  double worst_drop = 0.0;
  for (std::size_t i = 1; i < leg.size(); ++i) {
    if (leg[i] < leg[i - 1]) {
      ++inversions;
      worst_drop = std::max(worst_drop, leg[i - 1] - leg[i]);
    }
  }
  const double spread = *std::max_element(eve.begin(), eve.end()) - *std::min_element(eve.begin(), eve.end());
  const bool mono = inversions == 0 || (inversions == 1 && worst_drop <= 0.3);
  detail += fmt("inversions %d (largest %.2f dB, allowed one <= 0.3), eve spread %.2f dB (bound 2)", inversions,
                worst_drop, spread);
  return {mono && spread <= 2.0, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Criterion 9: two CLI sweeps with the same config and seed.
Outcome determinism(const std::string& cli, const std::string& tiny, const fs::path& work) {
  if (cli.empty() || tiny.empty()) return {false, "needs --cli and --tiny"};
  std::string csv[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path out = work / ("determinism_" + std::to_string(i));
    fs::remove_all(out);
    const std::string cmd = "\"" + cli + "\" --quiet --config \"" + tiny + "\" --out \"" + out.string() + "\" sweep-snr > \"" +
                            (work / ("determinism_" + std::to_string(i) + ".log")).string() + "\" 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, "sweep-snr exited nonzero: " + cmd};
    csv[i] = slurp(out / "sweep_snr.csv");
  }
  const long lines = std::count(csv[0].begin(), csv[0].end(), '\n');
  return {!csv[0].empty() && csv[0] == csv[1],
          fmt("%zu bytes, %ld lines, %s", csv[0].size(), lines, csv[0] == csv[1] ? "byte-identical" : "DIFFERENT")};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // hard runtime bound; 0 means a target only
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> only;
  std::string cli, tiny, work = (fs::temp_directory_path() / "semsec_acceptance").string();
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  app.add_option("--cli", cli, "Path to the semsec binary (criterion 9)");
  app.add_option("--tiny", tiny, "Small config for the determinism check");
  app.add_option("--work", work, "Scratch directory");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  const std::vector<Criterion> all = {
      {1, "mmse oracle", 5, mmse_oracle},
      {2, "gradient suite", 30, gradient_suite},
      {3, "power constraint", 5, power_constraint},
      {4, "ddpg toy convergence", 120, ddpg_toy},
      {5, "ou statistics", 5, ou_statistics},
      {6, "replay and soft update", 10, replay_and_soft_update},
      {7, "end-to-end security gap", 0, security_gap},
      {8, "snr monotonicity", 90 * 60, snr_monotonicity},
      {9, "determinism", 0, [&] { return determinism(cli, tiny, work); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  bool ok = true;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string timing = fmt("%.1fs", secs);
    if (c.limit_s > 0) {
      timing += fmt(" (limit %.0fs)", c.limit_s);
      if (secs > c.limit_s) {
        o.passed = false;
        o.detail += "; runtime limit exceeded";
      }
    }
    std::printf("criterion %d: %s  %s  [%s]  %s\n", c.id, o.passed ? "PASS" : "FAIL", c.name, timing.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
    ok = ok && o.passed;
  }
  return ok ? 0 : 1;
}
