#include "semsec/selftest.hpp"

#include "semsec/channel.hpp"
#include "semsec/ddpg.hpp"
#include "semsec/trainer.hpp"

#include <cmath>
#include <deque>
#include <random>
#include <sstream>

namespace semsec {

namespace {

CheckResult bounded(std::string name, double value, double threshold, std::string detail = {}) {
  return {std::move(name), value <= threshold, value, threshold, std::move(detail)};
}

Matrix gaussian(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (auto& v : m.reshaped()) v = n(rng);
  return m;
}

CheckResult check_mmse(std::uint64_t seed) {
  Rng rng = make_stream(seed, Stream::channel_leg, 900);
  std::uniform_real_distribution<double> s2(1e-3, 1.0);
  const ChannelConfig cfg;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Matrix h = sample_channel(cfg, rng);
    const Matrix y = gaussian(cfg.n_n, 8, rng);
    const double sigma2 = s2(rng);
    const Matrix gram = h * h.transpose() + (sigma2 / cfg.power) * Matrix::Identity(cfg.n_n, cfg.n_n);
    const Matrix textbook = h.transpose() * gram.inverse() * y;
    worst = std::max(worst, (mmse_equalize(y, h, sigma2, cfg.power) - textbook).norm());
  }
  return bounded("mmse_oracle", worst, 1e-9, "1000 instances, Frobenius error vs explicit inverse");
}

CheckResult check_power(std::uint64_t seed) {
  Rng rng = make_stream(seed, Stream::data, 900);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  const int n_m = 4, l_c = 8;
  const double power = 1.0;
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Matrix y = scale(rng) * gaussian(n_m, l_c, rng);
    const Matrix z = normalize_power(y, power);
    worst = std::max(worst, std::abs(z.squaredNorm() / (n_m * l_c) - power));
  }
  return bounded("power_constraint", worst, 1e-9, "10000 frames, |mean energy - P|");
}

std::vector<CheckResult> check_layers(std::uint64_t seed) {
  using nn::LayerSpec;
  Rng rng = make_stream(seed, Stream::init, 900);
  struct Case {
    const char* name;
    std::vector<LayerSpec> spec;
    bool tokens;
  };
  const Case cases[] = {
      {"grad_dense", {LayerSpec::dense(5, 3)}, false},
      {"grad_relu", {LayerSpec::dense(5, 6), LayerSpec::relu(6), LayerSpec::dense(6, 3)}, false},
      {"grad_tanh", {LayerSpec::dense(5, 6), LayerSpec::tanh(6), LayerSpec::dense(6, 3)}, false},
      {"grad_sigmoid", {LayerSpec::dense(5, 6), LayerSpec::sigmoid(6), LayerSpec::dense(6, 3)}, false},
      {"grad_reshape", {LayerSpec::dense(5, 6), LayerSpec::reshape(6), LayerSpec::dense(6, 3)}, false},
      {"grad_embedding", {LayerSpec::embedding(7, 2, 4), LayerSpec::dense(8, 3)}, true},
  };
  std::vector<CheckResult> out;
  std::uint64_t k = 0;
  for (const auto& c : cases) {
    nn::Network net = nn::init_network(c.spec, derive_seed(seed, Stream::init, 910 + k++));
    Matrix input;
    if (c.tokens) {
      std::uniform_int_distribution<int> tok(0, 6);
      input.resize(4, 5);
      for (auto& v : input.reshaped()) v = tok(rng);
    } else {
      input = gaussian(5, 5, rng);
    }
    const Matrix target = gaussian(3, 5, rng);
    out.push_back(bounded(c.name, nn::grad_check(net, input, nn::mse_loss(target)), 1e-4, "max relative error"));
  }
  return out;
}

CheckResult check_end_to_end(std::uint64_t seed) {
  EnvConfig cfg;
  cfg.channel.snr_leg_db = cfg.channel.snr_eve_db = 300.0;  // noise variance ~1e-30
  cfg.arch = {6, 6, 5, 5, 2, 3, 11};
  // 8x8x6 = 384 source values -> one channel use per antenna frame.
  SemComModel model = SemComModel::create(cfg, 8, 8, 6, derive_seed(seed, Stream::init, 920));
  Rng rng = make_stream(seed, Stream::data, 920);
  const Index batch = 2;
  std::uniform_real_distribution<double> pix(0.05, 0.95);
  Matrix images(model.shape.source_dim, batch);
  for (auto& v : images.reshaped()) v = pix(rng);

  FrameDraws draws;
  std::uniform_int_distribution<int> tok(0, 10);
  draws.text.resize(3, batch);
  for (auto& v : draws.text.reshaped()) v = tok(rng);
  draws.gauss = gaussian(model.shape.source_dim, batch, rng);
  for (Index i = 0; i < batch; ++i) {
    draws.h_leg.push_back(sample_channel(cfg.channel, rng));
    draws.h_eve.push_back(sample_channel(cfg.channel, rng));
  }
  draws.noise_leg = Matrix::Zero(model.shape.n_antennas * model.shape.l_c, batch);
  draws.noise_eve = draws.noise_leg;

  Vector action(48);
  std::uniform_real_distribution<double> a(-1.0, 1.0);
  for (auto& v : action) v = a(rng);
  const PrecoderSet v = reshape_action(action, 4, 4);

  PassOptions opts;
  opts.objective = Objective::secrecy;
  for (auto* n : {&model.encoder, &model.text_jammer, &model.gauss_jammer, &model.bob, &model.eve}) {
    n->set_trainable(true);
    n->zero_grad();
  }
  opts.backward = true;
  run_pass(model, cfg.channel, images, draws, v, opts);
  opts.backward = false;

  double worst = 0.0;
  for (auto* n : {&model.encoder, &model.text_jammer, &model.gauss_jammer, &model.bob, &model.eve}) {
    const Vector analytic = n->grads();
    const Vector numerical = nn::numerical_gradient(
        [&] { return run_pass(model, cfg.channel, images, draws, v, opts).loss; }, n->params(), 1e-6);
    worst = std::max(worst, nn::max_relative_error(analytic, numerical));
  }
  return bounded("grad_end_to_end", worst, 1e-3, "encode-precode-normalize-channel-equalize-decode-MSE");
}

CheckResult check_ou(std::uint64_t seed) {
  Rng rng = make_stream(seed, Stream::ou, 900);
  ddpg::OUProcess ou(1, 0.15, 0.2, 1.0);
  const int burn_in = 1000, steps = 100000;
  for (int i = 0; i < burn_in; ++i) ou.step(rng);
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double x = ou.step(rng)[0];
    sum += x;
    sq += x * x;
  }
  const double mean = sum / steps;
  const double sd = std::sqrt(sq / steps - mean * mean);
  const double expected = 0.2 / std::sqrt(2.0 * 0.15);
  std::ostringstream d;
  d << "empirical std " << sd << " vs sigma/sqrt(2 theta) " << expected;
  return bounded("ou_stationary_std", std::abs(sd / expected - 1.0), 0.10, d.str());
}

CheckResult check_fifo(std::uint64_t seed) {
  Rng rng = make_stream(seed, Stream::buffer, 900);
  std::uniform_int_distribution<int> cap_dist(1, 64);
  std::bernoulli_distribution sample_op(0.2);
  long mismatches = 0, ops = 0;
  while (ops < 10000) {
    const auto cap = static_cast<std::size_t>(cap_dist(rng));
    ddpg::ReplayBuffer buf(cap);
    std::deque<double> ref;
    for (int i = 0; i < 500; ++i, ++ops) {
      if (!ref.empty() && sample_op(rng)) {
        auto b = buf.sample(std::min<std::size_t>(ref.size(), 4), rng);
        if (!b) ++mismatches;
        continue;
      }
      const double tag = static_cast<double>(ops);
      buf.push({Vector::Constant(2, tag), Vector::Constant(1, tag), tag, Vector::Constant(2, tag), false});
      ref.push_back(tag);
      if (ref.size() > cap) ref.pop_front();
      if (buf.size() != ref.size()) ++mismatches;
    }
    const auto items = buf.contents();
    for (std::size_t j = 0; j < ref.size(); ++j)
      if (j >= items.size() || items[j].reward != ref[j]) ++mismatches;
  }
  return bounded("replay_fifo", static_cast<double>(mismatches), 0.0, std::to_string(ops) + " operations");
}

CheckResult check_soft_update(std::uint64_t seed) {
  ddpg::AgentConfig cfg;
  const nn::Network main = nn::init_network(ddpg::critic_layers(cfg), derive_seed(seed, Stream::init, 930));
  nn::Network target = nn::init_network(ddpg::critic_layers(cfg), derive_seed(seed, Stream::init, 931));
  const Vector gap0 = target.params() - main.params();
  const int n = 1000;
  for (int i = 0; i < n; ++i) ddpg::soft_update(target, main, cfg.tau);
  const Vector expected = std::pow(1.0 - cfg.tau, n) * gap0;
  const double err = (target.params() - main.params() - expected).cwiseAbs().maxCoeff();
  return bounded("soft_update_contraction", err, 1e-12, "(1 - tau)^1000 lag contraction");
}

}  // namespace

std::vector<CheckResult> run_selftest(std::uint64_t seed) {
  std::vector<CheckResult> out;
  out.push_back(check_mmse(seed));
  out.push_back(check_power(seed));
  for (auto& c : check_layers(seed)) out.push_back(std::move(c));
  out.push_back(check_end_to_end(seed));
  out.push_back(check_ou(seed));
  out.push_back(check_fifo(seed));
  out.push_back(check_soft_update(seed));
  return out;
}

}  // namespace semsec
