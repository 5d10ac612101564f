#include "semsec/trainer.hpp"

#include "semsec/binio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace semsec {

double mse(const Matrix& reference, const Matrix& estimate) {
  if (reference.rows() != estimate.rows() || reference.cols() != estimate.cols()) {
    throw ShapeError("image batches differ in shape: " + shape_str(reference.rows(), reference.cols()) + " vs " +
                     shape_str(estimate.rows(), estimate.cols()));
  }
  if (reference.size() == 0) throw ShapeError("empty image batch");
  return (reference - estimate).squaredNorm() / static_cast<double>(reference.size());
}

double psnr_from_mse(double mse) { return 10.0 * std::log10(1.0 / std::max(mse, 1e-10)); }

double psnr(const Matrix& reference, const Matrix& estimate) { return psnr_from_mse(mse(reference, estimate)); }

void EnvConfig::validate() const {
  channel.validate();
  if (minibatch <= 0) throw ConfigError("minibatch must be positive");
  if (eval_size <= 0) throw ConfigError("eval_size must be positive");
}

SemComModel SemComModel::create(const EnvConfig& cfg, int height, int width, int channels, std::uint64_t seed) {
  cfg.validate();
  SemComModel m;
  m.shape = code_shape(cfg.cu, height, width, channels, cfg.channel.n_m);
  const Index src = m.shape.source_dim, code = m.shape.code_dim();
  m.encoder = nn::init_network(semantic_encoder_layers(src, cfg.arch, code), derive_seed(seed, Stream::init, 0));
  m.text_jammer = nn::init_network(text_jammer_layers(cfg.arch, code), derive_seed(seed, Stream::init, 1));
  m.gauss_jammer = nn::init_network(gauss_jammer_layers(src, cfg.arch, code), derive_seed(seed, Stream::init, 2));
  m.bob = nn::init_network(decoder_layers(code, cfg.arch, src), derive_seed(seed, Stream::init, 3));
  m.eve = nn::init_network(decoder_layers(code, cfg.arch, src), derive_seed(seed, Stream::init, 4));
  return m;
}

void SemComModel::set_trainable(TrainableSet set) {
  const bool s1 = set == TrainableSet::stage1;
  const bool s24 = set == TrainableSet::stage2 || set == TrainableSet::stage4;
  encoder.set_trainable(s1 || s24);
  bob.set_trainable(s1 || s24);
  text_jammer.set_trainable(s24);
  gauss_jammer.set_trainable(s24);
  eve.set_trainable(set == TrainableSet::stage3);
  for (auto* n : {&encoder, &text_jammer, &gauss_jammer, &bob, &eve}) n->zero_grad();
}

std::vector<nn::Network*> SemComModel::trainable_networks() {
  std::vector<nn::Network*> out;
  for (auto* n : {&encoder, &text_jammer, &gauss_jammer, &bob, &eve})
    if (n->trainable()) out.push_back(n);
  return out;
}

std::vector<const nn::Network*> SemComModel::networks() const { return {&encoder, &text_jammer, &gauss_jammer, &bob, &eve}; }

void SemComModel::save(std::ostream& out) const {
  for (const auto* n : networks()) nn::save_network(out, *n);
}

SemComModel SemComModel::load(std::istream& in, const CodeShape& shape) {
  SemComModel m;
  m.shape = shape;
  for (auto* n : {&m.encoder, &m.text_jammer, &m.gauss_jammer, &m.bob, &m.eve}) *n = nn::load_network(in);
  if (m.encoder.output_size() != shape.code_dim() || m.bob.input_size() != shape.code_dim() ||
      m.encoder.input_size() != shape.source_dim) {
    throw StateError("checkpoint networks do not match the configured code shape");
  }
  return m;
}

namespace {

struct Receiver {
  Matrix frames;               // equalized, (N_n L_c) x batch
  std::vector<Matrix> gain;    // per frame: M * H_eff, maps the transmitted frame to its estimate
};

Receiver receive(const Matrix& tx, const std::vector<Matrix>& channels, const std::vector<Matrix>* precoders,
                 const Matrix& unit_noise, double sigma2, double power, const CodeShape& shape) {
  const Index b = tx.cols();
  Receiver r{Matrix(shape.code_dim(), b), std::vector<Matrix>(static_cast<std::size_t>(b))};
  const double noise_std = std::sqrt(sigma2);
  for (Index i = 0; i < b; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Matrix h_eff = precoders ? Matrix(channels[k] * (*precoders)[k]) : channels[k];
    const Matrix m = mmse_operator(h_eff, sigma2, power);
    Eigen::Map<const Matrix> z(tx.col(i).data(), shape.n_antennas, shape.l_c);
    Eigen::Map<const Matrix> n(unit_noise.col(i).data(), shape.n_antennas, shape.l_c);
    const Matrix received = transmit_with_noise(z, h_eff, noise_std * n);
    Eigen::Map<Matrix>(r.frames.col(i).data(), shape.n_antennas, shape.l_c) = m * received;
    r.gain[k] = m * h_eff;
  }
  return r;
}

void accumulate_frame_grad(Matrix& dz, const Matrix& d_est, const std::vector<Matrix>& gain, const CodeShape& shape) {
  for (Index i = 0; i < dz.cols(); ++i) {
    Eigen::Map<Matrix> dzi(dz.col(i).data(), shape.n_antennas, shape.l_c);
    Eigen::Map<const Matrix> gi(d_est.col(i).data(), shape.n_antennas, shape.l_c);
    dzi.noalias() += gain[static_cast<std::size_t>(i)].transpose() * gi;
  }
}

}  // namespace

PassResult run_pass(SemComModel& model, const ChannelConfig& channel, const Matrix& images, const FrameDraws& draws,
                    const PrecoderSet& precoders, const PassOptions& opts) {
  const CodeShape& sh = model.shape;
  const Index b = images.cols();
  if (images.rows() != sh.source_dim) throw ShapeError("image batch does not match the model input size");
  if (static_cast<Index>(draws.h_leg.size()) != b || static_cast<Index>(draws.h_eve.size()) != b ||
      draws.noise_leg.cols() != b || draws.noise_eve.cols() != b) {
    throw ShapeError("frame draws do not match the batch size");
  }
  const double power = channel.power;

  // Transmitter.
  const Matrix s1 = semantic_encode(model.encoder, images, sh);
  Matrix s2, s3, y;
  std::vector<Matrix> svd_precoders;
  switch (opts.mode) {
    case TxMode::superposed:
      s2 = text_jam_encode(model.text_jammer, draws.text, sh);
      s3 = gauss_jam_encode(model.gauss_jammer, draws.gauss, sh);
      y = superpose_batch(s1, &s2, &s3, precoders);
      break;
    case TxMode::semantic_only: y = s1; break;
    case TxMode::svd_baseline:
      y = s1;
      svd_precoders.reserve(static_cast<std::size_t>(b));
      for (const auto& h : draws.h_leg) svd_precoders.push_back(svd_precoder(h));
      break;
  }

  Matrix z(y.rows(), b);
  for (Index i = 0; i < b; ++i) {
    Eigen::Map<const Matrix> yi(y.col(i).data(), sh.n_antennas, sh.l_c);
    Eigen::Map<Matrix>(z.col(i).data(), sh.n_antennas, sh.l_c) = normalize_power(yi, power);
  }

  const auto* per_frame = opts.mode == TxMode::svd_baseline ? &svd_precoders : nullptr;
  PassResult res;
  res.transmitted = z;
  Receiver leg, eve;
  if (opts.need_leg) {
    leg = receive(z, draws.h_leg, per_frame, draws.noise_leg, snr_to_sigma2(channel.snr_leg_db, power), power, sh);
    res.recon_leg = decode(model.bob, leg.frames, sh);
    res.mse_leg = mse(images, res.recon_leg);
  }
  if (opts.need_eve) {
    eve = receive(z, draws.h_eve, per_frame, draws.noise_eve, snr_to_sigma2(channel.snr_eve_db, power), power, sh);
    res.recon_eve = decode(model.eve, eve.frames, sh);
    res.mse_eve = mse(images, res.recon_eve);
  }

  switch (opts.objective) {
    case Objective::bob: res.loss = res.mse_leg; break;
    case Objective::eve: res.loss = res.mse_eve; break;
    case Objective::secrecy: res.loss = res.mse_leg - opts.lambda_r * res.mse_eve; break;
  }
  if (!opts.backward) return res;

  const bool uses_leg = opts.objective != Objective::eve;
  const bool uses_eve = opts.objective != Objective::bob;
  if ((uses_leg && !opts.need_leg) || (uses_eve && !opts.need_eve)) {
    throw StateError("objective needs a receiver path that was not computed");
  }
  const double scale = 2.0 / static_cast<double>(images.size());
  const bool tx_trainable = model.encoder.trainable() ||
                            (opts.mode == TxMode::superposed && (model.text_jammer.trainable() || model.gauss_jammer.trainable()));

  Matrix dz = Matrix::Zero(z.rows(), b);
  if (uses_leg) {
    const Matrix d_est = model.bob.backward(scale * (res.recon_leg - images));
    if (tx_trainable) accumulate_frame_grad(dz, d_est, leg.gain, sh);
  }
  if (uses_eve) {
    const double coeff = opts.objective == Objective::eve ? 1.0 : -opts.lambda_r;
    const Matrix d_est = model.eve.backward((coeff * scale) * (res.recon_eve - images));
    if (tx_trainable) accumulate_frame_grad(dz, d_est, eve.gain, sh);
  }
  if (!tx_trainable) return res;

  Matrix dy(y.rows(), b);
  for (Index i = 0; i < b; ++i) {
    Eigen::Map<const Matrix> yi(y.col(i).data(), sh.n_antennas, sh.l_c);
    Eigen::Map<const Matrix> dzi(dz.col(i).data(), sh.n_antennas, sh.l_c);
    Eigen::Map<Matrix>(dy.col(i).data(), sh.n_antennas, sh.l_c) = normalize_power_backward(yi, power, dzi);
  }

  switch (opts.mode) {
    case TxMode::superposed:
      if (model.encoder.trainable()) model.encoder.backward(superpose_backward(dy, precoders.v1, sh.n_antennas));
      if (model.text_jammer.trainable()) model.text_jammer.backward(superpose_backward(dy, precoders.v2, sh.n_antennas));
      if (model.gauss_jammer.trainable()) model.gauss_jammer.backward(superpose_backward(dy, precoders.v3, sh.n_antennas));
      break;
    case TxMode::semantic_only:
      if (model.encoder.trainable()) model.encoder.backward(dy);
      break;
    case TxMode::svd_baseline:
      if (model.encoder.trainable()) {
        Matrix ds1(dy.rows(), b);
        for (Index i = 0; i < b; ++i) {
          Eigen::Map<const Matrix> dyi(dy.col(i).data(), sh.n_antennas, sh.l_c);
          Eigen::Map<Matrix>(ds1.col(i).data(), sh.n_antennas, sh.l_c) =
              svd_precoders[static_cast<std::size_t>(i)].transpose() * dyi;
        }
        model.encoder.backward(ds1);
      }
      break;
  }
  return res;
}

Environment::Streams::Streams(std::uint64_t seed, std::uint64_t sub)
    : data(make_stream(seed, Stream::data, sub)),
      channel_leg(make_stream(seed, Stream::channel_leg, sub)),
      channel_eve(make_stream(seed, Stream::channel_eve, sub)),
      noise_leg(make_stream(seed, Stream::noise_leg, sub)),
      noise_eve(make_stream(seed, Stream::noise_eve, sub)),
      text(make_stream(seed, Stream::text, sub)),
      gauss(make_stream(seed, Stream::gauss, sub)) {}

namespace {
constexpr std::uint64_t kTrainStreams = 0;
constexpr std::uint64_t kEvalStreams = 1;
}  // namespace

Environment::Environment(EnvConfig cfg, std::shared_ptr<const ImageSet> train, std::shared_ptr<const ImageSet> test,
                         std::shared_ptr<const TextCorpus> corpus, std::uint64_t seed)
    : Environment(cfg, train, test, corpus, seed,
                  SemComModel::create(cfg, train->height, train->width, train->channels, seed)) {}

Environment::Environment(EnvConfig cfg, std::shared_ptr<const ImageSet> train, std::shared_ptr<const ImageSet> test,
                         std::shared_ptr<const TextCorpus> corpus, std::uint64_t seed, SemComModel model)
    : cfg_(std::move(cfg)),
      train_(std::move(train)),
      test_(std::move(test)),
      corpus_(std::move(corpus)),
      seed_(seed),
      model_(std::move(model)),
      streams_(seed, kTrainStreams) {
  cfg_.validate();
  if (!train_ || !test_ || !corpus_) throw ConfigError("environment needs train, test and corpus data");
  train_->validate();
  test_->validate();
  if (train_->size() == 0 || test_->size() == 0) throw ConfigError("train and test sets must be nonempty");
  if (train_->dim() != model_.shape.source_dim || test_->dim() != model_.shape.source_dim) {
    throw ConfigError("image dims do not match the model");
  }
  if (corpus_->vocab != cfg_.arch.vocab) throw ConfigError("corpus vocabulary does not match the text jammer");
}

ImageSet Environment::eval_set() const { return test_->slice(0, std::min(cfg_.eval_size, test_->size())); }

void Environment::set_snr(double leg_db, double eve_db) {
  cfg_.channel.snr_leg_db = leg_db;
  cfg_.channel.snr_eve_db = eve_db;
  cfg_.channel.validate();
}

FrameDraws Environment::draw_from(Streams& s, Index batch, bool need_jamming, const std::vector<Matrix>* fixed_leg,
                                  const std::vector<Matrix>* fixed_eve) const {
  FrameDraws d;
  if (need_jamming) {
    d.text = sample_text_batch(*corpus_, s.text, cfg_.arch.text_len, batch);
    d.gauss = sample_gauss_batch(model_.shape.source_dim, batch, s.gauss);
  }
  d.h_leg.reserve(static_cast<std::size_t>(batch));
  d.h_eve.reserve(static_cast<std::size_t>(batch));
  for (Index i = 0; i < batch; ++i) {
    d.h_leg.push_back(fixed_leg ? fixed_leg->front() : sample_channel(cfg_.channel, s.channel_leg));
    d.h_eve.push_back(fixed_eve ? fixed_eve->front() : sample_channel(cfg_.channel, s.channel_eve));
  }
  d.noise_leg = sample_gauss_batch(model_.shape.code_dim(), batch, s.noise_leg);
  d.noise_eve = sample_gauss_batch(model_.shape.code_dim(), batch, s.noise_eve);
  return d;
}

FrameDraws Environment::draw(Index batch, bool need_jamming) {
  return draw_from(streams_, batch, need_jamming, nullptr, nullptr);
}

namespace {

Matrix gather(const Matrix& pixels, const std::vector<Index>& order, std::size_t first, Index count) {
  Matrix x(pixels.rows(), count);
  for (Index j = 0; j < count; ++j) x.col(j) = pixels.col(order[first + static_cast<std::size_t>(j)]);
  return x;
}

PassOptions training_options(TxMode mode, Objective objective, double lambda_r) {
  PassOptions o;
  o.mode = mode;
  o.objective = objective;
  o.lambda_r = lambda_r;
  o.need_leg = objective != Objective::eve;
  o.need_eve = objective != Objective::bob;
  o.backward = true;
  return o;
}

}  // namespace

double Environment::train_epoch(TxMode mode, const PrecoderSet& precoders, Objective objective, double lambda_r,
                                double& learning_rate) {
  const auto nets = model_.trainable_networks();
  if (nets.empty()) throw StateError("no trainable networks in this stage");

  std::vector<Index> order(static_cast<std::size_t>(train_->size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), streams_.data);

  std::vector<Matrix> epoch_leg, epoch_eve;
  const bool fixed = !cfg_.redraw_channel_per_frame;
  if (fixed) {
    epoch_leg.push_back(sample_channel(cfg_.channel, streams_.channel_leg));
    epoch_eve.push_back(sample_channel(cfg_.channel, streams_.channel_eve));
  }

  const PassOptions opts = training_options(mode, objective, lambda_r);
  double total = 0.0;
  Index steps = 0;
  for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(cfg_.minibatch)) {
    const Index count = std::min<Index>(cfg_.minibatch, static_cast<Index>(order.size() - first));
    const Matrix x = gather(train_->pixels, order, first, count);
    const FrameDraws d = draw_from(streams_, count, mode == TxMode::superposed, fixed ? &epoch_leg : nullptr,
                                   fixed ? &epoch_eve : nullptr);
    const PassResult r = run_pass(model_, cfg_.channel, x, d, precoders, opts);

    const bool finite = std::isfinite(r.loss) &&
                        std::all_of(nets.begin(), nets.end(), [](const nn::Network* n) { return n->grads().allFinite(); });
    if (!finite) {
      for (auto* n : nets) n->zero_grad();
      learning_rate *= 0.5;
      ++skipped_steps_;
      continue;
    }
    nn::OptimizerConfig opt;
    opt.learning_rate = learning_rate;
    for (auto* n : nets) nn::optimizer_step(*n, opt);
    total += r.loss;
    ++steps;
  }
  return steps > 0 ? total / static_cast<double>(steps) : std::numeric_limits<double>::quiet_NaN();
}

EvalReport Environment::evaluate(const ImageSet& images, TxMode mode, const PrecoderSet& precoders,
                                 double lambda_r) const {
  if (images.size() == 0) throw ShapeError("empty evaluation set");
  // Inference reuses the networks' forward caches, so work on a copy.
  SemComModel model = model_;
  Streams s(seed_, kEvalStreams);
  std::vector<Matrix> fixed_leg, fixed_eve;
  const bool fixed = !cfg_.redraw_channel_per_frame;
  if (fixed) {
    fixed_leg.push_back(sample_channel(cfg_.channel, s.channel_leg));
    fixed_eve.push_back(sample_channel(cfg_.channel, s.channel_eve));
  }

  PassOptions opts;
  opts.mode = mode;
  opts.objective = Objective::secrecy;
  opts.lambda_r = lambda_r;
  double sse_leg = 0.0, sse_eve = 0.0;
  for (Index first = 0; first < images.size(); first += cfg_.minibatch) {
    const Index count = std::min(cfg_.minibatch, images.size() - first);
    const Matrix x = images.pixels.middleCols(first, count);
    const FrameDraws d =
        draw_from(s, count, mode == TxMode::superposed, fixed ? &fixed_leg : nullptr, fixed ? &fixed_eve : nullptr);
    const PassResult r = run_pass(model, cfg_.channel, x, d, precoders, opts);
    sse_leg += r.mse_leg * static_cast<double>(x.size());
    sse_eve += r.mse_eve * static_cast<double>(x.size());
  }
  EvalReport rep;
  const double n = static_cast<double>(images.pixels.size());
  rep.mse_leg = sse_leg / n;
  rep.mse_eve = sse_eve / n;
  rep.psnr_leg_db = psnr_from_mse(rep.mse_leg);
  rep.psnr_eve_db = psnr_from_mse(rep.mse_eve);
  rep.loss = rep.mse_leg - lambda_r * rep.mse_eve;
  return rep;
}

StagePlan StagePlan::scaled(double factor) const {
  if (!(factor > 0.0)) throw ConfigError("epoch scale must be > 0");
  auto s = [factor](int e) { return std::max(1, static_cast<int>(std::lround(e * factor))); };
  StagePlan p = *this;
  p.epochs1 = s(epochs1);
  p.epochs2 = s(epochs2);
  p.epochs3 = s(epochs3);
  p.epochs5 = s(epochs5);
  return p;
}

void StagePlan::validate() const {
  if (epochs1 < 0 || epochs2 < 0 || epochs3 < 0 || epochs5 < 0) throw ConfigError("epoch counts must be >= 0");
  if (decision_steps <= 0 || epochs_per_decision <= 0) throw ConfigError("T and K must be positive");
  for (double lr : {lr1, lr2, lr3, lr4, lr5})
    if (!(lr > 0.0)) throw ConfigError("all learning rates must be > 0");
  if (lambda_r < 0.0) throw ConfigError("lambda_r must be >= 0");
}

std::size_t PolicyLog::best_index() const {
  if (steps.empty()) throw StateError("empty policy log");
  std::size_t best = 0;
  for (std::size_t i = 1; i < steps.size(); ++i)
    if (steps[i].reward > steps[best].reward) best = i;
  return best;
}

double PolicyLog::mean_reward(std::size_t first, std::size_t count) const {
  if (count == 0 || first + count > steps.size()) throw ShapeError("reward window out of range");
  double sum = 0.0;
  for (std::size_t i = first; i < first + count; ++i) sum += steps[i].reward;
  return sum / static_cast<double>(count);
}

namespace {

void run_simple_stage(Environment& env, int stage, int epochs, double lr, TxMode mode, Objective objective,
                      TrainableSet set, const PrecoderSet& precoders, double lambda_r, const TrainingHooks& hooks) {
  env.model().set_trainable(set);
  for (auto* n : env.model().trainable_networks()) n->reset_optimizer();
  for (int e = 0; e < epochs; ++e) {
    double rate = lr;
    const double loss = env.train_epoch(mode, precoders, objective, lambda_r, rate);
    if (!std::isfinite(loss) || rate != lr) {
      throw NumericalError("stage " + std::to_string(stage) + " diverged at epoch " + std::to_string(e));
    }
    if (hooks.on_epoch) hooks.on_epoch({stage, e, loss, lr});
  }
  env.model().set_trainable(TrainableSet::none);
  if (hooks.on_stage_end) hooks.on_stage_end(stage, env);
}

}  // namespace

void stage1(Environment& env, const StagePlan& plan, const TrainingHooks& hooks) {
  plan.validate();
  const auto n = env.config().channel.n_m;
  run_simple_stage(env, 1, plan.epochs1, plan.lr1, TxMode::semantic_only, Objective::bob, TrainableSet::stage1,
                   PrecoderSet::semantic_only(n), plan.lambda_r, hooks);
}

void stage2(Environment& env, const StagePlan& plan, const TrainingHooks& hooks) {
  plan.validate();
  const auto n = env.config().channel.n_m;
  run_simple_stage(env, 2, plan.epochs2, plan.lr2, TxMode::superposed, Objective::bob, TrainableSet::stage2,
                   PrecoderSet::identity_sum(n), plan.lambda_r, hooks);
}

void stage3(Environment& env, const StagePlan& plan, const TrainingHooks& hooks) {
  plan.validate();
  const auto n = env.config().channel.n_m;
  run_simple_stage(env, 3, plan.epochs3, plan.lr3, TxMode::superposed, Objective::eve, TrainableSet::stage3,
                   PrecoderSet::identity_sum(n), plan.lambda_r, hooks);
}

PolicyLog stage4(Environment& env, ddpg::Agent& agent, const StagePlan& plan, const TrainingHooks& hooks) {
  plan.validate();
  const auto& ch = env.config().channel;
  const int cu = env.shape().cu;
  const int total = plan.decision_steps;
  if (agent.config().action_dim != 3 * ch.n_m * ch.n_n) throw ConfigError("agent action size does not match 3*N_m*N_n");

  const ImageSet eval = env.eval_set();
  EvalReport prev = env.evaluate(eval, TxMode::superposed, PrecoderSet::identity_sum(ch.n_m), plan.lambda_r);

  env.model().set_trainable(TrainableSet::stage4);
  for (auto* n : env.model().trainable_networks()) n->reset_optimizer();
  double lr = plan.lr4;

  PolicyLog log;
  int epoch = 0;
  for (int t = 0; t < total; ++t) {
    const auto state =
        ddpg::build_state(ch.snr_leg_db, ch.snr_eve_db, cu, prev.psnr_leg_db, prev.psnr_eve_db, prev.loss, t, total);
    const Vector action =
        agent.act(state.features(), true, ddpg::noise_scale(t, total, agent.config().noise_decay_fraction));
    const PrecoderSet precoders = reshape_action(action, ch.n_m, ch.n_n);

    for (int k = 0; k < plan.epochs_per_decision; ++k, ++epoch) {
      const double loss = env.train_epoch(TxMode::superposed, precoders, Objective::secrecy, plan.lambda_r, lr);
      if (hooks.on_epoch) hooks.on_epoch({4, epoch, loss, lr});
    }

    EvalReport rep = env.evaluate(eval, TxMode::superposed, precoders, plan.lambda_r);
    rep.stage = 4;
    rep.epoch = epoch;
    const double reward = ddpg::compute_reward(rep.psnr_leg_db, rep.psnr_eve_db, plan.lambda_r);
    const auto next =
        ddpg::build_state(ch.snr_leg_db, ch.snr_eve_db, cu, rep.psnr_leg_db, rep.psnr_eve_db, rep.loss, t + 1, total);
    const auto update = agent.observe({state.features(), action, reward, next.features(), t + 1 == total});

    DecisionRecord rec{t, action, reward, rep.psnr_leg_db, rep.psnr_eve_db, rep.loss, update.has_value()};
    if (hooks.on_decision) hooks.on_decision(rec);
    log.steps.push_back(std::move(rec));
    log.reports.push_back(rep);
    prev = rep;
  }
  env.model().set_trainable(TrainableSet::none);
  if (hooks.on_stage_end) hooks.on_stage_end(4, env);
  return log;
}

FinalModel stage5(Environment& env, const Vector& best_action, const StagePlan& plan, const TrainingHooks& hooks) {
  plan.validate();
  const auto& ch = env.config().channel;
  FinalModel fm;
  fm.action = best_action;
  fm.precoders = reshape_action(best_action, ch.n_m, ch.n_n);

  env.model().set_trainable(TrainableSet::stage4);
  for (auto* n : env.model().trainable_networks()) n->reset_optimizer();
  double lr = plan.lr5;
  for (int e = 0; e < plan.epochs5; ++e) {
    const double loss = env.train_epoch(TxMode::superposed, fm.precoders, Objective::secrecy, plan.lambda_r, lr);
    if (hooks.on_epoch) hooks.on_epoch({5, e, loss, lr});
  }
  env.model().set_trainable(TrainableSet::none);
  fm.test = env.evaluate(env.test_set(), TxMode::superposed, fm.precoders, plan.lambda_r);
  fm.test.stage = 5;
  fm.test.epoch = plan.epochs5;
  if (hooks.on_stage_end) hooks.on_stage_end(5, env);
  return fm;
}

EvalReport baseline_svd(Environment& env, const StagePlan& plan, const TrainingHooks& hooks) {
  plan.validate();
  const auto none = PrecoderSet::semantic_only(env.config().channel.n_m);
  run_simple_stage(env, 1, plan.epochs1, plan.lr1, TxMode::svd_baseline, Objective::bob, TrainableSet::stage1, none,
                   plan.lambda_r, hooks);
  run_simple_stage(env, 3, plan.epochs3, plan.lr3, TxMode::svd_baseline, Objective::eve, TrainableSet::stage3, none,
                   plan.lambda_r, hooks);
  EvalReport rep = env.evaluate(env.test_set(), TxMode::svd_baseline, none, plan.lambda_r);
  rep.stage = 3;
  return rep;
}

void save_model(std::ostream& out, const SemComModel& model, const Vector& action) {
  model.save(out);
  binio::write_tag(out, "PREC");
  binio::write_vector(out, action);
  if (!out) throw StateError("failed writing model checkpoint");
}

std::pair<SemComModel, Vector> load_model(std::istream& in, const CodeShape& shape) {
  SemComModel m = SemComModel::load(in, shape);
  binio::expect_tag(in, "PREC");
  Vector action = binio::read_vector(in);
  return {std::move(m), std::move(action)};
}

}  // namespace semsec
