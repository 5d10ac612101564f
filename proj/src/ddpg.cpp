#include "semsec/ddpg.hpp"

#include "semsec/binio.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace semsec::ddpg {

Vector AgentState::raw() const {
  Vector s(kStateDim);
  s << snr_leg_db, snr_eve_db, cu, psnr_leg_prev, psnr_eve_prev, loss_prev, progress;
  return s;
}

Vector AgentState::features() const {
  Vector s(kStateDim);
  s << snr_leg_db / 20.0, snr_eve_db / 20.0, cu / 5.0, psnr_leg_prev / 40.0, psnr_eve_prev / 40.0,
      std::clamp(loss_prev, 0.0, 1.0), progress;
  return s;
}

AgentState build_state(double snr_leg_db, double snr_eve_db, int cu, double psnr_leg_prev, double psnr_eve_prev,
                       double loss_prev, int t, int total_steps) {
  if (total_steps <= 0 || t < 0 || t > total_steps) throw ConfigError("decision step out of range [0, T]");
  return {snr_leg_db,
          snr_eve_db,
          static_cast<double>(cu),
          psnr_leg_prev,
          psnr_eve_prev,
          loss_prev,
          static_cast<double>(t) / static_cast<double>(total_steps)};
}

OUProcess::OUProcess(Index dim, double theta, double sigma, double dt)
    : x_(Vector::Zero(dim)), theta_(theta), sigma_(sigma), dt_(dt) {
  if (!(theta > 0.0) || sigma < 0.0 || !(dt > 0.0) || theta * dt >= 2.0) throw ConfigError("invalid OU parameters");
}

const Vector& OUProcess::step(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double noise = sigma_ * std::sqrt(dt_);
  for (Index i = 0; i < x_.size(); ++i) x_[i] += -theta_ * x_[i] * dt_ + noise * normal(rng);
  return x_;
}

double OUProcess::stationary_std() const {
  const double a = theta_ * dt_;
  return std::sqrt(sigma_ * sigma_ * dt_ / (2.0 * a - a * a));
}

double noise_scale(int t, int total_steps, double fraction) {
  if (fraction <= 0.0 || total_steps <= 0) return 1.0;
  const double start = (1.0 - fraction) * total_steps;
  if (t <= start) return 1.0;
  return std::max(0.0, (total_steps - 1 - t) / std::max(1.0, total_steps - 1 - start));
}

TransitionBatch TransitionBatch::stack(const std::vector<Transition>& items) {
  if (items.empty()) throw ShapeError("empty transition batch");
  const Index n = static_cast<Index>(items.size());
  const Index sd = items[0].state.size(), ad = items[0].action.size();
  TransitionBatch b{Matrix(sd, n), Matrix(ad, n), Vector(n), Matrix(sd, n), Vector(n)};
  for (Index i = 0; i < n; ++i) {
    const auto& t = items[static_cast<std::size_t>(i)];
    if (t.state.size() != sd || t.next_state.size() != sd || t.action.size() != ad) {
      throw ShapeError("inconsistent transition shapes");
    }
    b.states.col(i) = t.state;
    b.actions.col(i) = t.action;
    b.rewards[i] = t.reward;
    b.next_states.col(i) = t.next_state;
    b.done[i] = t.done ? 1.0 : 0.0;
  }
  return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
  ring_.resize(capacity);
}

void ReplayBuffer::push(Transition t) {
  ring_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

const Transition& ReplayBuffer::at(std::size_t age_rank) const {
  if (age_rank >= size_) throw ShapeError("replay buffer index out of range");
  const std::size_t oldest = (head_ + capacity_ - size_) % capacity_;
  return ring_[(oldest + age_rank) % capacity_];
}

std::vector<Transition> ReplayBuffer::contents() const {
  std::vector<Transition> out;
  out.reserve(size_);
  for (std::size_t i = 0; i < size_; ++i) out.push_back(at(i));
  return out;
}

std::optional<TransitionBatch> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  if (batch == 0 || size_ < batch) return std::nullopt;
  std::vector<std::size_t> idx(size_);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < batch; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, size_ - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<Transition> items;
  items.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) items.push_back(at(idx[i]));
  return TransitionBatch::stack(items);
}

void ReplayBuffer::save(std::ostream& out) const {
  using binio::write_le;
  binio::write_tag(out, "RBUF");
  write_le<std::uint64_t>(out, capacity_);
  write_le<std::uint64_t>(out, size_);
  for (std::size_t i = 0; i < size_; ++i) {
    const auto& t = at(i);
    binio::write_vector(out, t.state);
    binio::write_vector(out, t.action);
    write_le<double>(out, t.reward);
    binio::write_vector(out, t.next_state);
    write_le<std::uint8_t>(out, t.done ? 1 : 0);
  }
}

ReplayBuffer ReplayBuffer::load(std::istream& in) {
  using binio::read_le;
  binio::expect_tag(in, "RBUF");
  const auto capacity = read_le<std::uint64_t>(in);
  const auto size = read_le<std::uint64_t>(in);
  if (capacity == 0 || size > capacity || capacity > (1u << 24)) throw StateError("corrupt replay buffer section");
  ReplayBuffer buf(capacity);
  for (std::uint64_t i = 0; i < size; ++i) {
    Transition t;
    t.state = binio::read_vector(in);
    t.action = binio::read_vector(in);
    t.reward = read_le<double>(in);
    t.next_state = binio::read_vector(in);
    t.done = read_le<std::uint8_t>(in) != 0;
    buf.push(std::move(t));
  }
  return buf;
}

void AgentConfig::validate() const {
  if (state_dim <= 0 || action_dim <= 0 || hidden <= 0) throw ConfigError("agent dims must be positive");
  if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("gamma must lie in [0, 1)");
  if (!(tau > 0.0) || tau > 1.0) throw ConfigError("tau must lie in (0, 1]");
  if (batch == 0 || buffer_capacity < batch) throw ConfigError("replay buffer must hold at least one minibatch");
  actor_optimizer().validate();
  critic_optimizer().validate();
}

nn::OptimizerConfig AgentConfig::actor_optimizer() const {
  nn::OptimizerConfig o;
  o.learning_rate = actor_lr;
  o.weight_decay = weight_decay;
  return o;
}

nn::OptimizerConfig AgentConfig::critic_optimizer() const {
  nn::OptimizerConfig o;
  o.learning_rate = critic_lr;
  o.weight_decay = weight_decay;
  return o;
}

std::vector<nn::LayerSpec> actor_layers(const AgentConfig& cfg) {
  using nn::LayerSpec;
  return {LayerSpec::dense(cfg.state_dim, cfg.hidden), LayerSpec::relu(cfg.hidden),
          LayerSpec::dense(cfg.hidden, cfg.hidden),    LayerSpec::relu(cfg.hidden),
          LayerSpec::dense(cfg.hidden, cfg.action_dim), LayerSpec::tanh(cfg.action_dim)};
}

std::vector<nn::LayerSpec> critic_layers(const AgentConfig& cfg) {
  using nn::LayerSpec;
  return {LayerSpec::dense(cfg.state_dim + cfg.action_dim, cfg.hidden), LayerSpec::relu(cfg.hidden),
          LayerSpec::dense(cfg.hidden, cfg.hidden), LayerSpec::relu(cfg.hidden), LayerSpec::dense(cfg.hidden, 1)};
}

double compute_reward(double psnr_leg_db, double psnr_eve_db, double lambda_r) {
  return psnr_leg_db - lambda_r * psnr_eve_db;
}

Vector select_action(nn::Network& actor, const Vector& state, OUProcess* ou, bool explore, Rng* rng,
                     double noise_multiplier) {
  Vector a = actor.forward(state).col(0);
  if (explore) {
    if (!ou || !rng) throw StateError("exploration requires an OU process and a random stream");
    if (ou->value().size() != a.size()) throw ShapeError("OU dimension does not match the action");
    a += noise_multiplier * ou->step(*rng);
  }
  return a.cwiseMax(-1.0).cwiseMin(1.0);
}

namespace {

Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
  Matrix m(top.rows() + bottom.rows(), top.cols());
  m << top, bottom;
  return m;
}

}  // namespace

Vector td_targets(const TransitionBatch& batch, nn::Network& target_actor, nn::Network& target_critic, double gamma) {
  if (batch.size() == 0) throw ShapeError("empty transition batch");
  const Matrix next_actions = target_actor.forward(batch.next_states);
  const Vector q_next = target_critic.forward(stack_rows(batch.next_states, next_actions)).row(0).transpose();
  return batch.rewards.array() + gamma * q_next.array() * (1.0 - batch.done.array());
}

double critic_update(nn::Network& critic, const TransitionBatch& batch, const Vector& y,
                     const nn::OptimizerConfig& opt) {
  if (y.size() != batch.size()) throw ShapeError("TD target count does not match the batch");
  const double n = static_cast<double>(batch.size());
  const Matrix q = critic.forward(stack_rows(batch.states, batch.actions));
  const Vector diff = q.row(0).transpose() - y;
  const double loss = diff.squaredNorm() / n;
  if (!std::isfinite(loss)) {
    critic.zero_grad();
    throw NumericalError("non-finite critic loss");
  }
  critic.backward((2.0 / n) * diff.transpose());
  optimizer_step(critic, opt);
  return loss;
}

double actor_update(nn::Network& actor, nn::Network& critic, const Matrix& states, const nn::OptimizerConfig& opt) {
  const double n = static_cast<double>(states.cols());
  const Matrix actions = actor.forward(states);
  const Matrix q = critic.forward(stack_rows(states, actions));
  const double loss = -q.sum() / n;
  if (!std::isfinite(loss)) {
    actor.zero_grad();
    throw NumericalError("non-finite actor loss");
  }
  const bool critic_trainable = critic.trainable();
  critic.set_trainable(false);
  const Matrix grad_in = critic.backward(Matrix::Constant(1, states.cols(), -1.0 / n));
  critic.set_trainable(critic_trainable);
  actor.backward(grad_in.bottomRows(actions.rows()));
  optimizer_step(actor, opt);
  return loss;
}

void soft_update(nn::Network& target, const nn::Network& main, double tau) {
  if (target.layers() != main.layers()) throw ShapeError("soft update between networks of different shape");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
  target.params() = tau * main.params() + (1.0 - tau) * target.params();
}

Agent::Agent(const AgentConfig& cfg, std::uint64_t master_seed)
    : cfg_(cfg),
      ou_(cfg.action_dim, cfg.ou_theta, cfg.ou_sigma, cfg.ou_dt),
      buffer_(cfg.buffer_capacity),
      ou_rng_(make_stream(master_seed, Stream::ou)),
      buffer_rng_(make_stream(master_seed, Stream::buffer)) {
  cfg_.validate();
  actor_ = nn::init_network(actor_layers(cfg_), derive_seed(master_seed, Stream::init, 100));
  critic_ = nn::init_network(critic_layers(cfg_), derive_seed(master_seed, Stream::init, 101));
  target_actor_ = actor_;
  target_critic_ = critic_;
}

Vector Agent::act(const Vector& state, bool explore, double noise_multiplier) {
  return select_action(actor_, state, &ou_, explore, &ou_rng_, noise_multiplier);
}

std::optional<UpdateStats> Agent::observe(Transition t) {
  buffer_.push(std::move(t));
  return update();
}

std::optional<UpdateStats> Agent::update() {
  auto batch = buffer_.sample(cfg_.batch, buffer_rng_);
  if (!batch) return std::nullopt;
  UpdateStats stats;
  const Vector y = td_targets(*batch, target_actor_, target_critic_, cfg_.gamma);
  stats.critic_loss = critic_update(critic_, *batch, y, cfg_.critic_optimizer());
  stats.actor_loss = actor_update(actor_, critic_, batch->states, cfg_.actor_optimizer());
  soft_update(target_actor_, actor_, cfg_.tau);
  soft_update(target_critic_, critic_, cfg_.tau);
  return stats;
}

void Agent::save(std::ostream& out, bool with_buffer) const {
  for (const auto* net : {&actor_, &critic_, &target_actor_, &target_critic_}) nn::save_network(out, *net);
  binio::write_le<std::uint8_t>(out, with_buffer ? 1 : 0);
  if (with_buffer) buffer_.save(out);
  if (!out) throw StateError("failed writing agent checkpoint");
}

void Agent::load(std::istream& in) {
  nn::Network nets[4];
  for (auto& n : nets) n = nn::load_network(in);
  if (nets[0].layers() != actor_.layers() || nets[1].layers() != critic_.layers()) {
    throw StateError("agent checkpoint does not match the configured architecture");
  }
  actor_ = std::move(nets[0]);
  critic_ = std::move(nets[1]);
  target_actor_ = std::move(nets[2]);
  target_critic_ = std::move(nets[3]);
  if (binio::read_le<std::uint8_t>(in) != 0) buffer_ = ReplayBuffer::load(in);
}

}  // namespace semsec::ddpg
