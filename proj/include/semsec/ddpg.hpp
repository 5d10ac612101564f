#pragma once

#include "semsec/nn.hpp"
#include "semsec/rng.hpp"
#include "semsec/types.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace semsec::ddpg {

inline constexpr Index kStateDim = 7;

/// Environment observation in its documented order:
/// [SNR_leg, SNR_eve, CU, PSNR_leg(t-1), PSNR_eve(t-1), loss(t-1), t/T].
struct AgentState {
  double snr_leg_db = 0.0;
  double snr_eve_db = 0.0;
  double cu = 1.0;
  double psnr_leg_prev = 0.0;
  double psnr_eve_prev = 0.0;
  double loss_prev = 0.0;
  double progress = 0.0;

  Vector raw() const;
  // Scaled actor/critic input: SNRs / 20, CU / 5, PSNRs / 40, loss clipped
  // to [0, 1], progress unchanged.
  Vector features() const;
};

AgentState build_state(double snr_leg_db, double snr_eve_db, int cu, double psnr_leg_prev, double psnr_eve_prev,
                       double loss_prev, int t, int total_steps);

class OUProcess {
 public:
  OUProcess() = default;
  OUProcess(Index dim, double theta, double sigma, double dt);

  // x <- x - theta x dt + sigma sqrt(dt) N(0, 1)
  const Vector& step(Rng& rng);
  void reset() { x_.setZero(); }
  const Vector& value() const { return x_; }

  double theta() const { return theta_; }
  double sigma() const { return sigma_; }
  double dt() const { return dt_; }
  // Exact stationary std of the discretized process.
  double stationary_std() const;

 private:
  Vector x_;
  double theta_ = 0.15;
  double sigma_ = 0.2;
  double dt_ = 1.0;
};

// Exploration noise multiplier: 1 until the final `fraction` of the steps,
// then linear decay to 0 at the last step.
double noise_scale(int t, int total_steps, double fraction);

struct Transition {
  Vector state;       // actor input features
  Vector action;
  double reward = 0.0;
  Vector next_state;
  bool done = false;
};

struct TransitionBatch {
  Matrix states;       // state_dim x B
  Matrix actions;      // action_dim x B
  Vector rewards;
  Matrix next_states;
  Vector done;         // 0 or 1

  Index size() const { return rewards.size(); }
  static TransitionBatch stack(const std::vector<Transition>& items);
};

/// Fixed-capacity FIFO of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1000);

  void push(Transition t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  bool ready(std::size_t batch) const { return size_ >= batch; }

  // Uniform minibatch without replacement; nullopt while fewer than `batch`
  // transitions are stored.
  std::optional<TransitionBatch> sample(std::size_t batch, Rng& rng) const;

  // Oldest first.
  std::vector<Transition> contents() const;
  const Transition& at(std::size_t age_rank) const;

  void save(std::ostream& out) const;
  static ReplayBuffer load(std::istream& in);

 private:
  std::size_t capacity_;
  std::vector<Transition> ring_;
  std::size_t head_ = 0;  // next write slot
  std::size_t size_ = 0;
};

struct AgentConfig {
  Index state_dim = kStateDim;
  Index action_dim = 48;
  Index hidden = 256;
  double gamma = 0.99;
  double tau = 1e-3;
  std::size_t buffer_capacity = 1000;
  std::size_t batch = 128;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double weight_decay = 1e-4;
  double ou_theta = 0.15;
  double ou_sigma = 0.2;
  double ou_dt = 1.0;
  double noise_decay_fraction = 0.2;

  void validate() const;
  nn::OptimizerConfig actor_optimizer() const;
  nn::OptimizerConfig critic_optimizer() const;
};

std::vector<nn::LayerSpec> actor_layers(const AgentConfig& cfg);
std::vector<nn::LayerSpec> critic_layers(const AgentConfig& cfg);

double compute_reward(double psnr_leg_db, double psnr_eve_db, double lambda_r);

/// mu(s) plus scaled OU noise when exploring, clipped to [-1, 1].
Vector select_action(nn::Network& actor, const Vector& state, OUProcess* ou, bool explore, Rng* rng,
                     double noise_multiplier = 1.0);

/// y = r + gamma * Q'(s', mu'(s')) * (1 - d)
Vector td_targets(const TransitionBatch& batch, nn::Network& target_actor, nn::Network& target_critic, double gamma);

/// One optimizer step on the mean squared Bellman error; returns the
/// pre-step loss.
double critic_update(nn::Network& critic, const TransitionBatch& batch, const Vector& y,
                     const nn::OptimizerConfig& opt);

/// One optimizer step on -mean Q(s, mu(s)). Critic parameters are untouched.
double actor_update(nn::Network& actor, nn::Network& critic, const Matrix& states, const nn::OptimizerConfig& opt);

/// target <- tau * main + (1 - tau) * target
void soft_update(nn::Network& target, const nn::Network& main, double tau);

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
};

class Agent {
 public:
  Agent(const AgentConfig& cfg, std::uint64_t master_seed);

  Vector act(const Vector& state, bool explore, double noise_multiplier = 1.0);

  // Stores the transition and runs one update once the buffer holds a full
  // minibatch.
  std::optional<UpdateStats> observe(Transition t);
  std::optional<UpdateStats> update();

  const AgentConfig& config() const { return cfg_; }
  nn::Network& actor() { return actor_; }
  nn::Network& critic() { return critic_; }
  nn::Network& target_actor() { return target_actor_; }
  nn::Network& target_critic() { return target_critic_; }
  ReplayBuffer& buffer() { return buffer_; }
  OUProcess& ou() { return ou_; }

  void save(std::ostream& out, bool with_buffer = true) const;
  void load(std::istream& in);

 private:
  AgentConfig cfg_;
  nn::Network actor_;
  nn::Network critic_;
  nn::Network target_actor_;
  nn::Network target_critic_;
  OUProcess ou_;
  ReplayBuffer buffer_;
  Rng ou_rng_;
  Rng buffer_rng_;
};

}  // namespace semsec::ddpg
