#pragma once

#include "semsec/channel.hpp"
#include "semsec/codec.hpp"
#include "semsec/ddpg.hpp"
#include "semsec/nn.hpp"
#include "semsec/superpose.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

namespace semsec {

double mse(const Matrix& reference, const Matrix& estimate);
// Peak 1.0; MSE floored at 1e-10 so a perfect match reads 100 dB.
double psnr_from_mse(double mse);
double psnr(const Matrix& reference, const Matrix& estimate);

enum class TxMode {
  semantic_only,  // Y = S1
  superposed,     // Y = V1 S1 + V2 S2 + V3 S3
  svd_baseline,   // Y = V_svd(H_leg) S1, receivers equalize the effective channel
};

enum class Objective {
  bob,      // MSE(X, X1)
  eve,      // MSE(X, X2)
  secrecy,  // MSE(X, X1) - lambda * MSE(X, X2)
};

enum class TrainableSet { stage1, stage2, stage3, stage4, none };

struct EnvConfig {
  ChannelConfig channel;
  int cu = 1;
  CodecArch arch;
  Index minibatch = 64;
  bool redraw_channel_per_frame = true;
  Index eval_size = 256;

  void validate() const;
};

/// The five environment networks: the semantic encoder, both jamming
/// encoders, and the decoders of Bob and Eve (same architecture).
struct SemComModel {
  CodeShape shape;
  nn::Network encoder;
  nn::Network text_jammer;
  nn::Network gauss_jammer;
  nn::Network bob;
  nn::Network eve;

  static SemComModel create(const EnvConfig& cfg, int height, int width, int channels, std::uint64_t seed);

  void set_trainable(TrainableSet set);
  std::vector<nn::Network*> trainable_networks();
  std::vector<const nn::Network*> networks() const;

  void save(std::ostream& out) const;
  static SemComModel load(std::istream& in, const CodeShape& shape);
};

// Every random quantity of one minibatch, drawn ahead of the pass so that
// the forward/backward computation is a pure function of its inputs.
struct FrameDraws {
  Matrix text;                   // token ids, L_t x batch
  Matrix gauss;                  // H*W*C x batch
  std::vector<Matrix> h_leg;     // N_n x N_m per frame
  std::vector<Matrix> h_eve;
  Matrix noise_leg;              // unit variance, (N_n L_c) x batch; scaled by sigma in the pass
  Matrix noise_eve;
};

struct PassResult {
  double loss = 0.0;
  double mse_leg = 0.0;
  double mse_eve = 0.0;
  Matrix recon_leg;
  Matrix recon_eve;
  Matrix transmitted;  // normalized frames, (N_m L_c) x batch
};

struct PassOptions {
  TxMode mode = TxMode::superposed;
  Objective objective = Objective::bob;
  double lambda_r = 1.0;
  bool need_leg = true;
  bool need_eve = true;
  bool backward = false;
};

/// Runs encode -> precode -> normalize -> channel -> MMSE -> decode on one
/// minibatch and, when requested, backpropagates the objective into every
/// trainable network. Frozen networks only pass gradients through.
PassResult run_pass(SemComModel& model, const ChannelConfig& channel, const Matrix& images, const FrameDraws& draws,
                    const PrecoderSet& precoders, const PassOptions& opts);

struct EvalReport {
  double psnr_leg_db = 0.0;
  double psnr_eve_db = 0.0;
  double mse_leg = 0.0;
  double mse_eve = 0.0;
  double loss = 0.0;
  int epoch = 0;
  int stage = 0;
};

class Environment {
 public:
  Environment(EnvConfig cfg, std::shared_ptr<const ImageSet> train, std::shared_ptr<const ImageSet> test,
              std::shared_ptr<const TextCorpus> corpus, std::uint64_t seed);
  Environment(EnvConfig cfg, std::shared_ptr<const ImageSet> train, std::shared_ptr<const ImageSet> test,
              std::shared_ptr<const TextCorpus> corpus, std::uint64_t seed, SemComModel model);

  const EnvConfig& config() const { return cfg_; }
  SemComModel& model() { return model_; }
  const SemComModel& model() const { return model_; }
  const CodeShape& shape() const { return model_.shape; }
  const ImageSet& train_set() const { return *train_; }
  const ImageSet& test_set() const { return *test_; }
  ImageSet eval_set() const;
  std::uint64_t seed() const { return seed_; }

  void set_snr(double leg_db, double eve_db);

  FrameDraws draw(Index batch, bool need_jamming);

  /// One pass over the training set. `learning_rate` is halved whenever a
  /// step produces a non-finite loss or gradient; that step is skipped.
  /// Returns the mean minibatch loss.
  double train_epoch(TxMode mode, const PrecoderSet& precoders, Objective objective, double lambda_r,
                     double& learning_rate);

  /// Deterministic evaluation: all channel, noise and jamming draws come from
  /// a fixed evaluation stream, independent of training consumption.
  EvalReport evaluate(const ImageSet& images, TxMode mode, const PrecoderSet& precoders, double lambda_r) const;

  std::size_t skipped_steps() const { return skipped_steps_; }

 private:
  struct Streams {
    Rng data, channel_leg, channel_eve, noise_leg, noise_eve, text, gauss;
    Streams(std::uint64_t seed, std::uint64_t sub);
  };
  FrameDraws draw_from(Streams& s, Index batch, bool need_jamming, const std::vector<Matrix>* fixed_leg,
                       const std::vector<Matrix>* fixed_eve) const;

  EnvConfig cfg_;
  std::shared_ptr<const ImageSet> train_;
  std::shared_ptr<const ImageSet> test_;
  std::shared_ptr<const TextCorpus> corpus_;
  std::uint64_t seed_;
  SemComModel model_;
  Streams streams_;
  std::size_t skipped_steps_ = 0;
};

struct StagePlan {
  int epochs1 = 100;
  int epochs2 = 100;
  int epochs3 = 100;
  int epochs5 = 200;
  int decision_steps = 500;   // T
  int epochs_per_decision = 15;  // K
  double lr1 = 1e-3;
  double lr2 = 1e-3;
  double lr3 = 1e-3;
  double lr4 = 5e-4;
  double lr5 = 2e-4;
  double lambda_r = 1.0;

  int stage4_epochs() const { return decision_steps * epochs_per_decision; }
  // Multiplies the stage 1-3 and stage 5 epoch counts (rounded, at least 1).
  StagePlan scaled(double factor) const;
  void validate() const;
};

struct EpochRecord {
  int stage = 0;
  int epoch = 0;
  double train_loss = 0.0;
  double learning_rate = 0.0;
};

struct DecisionRecord {
  int step = 0;
  Vector action;
  double reward = 0.0;
  double psnr_leg_db = 0.0;
  double psnr_eve_db = 0.0;
  double loss = 0.0;
  bool agent_updated = false;
};

struct PolicyLog {
  std::vector<DecisionRecord> steps;
  std::vector<EvalReport> reports;

  // Highest reward, earliest step on ties.
  std::size_t best_index() const;
  double mean_reward(std::size_t first, std::size_t count) const;
};

struct FinalModel {
  Vector action;
  PrecoderSet precoders;
  EvalReport test;
};

struct TrainingHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(const DecisionRecord&)> on_decision;
  std::function<void(int stage, const Environment&)> on_stage_end;
};

void stage1(Environment& env, const StagePlan& plan, const TrainingHooks& hooks = {});
void stage2(Environment& env, const StagePlan& plan, const TrainingHooks& hooks = {});
void stage3(Environment& env, const StagePlan& plan, const TrainingHooks& hooks = {});
PolicyLog stage4(Environment& env, ddpg::Agent& agent, const StagePlan& plan, const TrainingHooks& hooks = {});
FinalModel stage5(Environment& env, const Vector& best_action, const StagePlan& plan, const TrainingHooks& hooks = {});

/// Non-learned reference: per-frame SVD precoding of the semantic stream
/// only (no jamming). Trains Bob's side, then Eve's decoder, and evaluates on
/// the test set.
EvalReport baseline_svd(Environment& env, const StagePlan& plan, const TrainingHooks& hooks = {});

// Model checkpoint: the five networks followed by the precoder action.
void save_model(std::ostream& out, const SemComModel& model, const Vector& action);
std::pair<SemComModel, Vector> load_model(std::istream& in, const CodeShape& shape);

}  // namespace semsec
