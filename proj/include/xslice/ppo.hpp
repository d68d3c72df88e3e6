#pragma once
#include <Eigen/Dense>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "xslice/gcn.hpp"
#include "xslice/rng.hpp"

namespace xslice {

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Learner knobs.  Defaults follow the tuned operating point; everything is
// overridable from the experiment config.
struct PpoConfig {
  double alpha = 0.005;       // Adam learning rate
  double gamma = 0.95;        // discount
  double gae_lambda = 0.2;    // GAE smoothing
  double clip_eps = 0.2;      // ratio clip
  int epochs = 16;
  int minibatch = 10;
  int rollout = 40;           // transitions per update
  double penalty_value = -0.2;     // normalized-reward override for penalty rounds
  int min_rb = 5;                  // PRBs per backlogged session below which a round is penalized
  std::string penalty_mode = "mask";  // mask | skip | full | off
  int hidden = 32;
  int embedding = 12;
  int gcn_layers = 3;
  int n_max = 16;
  bool shared_encoder = true;
  int warmup_steps = 500;
  int critic_warm_rounds = 0;  // optional critic-only updates before the actor
                               // starts moving (rounds of online play)
  double sigma_init = 0.15;   // exploration stddev after warm-up
  double sigma_decay = 0.95;  // geometric stddev anneal per policy update
  double sigma_floor = 0.02;  // keeps the Gaussian head away from collapse

  void validate() const;
};

// Plain 4-layer MLP (hidden x hidden), ReLU inside, linear output.
struct Mlp {
  std::vector<Eigen::MatrixXd> w;  // in x out per layer
  std::vector<Eigen::VectorXd> b;
};

struct MlpCache {
  std::vector<Eigen::VectorXd> a;  // a[0] = input, a[l+1] = activation out of layer l
  std::vector<Eigen::VectorXd> z;  // pre-activations
};

Mlp mlp_init(int in, int hidden, int out, int layers, Rng& rng);
Eigen::VectorXd mlp_forward(const Mlp& m, const Eigen::VectorXd& x, MlpCache* cache = nullptr);
// returns d loss / d input; accumulates weight/bias grads
Eigen::VectorXd mlp_backward(const Mlp& m, const MlpCache& cache, const Eigen::VectorXd& dout,
                             Mlp& grads);

struct PolicyParams {
  int k = 0;
  PpoConfig cfg;
  GcnParams gcn;         // actor encoder (shared with critic by default)
  GcnParams gcn_critic;  // only populated when cfg.shared_encoder is false
  Mlp actor;             // state -> K pre-squash means
  Mlp critic;            // state -> scalar value
  Eigen::VectorXd pre_sigma;  // K learned state-independent pre-sigmas
};

PolicyParams init_policy(int k, const PpoConfig& cfg, uint64_t seed);
// pin the exploration stddev (all heads) to a scheduled value
void set_sigma(PolicyParams& p, double sigma);
// zero-valued clone with identical shapes, used to accumulate gradients
PolicyParams zero_like(const PolicyParams& p);

// flat named views over every tensor, in a fixed order (drives Adam, the
// checksum, and the checkpoint layout)
struct TensorRef {
  std::string name;
  Eigen::Index rows, cols;
  double* data;
};
std::vector<TensorRef> tensor_refs(PolicyParams& p);
uint64_t params_checksum(const PolicyParams& p);
bool params_finite(const PolicyParams& p);

struct PolicyEval {
  GcnCache gcn;
  GcnCache gcn_critic;  // used only when encoders are separate
  MlpCache actor_cache;
  MlpCache critic_cache;
  Eigen::VectorXd mu;     // K, in (0, 1)
  Eigen::VectorXd sigma;  // K
  double value = 0.0;
};

Eigen::VectorXd sigma_of(const PolicyParams& p);
PolicyEval policy_forward(const PolicyParams& p, const SliceGraph& g);

struct ActionSample {
  Eigen::VectorXd raw;      // pre-clip Gaussian draw
  Eigen::VectorXd clipped;  // in [0, 1], what the environment sees
  double log_prob = 0.0;    // density of raw under N(mu, sigma)
};
ActionSample sample_action(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma, Rng& rng);
double gaussian_log_prob(const Eigen::VectorXd& raw, const Eigen::VectorXd& mu,
                         const Eigen::VectorXd& sigma);

// ---- rollout storage ----

struct Transition {
  SliceGraph graph;
  Eigen::VectorXd state;  // encoder output at behavior time (logging/diagnostics)
  Eigen::VectorXd raw_action;
  double log_prob_old = 0.0;
  double reward = 0.0;  // normalized
  double value_old = 0.0;
  bool penalty = false;
  int round = 0;
};

struct RolloutBuffer {
  std::vector<Transition> transitions;
  double bootstrap_value = 0.0;  // V(s_T) under the behavior policy
};

// Marks the transition as a penalty round when the allocation starved a
// backlogged slice (fewer than min_rb PRBs per session with waiting data) or
// any session's delay hit the cap; the stored reward is replaced by the
// penalty value.  Returns true when the penalty fired.
bool apply_penalty(Transition& t, std::span<const KpmRecord> records,
                   const std::map<int, int>& session_slice, const Allocation& alloc,
                   int min_rb, double penalty_value);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};
// Backward recursion: delta_t = r_t + gamma * V(s_{t+1}) - V(s_t),
// A_t = delta_t + gamma * lambda * A_{t+1}, with V after the last transition
// given by bootstrap.
GaeResult gae(std::span<const double> rewards, std::span<const double> values, double bootstrap,
              double gamma, double lambda);

// ---- loss ----

struct LossSample {
  const SliceGraph* graph;
  const Eigen::VectorXd* raw_action;
  double log_prob_old;
  double advantage;  // already normalized
  double ret;
  bool penalty;
};

struct LossValue {
  double total = 0.0;
  double actor = 0.0;   // -mean(min(R*A, clip(R)*A)) over actor-visible samples
  double critic = 0.0;  // mean((V - return)^2)
  int actor_samples = 0;
};

// Computes the clipped PPO objective and, when grads != nullptr, accumulates
// analytic gradients for every parameter (actor, critic, encoder(s), sigma).
// With actor_enabled = false only the critic terms are evaluated.
LossValue ppo_loss(const PolicyParams& p, std::span<const LossSample> batch, double clip_eps,
                   const std::string& penalty_mode, PolicyParams* grads,
                   bool actor_enabled = true);

// ---- optimizer / trainer ----

struct Adam {
  double alpha = 0.005, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;
  std::vector<Eigen::ArrayXd> m, v;
  void step(PolicyParams& params, PolicyParams& grads);  // zeroes grads afterwards
};

struct UpdateStats {
  int round = 0;
  double mean_reward = 0.0;
  double actor_loss = 0.0;   // last-epoch mean
  double critic_loss = 0.0;  // last-epoch mean
  double sigma_mean = 0.0;
  int penalty_count = 0;
  bool aborted = false;  // numerical-health bailout: previous params kept
};

class Trainer {
 public:
  Trainer(PolicyParams params, uint64_t seed);

  // One PPO update over a full buffer.  On a numerical-health failure the
  // previous parameters (and optimizer state) are restored and kept.  With
  // actor_enabled = false only the critic (value head + its encoder) learns.
  UpdateStats update(const RolloutBuffer& buffer, bool actor_enabled = true);

  const PolicyParams& params() const { return params_; }
  PolicyParams& mutable_params() { return params_; }

 private:
  PolicyParams params_;
  Adam adam_;
  Rng shuffle_rng_;
};

// Supervised pre-training of the actor toward the equal-split target on
// synthetic graphs drawn inside the feature bounds; the encoder is frozen so
// the actor sees the embedding distribution it will face online.
void warmup_actor(PolicyParams& params, int steps, uint64_t seed);

// ---- snapshot publication ----

struct VersionedParams {
  PolicyParams params;
  uint64_t checksum = 0;
  uint64_t version = 0;
};

// Decision paths read an immutable snapshot; training publishes a fresh one.
class PolicyHandle {
 public:
  void publish(const PolicyParams& p);
  std::shared_ptr<const VersionedParams> get() const;

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const VersionedParams> current_;
  uint64_t next_version_ = 1;
};

bool verify_snapshot(const VersionedParams& vp);

// ---- checkpoints ----

void save_checkpoint(const std::string& path, const PolicyParams& params, uint64_t seed);
struct Checkpoint {
  PolicyParams params;
  uint64_t seed = 0;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace xslice
