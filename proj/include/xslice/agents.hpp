#pragma once
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "xslice/baselines.hpp"
#include "xslice/e2lite.hpp"
#include "xslice/ppo.hpp"
#include "xslice/scenario.hpp"

namespace xslice {

// A slicing policy living behind the xApp endpoint: decide() runs on the
// reply path, after_reply() runs between rounds (training etc.).
class Agent {
 public:
  virtual ~Agent() = default;
  virtual Allocation decide(const KpmReport& report) = 0;
  virtual void after_reply(const KpmReport& report) { (void)report; }
  virtual void finish() {}

  // penalty state of the most recently completed round (xslice only)
  virtual bool last_penalty() const { return false; }
  virtual const std::vector<UpdateStats>* training_log() const { return nullptr; }
  virtual const PolicyParams* policy_params() const { return nullptr; }
};

// fixed session->slice membership from the scenario (records carry no slice id)
std::map<int, int> membership_of(const Scenario& sc);

class SingleSliceAgent final : public Agent {
 public:
  explicit SingleSliceAgent(const Scenario& sc) : alloc_(single_slice_alloc(sc.n_rb)) {}
  Allocation decide(const KpmReport&) override { return alloc_; }

 private:
  Allocation alloc_;
};

class NvsAgent final : public Agent {
 public:
  explicit NvsAgent(const Scenario& sc);
  Allocation decide(const KpmReport& report) override;

 private:
  Scenario sc_;
  std::map<int, int> membership_;
  NvsState state_;
};

class PropAgent final : public Agent {
 public:
  explicit PropAgent(const Scenario& sc);
  Allocation decide(const KpmReport& report) override;

 private:
  Scenario sc_;
  std::map<int, int> membership_;
};

// The online learner: GCN state encoding, PPO policy, rollout buffer,
// penalty bookkeeping, synchronous train-after-reply updates.
class XsliceAgent final : public Agent {
 public:
  XsliceAgent(const Scenario& sc, const PpoConfig& cfg, uint64_t seed);

  Allocation decide(const KpmReport& report) override;
  void after_reply(const KpmReport& report) override;
  void finish() override;

  bool last_penalty() const override { return last_penalty_; }
  const std::vector<UpdateStats>* training_log() const override { return &log_; }
  const PolicyParams* policy_params() const override;

  const PolicyHandle& handle() const { return handle_; }

 private:
  void complete_pending(const KpmReport& report, double bootstrap);

  Scenario sc_;
  PpoConfig cfg_;
  std::map<int, int> membership_;
  FeatureBounds bounds_;
  int floor_rb_;  // per-slice grant floor, min_rb per assigned session
  Trainer trainer_;
  PolicyHandle handle_;
  Rng act_rng_;

  RolloutBuffer buffer_;
  int updates_done_ = 0;
  bool train_ready_ = false;
  bool has_pending_ = false;
  Transition pending_;
  Allocation pending_alloc_;
  bool last_penalty_ = false;
  std::vector<UpdateStats> log_;
};

std::unique_ptr<Agent> make_agent(const std::string& policy, const Scenario& sc,
                                  const PpoConfig& cfg, uint64_t seed);

// true when the policy dissolves slice boundaries (merged scheduling pool)
bool policy_is_merged(const std::string& policy);

}  // namespace xslice
