#include "xslice/agents.hpp"

#include <algorithm>
#include <cmath>

#include "xslice/regret.hpp"

namespace xslice {

std::map<int, int> membership_of(const Scenario& sc) {
  std::map<int, int> m;
  for (const auto& s : sc.sessions) m[s.id] = s.slice;
  return m;
}

bool policy_is_merged(const std::string& policy) { return policy == "single"; }

// ---- nvs ----

NvsAgent::NvsAgent(const Scenario& sc)
    : sc_(sc), membership_(membership_of(sc)), state_(static_cast<int>(sc.slices.size())) {}

Allocation NvsAgent::decide(const KpmReport& report) {
  const int k = static_cast<int>(sc_.slices.size());
  std::vector<double> achieved(k, 0.0);
  std::vector<double> requested(k, 0.0);
  for (const auto& r : report.records) {
    auto it = membership_.find(r.session_id);
    if (it == membership_.end()) continue;
    achieved[it->second] += r.throughput_mbps;
    requested[it->second] += sc_.slices[it->second].throughput_demand_mbps;
  }
  if (report.round > 0) nvs_update(state_, achieved);
  return nvs_alloc(state_, requested, sc_.n_rb, 1);
}

// ---- demand-proportional ----

PropAgent::PropAgent(const Scenario& sc) : sc_(sc), membership_(membership_of(sc)) {}

Allocation PropAgent::decide(const KpmReport& report) {
  const int k = static_cast<int>(sc_.slices.size());
  std::vector<double> demand(k, 0.0);
  for (const auto& r : report.records) {
    auto it = membership_.find(r.session_id);
    if (it == membership_.end()) continue;
    demand[it->second] += sc_.slices[it->second].throughput_demand_mbps;
  }
  return prop_demand_alloc(demand, sc_.n_rb, 1);
}

// ---- xslice ----

namespace {

PolicyParams warmed_policy(const Scenario& sc, const PpoConfig& cfg, uint64_t seed) {
  PolicyParams p = init_policy(static_cast<int>(sc.slices.size()), cfg, seed);
  warmup_actor(p, cfg.warmup_steps, seed);
  return p;
}

// Grant floor covering the starvation trigger: a policy that can express
// sub-min_rb grants spends its early life penalty-flagged, and because the
// flat penalty reward replaces an honest (worse) one, the critic learns to
// shelter in exactly the states it should repel. Flooring the translation at
// min_rb per session makes that trap unreachable from the action space.
int grant_floor(const Scenario& sc, int min_rb) {
  // the starvation trigger counts sessions that are live in a round, so the
  // floor is sized to the worst concurrent occupancy, not the template count —
  // scripted visitors that never overlap must not eat into the action range
  int floor_rb = 1;
  for (size_t k = 0; k < sc.slices.size(); ++k) {
    for (const auto& a : sc.sessions) {
      if (a.slice != static_cast<int>(k)) continue;
      int live = 0;
      for (const auto& b : sc.sessions) {
        if (b.slice != static_cast<int>(k)) continue;
        if (b.arrival_round <= a.arrival_round &&
            (b.departure_round < 0 || b.departure_round > a.arrival_round))
          ++live;
      }
      floor_rb = std::max(floor_rb, live * min_rb);
    }
  }
  const int k = std::max<int>(1, sc.slices.size());
  return std::max(1, std::min(floor_rb, sc.n_rb / k));
}

}  // namespace

XsliceAgent::XsliceAgent(const Scenario& sc, const PpoConfig& cfg, uint64_t seed)
    : sc_(sc),
      cfg_(cfg),
      membership_(membership_of(sc)),
      bounds_(FeatureBounds::from_scenario(sc)),
      floor_rb_(grant_floor(sc, cfg.min_rb)),
      trainer_(warmed_policy(sc, cfg, seed), seed),
      act_rng_(Rng::stream(seed, "act")) {
  handle_.publish(trainer_.params());
}

const PolicyParams* XsliceAgent::policy_params() const { return &trainer_.params(); }

Allocation XsliceAgent::decide(const KpmReport& report) {
  // the decision path reads a published snapshot, never mid-update weights
  auto snap = handle_.get();
  const PolicyParams& p = snap->params;

  SliceGraph graph = build_graph(report.records, sc_.slices, membership_, bounds_, cfg_.n_max);
  PolicyEval ev = policy_forward(p, graph);
  ActionSample as = sample_action(ev.mu, ev.sigma, act_rng_);
  std::vector<double> ratios(as.clipped.data(), as.clipped.data() + as.clipped.size());
  Allocation alloc = action_to_allocation(ratios, sc_.n_rb, floor_rb_);

  last_penalty_ = false;
  if (has_pending_) complete_pending(report, ev.value);

  pending_ = Transition{std::move(graph), ev.gcn.state, as.raw,  as.log_prob,
                        0.0,              ev.value,     false,   report.round};
  pending_alloc_ = alloc;
  has_pending_ = true;
  return alloc;
}

void XsliceAgent::complete_pending(const KpmReport& report, double bootstrap) {
  RegretBreakdown b =
      evaluate_round(sc_.slices, report.records, membership_, pending_alloc_, 0.0);
  pending_.reward = b.reward_norm;
  if (cfg_.penalty_mode != "off") {
    last_penalty_ = apply_penalty(pending_, report.records, membership_, pending_alloc_,
                                  cfg_.min_rb, cfg_.penalty_value);
  }
  buffer_.transitions.push_back(std::move(pending_));
  has_pending_ = false;
  if (static_cast<int>(buffer_.transitions.size()) >= cfg_.rollout) {
    buffer_.bootstrap_value = bootstrap;
    train_ready_ = true;
  }
}

void XsliceAgent::after_reply(const KpmReport&) {
  if (!train_ready_) return;
  // hold the actor at the warm-start policy until the critic has priced the
  // early queue states; otherwise the first updates chase one-step noise
  const bool actor_on = buffer_.transitions.back().round >= cfg_.critic_warm_rounds;
  UpdateStats st = trainer_.update(buffer_, actor_on);
  log_.push_back(st);
  buffer_.transitions.clear();
  train_ready_ = false;
  // anneal exploration: early updates need wide draws to find the gradient,
  // late ones need quiet allocations so noise dips stop wounding the queues
  ++updates_done_;
  set_sigma(trainer_.mutable_params(),
            std::max(cfg_.sigma_floor,
                     cfg_.sigma_init * std::pow(cfg_.sigma_decay, updates_done_)));
  handle_.publish(trainer_.params());
}

void XsliceAgent::finish() {}

std::unique_ptr<Agent> make_agent(const std::string& policy, const Scenario& sc,
                                  const PpoConfig& cfg, uint64_t seed) {
  if (policy == "xslice") return std::make_unique<XsliceAgent>(sc, cfg, seed);
  if (policy == "single") return std::make_unique<SingleSliceAgent>(sc);
  if (policy == "nvs") return std::make_unique<NvsAgent>(sc);
  if (policy == "prop") return std::make_unique<PropAgent>(sc);
  throw std::invalid_argument("unknown policy: " + policy + " (expected xslice|single|nvs|prop)");
}

}  // namespace xslice
