#pragma once
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace xslice {

enum class SchedPolicy { ProportionalFair, RoundRobin, MaxThroughput, EarliestDeadline };

SchedPolicy sched_policy_from_string(const std::string& s);
std::string to_string(SchedPolicy p);

// Per-slice service expectation: demand triple, regret weights, intra-slice
// scheduler choice.
struct SliceSpec {
  int id = 0;
  double throughput_demand_mbps = 0.0;  // P_k
  double delay_demand_ms = 0.0;         // T_k
  double bler_demand = 0.0;             // Z_k, fraction in (0, 1]
  double weight_tp = 1.0;               // lambda_p
  double weight_delay = 0.8;            // lambda_d
  double weight_rel = 2.0;              // lambda_r
  SchedPolicy scheduler = SchedPolicy::ProportionalFair;

  void validate() const {
    if (throughput_demand_mbps <= 0.0) throw std::invalid_argument("slice " + std::to_string(id) + ": throughput demand must be > 0");
    if (delay_demand_ms <= 0.0) throw std::invalid_argument("slice " + std::to_string(id) + ": delay demand must be > 0");
    if (bler_demand <= 0.0 || bler_demand > 1.0) throw std::invalid_argument("slice " + std::to_string(id) + ": bler demand must be in (0, 1]");
    if (weight_tp < 0.0 || weight_delay < 0.0 || weight_rel < 0.0) throw std::invalid_argument("slice " + std::to_string(id) + ": regret weights must be >= 0");
  }
};

// One session's measurement record for a round (KPM + MAC-layer fields).
struct KpmRecord {
  int session_id = 0;
  double throughput_mbps = 0.0;  // rho_i, achieved downlink rate this round
  double delay_ms = 0.0;         // tau_i, mean sojourn of delivered bytes (or HOL age)
  double bler = 0.0;             // zeta_i in [0, 1]
  int prbs_used = 0;
  double pusch_snr_db = 0.0;
  double phr_db = 0.0;
  int mcs = 0;
  int current_tbs = 0;    // transport blocks attempted this round
  int scheduled_rbs = 0;  // PRBs granted by the scheduler this round

  void validate() const {
    if (!(throughput_mbps >= 0.0)) throw std::invalid_argument("kpm: throughput must be finite and >= 0");
    if (!(delay_ms >= 0.0)) throw std::invalid_argument("kpm: delay must be finite and >= 0");
    if (!(bler >= 0.0 && bler <= 1.0)) throw std::invalid_argument("kpm: bler must be in [0, 1]");
  }
};

// Contiguous bandwidth part per slice: grants[k] covers slice k.
struct PrbGrant {
  int start_prb = 0;
  int num_prb = 0;
};

struct Allocation {
  std::vector<PrbGrant> grants;

  int total_prbs() const {
    int s = 0;
    for (auto& g : grants) s += g.num_prb;
    return s;
  }
  void validate(int n_rb) const {
    int pos = 0;
    for (auto& g : grants) {
      if (g.num_prb < 1) throw std::invalid_argument("allocation: every slice needs at least 1 PRB");
      if (g.start_prb != pos) throw std::invalid_argument("allocation: grants must tile the band contiguously");
      pos += g.num_prb;
    }
    if (pos > n_rb) throw std::invalid_argument("allocation: grants exceed the band");
  }
};

struct SliceRegret {
  double tp = 0.0;     // sum_i max((P_k - rho_i)/P_k, 0)
  double delay = 0.0;  // sum_i max((tau_i - T_k)/T_k, 0)
  double rel = 0.0;    // sum_i max((zeta_i - Z_k)/Z_k, 0)
};

struct RegretBreakdown {
  std::vector<SliceRegret> per_slice;
  std::vector<double> per_slice_weighted;  // lambda_p*tp + lambda_d*delay + lambda_r*rel
  double total = 0.0;
  double utilization = 0.0;
  double reward_raw = 0.0;
  double reward_norm = 0.0;
};

}  // namespace xslice
