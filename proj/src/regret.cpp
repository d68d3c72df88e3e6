#include "xslice/regret.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace xslice {

SchedPolicy sched_policy_from_string(const std::string& s) {
  if (s == "proportional-fair" || s == "pf") return SchedPolicy::ProportionalFair;
  if (s == "round-robin" || s == "rr") return SchedPolicy::RoundRobin;
  if (s == "max-throughput" || s == "mt") return SchedPolicy::MaxThroughput;
  if (s == "earliest-deadline" || s == "edf") return SchedPolicy::EarliestDeadline;
  throw std::invalid_argument("unknown scheduler policy: " + s);
}

std::string to_string(SchedPolicy p) {
  switch (p) {
    case SchedPolicy::ProportionalFair: return "proportional-fair";
    case SchedPolicy::RoundRobin: return "round-robin";
    case SchedPolicy::MaxThroughput: return "max-throughput";
    case SchedPolicy::EarliestDeadline: return "earliest-deadline";
  }
  return "?";
}

double throughput_regret_term(double demand, double achieved) {
  if (demand <= 0.0) throw std::invalid_argument("regret: demand must be > 0");
  return std::max((demand - achieved) / demand, 0.0);
}

double excess_regret_term(double bound, double achieved) {
  if (bound <= 0.0) throw std::invalid_argument("regret: bound must be > 0");
  return std::max((achieved - bound) / bound, 0.0);
}

SliceRegret slice_regret(const SliceSpec& spec, std::span<const KpmRecord> records) {
  spec.validate();
  SliceRegret r;
  for (const auto& k : records) {
    r.tp += throughput_regret_term(spec.throughput_demand_mbps, k.throughput_mbps);
    r.delay += excess_regret_term(spec.delay_demand_ms, k.delay_ms);
    r.rel += excess_regret_term(spec.bler_demand, k.bler);
  }
  return r;
}

double total_regret(std::span<const SliceSpec> specs, std::span<const SliceRegret> per_slice) {
  if (specs.size() != per_slice.size())
    throw std::invalid_argument("total_regret: weight/slice count mismatch");
  double total = 0.0;
  for (size_t k = 0; k < specs.size(); ++k) {
    total += specs[k].weight_tp * per_slice[k].tp + specs[k].weight_delay * per_slice[k].delay +
             specs[k].weight_rel * per_slice[k].rel;
  }
  return total;
}

double utilization(const Allocation& alloc, double c_const) {
  double u = 0.0;
  for (const auto& g : alloc.grants) {
    double denom = g.num_prb + c_const;
    if (denom <= 0.0) throw std::invalid_argument("utilization: degenerate allocation (n_k + C <= 0)");
    u += 1.0 / denom;
  }
  return u;
}

Reward reward(double regret, double util, double r_max) {
  if (r_max <= 0.0) throw std::invalid_argument("reward: r_max must be > 0");
  Reward r;
  r.raw = util - regret;
  r.norm = std::clamp(r.raw, -r_max, r_max) / r_max;
  return r;
}

RegretBreakdown evaluate_round(std::span<const SliceSpec> specs,
                               std::span<const KpmRecord> records,
                               const std::map<int, int>& session_slice, const Allocation& alloc,
                               double c_const) {
  const int k = static_cast<int>(specs.size());
  std::vector<std::vector<KpmRecord>> grouped(k);
  std::vector<int> used_prbs(k, 0);
  for (const auto& r : records) {
    auto it = session_slice.find(r.session_id);
    if (it == session_slice.end() || it->second < 0 || it->second >= k)
      throw std::invalid_argument("evaluate_round: record for unknown session " +
                                  std::to_string(r.session_id));
    grouped[it->second].push_back(r);
    used_prbs[it->second] += r.scheduled_rbs;
  }

  RegretBreakdown b;
  b.per_slice.resize(k);
  b.per_slice_weighted.resize(k);
  for (int i = 0; i < k; ++i) {
    b.per_slice[i] = slice_regret(specs[i], grouped[i]);
    b.per_slice_weighted[i] = specs[i].weight_tp * b.per_slice[i].tp +
                              specs[i].weight_delay * b.per_slice[i].delay +
                              specs[i].weight_rel * b.per_slice[i].rel;
    b.total += b.per_slice_weighted[i];
  }

  if (static_cast<int>(alloc.grants.size()) == k) {
    b.utilization = utilization(alloc, c_const);
  } else {
    for (int i = 0; i < k; ++i) b.utilization += 1.0 / (std::max(1, used_prbs[i]) + c_const);
  }
  Reward rw = reward(b.total, b.utilization, static_cast<double>(k));
  b.reward_raw = rw.raw;
  b.reward_norm = rw.norm;
  return b;
}

Allocation action_to_allocation(std::span<const double> ratios, int n_rb, int min_prb) {
  const int k = static_cast<int>(ratios.size());
  if (k < 1) throw std::invalid_argument("action_to_allocation: need at least one slice");
  if (min_prb < 1) throw std::invalid_argument("action_to_allocation: min_prb must be >= 1");
  if (n_rb < k * min_prb) throw std::invalid_argument("action_to_allocation: infeasible, n_rb < K * min_prb");
  for (double r : ratios)
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("action_to_allocation: ratios must be in [0, 1]");

  std::vector<double> quota(k);
  for (int i = 0; i < k; ++i) quota[i] = ratios[i] * n_rb;

  std::vector<int> n(k);
  long sum = 0;
  for (int i = 0; i < k; ++i) {
    n[i] = std::max(min_prb, static_cast<int>(std::llround(quota[i])));
    sum += n[i];
  }

  if (sum > n_rb) {
    // scale quotas to fill the band exactly, floor, then hand out the
    // remainder largest-fraction-first (ties to the lower slice id)
    double qsum = std::accumulate(quota.begin(), quota.end(), 0.0);
    double scale = qsum > 0.0 ? n_rb / qsum : 0.0;
    std::vector<double> frac(k);
    sum = 0;
    for (int i = 0; i < k; ++i) {
      double q = quota[i] * scale;
      n[i] = static_cast<int>(std::floor(q));
      frac[i] = q - n[i];
      sum += n[i];
    }
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
    for (int j = 0; sum < n_rb; ++j) {
      ++n[order[j % k]];
      ++sum;
    }
    // re-impose floors, taking PRBs back from the largest grants
    for (int i = 0; i < k; ++i) {
      while (n[i] < min_prb) {
        int big = static_cast<int>(std::max_element(n.begin(), n.end()) - n.begin());
        if (n[big] <= min_prb) throw std::logic_error("action_to_allocation: cannot satisfy floors");
        --n[big];
        ++n[i];
      }
    }
  }

  Allocation alloc;
  alloc.grants.resize(k);
  int pos = 0;
  for (int i = 0; i < k; ++i) {
    alloc.grants[i].start_prb = pos;
    alloc.grants[i].num_prb = n[i];
    pos += n[i];
  }
  return alloc;
}

}  // namespace xslice
