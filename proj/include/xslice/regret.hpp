#pragma once
#include <map>
#include <span>

#include "xslice/types.hpp"

namespace xslice {

// Relative deficit for a "bigger is better" metric: max((demand - achieved)/demand, 0).
double throughput_regret_term(double demand, double achieved);
// Relative excess for a "smaller is better" metric: max((achieved - bound)/bound, 0).
double excess_regret_term(double bound, double achieved);

// Per-slice unweighted regret triple summed over the slice's session records.
SliceRegret slice_regret(const SliceSpec& spec, std::span<const KpmRecord> records);

// Weighted network regret r(t) = sum_k (lp*r_p + ld*r_d + lr*r_r).
double total_regret(std::span<const SliceSpec> specs, std::span<const SliceRegret> per_slice);

// Utilization auxiliary u(t) = sum_k 1/(n_k + C).
double utilization(const Allocation& alloc, double c_const);

struct Reward {
  double raw = 0.0;
  double norm = 0.0;  // clamp(raw, -r_max, r_max) / r_max
};
Reward reward(double regret, double util, double r_max);

// One round's complete scorecard: per-slice regret triples, weighted total,
// utilization of the applied allocation and the resulting reward (r_max = K).
// A merged allocation (single grant, K > 1 slices) scores utilization from
// the PRBs each slice's sessions actually consumed.
RegretBreakdown evaluate_round(std::span<const SliceSpec> specs,
                               std::span<const KpmRecord> records,
                               const std::map<int, int>& session_slice, const Allocation& alloc,
                               double c_const = 0.0);

// Map continuous per-slice ratios in [0, 1] to a contiguous-BWP allocation:
// n_k = max(min_prb, round(ratio_k * n_rb)); if the total exceeds n_rb the
// quotas are scaled down and re-rounded by largest remainder (ties to the
// lower slice id).
Allocation action_to_allocation(std::span<const double> ratios, int n_rb, int min_prb = 1);

}  // namespace xslice
