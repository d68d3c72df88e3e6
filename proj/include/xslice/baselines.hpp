#pragma once
#include <span>
#include <vector>

#include "xslice/types.hpp"

namespace xslice {

// Whole band as one grant; the environment runs merged proportional fair.
Allocation single_slice_alloc(int n_rb);

// NVS-style priority time multiplexing: the slice with the highest
// requested/average throughput ratio takes the band for the round, the rest
// keep min_prb each so their sessions stay alive.
struct NvsState {
  double beta = 0.1;        // averaging factor
  double floor_mbps = 0.1;  // cold-start divisor floor
  std::vector<double> avg_mbps;

  explicit NvsState(int k = 0) : avg_mbps(static_cast<size_t>(k), 0.0) {}
};

// pure in (state, requested); ties go to the lowest slice id
Allocation nvs_alloc(const NvsState& st, std::span<const double> requested_mbps, int n_rb,
                     int min_prb = 1);
// avg_k <- (1-beta) avg_k + beta achieved_k, every slice every round
void nvs_update(NvsState& st, std::span<const double> achieved_mbps);

// n_k proportional to aggregate slice demand, integerized by largest
// remainder (ties to the lower id), floored at min_prb; all-zero demands
// fall back to an equal split.
Allocation prop_demand_alloc(std::span<const double> demand_mbps, int n_rb, int min_prb = 1);

}  // namespace xslice
