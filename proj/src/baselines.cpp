#include "xslice/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace xslice {

Allocation single_slice_alloc(int n_rb) {
  if (n_rb < 1) throw std::invalid_argument("single_slice_alloc: empty band");
  Allocation a;
  a.grants.push_back({0, n_rb});
  return a;
}

namespace {

Allocation pack_contiguous(const std::vector<int>& counts) {
  Allocation a;
  int pos = 0;
  for (int n : counts) {
    a.grants.push_back({pos, n});
    pos += n;
  }
  return a;
}

}  // namespace

Allocation nvs_alloc(const NvsState& st, std::span<const double> requested_mbps, int n_rb,
                     int min_prb) {
  const int k = static_cast<int>(requested_mbps.size());
  if (k < 1) throw std::invalid_argument("nvs_alloc: no slices");
  if (static_cast<int>(st.avg_mbps.size()) != k)
    throw std::invalid_argument("nvs_alloc: state size mismatch");
  if (n_rb < k * min_prb) throw std::invalid_argument("nvs_alloc: band too small");

  int best = 0;
  double best_priority = -1.0;
  for (int i = 0; i < k; ++i) {
    double priority = requested_mbps[i] / std::max(st.avg_mbps[i], st.floor_mbps);
    if (priority > best_priority) {  // strict: ties keep the lowest id
      best_priority = priority;
      best = i;
    }
  }
  std::vector<int> counts(k, min_prb);
  counts[best] = n_rb - min_prb * (k - 1);
  return pack_contiguous(counts);
}

void nvs_update(NvsState& st, std::span<const double> achieved_mbps) {
  if (achieved_mbps.size() != st.avg_mbps.size())
    throw std::invalid_argument("nvs_update: size mismatch");
  for (size_t i = 0; i < st.avg_mbps.size(); ++i)
    st.avg_mbps[i] = (1.0 - st.beta) * st.avg_mbps[i] + st.beta * achieved_mbps[i];
}

Allocation prop_demand_alloc(std::span<const double> demand_mbps, int n_rb, int min_prb) {
  const int k = static_cast<int>(demand_mbps.size());
  if (k < 1) throw std::invalid_argument("prop_demand_alloc: no slices");
  if (n_rb < k * min_prb) throw std::invalid_argument("prop_demand_alloc: band too small");

  double total = 0.0;
  for (double d : demand_mbps) {
    if (d < 0.0) throw std::invalid_argument("prop_demand_alloc: negative demand");
    total += d;
  }

  std::vector<int> counts(k, 0);
  std::vector<std::pair<double, int>> frac(k);  // (-fraction, id) for stable ordering
  int assigned = 0;
  for (int i = 0; i < k; ++i) {
    double quota = total > 0.0 ? n_rb * demand_mbps[i] / total
                               : static_cast<double>(n_rb) / k;
    counts[i] = static_cast<int>(std::floor(quota));
    frac[i] = {-(quota - counts[i]), i};
    assigned += counts[i];
  }
  std::sort(frac.begin(), frac.end());
  for (int r = 0; r < n_rb - assigned; ++r) ++counts[frac[static_cast<size_t>(r) % k].second];

  // impose the floor, paying from the largest shares
  for (int i = 0; i < k; ++i) {
    while (counts[i] < min_prb) {
      int donor = static_cast<int>(std::max_element(counts.begin(), counts.end()) -
                                   counts.begin());
      if (counts[donor] <= min_prb) throw std::logic_error("prop_demand_alloc: infeasible floor");
      --counts[donor];
      ++counts[i];
    }
  }
  return pack_contiguous(counts);
}

}  // namespace xslice
