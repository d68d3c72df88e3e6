#pragma once
#include <Eigen/Dense>
#include <map>
#include <span>
#include <vector>

#include "xslice/ransim.hpp"
#include "xslice/rng.hpp"
#include "xslice/types.hpp"

namespace xslice {

inline constexpr int kNumFeatures = 12;  // F0: per-node input features

// Fixed per-scenario normalization bounds so feature scaling never depends
// on the data seen in a particular round.
struct FeatureBounds {
  double rho_max_mbps = 1.0;
  double n_rb = 1.0;
  double p_max_mbps = 1.0;
  static FeatureBounds from_scenario(const Scenario& sc);
};

// Bipartite session-slice graph, padded to n_max session slots.  Session
// slots are assigned in ascending session-id order, so the graph (and hence
// everything downstream) is invariant to the ordering of report records.
struct SliceGraph {
  int n_max = 0;
  int k = 0;
  Eigen::MatrixXd adj_norm;           // (n_max+k) x (n_max+k), D^-1/2 (A+I) D^-1/2
  Eigen::MatrixXd features;           // (n_max+k) x kNumFeatures
  std::vector<int> slot_slice;        // n_max entries; -1 for dummy slots
  std::vector<int> slot_session;      // n_max entries; -1 for dummy slots

  int nodes() const { return n_max + k; }
};

// Symmetric renormalized adjacency: Â = D^-1/2 (A + I) D^-1/2.
Eigen::MatrixXd normalize_adjacency(const Eigen::MatrixXd& adj);

SliceGraph build_graph(std::span<const KpmRecord> records, std::span<const SliceSpec> specs,
                       const std::map<int, int>& session_slice, const FeatureBounds& bounds,
                       int n_max);

struct GcnParams {
  // w[0]: kNumFeatures x E, w[1..L-1]: E x E
  std::vector<Eigen::MatrixXd> w;
  int embedding() const { return static_cast<int>(w.back().cols()); }
  int layers() const { return static_cast<int>(w.size()); }
};

GcnParams gcn_init(int layers, int embedding, Rng& rng);

struct GcnCache {
  std::vector<Eigen::MatrixXd> m;  // m[l] = Â * h[l]
  std::vector<Eigen::MatrixXd> z;  // z[l] = m[l] * w[l]
  std::vector<Eigen::MatrixXd> h;  // h[0] = features, h[l+1] = act(z[l])
  Eigen::VectorXd state;           // concat of per-slice mean-pooled embeddings (K*E)
};

// Propagation H^(l+1) = ReLU(Â H^(l) W^(l)) with a linear final layer, then
// per-slice mean pooling over real session nodes (empty slice -> zero).
GcnCache gcn_forward(const SliceGraph& g, const GcnParams& p);

struct GcnGrads {
  std::vector<Eigen::MatrixXd> dw;
  Eigen::MatrixXd dfeatures;
};

// Reverse-mode through the pooling and all layers; dstate is dLoss/dstate.
// Accumulates into grads (which must be zero-shaped like the params).
void gcn_backward(const SliceGraph& g, const GcnParams& p, const GcnCache& cache,
                  const Eigen::VectorXd& dstate, GcnGrads& grads);

GcnGrads zero_gcn_grads(const GcnParams& p, const SliceGraph& g);

}  // namespace xslice
