#include "xslice/gcn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xslice {

FeatureBounds FeatureBounds::from_scenario(const Scenario& sc) {
  FeatureBounds b;
  double per_prb = prb_capacity_bits(kCqiEfficiency[15], sc.round_ms, sc.dl_fraction, sc.overhead) /
                   (sc.round_ms * 1000.0);
  b.n_rb = sc.n_rb;
  b.rho_max_mbps = per_prb * sc.n_rb;
  double p = 1.0;
  for (const auto& s : sc.slices) p = std::max(p, s.throughput_demand_mbps);
  if (sc.traffic_class != "custom") p = std::max(p, traffic_class_range(sc.traffic_class).second);
  for (const auto& s : sc.sessions) {
    if (s.demand_kind == "constant") p = std::max(p, s.rate_mbps);
    for (const auto& st : s.steps) p = std::max(p, st.rate_mbps);
  }
  b.p_max_mbps = p;
  return b;
}

Eigen::MatrixXd normalize_adjacency(const Eigen::MatrixXd& adj) {
  if (adj.rows() != adj.cols()) throw std::invalid_argument("normalize_adjacency: square matrix required");
  const Eigen::Index n = adj.rows();
  Eigen::MatrixXd a = adj + Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd dinv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double d = a.row(i).sum();
    dinv(i) = 1.0 / std::sqrt(d);  // d >= 1 thanks to the self loop
  }
  return dinv.asDiagonal() * a * dinv.asDiagonal();
}

static double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

SliceGraph build_graph(std::span<const KpmRecord> records, std::span<const SliceSpec> specs,
                       const std::map<int, int>& session_slice, const FeatureBounds& bounds,
                       int n_max) {
  const int k = static_cast<int>(specs.size());
  if (static_cast<int>(records.size()) > n_max)
    throw std::invalid_argument("build_graph: session count exceeds n_max capacity");

  SliceGraph g;
  g.n_max = n_max;
  g.k = k;
  g.slot_slice.assign(n_max, -1);
  g.slot_session.assign(n_max, -1);

  // canonical slot order: ascending session id
  std::vector<const KpmRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const KpmRecord* a, const KpmRecord* b) { return a->session_id < b->session_id; });

  const int n = g.nodes();
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n, n);
  g.features = Eigen::MatrixXd::Zero(n, kNumFeatures);

  for (size_t i = 0; i < sorted.size(); ++i) {
    const KpmRecord& r = *sorted[i];
    auto it = session_slice.find(r.session_id);
    if (it == session_slice.end() || it->second < 0 || it->second >= k)
      throw std::invalid_argument("build_graph: session " + std::to_string(r.session_id) +
                                  " has no slice membership");
    const int slice = it->second;
    const int node = static_cast<int>(i);
    const int slice_node = n_max + slice;
    g.slot_slice[i] = slice;
    g.slot_session[i] = r.session_id;
    adj(node, slice_node) = 1.0;
    adj(slice_node, node) = 1.0;

    const SliceSpec& sp = specs[slice];
    auto& f = g.features;
    f(node, 0) = clamp01(r.throughput_mbps / bounds.rho_max_mbps);
    f(node, 1) = clamp01(r.delay_ms / 1000.0);
    f(node, 2) = clamp01(r.bler);
    f(node, 3) = clamp01(r.prbs_used / bounds.n_rb);
    f(node, 4) = clamp01((r.pusch_snr_db + 10.0) / 50.0);
    f(node, 5) = clamp01((r.phr_db + 17.0) / 50.0);
    f(node, 6) = clamp01(r.mcs / 28.0);
    f(node, 7) = clamp01(r.current_tbs / bounds.n_rb);
    f(node, 8) = clamp01(r.scheduled_rbs / bounds.n_rb);
    f(node, 9) = clamp01(sp.throughput_demand_mbps / bounds.p_max_mbps);
    f(node, 10) = clamp01(sp.delay_demand_ms / 1000.0);
    f(node, 11) = clamp01(sp.bler_demand);
  }
  // slice nodes carry their demand triple
  for (int s = 0; s < k; ++s) {
    const int node = n_max + s;
    g.features(node, 9) = clamp01(specs[s].throughput_demand_mbps / bounds.p_max_mbps);
    g.features(node, 10) = clamp01(specs[s].delay_demand_ms / 1000.0);
    g.features(node, 11) = clamp01(specs[s].bler_demand);
  }

  g.adj_norm = normalize_adjacency(adj);
  return g;
}

GcnParams gcn_init(int layers, int embedding, Rng& rng) {
  if (layers < 1 || embedding < 1) throw std::invalid_argument("gcn_init: layers and embedding must be >= 1");
  GcnParams p;
  p.w.reserve(layers);
  for (int l = 0; l < layers; ++l) {
    int fin = l == 0 ? kNumFeatures : embedding;
    int fout = embedding;
    double a = std::sqrt(6.0 / (fin + fout));
    Eigen::MatrixXd w(fin, fout);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-a, a);
    p.w.push_back(std::move(w));
  }
  return p;
}

GcnCache gcn_forward(const SliceGraph& g, const GcnParams& p) {
  const int layers = p.layers();
  GcnCache c;
  c.h.resize(layers + 1);
  c.m.resize(layers);
  c.z.resize(layers);
  c.h[0] = g.features;
  for (int l = 0; l < layers; ++l) {
    c.m[l] = g.adj_norm * c.h[l];
    c.z[l] = c.m[l] * p.w[l];
    if (l + 1 < layers)
      c.h[l + 1] = c.z[l].cwiseMax(0.0);  // ReLU
    else
      c.h[l + 1] = c.z[l];  // final layer stays linear
  }
  const int e = p.embedding();
  c.state = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.k) * e);
  std::vector<int> count(g.k, 0);
  for (int i = 0; i < g.n_max; ++i)
    if (g.slot_slice[i] >= 0) ++count[g.slot_slice[i]];
  for (int i = 0; i < g.n_max; ++i) {
    int s = g.slot_slice[i];
    if (s < 0) continue;
    c.state.segment(static_cast<Eigen::Index>(s) * e, e) += c.h[layers].row(i).transpose() / count[s];
  }
  if (!c.state.allFinite()) throw std::runtime_error("gcn_forward: non-finite activations");
  return c;
}

GcnGrads zero_gcn_grads(const GcnParams& p, const SliceGraph& g) {
  GcnGrads grads;
  grads.dw.reserve(p.w.size());
  for (const auto& w : p.w) grads.dw.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  grads.dfeatures = Eigen::MatrixXd::Zero(g.nodes(), kNumFeatures);
  return grads;
}

void gcn_backward(const SliceGraph& g, const GcnParams& p, const GcnCache& cache,
                  const Eigen::VectorXd& dstate, GcnGrads& grads) {
  const int layers = p.layers();
  const int e = p.embedding();
  std::vector<int> count(g.k, 0);
  for (int i = 0; i < g.n_max; ++i)
    if (g.slot_slice[i] >= 0) ++count[g.slot_slice[i]];

  Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(g.nodes(), e);
  for (int i = 0; i < g.n_max; ++i) {
    int s = g.slot_slice[i];
    if (s < 0) continue;
    dh.row(i) = dstate.segment(static_cast<Eigen::Index>(s) * e, e).transpose() / count[s];
  }

  for (int l = layers - 1; l >= 0; --l) {
    Eigen::MatrixXd dz;
    if (l + 1 < layers)
      dz = dh.cwiseProduct((cache.z[l].array() > 0.0).cast<double>().matrix());
    else
      dz = dh;
    grads.dw[l] += cache.m[l].transpose() * dz;
    Eigen::MatrixXd dm = dz * p.w[l].transpose();
    dh = g.adj_norm.transpose() * dm;
  }
  grads.dfeatures += dh;
}

}  // namespace xslice
