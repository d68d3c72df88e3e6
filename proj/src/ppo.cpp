#include "xslice/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

namespace xslice {

static constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void PpoConfig::validate() const {
  if (alpha <= 0.0 || gamma < 0.0 || gamma > 1.0 || gae_lambda < 0.0 || gae_lambda > 1.0)
    throw std::invalid_argument("ppo config: bad alpha/gamma/lambda");
  if (clip_eps <= 0.0 || clip_eps >= 1.0) throw std::invalid_argument("ppo config: clip_eps in (0, 1)");
  if (epochs < 1 || minibatch < 1 || rollout < 1 || minibatch > rollout)
    throw std::invalid_argument("ppo config: bad epochs/minibatch/rollout");
  if (penalty_mode != "mask" && penalty_mode != "skip" && penalty_mode != "full" &&
      penalty_mode != "off")
    throw std::invalid_argument("ppo config: penalty_mode must be mask|skip|full|off");
  if (hidden < 1 || embedding < 1 || gcn_layers < 1 || n_max < 1)
    throw std::invalid_argument("ppo config: bad network shape");
  if (warmup_steps < 0) throw std::invalid_argument("ppo config: warmup_steps must be >= 0");
  if (critic_warm_rounds < 0)
    throw std::invalid_argument("ppo config: critic_warm_rounds must be >= 0");
  if (sigma_floor <= 0.0 || sigma_init < sigma_floor)
    throw std::invalid_argument("ppo config: need sigma_init >= sigma_floor > 0");
  if (sigma_decay <= 0.0 || sigma_decay > 1.0)
    throw std::invalid_argument("ppo config: sigma_decay must be in (0, 1]");
}

// ---- mlp ----

Mlp mlp_init(int in, int hidden, int out, int layers, Rng& rng) {
  if (layers < 2) throw std::invalid_argument("mlp_init: need at least 2 layers");
  Mlp m;
  for (int l = 0; l < layers; ++l) {
    int fin = l == 0 ? in : hidden;
    int fout = l == layers - 1 ? out : hidden;
    double a = std::sqrt(6.0 / (fin + fout));
    Eigen::MatrixXd w(fin, fout);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-a, a);
    m.w.push_back(std::move(w));
    m.b.push_back(Eigen::VectorXd::Zero(fout));
  }
  return m;
}

Eigen::VectorXd mlp_forward(const Mlp& m, const Eigen::VectorXd& x, MlpCache* cache) {
  const int layers = static_cast<int>(m.w.size());
  Eigen::VectorXd a = x;
  if (cache) {
    cache->a.assign(1, x);
    cache->z.clear();
  }
  for (int l = 0; l < layers; ++l) {
    Eigen::VectorXd z = m.w[l].transpose() * a + m.b[l];
    if (cache) cache->z.push_back(z);
    a = (l + 1 < layers) ? z.cwiseMax(0.0).eval() : z;
    if (cache) cache->a.push_back(a);
  }
  return a;
}

Eigen::VectorXd mlp_backward(const Mlp& m, const MlpCache& cache, const Eigen::VectorXd& dout,
                             Mlp& grads) {
  const int layers = static_cast<int>(m.w.size());
  Eigen::VectorXd da = dout;
  for (int l = layers - 1; l >= 0; --l) {
    Eigen::VectorXd dz;
    if (l + 1 < layers)
      dz = da.cwiseProduct((cache.z[l].array() > 0.0).cast<double>().matrix());
    else
      dz = da;
    grads.w[l] += cache.a[l] * dz.transpose();
    grads.b[l] += dz;
    da = m.w[l] * dz;
  }
  return da;
}

// ---- params ----

PolicyParams init_policy(int k, const PpoConfig& cfg, uint64_t seed) {
  cfg.validate();
  if (k < 1) throw std::invalid_argument("init_policy: need at least one slice");
  PolicyParams p;
  p.k = k;
  p.cfg = cfg;
  Rng g1 = Rng::stream(seed, "init-gcn");
  p.gcn = gcn_init(cfg.gcn_layers, cfg.embedding, g1);
  if (!cfg.shared_encoder) {
    Rng g2 = Rng::stream(seed, "init-gcn-critic");
    p.gcn_critic = gcn_init(cfg.gcn_layers, cfg.embedding, g2);
  }
  const int state_dim = k * cfg.embedding;
  Rng ga = Rng::stream(seed, "init-actor");
  p.actor = mlp_init(state_dim, cfg.hidden, k, 4, ga);
  Rng gc = Rng::stream(seed, "init-critic");
  p.critic = mlp_init(state_dim, cfg.hidden, 1, 4, gc);
  double pre = std::log(std::expm1(std::max(1e-6, cfg.sigma_init - cfg.sigma_floor)));
  p.pre_sigma = Eigen::VectorXd::Constant(k, pre);
  return p;
}

void set_sigma(PolicyParams& p, double sigma) {
  double pre = std::log(std::expm1(std::max(1e-6, sigma - p.cfg.sigma_floor)));
  p.pre_sigma.setConstant(pre);
}

std::vector<TensorRef> tensor_refs(PolicyParams& p) {
  std::vector<TensorRef> refs;
  auto add = [&refs](const std::string& name, Eigen::MatrixXd& m) {
    refs.push_back({name, m.rows(), m.cols(), m.data()});
  };
  for (size_t l = 0; l < p.gcn.w.size(); ++l) add("gcn.w" + std::to_string(l), p.gcn.w[l]);
  if (!p.cfg.shared_encoder)
    for (size_t l = 0; l < p.gcn_critic.w.size(); ++l)
      add("gcn_critic.w" + std::to_string(l), p.gcn_critic.w[l]);
  for (size_t l = 0; l < p.actor.w.size(); ++l) {
    add("actor.w" + std::to_string(l), p.actor.w[l]);
    refs.push_back({"actor.b" + std::to_string(l), p.actor.b[l].rows(), 1, p.actor.b[l].data()});
  }
  for (size_t l = 0; l < p.critic.w.size(); ++l) {
    add("critic.w" + std::to_string(l), p.critic.w[l]);
    refs.push_back({"critic.b" + std::to_string(l), p.critic.b[l].rows(), 1, p.critic.b[l].data()});
  }
  refs.push_back({"pre_sigma", p.pre_sigma.rows(), 1, p.pre_sigma.data()});
  return refs;
}

PolicyParams zero_like(const PolicyParams& p) {
  PolicyParams z = p;
  for (auto& r : tensor_refs(z)) std::fill(r.data, r.data + r.rows * r.cols, 0.0);
  return z;
}

uint64_t params_checksum(const PolicyParams& p) {
  auto& mp = const_cast<PolicyParams&>(p);
  uint64_t h = 0xcbf29ce484222325ull;
  for (auto& r : tensor_refs(mp)) {
    h = fnv1a64(r.name.data(), r.name.size(), h);
    h = fnv1a64(r.data, sizeof(double) * r.rows * r.cols, h);
  }
  return h;
}

bool params_finite(const PolicyParams& p) {
  auto& mp = const_cast<PolicyParams&>(p);
  for (auto& r : tensor_refs(mp)) {
    const double* d = r.data;
    for (Eigen::Index i = 0; i < r.rows * r.cols; ++i)
      if (!std::isfinite(d[i])) return false;
  }
  return true;
}

// ---- forward / sampling ----

Eigen::VectorXd sigma_of(const PolicyParams& p) {
  Eigen::VectorXd s(p.pre_sigma.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    s(i) = p.cfg.sigma_floor + std::log1p(std::exp(p.pre_sigma(i)));
  return s;
}

PolicyEval policy_forward(const PolicyParams& p, const SliceGraph& g) {
  PolicyEval ev;
  ev.gcn = gcn_forward(g, p.gcn);
  const Eigen::VectorXd* critic_state = &ev.gcn.state;
  if (!p.cfg.shared_encoder) {
    ev.gcn_critic = gcn_forward(g, p.gcn_critic);
    critic_state = &ev.gcn_critic.state;
  }
  Eigen::VectorXd mu_pre = mlp_forward(p.actor, ev.gcn.state, &ev.actor_cache);
  ev.mu = (1.0 / (1.0 + (-mu_pre.array()).exp())).matrix();
  ev.sigma = sigma_of(p);
  Eigen::VectorXd v = mlp_forward(p.critic, *critic_state, &ev.critic_cache);
  ev.value = v(0);
  if (!ev.mu.allFinite() || !std::isfinite(ev.value))
    throw NumericalError("policy_forward: non-finite activations");
  return ev;
}

double gaussian_log_prob(const Eigen::VectorXd& raw, const Eigen::VectorXd& mu,
                         const Eigen::VectorXd& sigma) {
  double lp = 0.0;
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    double z = (raw(i) - mu(i)) / sigma(i);
    lp += -0.5 * z * z - std::log(sigma(i)) - 0.5 * kLog2Pi;
  }
  return lp;
}

ActionSample sample_action(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma, Rng& rng) {
  ActionSample s;
  s.raw.resize(mu.size());
  s.clipped.resize(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    s.raw(i) = mu(i) + sigma(i) * rng.normal();
    s.clipped(i) = std::clamp(s.raw(i), 0.0, 1.0);
  }
  s.log_prob = gaussian_log_prob(s.raw, mu, sigma);
  return s;
}

// ---- penalty ----

bool apply_penalty(Transition& t, std::span<const KpmRecord> records,
                   const std::map<int, int>& session_slice, const Allocation& alloc,
                   int min_rb, double penalty_value) {
  bool fire = false;
  std::vector<int> pressured(alloc.grants.size(), 0);
  for (const auto& r : records) {
    if (r.delay_ms >= 1000.0 - 1e-9) fire = true;  // sojourn cap reached
    if (r.delay_ms > 0.0) {
      auto it = session_slice.find(r.session_id);
      if (it != session_slice.end() && it->second >= 0 &&
          it->second < static_cast<int>(pressured.size()))
        ++pressured[it->second];
    }
  }
  if (!fire) {
    for (size_t k = 0; k < alloc.grants.size(); ++k) {
      if (pressured[k] > 0 && alloc.grants[k].num_prb < min_rb * pressured[k]) {
        fire = true;
        break;
      }
    }
  }
  if (fire) {
    t.penalty = true;
    t.reward = penalty_value;
  }
  return fire;
}

// ---- gae ----

GaeResult gae(std::span<const double> rewards, std::span<const double> values, double bootstrap,
              double gamma, double lambda) {
  if (rewards.size() != values.size()) throw std::invalid_argument("gae: length mismatch");
  const int n = static_cast<int>(rewards.size());
  GaeResult r;
  r.advantages.assign(n, 0.0);
  r.returns.assign(n, 0.0);
  double acc = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    double v_next = t + 1 < n ? values[t + 1] : bootstrap;
    double delta = rewards[t] + gamma * v_next - values[t];
    acc = delta + gamma * lambda * acc;
    r.advantages[t] = acc;
    r.returns[t] = acc + values[t];
  }
  return r;
}

// ---- loss ----

LossValue ppo_loss(const PolicyParams& p, std::span<const LossSample> batch, double clip_eps,
                   const std::string& penalty_mode, PolicyParams* grads, bool actor_enabled) {
  if (batch.empty()) throw std::invalid_argument("ppo_loss: empty batch");
  const Eigen::VectorXd sigma = sigma_of(p);
  const Eigen::Index k = sigma.size();

  int actor_n = 0, critic_n = 0;
  for (const auto& s : batch) {
    bool actor_vis = actor_enabled && (!s.penalty || penalty_mode == "full");
    bool critic_vis = !s.penalty || penalty_mode != "skip";
    actor_n += actor_vis;
    critic_n += critic_vis;
  }
  // masked-mean over the full batch: masked samples contribute zero but keep
  // their slot, so a mostly-masked minibatch yields a proportionally small
  // step instead of amplifying the few visible samples
  const double actor_div = static_cast<double>(batch.size());
  const double critic_div = static_cast<double>(batch.size());

  LossValue out;
  out.actor_samples = actor_n;

  Eigen::VectorXd dpre_sigma = Eigen::VectorXd::Zero(k);
  for (const auto& s : batch) {
    const bool actor_vis = actor_enabled && (!s.penalty || penalty_mode == "full");
    const bool critic_vis = !s.penalty || penalty_mode != "skip";
    if (!actor_vis && !critic_vis) continue;

    PolicyEval ev = policy_forward(p, *s.graph);
    double dvalue = 0.0;
    Eigen::VectorXd dmu_pre = Eigen::VectorXd::Zero(k);

    if (critic_vis) {
      double err = ev.value - s.ret;
      out.critic += err * err / critic_div;
      if (grads) dvalue = 2.0 * err / critic_div;
    }

    if (actor_vis) {
      double logp_new = gaussian_log_prob(*s.raw_action, ev.mu, sigma);
      double ratio = std::exp(logp_new - s.log_prob_old);
      if (!std::isfinite(ratio)) throw NumericalError("ppo_loss: ratio overflow");
      double unclipped = ratio * s.advantage;
      double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * s.advantage;
      double surr = std::min(unclipped, clipped);
      out.actor += -surr / actor_div;
      if (grads) {
        double dsurr_dratio = unclipped <= clipped ? s.advantage : 0.0;
        double dlogp = -(dsurr_dratio / actor_div) * ratio;
        for (Eigen::Index i = 0; i < k; ++i) {
          double z = ((*s.raw_action)(i) - ev.mu(i)) / sigma(i);
          double dmu = dlogp * z / sigma(i);
          double dsig = dlogp * (z * z - 1.0) / sigma(i);
          dmu_pre(i) = dmu * ev.mu(i) * (1.0 - ev.mu(i));
          dpre_sigma(i) += dsig / (1.0 + std::exp(-p.pre_sigma(i)));
        }
      }
    }

    if (grads) {
      Eigen::VectorXd ds_actor = Eigen::VectorXd::Zero(ev.gcn.state.size());
      if (actor_vis) ds_actor = mlp_backward(p.actor, ev.actor_cache, dmu_pre, grads->actor);
      Eigen::VectorXd dv = Eigen::VectorXd::Constant(1, dvalue);
      Eigen::VectorXd ds_critic = mlp_backward(p.critic, ev.critic_cache, dv, grads->critic);
      if (p.cfg.shared_encoder) {
        GcnGrads gg = zero_gcn_grads(p.gcn, *s.graph);
        gcn_backward(*s.graph, p.gcn, ev.gcn, ds_actor + ds_critic, gg);
        for (size_t l = 0; l < gg.dw.size(); ++l) grads->gcn.w[l] += gg.dw[l];
      } else {
        GcnGrads ga = zero_gcn_grads(p.gcn, *s.graph);
        gcn_backward(*s.graph, p.gcn, ev.gcn, ds_actor, ga);
        for (size_t l = 0; l < ga.dw.size(); ++l) grads->gcn.w[l] += ga.dw[l];
        GcnGrads gc = zero_gcn_grads(p.gcn_critic, *s.graph);
        gcn_backward(*s.graph, p.gcn_critic, ev.gcn_critic, ds_critic, gc);
        for (size_t l = 0; l < gc.dw.size(); ++l) grads->gcn_critic.w[l] += gc.dw[l];
      }
    }
  }
  if (grads) grads->pre_sigma += dpre_sigma;
  out.total = out.actor + out.critic;
  if (!std::isfinite(out.total)) throw NumericalError("ppo_loss: non-finite loss");
  return out;
}

// ---- optimizer ----

void Adam::step(PolicyParams& params, PolicyParams& grads) {
  auto prefs = tensor_refs(params);
  auto grefs = tensor_refs(grads);
  if (m.empty()) {
    for (auto& r : prefs) {
      m.emplace_back(Eigen::ArrayXd::Zero(r.rows * r.cols));
      v.emplace_back(Eigen::ArrayXd::Zero(r.rows * r.cols));
    }
  }
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (size_t i = 0; i < prefs.size(); ++i) {
    Eigen::Map<Eigen::ArrayXd> pw(prefs[i].data, prefs[i].rows * prefs[i].cols);
    Eigen::Map<Eigen::ArrayXd> gw(grefs[i].data, grefs[i].rows * grefs[i].cols);
    m[i] = beta1 * m[i] + (1.0 - beta1) * gw;
    v[i] = beta2 * v[i] + (1.0 - beta2) * gw.square();
    pw -= alpha * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
    gw.setZero();
  }
}

// ---- trainer ----

Trainer::Trainer(PolicyParams params, uint64_t seed)
    : params_(std::move(params)), shuffle_rng_(Rng::stream(seed, "ppo-shuffle")) {
  adam_.alpha = params_.cfg.alpha;
}

UpdateStats Trainer::update(const RolloutBuffer& buffer, bool actor_enabled) {
  const auto& cfg = params_.cfg;
  const int n = static_cast<int>(buffer.transitions.size());
  if (n == 0) throw std::invalid_argument("update: empty buffer");

  UpdateStats stats;
  stats.round = buffer.transitions.back().round;
  std::vector<double> rewards(n), values(n);
  for (int i = 0; i < n; ++i) {
    rewards[i] = buffer.transitions[i].reward;
    values[i] = buffer.transitions[i].value_old;
    stats.mean_reward += rewards[i] / n;
    stats.penalty_count += buffer.transitions[i].penalty;
  }
  GaeResult g = gae(rewards, values, buffer.bootstrap_value, cfg.gamma, cfg.gae_lambda);

  double mean = std::accumulate(g.advantages.begin(), g.advantages.end(), 0.0) / n;
  double var = 0.0;
  for (double a : g.advantages) var += (a - mean) * (a - mean);
  double sd = std::sqrt(var / n);
  std::vector<double> adv_norm(n);
  for (int i = 0; i < n; ++i) adv_norm[i] = (g.advantages[i] - mean) / (sd + 1e-8);

  // snapshot for rollback on numerical failure
  PolicyParams saved = params_;
  Adam saved_adam = adam_;

  PolicyParams grads = zero_like(params_);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  try {
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(shuffle_rng_.uniform_int(static_cast<uint64_t>(i) + 1));
        std::swap(order[i], order[j]);
      }
      double ep_actor = 0.0, ep_critic = 0.0;
      int nb = 0;
      for (int start = 0; start < n; start += cfg.minibatch) {
        int len = std::min(cfg.minibatch, n - start);
        std::vector<LossSample> batch;
        batch.reserve(len);
        for (int i = 0; i < len; ++i) {
          const Transition& tr = buffer.transitions[order[start + i]];
          batch.push_back(LossSample{&tr.graph, &tr.raw_action, tr.log_prob_old,
                                     adv_norm[order[start + i]], g.returns[order[start + i]],
                                     tr.penalty});
        }
        LossValue lv = ppo_loss(params_, batch, cfg.clip_eps, cfg.penalty_mode, &grads,
                                actor_enabled);
        // sigma follows its fixed schedule instead of the surrogate gradient:
        // penalty masking censors exactly the bad-tail draws, so a learned
        // sigma only ever sees the lucky tail and inflates without bound
        grads.pre_sigma.setZero();
        adam_.step(params_, grads);
        if (!params_finite(params_)) throw NumericalError("update: parameters diverged");
        ep_actor += lv.actor;
        ep_critic += lv.critic;
        ++nb;
      }
      stats.actor_loss = ep_actor / nb;
      stats.critic_loss = ep_critic / nb;
    }
  } catch (const NumericalError&) {
    params_ = std::move(saved);
    adam_ = std::move(saved_adam);
    stats.aborted = true;
  }
  stats.sigma_mean = sigma_of(params_).mean();
  return stats;
}

// ---- warmup ----

static SliceGraph synthetic_graph(int k, int n_max, Rng& rng) {
  SliceGraph g;
  g.n_max = n_max;
  g.k = k;
  g.slot_slice.assign(n_max, -1);
  g.slot_session.assign(n_max, -1);
  const int n = g.nodes();
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n, n);
  g.features = Eigen::MatrixXd::Zero(n, kNumFeatures);
  int m = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n_max) + 1));
  for (int i = 0; i < m; ++i) {
    int s = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(k)));
    g.slot_slice[i] = s;
    g.slot_session[i] = i;
    adj(i, n_max + s) = 1.0;
    adj(n_max + s, i) = 1.0;
    for (int f = 0; f < kNumFeatures; ++f) g.features(i, f) = rng.uniform();
  }
  for (int s = 0; s < k; ++s)
    for (int f = 9; f < 12; ++f) g.features(n_max + s, f) = rng.uniform();
  g.adj_norm = normalize_adjacency(adj);
  return g;
}

void warmup_actor(PolicyParams& params, int steps, uint64_t seed) {
  if (steps <= 0) return;
  Rng rng = Rng::stream(seed, "warmup");
  const int k = params.k;
  const double target = 1.0 / k;

  // local Adam over the actor tensors only; the encoder stays frozen
  std::vector<Eigen::ArrayXd> m, v;
  auto actor_tensors = [&]() {
    std::vector<Eigen::Map<Eigen::ArrayXd>> t;
    for (size_t l = 0; l < params.actor.w.size(); ++l) {
      t.emplace_back(params.actor.w[l].data(), params.actor.w[l].size());
      t.emplace_back(params.actor.b[l].data(), params.actor.b[l].size());
    }
    return t;
  };
  auto tensors = actor_tensors();
  for (auto& tv : tensors) {
    m.emplace_back(Eigen::ArrayXd::Zero(tv.size()));
    v.emplace_back(Eigen::ArrayXd::Zero(tv.size()));
  }

  Mlp grads = params.actor;
  for (auto& w : grads.w) w.setZero();
  for (auto& b : grads.b) b.setZero();

  long t_step = 0;
  for (int step = 0; step < steps; ++step) {
    SliceGraph g = synthetic_graph(k, params.cfg.n_max, rng);
    GcnCache enc = gcn_forward(g, params.gcn);
    MlpCache cache;
    Eigen::VectorXd mu_pre = mlp_forward(params.actor, enc.state, &cache);
    Eigen::VectorXd mu = (1.0 / (1.0 + (-mu_pre.array()).exp())).matrix();
    Eigen::VectorXd dmu = 2.0 * (mu.array() - target).matrix();
    Eigen::VectorXd dmu_pre = dmu.cwiseProduct(mu.cwiseProduct((1.0 - mu.array()).matrix()));
    mlp_backward(params.actor, cache, dmu_pre, grads);

    ++t_step;
    const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(t_step));
    const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(t_step));
    std::vector<Eigen::Map<Eigen::ArrayXd>> gt;
    for (size_t l = 0; l < grads.w.size(); ++l) {
      gt.emplace_back(grads.w[l].data(), grads.w[l].size());
      gt.emplace_back(grads.b[l].data(), grads.b[l].size());
    }
    auto pt = actor_tensors();
    for (size_t i = 0; i < pt.size(); ++i) {
      m[i] = 0.9 * m[i] + 0.1 * gt[i];
      v[i] = 0.999 * v[i] + 0.001 * gt[i].square();
      pt[i] -= params.cfg.alpha * (m[i] / bc1) / ((v[i] / bc2).sqrt() + 1e-8);
      gt[i].setZero();
    }
  }
}

// ---- snapshots ----

void PolicyHandle::publish(const PolicyParams& p) {
  auto vp = std::make_shared<VersionedParams>();
  vp->params = p;
  vp->checksum = params_checksum(vp->params);
  std::lock_guard<std::mutex> lock(mu_);
  vp->version = next_version_++;
  current_ = std::move(vp);
}

std::shared_ptr<const VersionedParams> PolicyHandle::get() const {
  std::lock_guard<std::mutex> lock(mu_);
  return current_;
}

bool verify_snapshot(const VersionedParams& vp) { return params_checksum(vp.params) == vp.checksum; }

// ---- checkpoints ----

static constexpr char kMagic[8] = {'X', 'S', 'L', 'C', 'K', 'P', 'T', '1'};

namespace {
struct ByteSink {
  std::vector<unsigned char> bytes;
  void put(const void* p, size_t n) {
    const unsigned char* c = static_cast<const unsigned char*>(p);
    bytes.insert(bytes.end(), c, c + n);
  }
  template <class T>
  void put_pod(T v) {
    put(&v, sizeof(T));
  }
};
}  // namespace

void save_checkpoint(const std::string& path, const PolicyParams& params, uint64_t seed) {
  auto& mp = const_cast<PolicyParams&>(params);
  ByteSink sink;
  sink.put_pod<uint32_t>(1);  // format version
  sink.put_pod<uint32_t>(params.cfg.shared_encoder ? 1u : 0u);
  sink.put_pod<uint64_t>(seed);
  sink.put_pod<uint32_t>(static_cast<uint32_t>(params.k));
  sink.put_pod<uint32_t>(static_cast<uint32_t>(params.cfg.embedding));
  sink.put_pod<uint32_t>(static_cast<uint32_t>(params.cfg.gcn_layers));
  sink.put_pod<uint32_t>(static_cast<uint32_t>(params.cfg.hidden));
  sink.put_pod<uint32_t>(static_cast<uint32_t>(params.cfg.n_max));
  auto refs = tensor_refs(mp);
  sink.put_pod<uint32_t>(static_cast<uint32_t>(refs.size()));
  for (auto& r : refs) {
    sink.put_pod<uint32_t>(static_cast<uint32_t>(r.name.size()));
    sink.put(r.name.data(), r.name.size());
    sink.put_pod<uint32_t>(static_cast<uint32_t>(r.rows));
    sink.put_pod<uint32_t>(static_cast<uint32_t>(r.cols));
    sink.put(r.data, sizeof(double) * r.rows * r.cols);
  }
  uint64_t checksum = fnv1a64(sink.bytes.data(), sink.bytes.size());

  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw CheckpointError("checkpoint: cannot open " + path + " for writing");
  std::fwrite(kMagic, 1, 8, f);
  std::fwrite(sink.bytes.data(), 1, sink.bytes.size(), f);
  std::fwrite(&checksum, sizeof(checksum), 1, f);
  std::fclose(f);
}

namespace {
struct ByteSource {
  std::vector<unsigned char> bytes;
  size_t pos = 0;
  void get(void* p, size_t n) {
    if (pos + n > bytes.size()) throw CheckpointError("checkpoint: truncated file");
    std::memcpy(p, bytes.data() + pos, n);
    pos += n;
  }
  template <class T>
  T get_pod() {
    T v;
    get(&v, sizeof(T));
    return v;
  }
};
}  // namespace

Checkpoint load_checkpoint(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw CheckpointError("checkpoint: cannot open " + path);
  std::fseek(f, 0, SEEK_END);
  long size = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  if (size < 8 + 8) {
    std::fclose(f);
    throw CheckpointError("checkpoint: file too small");
  }
  std::vector<unsigned char> all(static_cast<size_t>(size));
  if (std::fread(all.data(), 1, all.size(), f) != all.size()) {
    std::fclose(f);
    throw CheckpointError("checkpoint: short read");
  }
  std::fclose(f);

  if (std::memcmp(all.data(), kMagic, 8) != 0) throw CheckpointError("checkpoint: bad magic");
  uint64_t stored_sum;
  std::memcpy(&stored_sum, all.data() + all.size() - 8, 8);
  if (fnv1a64(all.data() + 8, all.size() - 16) != stored_sum)
    throw CheckpointError("checkpoint: checksum mismatch");

  ByteSource src;
  src.bytes.assign(all.begin() + 8, all.end() - 8);

  uint32_t version = src.get_pod<uint32_t>();
  if (version != 1) throw CheckpointError("checkpoint: unsupported format version");
  uint32_t shared = src.get_pod<uint32_t>();
  Checkpoint ck;
  ck.seed = src.get_pod<uint64_t>();
  PpoConfig cfg;
  uint32_t k = src.get_pod<uint32_t>();
  cfg.embedding = static_cast<int>(src.get_pod<uint32_t>());
  cfg.gcn_layers = static_cast<int>(src.get_pod<uint32_t>());
  cfg.hidden = static_cast<int>(src.get_pod<uint32_t>());
  cfg.n_max = static_cast<int>(src.get_pod<uint32_t>());
  cfg.shared_encoder = shared != 0;
  ck.params = init_policy(static_cast<int>(k), cfg, 0);

  uint32_t n_tensors = src.get_pod<uint32_t>();
  auto refs = tensor_refs(ck.params);
  if (n_tensors != refs.size()) throw CheckpointError("checkpoint: tensor count mismatch");
  for (auto& r : refs) {
    uint32_t name_len = src.get_pod<uint32_t>();
    std::string name(name_len, '\0');
    src.get(name.data(), name_len);
    if (name != r.name) throw CheckpointError("checkpoint: unexpected tensor " + name);
    uint32_t rows = src.get_pod<uint32_t>();
    uint32_t cols = src.get_pod<uint32_t>();
    if (rows != static_cast<uint32_t>(r.rows) || cols != static_cast<uint32_t>(r.cols))
      throw CheckpointError("checkpoint: shape mismatch for " + name);
    src.get(r.data, sizeof(double) * r.rows * r.cols);
  }
  return ck;
}

}  // namespace xslice
