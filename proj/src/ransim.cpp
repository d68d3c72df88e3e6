#include "xslice/ransim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xslice {

const double kCqiEfficiency[16] = {0.0,    0.1523, 0.2344, 0.3770, 0.6016, 0.8770,
                                   1.1758, 1.4766, 1.9141, 2.4063, 2.7305, 3.3223,
                                   3.9023, 4.5234, 5.1152, 5.5547};

// Decoding threshold offset in dB.  With the CQI->MCS coupling below, the
// resulting SNR margin sits around 3-5 dB in calm conditions, i.e. a resting
// BLER of a few percent that spikes hard on downward fades.
static constexpr double kBlerThrOffset = -7.0;
static constexpr double kBlerSlopeDb = 1.5;
static constexpr double kDelayCapMs = 1000.0;
static constexpr double kPfBeta = 0.1;
static constexpr double kPfFloorMbps = 0.1;

int snr_to_cqi(double snr_db) {
  int cqi = static_cast<int>(std::floor((snr_db + 6.0) / 2.2));
  return std::clamp(cqi, 0, 15);
}

double cqi_to_efficiency(int cqi) {
  if (cqi < 0 || cqi > 15) throw std::invalid_argument("cqi out of range");
  return kCqiEfficiency[cqi];
}

int mcs_from_cqi(int cqi) { return std::max(0, std::min(28, 2 * cqi - 2)); }

double bler_probability(double snr_db, int mcs) {
  double thr = kBlerThrOffset + 1.1 * mcs;
  return 1.0 / (1.0 + std::exp((snr_db - thr) / kBlerSlopeDb));
}

double prb_capacity_bits(double efficiency, double t_ms, double dl_fraction, double overhead) {
  if (t_ms <= 0.0) throw std::invalid_argument("prb_capacity: round length must be > 0");
  if (dl_fraction <= 0.0 || dl_fraction > 1.0) throw std::invalid_argument("prb_capacity: dl_fraction in (0, 1]");
  if (overhead < 0.0 || overhead >= 1.0) throw std::invalid_argument("prb_capacity: overhead in [0, 1)");
  return efficiency * 12.0 * 14.0 * (t_ms / 0.5) * dl_fraction * (1.0 - overhead);
}

void step_channel(ChannelState& ch, Rng& rng) {
  ch.snr_db = ch.mean_snr_db + ch.corr * (ch.snr_db - ch.mean_snr_db) + ch.noise_db * rng.normal();
}

std::pair<double, double> traffic_class_range(const std::string& name) {
  if (name == "light") return {20.0, 80.0};
  if (name == "medium") return {80.0, 160.0};
  if (name == "intensive") return {160.0, 220.0};
  throw std::invalid_argument("unknown traffic class: " + name);
}

void Scenario::validate() const {
  if (slices.empty()) throw std::invalid_argument("scenario: needs at least one slice");
  if (round_ms <= 0.0 || std::fmod(round_ms, 0.5) != 0.0)
    throw std::invalid_argument("scenario: round_ms must be a positive multiple of 0.5");
  if (n_rb < static_cast<int>(slices.size()))
    throw std::invalid_argument("scenario: n_rb must cover at least 1 PRB per slice");
  for (size_t k = 0; k < slices.size(); ++k) {
    if (slices[k].id != static_cast<int>(k))
      throw std::invalid_argument("scenario: slice ids must be 0..K-1 in order");
    slices[k].validate();
  }
  for (const auto& s : sessions) {
    if (s.slice < 0 || s.slice >= static_cast<int>(slices.size()))
      throw std::invalid_argument("scenario: session " + std::to_string(s.id) + " references unknown slice");
    if (s.demand_kind != "class" && s.demand_kind != "constant" && s.demand_kind != "steps")
      throw std::invalid_argument("scenario: session " + std::to_string(s.id) + " has unknown demand kind");
    if (s.demand_kind == "class") traffic_class_range(traffic_class);  // must be a named class
  }
}

int Scenario::next_session_id() const {
  int m = -1;
  for (const auto& s : sessions) m = std::max(m, s.id);
  return m + 1;
}

RanEnv::RanEnv(const Scenario& scenario, uint64_t seed, bool merged_pool)
    : scenario_(scenario), seed_(seed), merged_(merged_pool) {
  scenario_.validate();
  sessions_.reserve(scenario_.sessions.size());
  for (const auto& tpl : scenario_.sessions) {
    Session s;
    s.tpl = tpl;
    s.ch = ChannelState{tpl.mean_snr_db, tpl.corr, tpl.noise_db, tpl.mean_snr_db};
    s.ch_rng = Rng::stream(seed, "chan", static_cast<uint64_t>(tpl.id));
    s.bler_rng = Rng::stream(seed, "bler", static_cast<uint64_t>(tpl.id));
    s.demand_rng = Rng::stream(seed, "demand", static_cast<uint64_t>(tpl.id));
    s.next_change = tpl.arrival_round;
    sessions_.push_back(std::move(s));
  }
  rr_cursor_.assign(scenario_.slices.size() + 1, -1);
}

void RanEnv::refresh_demand(Session& s, int r) {
  bool stepped = s.next_step > 0;
  while (s.next_step < s.tpl.steps.size() && s.tpl.steps[s.next_step].round <= r) {
    s.cur_rate = s.tpl.steps[s.next_step].rate_mbps;
    ++s.next_step;
    stepped = true;
  }
  if (stepped) return;  // explicit steps override the generative process
  if (s.tpl.demand_kind == "constant") {
    s.cur_rate = s.tpl.rate_mbps;
  } else if (s.tpl.demand_kind == "class") {
    if (r >= s.next_change) {
      auto [lo, hi] = traffic_class_range(scenario_.traffic_class);
      s.cur_rate = s.demand_rng.uniform(lo, hi);
      int gap = std::max(1, static_cast<int>(std::llround(s.demand_rng.exponential(100.0))));
      s.next_change = r + gap;
    }
  } else {
    // "steps" before the first step round: no traffic yet
    if (s.next_step == 0) s.cur_rate = 0.0;
  }
}

void RanEnv::schedule_pool(std::span<Session*> pool, int n_prb, SchedPolicy policy, int& rr_cursor,
                           std::vector<SessionRoundStats*>& stats) {
  const int n = static_cast<int>(pool.size());
  if (n == 0) return;
  const double t_ms = scenario_.round_ms;

  // per-session per-PRB deliverable bytes for this round (flat fading)
  std::vector<double> prb_bytes(n), rate_mbps(n), bler_p(n);
  for (int i = 0; i < n; ++i) {
    int cqi = snr_to_cqi(pool[i]->ch.snr_db);
    double bits = prb_capacity_bits(cqi_to_efficiency(cqi), t_ms, scenario_.dl_fraction, scenario_.overhead);
    prb_bytes[i] = bits / 8.0;
    rate_mbps[i] = bits / (t_ms * 1000.0);
    bler_p[i] = bler_probability(pool[i]->ch.snr_db, mcs_from_cqi(cqi));
  }

  std::vector<double> delivered_byte_ms(n, 0.0);
  for (int p = 0; p < n_prb; ++p) {
    int pick = -1;
    switch (policy) {
      case SchedPolicy::ProportionalFair: {
        double best = -1.0;
        for (int i = 0; i < n; ++i) {
          if (pool[i]->queued_bytes <= 0.0) continue;
          double m = rate_mbps[i] / std::max(pool[i]->avg_rate_mbps, kPfFloorMbps);
          if (m > best) { best = m; pick = i; }
        }
        break;
      }
      case SchedPolicy::MaxThroughput: {
        double best = -1.0;
        for (int i = 0; i < n; ++i) {
          if (pool[i]->queued_bytes <= 0.0) continue;
          if (rate_mbps[i] > best) { best = rate_mbps[i]; pick = i; }
        }
        break;
      }
      case SchedPolicy::RoundRobin: {
        for (int d = 1; d <= n; ++d) {
          int i = (rr_cursor + d) % n;
          if (pool[i]->queued_bytes > 0.0) { pick = i; break; }
        }
        if (pick >= 0) rr_cursor = pick;
        break;
      }
      case SchedPolicy::EarliestDeadline: {
        // deadline = HOL arrival + T_k; within one slice T_k is shared, so
        // the oldest head-of-line packet goes first
        int best_arrival = INT32_MAX;
        for (int i = 0; i < n; ++i) {
          if (pool[i]->queued_bytes <= 0.0) continue;
          int a = pool[i]->queue.front().arrival_round;
          if (a < best_arrival) { best_arrival = a; pick = i; }
        }
        break;
      }
    }
    if (pick < 0) break;  // no backlog anywhere: remaining PRBs idle

    Session& s = *pool[pick];
    SessionRoundStats& st = *stats[pick];
    ++st.granted_prbs;
    double block = std::min(s.queued_bytes, prb_bytes[pick]);
    ++st.used_prbs;
    ++st.attempted_blocks;
    if (s.bler_rng.bernoulli(bler_p[pick])) {
      ++st.failed_blocks;  // block lost; bytes stay at the head of the queue
      continue;
    }
    double left = block;
    while (left > 0.0 && !s.queue.empty()) {
      Packet& pk = s.queue.front();
      double take = std::min(left, pk.bytes);
      double sojourn = std::min((round_ - pk.arrival_round) * t_ms, kDelayCapMs);
      delivered_byte_ms[pick] += take * sojourn;
      st.delivered_bytes += take;
      pk.bytes -= take;
      left -= take;
      if (pk.bytes <= 0.0) s.queue.pop_front();
    }
    s.queued_bytes = std::max(0.0, s.queued_bytes - block);
    s.delivered_total += block;
  }

  for (int i = 0; i < n; ++i) {
    SessionRoundStats& st = *stats[i];
    if (st.delivered_bytes > 0.0) {
      st.delay_ms = std::min(delivered_byte_ms[i] / st.delivered_bytes, kDelayCapMs);
    } else if (!pool[i]->queue.empty()) {
      st.delay_ms = std::min((round_ - pool[i]->queue.front().arrival_round) * t_ms, kDelayCapMs);
    } else {
      st.delay_ms = 0.0;
    }
  }
}

std::vector<KpmRecord> RanEnv::step(const Allocation& alloc) {
  const int k = num_slices();
  if (merged_) {
    if (alloc.grants.size() != 1) throw std::invalid_argument("ran: merged pool expects a single grant");
  } else if (static_cast<int>(alloc.grants.size()) != k) {
    throw std::invalid_argument("ran: allocation references unknown slice layout (got " +
                                std::to_string(alloc.grants.size()) + " grants for " + std::to_string(k) +
                                " slices)");
  }
  alloc.validate(scenario_.n_rb);

  const double t_ms = scenario_.round_ms;
  // activate / depart / channel / traffic
  for (auto& s : sessions_) {
    bool was_active = s.active;
    s.active = round_ >= s.tpl.arrival_round &&
               (s.tpl.departure_round < 0 || round_ < s.tpl.departure_round);
    if (!s.active) {
      if (was_active) {  // departed: drop its backlog
        s.queue.clear();
        s.queued_bytes = 0.0;
      }
      continue;
    }
    step_channel(s.ch, s.ch_rng);
    refresh_demand(s, round_);
    double bytes = s.cur_rate * t_ms * 125.0;  // Mbps * ms -> bytes
    if (bytes > 0.0) {
      s.queue.push_back({bytes, round_});
      s.queued_bytes += bytes;
      s.offered_total += bytes;
    }
    // delay-budget discard: bytes older than drop_ms leave from the front,
    // so backlog is self-limiting and a starved queue recovers on its own
    if (scenario_.drop_ms > 0.0) {
      while (!s.queue.empty() && (round_ - s.queue.front().arrival_round) * t_ms > scenario_.drop_ms) {
        s.queued_bytes = std::max(0.0, s.queued_bytes - s.queue.front().bytes);
        s.dropped_total += s.queue.front().bytes;
        s.queue.pop_front();
      }
    }
  }

  // group active sessions per slice (by session id order)
  std::vector<std::vector<Session*>> pools(merged_ ? 1 : k);
  for (auto& s : sessions_) {
    if (!s.active) continue;
    pools[merged_ ? 0 : s.tpl.slice].push_back(&s);
  }

  last_stats_.clear();
  std::vector<std::vector<SessionRoundStats*>> stat_ptrs(pools.size());
  // reserve to keep pointers stable while filling
  size_t total_active = 0;
  for (auto& p : pools) total_active += p.size();
  last_stats_.reserve(total_active);
  for (size_t pi = 0; pi < pools.size(); ++pi) {
    for (Session* s : pools[pi]) {
      SessionRoundStats st;
      st.session_id = s->tpl.id;
      st.slice = s->tpl.slice;
      st.offered_bytes = s->offered_total;
      last_stats_.push_back(st);
      stat_ptrs[pi].push_back(&last_stats_.back());
    }
  }

  for (size_t pi = 0; pi < pools.size(); ++pi) {
    SchedPolicy pol = merged_ ? SchedPolicy::ProportionalFair : scenario_.slices[pi].scheduler;
    int& cursor = rr_cursor_[merged_ ? k : static_cast<int>(pi)];
    schedule_pool(pools[pi], alloc.grants[pi].num_prb, pol, cursor, stat_ptrs[pi]);
  }

  // KPMs + PF average update
  std::vector<KpmRecord> records;
  records.reserve(total_active);
  for (size_t pi = 0; pi < pools.size(); ++pi) {
    for (size_t i = 0; i < pools[pi].size(); ++i) {
      Session& s = *pools[pi][i];
      SessionRoundStats& st = *stat_ptrs[pi][i];
      st.queued_bytes = s.queued_bytes;
      double served_mbps = st.delivered_bytes * 8.0 / (t_ms * 1000.0);
      s.avg_rate_mbps = (1.0 - kPfBeta) * s.avg_rate_mbps + kPfBeta * served_mbps;

      KpmRecord rec;
      rec.session_id = s.tpl.id;
      rec.throughput_mbps = served_mbps;
      rec.delay_ms = st.delay_ms;
      rec.bler = st.attempted_blocks > 0 ? static_cast<double>(st.failed_blocks) / st.attempted_blocks : 0.0;
      rec.prbs_used = st.used_prbs;
      rec.pusch_snr_db = s.ch.snr_db;
      rec.phr_db = s.ch.snr_db - 7.0;  // 23 dBm budget minus a (30 - snr) path proxy
      rec.mcs = mcs_from_cqi(snr_to_cqi(s.ch.snr_db));
      rec.current_tbs = st.attempted_blocks;
      rec.scheduled_rbs = st.granted_prbs;
      records.push_back(rec);
    }
  }
  std::sort(records.begin(), records.end(),
            [](const KpmRecord& a, const KpmRecord& b) { return a.session_id < b.session_id; });
  std::sort(last_stats_.begin(), last_stats_.end(),
            [](const SessionRoundStats& a, const SessionRoundStats& b) { return a.session_id < b.session_id; });

  ++round_;
  return records;
}

RanEnv::Ledger RanEnv::ledger(int session_id) const {
  for (const auto& s : sessions_) {
    if (s.tpl.id == session_id)
      return Ledger{s.offered_total, s.delivered_total, s.queued_bytes, s.dropped_total};
  }
  throw std::invalid_argument("ledger: unknown session id");
}

std::vector<int> RanEnv::active_session_ids() const {
  std::vector<int> ids;
  for (const auto& s : sessions_)
    if (s.active) ids.push_back(s.tpl.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

int RanEnv::slice_of(int session_id) const {
  for (const auto& s : sessions_)
    if (s.tpl.id == session_id) return s.tpl.slice;
  throw std::invalid_argument("slice_of: unknown session id");
}

}  // namespace xslice
