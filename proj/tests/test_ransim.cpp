#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "xslice/ransim.hpp"
#include "xslice/types.hpp"

using namespace xslice;

namespace {

SliceSpec slice_spec(int id, double p, double t, double z, SchedPolicy pol) {
  SliceSpec s;
  s.id = id;
  s.throughput_demand_mbps = p;
  s.delay_demand_ms = t;
  s.bler_demand = z;
  s.scheduler = pol;
  return s;
}

// a session with a frozen channel (no shadowing) so scheduler tests are
// byte-exact; snr 60 dB puts BLER around 1e-11, i.e. never fires in practice
SessionTemplate frozen_session(int id, int slice, double rate_mbps, double snr = 60.0) {
  SessionTemplate s;
  s.id = id;
  s.slice = slice;
  s.mean_snr_db = snr;
  s.corr = 0.0;
  s.noise_db = 0.0;
  s.demand_kind = "constant";
  s.rate_mbps = rate_mbps;
  return s;
}

Scenario one_slice(SchedPolicy pol, int n_rb) {
  Scenario sc;
  sc.n_rb = n_rb;
  sc.slices = {slice_spec(0, 10.0, 100.0, 0.2, pol)};
  return sc;
}

Allocation whole_band(int n_rb) {
  Allocation a;
  a.grants = {{0, n_rb}};
  return a;
}

double bytes_per_prb(double snr, const Scenario& sc) {
  int cqi = snr_to_cqi(snr);
  return prb_capacity_bits(cqi_to_efficiency(cqi), sc.round_ms, sc.dl_fraction, sc.overhead) / 8.0;
}

}  // namespace

TEST_CASE("snr to cqi mapping") {
  CHECK(snr_to_cqi(-6.0) == 0);
  CHECK(snr_to_cqi(-6.0 + 2.2) == 1);
  CHECK(snr_to_cqi(0.0) == 2);        // floor(6/2.2) = 2
  CHECK(snr_to_cqi(15.0) == 9);       // floor(21/2.2) = 9
  CHECK(snr_to_cqi(27.0) == 14);      // 33/2.2 rounds down in binary fp
  CHECK(snr_to_cqi(28.0) == 15);      // floor(34/2.2) = 15
  CHECK(snr_to_cqi(-40.0) == 0);      // clamped
  CHECK(snr_to_cqi(80.0) == 15);      // clamped
  // monotone over a sweep
  int prev = 0;
  for (double snr = -20.0; snr <= 40.0; snr += 0.25) {
    int c = snr_to_cqi(snr);
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("cqi efficiency table") {
  CHECK(cqi_to_efficiency(0) == 0.0);
  CHECK(cqi_to_efficiency(1) == doctest::Approx(0.1523));
  CHECK(cqi_to_efficiency(7) == doctest::Approx(1.4766));
  CHECK(cqi_to_efficiency(15) == doctest::Approx(5.5547));
  for (int c = 1; c <= 15; ++c) CHECK(cqi_to_efficiency(c) > cqi_to_efficiency(c - 1));
  CHECK_THROWS_AS(cqi_to_efficiency(-1), std::invalid_argument);
  CHECK_THROWS_AS(cqi_to_efficiency(16), std::invalid_argument);
}

TEST_CASE("mcs from cqi") {
  CHECK(mcs_from_cqi(0) == 0);
  CHECK(mcs_from_cqi(1) == 0);   // 2*1-2 = 0
  CHECK(mcs_from_cqi(2) == 2);
  CHECK(mcs_from_cqi(10) == 18);
  CHECK(mcs_from_cqi(15) == 28);
}

TEST_CASE("bler logistic") {
  // at the decoding threshold the logistic sits at exactly 1/2
  const int mcs = 28;
  const double thr = -7.0 + 1.1 * mcs;
  CHECK(bler_probability(thr, mcs) == doctest::Approx(0.5));
  // symmetric around the threshold
  for (double x : {0.5, 1.0, 3.0, 7.0})
    CHECK(bler_probability(thr + x, mcs) + bler_probability(thr - x, mcs) == doctest::Approx(1.0));
  // deep margin decodes, deep fade fails
  CHECK(bler_probability(thr + 20.0, mcs) < 1e-5);
  CHECK(bler_probability(thr - 20.0, mcs) > 1.0 - 1e-5);
  // monotone decreasing in snr
  CHECK(bler_probability(10.0, 10) > bler_probability(11.0, 10));
}

TEST_CASE("prb capacity formula") {
  // 12 subcarriers x 14 symbols per half-ms slot, scaled by DL share and
  // overhead; recompute with independent arithmetic
  const double eff = 5.5547, t = 100.0, dl = 0.7, oh = 0.14;
  const double res_per_prb_per_slot = 12.0 * 14.0;
  const double slots = t / 0.5;
  const double expect = eff * res_per_prb_per_slot * slots * dl * (1.0 - oh);
  CHECK(prb_capacity_bits(eff, t, dl, oh) == doctest::Approx(expect).epsilon(1e-12));
  // top CQI at the default frame settings carries ~1.12 Mbps per PRB
  CHECK(prb_capacity_bits(eff, t, dl, oh) / (t * 1000.0) == doctest::Approx(1.1235).epsilon(1e-3));

  CHECK_THROWS_AS(prb_capacity_bits(1.0, 0.0, 0.7, 0.14), std::invalid_argument);
  CHECK_THROWS_AS(prb_capacity_bits(1.0, -5.0, 0.7, 0.14), std::invalid_argument);
  CHECK_THROWS_AS(prb_capacity_bits(1.0, 100.0, 0.0, 0.14), std::invalid_argument);
  CHECK_THROWS_AS(prb_capacity_bits(1.0, 100.0, 1.5, 0.14), std::invalid_argument);
  CHECK_THROWS_AS(prb_capacity_bits(1.0, 100.0, 0.7, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(prb_capacity_bits(1.0, 100.0, 0.7, -0.1), std::invalid_argument);
}

TEST_CASE("gauss-markov channel statistics") {
  // stationary stddev of an AR(1) is sigma / sqrt(1 - rho^2)
  ChannelState ch;
  ch.mean_snr_db = 15.0;
  ch.corr = 0.9;
  ch.noise_db = 1.5;
  ch.snr_db = 15.0;
  Rng rng(42);

  const int n = 200000;
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) {
    step_channel(ch, rng);
    xs[i] = ch.snr_db;
  }
  double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double var = 0.0, lag1 = 0.0;
  for (int i = 0; i < n; ++i) var += (xs[i] - mean) * (xs[i] - mean);
  var /= n;
  for (int i = 1; i < n; ++i) lag1 += (xs[i] - mean) * (xs[i - 1] - mean);
  lag1 /= (n - 1) * var;

  const double sd_expect = 1.5 / std::sqrt(1.0 - 0.9 * 0.9);
  CHECK(mean == doctest::Approx(15.0).epsilon(0.01));
  CHECK(std::sqrt(var) == doctest::Approx(sd_expect).epsilon(0.02));
  CHECK(lag1 == doctest::Approx(0.9).epsilon(0.02));

  // zero correlation degenerates to iid noise around the mean
  ch.corr = 0.0;
  ch.snr_db = 15.0;
  double acc = 0.0, accsq = 0.0;
  for (int i = 0; i < n; ++i) {
    step_channel(ch, rng);
    acc += ch.snr_db;
    accsq += ch.snr_db * ch.snr_db;
  }
  double m0 = acc / n;
  CHECK(m0 == doctest::Approx(15.0).epsilon(0.005));
  CHECK(std::sqrt(accsq / n - m0 * m0) == doctest::Approx(1.5).epsilon(0.02));
}

TEST_CASE("byte conservation offered = delivered + queued + dropped") {
  // mid snr (lossy), undersized band, tight discard horizon: all four
  // ledger terms are exercised at once
  Scenario sc = one_slice(SchedPolicy::ProportionalFair, 12);
  sc.drop_ms = 400.0;
  sc.sessions = {frozen_session(0, 0, 30.0, 14.0), frozen_session(1, 0, 25.0, 11.0)};
  sc.sessions[0].corr = 0.8;
  sc.sessions[0].noise_db = 2.0;  // fading makes BLER bite
  RanEnv env(sc, 7);

  for (int r = 0; r < 500; ++r) env.step(whole_band(12));

  for (int id : {0, 1}) {
    auto led = env.ledger(id);
    CHECK(led.offered_bytes > 0.0);
    CHECK(led.delivered_bytes > 0.0);
    CHECK(led.dropped_bytes > 0.0);  // horizon must actually fire
    CHECK(led.offered_bytes ==
          doctest::Approx(led.delivered_bytes + led.queued_bytes + led.dropped_bytes)
              .epsilon(1e-9));
  }
  CHECK_THROWS_AS(env.ledger(99), std::invalid_argument);
}

TEST_CASE("round robin rotates one prb at a time") {
  Scenario sc = one_slice(SchedPolicy::RoundRobin, 7);
  sc.drop_ms = 0.0;
  // plenty of backlog so every PRB finds work
  sc.sessions = {frozen_session(0, 0, 200.0), frozen_session(1, 0, 200.0),
                 frozen_session(2, 0, 200.0)};
  RanEnv env(sc, 1);

  auto grants = [&](const std::vector<KpmRecord>& recs) {
    std::vector<int> g;
    for (const auto& r : recs) g.push_back(r.scheduled_rbs);
    return g;
  };

  // cursor starts before session 0 and persists across rounds:
  // r0 picks 0,1,2,0,1,2,0 and r1 resumes after the last pick
  CHECK(grants(env.step(whole_band(7))) == std::vector<int>{3, 2, 2});
  CHECK(grants(env.step(whole_band(7))) == std::vector<int>{2, 3, 2});
  CHECK(grants(env.step(whole_band(7))) == std::vector<int>{2, 2, 3});
  CHECK(grants(env.step(whole_band(7))) == std::vector<int>{3, 2, 2});
}

TEST_CASE("max throughput starves the weaker channel") {
  Scenario sc = one_slice(SchedPolicy::MaxThroughput, 10);
  sc.drop_ms = 0.0;
  sc.sessions = {frozen_session(0, 0, 500.0, 60.0), frozen_session(1, 0, 500.0, 20.0)};
  RanEnv env(sc, 1);

  for (int r = 0; r < 5; ++r) {
    auto recs = env.step(whole_band(10));
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].scheduled_rbs == 10);  // backlog never drains at these rates
    CHECK(recs[1].scheduled_rbs == 0);
  }
  CHECK(env.ledger(1).delivered_bytes == 0.0);
}

TEST_CASE("earliest deadline serves the oldest head of line") {
  Scenario sc = one_slice(SchedPolicy::EarliestDeadline, 4);
  sc.drop_ms = 0.0;
  SessionTemplate late = frozen_session(1, 0, 300.0);
  late.arrival_round = 3;
  sc.sessions = {frozen_session(0, 0, 300.0), late};
  RanEnv env(sc, 1);

  // 4 PRBs against 300 Mbps: session 0's queue only grows, so its head of
  // line stays strictly older than anything session 1 ever queues
  for (int r = 0; r < 10; ++r) {
    auto recs = env.step(whole_band(4));
    if (r >= 3) REQUIRE(recs.size() == 2);
    CHECK(recs[0].scheduled_rbs == 4);
  }
  CHECK(env.ledger(1).delivered_bytes == 0.0);
  CHECK(env.ledger(1).queued_bytes > 0.0);
}

TEST_CASE("proportional fair balances served averages") {
  // equal demand, unequal channels: PF must keep serving the weak session
  // (max-throughput would starve it), and the strong one still gets more
  Scenario sc = one_slice(SchedPolicy::ProportionalFair, 20);
  sc.drop_ms = 0.0;
  sc.sessions = {frozen_session(0, 0, 120.0, 60.0), frozen_session(1, 0, 120.0, 16.0)};
  RanEnv env(sc, 1);

  double d0 = 0.0, d1 = 0.0;
  for (int r = 0; r < 200; ++r) {
    env.step(whole_band(20));
    d0 = env.ledger(0).delivered_bytes;
    d1 = env.ledger(1).delivered_bytes;
  }
  CHECK(d1 > 0.0);
  CHECK(d0 > d1);
  // neither session is ever fully starved over the long run
  CHECK(d1 / (d0 + d1) > 0.15);
}

TEST_CASE("first round winner is the better channel under pf") {
  // with zero served averages both metrics reduce to rate / floor, so the
  // very first PRBs all go to the faster session until its queue drains
  Scenario sc = one_slice(SchedPolicy::ProportionalFair, 6);
  sc.drop_ms = 0.0;
  sc.sessions = {frozen_session(0, 0, 2.0, 60.0), frozen_session(1, 0, 2.0, 16.0)};
  RanEnv env(sc, 1);

  auto recs = env.step(whole_band(6));
  const double prb0 = bytes_per_prb(60.0, sc);
  // 2 Mbps over 100 ms = 25000 bytes; one top-CQI PRB carries ~14000 bytes,
  // so session 0 drains in 2 PRBs and the leftovers go to session 1
  const int need0 = static_cast<int>(std::ceil(25000.0 / prb0));
  CHECK(recs[0].scheduled_rbs == need0);
  CHECK(recs[1].scheduled_rbs > 0);
}

TEST_CASE("idle prbs are not forced onto empty queues") {
  Scenario sc = one_slice(SchedPolicy::RoundRobin, 50);
  sc.sessions = {frozen_session(0, 0, 1.0)};  // 12500 bytes per round, one PRB's worth
  RanEnv env(sc, 1);
  auto recs = env.step(whole_band(50));
  CHECK(recs[0].scheduled_rbs < 50);
  CHECK(recs[0].throughput_mbps == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("discard horizon bounds queue and delay") {
  Scenario sc = one_slice(SchedPolicy::ProportionalFair, 4);
  sc.drop_ms = 300.0;
  sc.sessions = {frozen_session(0, 0, 100.0)};  // far beyond 4 PRBs of capacity
  RanEnv env(sc, 3);

  double per_round_bytes = 100.0 * sc.round_ms * 125.0;
  for (int r = 0; r < 60; ++r) {
    auto recs = env.step(whole_band(4));
    // nothing in the queue can be older than the horizon
    CHECK(recs[0].delay_ms <= 300.0 + 1e-9);
    // backlog is self-limiting: chunks live at ages 0..horizon inclusive,
    // so at most horizon/round_ms + 1 generations of arrivals deep
    CHECK(env.ledger(0).queued_bytes <= 4.0 * per_round_bytes + 1e-6);
  }
  CHECK(env.ledger(0).dropped_bytes > 0.0);

  // with the horizon disabled the same overload grows without bound
  sc.drop_ms = 0.0;
  RanEnv unbounded(sc, 3);
  for (int r = 0; r < 60; ++r) unbounded.step(whole_band(4));
  CHECK(unbounded.ledger(0).dropped_bytes == 0.0);
  CHECK(unbounded.ledger(0).queued_bytes > env.ledger(0).queued_bytes);
}

TEST_CASE("arrival and departure lifecycle") {
  Scenario sc = one_slice(SchedPolicy::RoundRobin, 10);
  SessionTemplate visitor = frozen_session(1, 0, 5.0);
  visitor.arrival_round = 3;
  visitor.departure_round = 6;
  sc.sessions = {frozen_session(0, 0, 5.0), visitor};
  RanEnv env(sc, 1);

  for (int r = 0; r < 9; ++r) {
    auto recs = env.step(whole_band(10));
    if (r < 3 || r >= 6) {
      CHECK(recs.size() == 1);
      CHECK(recs[0].session_id == 0);
    } else {
      CHECK(recs.size() == 2);
    }
  }
  // departure clears the backlog
  CHECK(env.ledger(1).queued_bytes == 0.0);
  CHECK(env.active_session_ids() == std::vector<int>{0});
  CHECK(env.slice_of(1) == 0);
  CHECK_THROWS_AS(env.slice_of(99), std::invalid_argument);
}

TEST_CASE("kpm record fields are consistent") {
  Scenario sc = one_slice(SchedPolicy::ProportionalFair, 8);
  sc.sessions = {frozen_session(0, 0, 50.0, 21.0), frozen_session(1, 0, 50.0, 26.0)};
  RanEnv env(sc, 11);
  for (int r = 0; r < 20; ++r) {
    auto recs = env.step(whole_band(8));
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].session_id < recs[1].session_id);  // sorted by id
    for (const auto& rec : recs) {
      CHECK(rec.mcs == mcs_from_cqi(snr_to_cqi(rec.pusch_snr_db)));
      CHECK(rec.phr_db == doctest::Approx(rec.pusch_snr_db - 7.0));
      CHECK(rec.bler >= 0.0);
      CHECK(rec.bler <= 1.0);
      CHECK(rec.prbs_used <= rec.scheduled_rbs);
      CHECK(rec.throughput_mbps >= 0.0);
    }
  }
}

TEST_CASE("merged pool dissolves slice boundaries") {
  Scenario sc;
  sc.n_rb = 20;
  sc.slices = {slice_spec(0, 10, 100, 0.2, SchedPolicy::RoundRobin),
               slice_spec(1, 10, 100, 0.2, SchedPolicy::EarliestDeadline)};
  sc.sessions = {frozen_session(0, 0, 50.0), frozen_session(1, 1, 50.0)};

  RanEnv merged(sc, 5, true);
  Allocation one;
  one.grants = {{0, 20}};
  auto recs = merged.step(one);
  CHECK(recs.size() == 2);
  // both sessions are served out of the single pooled grant
  CHECK(recs[0].scheduled_rbs + recs[1].scheduled_rbs == 20);

  // a merged env rejects per-slice grants, a sliced env rejects the pool
  Allocation two;
  two.grants = {{0, 10}, {10, 10}};
  CHECK_THROWS_AS(merged.step(two), std::invalid_argument);
  RanEnv sliced(sc, 5, false);
  CHECK_THROWS_AS(sliced.step(one), std::invalid_argument);
}

TEST_CASE("same seed reruns identically, different seed diverges") {
  Scenario sc = one_slice(SchedPolicy::ProportionalFair, 16);
  sc.sessions = {frozen_session(0, 0, 40.0, 18.0), frozen_session(1, 0, 40.0, 24.0)};
  sc.sessions[0].noise_db = 1.5;
  sc.sessions[0].corr = 0.9;
  sc.sessions[1].noise_db = 1.5;
  sc.sessions[1].corr = 0.9;

  auto digest = [&](uint64_t seed) {
    RanEnv env(sc, seed);
    double acc = 0.0;
    for (int r = 0; r < 50; ++r)
      for (const auto& rec : env.step(whole_band(16)))
        acc += rec.throughput_mbps + rec.delay_ms + rec.pusch_snr_db;
    return acc;
  };
  CHECK(digest(123) == digest(123));
  CHECK(digest(123) != digest(124));
}

TEST_CASE("scenario validation rejects malformed inputs") {
  Scenario sc;
  CHECK_THROWS_AS(sc.validate(), std::invalid_argument);  // no slices

  sc = one_slice(SchedPolicy::ProportionalFair, 10);
  sc.round_ms = 0.3;  // not a multiple of half a millisecond
  CHECK_THROWS_AS(RanEnv(sc, 1), std::invalid_argument);

  sc = one_slice(SchedPolicy::ProportionalFair, 10);
  sc.slices[0].id = 2;  // ids must be 0..K-1
  CHECK_THROWS_AS(RanEnv(sc, 1), std::invalid_argument);

  sc = one_slice(SchedPolicy::ProportionalFair, 0);  // band smaller than slice count
  CHECK_THROWS_AS(RanEnv(sc, 1), std::invalid_argument);

  sc = one_slice(SchedPolicy::ProportionalFair, 10);
  sc.sessions = {frozen_session(0, 3, 5.0)};  // unknown slice
  CHECK_THROWS_AS(RanEnv(sc, 1), std::invalid_argument);

  sc = one_slice(SchedPolicy::ProportionalFair, 10);
  sc.sessions = {frozen_session(0, 0, 5.0)};
  sc.sessions[0].demand_kind = "bursty";  // unknown demand process
  CHECK_THROWS_AS(RanEnv(sc, 1), std::invalid_argument);

  sc = one_slice(SchedPolicy::ProportionalFair, 10);
  sc.sessions = {frozen_session(0, 0, 5.0)};
  sc.sessions[0].demand_kind = "class";  // class demand needs a named class
  sc.traffic_class = "custom";
  CHECK_THROWS_AS(RanEnv(sc, 1), std::invalid_argument);

  CHECK(traffic_class_range("medium").first == doctest::Approx(80.0));
  CHECK(traffic_class_range("medium").second == doctest::Approx(160.0));
  CHECK_THROWS_AS(traffic_class_range("bursty"), std::invalid_argument);
}

TEST_CASE("class demand redraws stay inside the class range") {
  Scenario sc = one_slice(SchedPolicy::ProportionalFair, 400);
  sc.traffic_class = "light";
  SessionTemplate s = frozen_session(0, 0, 0.0);
  s.demand_kind = "class";
  sc.sessions = {s};
  RanEnv env(sc, 9);

  double last_offered = 0.0;
  int distinct_rates = 0;
  double prev_rate = -1.0;
  for (int r = 0; r < 600; ++r) {
    env.step(whole_band(400));
    double off = env.ledger(0).offered_bytes;
    double rate = (off - last_offered) * 8.0 / (sc.round_ms * 1000.0);
    last_offered = off;
    CHECK(rate >= 20.0 - 1e-9);
    CHECK(rate <= 80.0 + 1e-9);
    if (std::abs(rate - prev_rate) > 1e-9) ++distinct_rates;
    prev_rate = rate;
  }
  CHECK(distinct_rates > 2);  // the dwell process actually moved
}
