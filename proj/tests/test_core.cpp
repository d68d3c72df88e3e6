#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "xslice/regret.hpp"
#include "xslice/types.hpp"

using namespace xslice;

namespace {

SliceSpec spec0() {
  SliceSpec s;
  s.id = 0;
  s.throughput_demand_mbps = 10.0;
  s.delay_demand_ms = 50.0;
  s.bler_demand = 0.1;
  return s;  // default weights (1, 0.8, 2)
}

SliceSpec spec1() {
  SliceSpec s;
  s.id = 1;
  s.throughput_demand_mbps = 20.0;
  s.delay_demand_ms = 100.0;
  s.bler_demand = 0.05;
  s.weight_tp = 2.0;
  s.weight_delay = 1.0;
  s.weight_rel = 0.5;
  return s;
}

KpmRecord rec(int id, double tp, double delay, double bler, int rbs) {
  KpmRecord r;
  r.session_id = id;
  r.throughput_mbps = tp;
  r.delay_ms = delay;
  r.bler = bler;
  r.scheduled_rbs = rbs;
  return r;
}

Allocation sliced(std::vector<int> sizes) {
  Allocation a;
  int pos = 0;
  for (int n : sizes) {
    a.grants.push_back({pos, n});
    pos += n;
  }
  return a;
}

}  // namespace

TEST_CASE("regret terms") {
  // shortfall relative to demand, clamped at zero when met
  CHECK(throughput_regret_term(10.0, 7.0) == doctest::Approx(0.3));
  CHECK(throughput_regret_term(10.0, 12.0) == 0.0);
  CHECK(throughput_regret_term(10.0, 10.0) == 0.0);
  CHECK(throughput_regret_term(10.0, 0.0) == doctest::Approx(1.0));

  // excess relative to bound, clamped at zero when under
  CHECK(excess_regret_term(50.0, 80.0) == doctest::Approx(0.6));
  CHECK(excess_regret_term(100.0, 50.0) == 0.0);
  CHECK(excess_regret_term(0.1, 0.2) == doctest::Approx(1.0));
  CHECK(excess_regret_term(0.05, 0.05) == 0.0);

  CHECK_THROWS_AS(throughput_regret_term(0.0, 5.0), std::invalid_argument);
  CHECK_THROWS_AS(excess_regret_term(-1.0, 5.0), std::invalid_argument);
}

TEST_CASE("slice regret sums session terms") {
  std::vector<KpmRecord> rs = {rec(0, 7.0, 80.0, 0.2, 6), rec(1, 12.0, 30.0, 0.05, 4)};
  SliceRegret r = slice_regret(spec0(), rs);
  // tp: (10-7)/10 + 0; delay: (80-50)/50 + 0; rel: (0.2-0.1)/0.1 + 0
  CHECK(r.tp == doctest::Approx(0.3));
  CHECK(r.delay == doctest::Approx(0.6));
  CHECK(r.rel == doctest::Approx(1.0));

  SliceRegret empty = slice_regret(spec0(), std::span<const KpmRecord>{});
  CHECK(empty.tp == 0.0);
  CHECK(empty.delay == 0.0);
  CHECK(empty.rel == 0.0);
}

TEST_CASE("total regret applies per-slice weights") {
  std::vector<SliceSpec> specs = {spec0(), spec1()};
  std::vector<SliceRegret> per = {{0.3, 0.6, 1.0}, {0.25, 0.5, 1.0}};
  // slice0: 1*0.3 + 0.8*0.6 + 2*1.0 = 2.78; slice1: 2*0.25 + 1*0.5 + 0.5*1.0 = 1.5
  CHECK(total_regret(specs, per) == doctest::Approx(4.28));

  std::vector<SliceRegret> one = {{0.0, 0.0, 0.0}};
  CHECK_THROWS_AS(total_regret(specs, one), std::invalid_argument);
}

TEST_CASE("utilization rewards small grants") {
  Allocation a = sliced({10, 40});
  CHECK(utilization(a, 0.0) == doctest::Approx(0.125));
  CHECK(utilization(a, 5.0) == doctest::Approx(1.0 / 15 + 1.0 / 45));

  Allocation zero;
  zero.grants.push_back({0, 0});
  CHECK_THROWS_AS(utilization(zero, 0.0), std::invalid_argument);
}

TEST_CASE("reward normalization clamps at both ends") {
  Reward r = reward(0.3, 0.5, 3.0);
  CHECK(r.raw == doctest::Approx(0.2));
  CHECK(r.norm == doctest::Approx(0.2 / 3));

  CHECK(reward(5.43, 0.125, 2.0).norm == doctest::Approx(-1.0));
  CHECK(reward(0.0, 10.0, 3.0).norm == doctest::Approx(1.0));
  CHECK_THROWS_AS(reward(0.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("evaluate_round end to end") {
  std::vector<SliceSpec> specs = {spec0(), spec1()};
  std::vector<KpmRecord> rs = {rec(0, 7.0, 80.0, 0.2, 6), rec(1, 12.0, 30.0, 0.05, 4),
                               rec(2, 15.0, 150.0, 0.1, 25)};
  std::map<int, int> member = {{0, 0}, {1, 0}, {2, 1}};

  SUBCASE("sliced allocation scores granted PRBs") {
    RegretBreakdown b = evaluate_round(specs, rs, member, sliced({10, 40}));
    CHECK(b.per_slice[0].tp == doctest::Approx(0.3));
    CHECK(b.per_slice[0].delay == doctest::Approx(0.6));
    CHECK(b.per_slice[0].rel == doctest::Approx(1.0));
    CHECK(b.per_slice[1].tp == doctest::Approx(0.25));
    CHECK(b.per_slice[1].delay == doctest::Approx(0.5));
    CHECK(b.per_slice[1].rel == doctest::Approx(1.0));
    CHECK(b.per_slice_weighted[0] == doctest::Approx(2.78));
    CHECK(b.per_slice_weighted[1] == doctest::Approx(1.5));
    CHECK(b.total == doctest::Approx(4.28));
    CHECK(b.utilization == doctest::Approx(0.125));
    CHECK(b.reward_raw == doctest::Approx(0.125 - 4.28));
    CHECK(b.reward_norm == doctest::Approx(-1.0));  // clamped at -r_max, r_max = K = 2
  }

  SUBCASE("merged allocation scores consumed PRBs") {
    Allocation merged = sliced({50});
    RegretBreakdown b = evaluate_round(specs, rs, member, merged);
    // slice0 consumed 6+4, slice1 consumed 25
    CHECK(b.utilization == doctest::Approx(1.0 / 10 + 1.0 / 25));
    CHECK(b.total == doctest::Approx(4.28));
  }

  SUBCASE("all demands met leaves only the utilization term") {
    std::vector<KpmRecord> good = {rec(0, 11.0, 20.0, 0.01, 6), rec(1, 12.0, 30.0, 0.05, 4),
                                   rec(2, 25.0, 80.0, 0.02, 25)};
    RegretBreakdown b = evaluate_round(specs, good, member, sliced({10, 40}));
    CHECK(b.total == 0.0);
    CHECK(b.reward_raw == doctest::Approx(0.125));
    CHECK(b.reward_norm == doctest::Approx(0.0625));
  }

  SUBCASE("record for unmapped session throws") {
    std::map<int, int> bad = {{0, 0}, {1, 0}};
    CHECK_THROWS_AS(evaluate_round(specs, rs, bad, sliced({10, 40})), std::invalid_argument);
  }
}

TEST_CASE("validation guards") {
  SliceSpec s = spec0();
  s.bler_demand = 0.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = spec0();
  s.weight_delay = -0.1;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);

  KpmRecord r = rec(0, -1.0, 0.0, 0.0, 0);
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);
  r = rec(0, 1.0, 0.0, 1.5, 0);
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);

  Allocation gap;
  gap.grants = {{0, 10}, {15, 5}};
  CHECK_THROWS_AS(gap.validate(30), std::invalid_argument);
  Allocation over = sliced({20, 20});
  CHECK_THROWS_AS(over.validate(30), std::invalid_argument);
  Allocation ok = sliced({20, 10});
  CHECK_NOTHROW(ok.validate(30));
  CHECK(ok.total_prbs() == 30);
}

TEST_CASE("action_to_allocation hand cases") {
  SUBCASE("clean split") {
    std::vector<double> r = {0.5, 0.5};
    Allocation a = action_to_allocation(r, 100);
    CHECK(a.grants[0].num_prb == 50);
    CHECK(a.grants[1].num_prb == 50);
    CHECK(a.grants[0].start_prb == 0);
    CHECK(a.grants[1].start_prb == 50);
  }
  SUBCASE("zeros land on the floor") {
    std::vector<double> r = {0.0, 0.0};
    Allocation a = action_to_allocation(r, 100, 5);
    CHECK(a.grants[0].num_prb == 5);
    CHECK(a.grants[1].num_prb == 5);
  }
  SUBCASE("proportional scale-down on overflow") {
    std::vector<double> r = {0.9, 0.9};
    Allocation a = action_to_allocation(r, 100);
    CHECK(a.grants[0].num_prb == 50);
    CHECK(a.grants[1].num_prb == 50);
  }
  SUBCASE("largest remainder, ties to the lower slice") {
    // quotas 70/50/50 scale to 41.18/29.41/29.41; slice 1 wins the leftover PRB
    std::vector<double> r = {0.7, 0.5, 0.5};
    Allocation a = action_to_allocation(r, 100);
    CHECK(a.grants[0].num_prb == 41);
    CHECK(a.grants[1].num_prb == 30);
    CHECK(a.grants[2].num_prb == 29);
  }
  SUBCASE("floors are re-imposed after the scale-down") {
    std::vector<double> r = {1.0, 0.0};
    Allocation a = action_to_allocation(r, 50, 5);
    CHECK(a.grants[0].num_prb == 45);
    CHECK(a.grants[1].num_prb == 5);
  }
  SUBCASE("bad inputs throw") {
    std::vector<double> out = {1.2, 0.0};
    CHECK_THROWS_AS(action_to_allocation(out, 100), std::invalid_argument);
    std::vector<double> ok = {0.5, 0.5};
    CHECK_THROWS_AS(action_to_allocation(ok, 5, 3), std::invalid_argument);
    CHECK_THROWS_AS(action_to_allocation(std::span<const double>{}, 100), std::invalid_argument);
  }
}

TEST_CASE("action_to_allocation properties hold over randomized inputs") {
  std::mt19937_64 rng(20260816);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    int k = 1 + static_cast<int>(rng() % 8);
    int min_prb = 1 + static_cast<int>(rng() % 5);
    int n_rb = k * min_prb + static_cast<int>(rng() % 500);
    std::vector<double> ratios(k);
    for (double& x : ratios) x = unit(rng);

    Allocation a = action_to_allocation(ratios, n_rb, min_prb);
    REQUIRE(static_cast<int>(a.grants.size()) == k);
    CHECK_NOTHROW(a.validate(n_rb));
    long nominal = 0;
    for (int i = 0; i < k; ++i) {
      CHECK(a.grants[i].num_prb >= min_prb);
      nominal += std::max(min_prb, static_cast<int>(std::llround(ratios[i] * n_rb)));
    }
    CHECK(a.total_prbs() <= n_rb);
    if (nominal > n_rb) CHECK(a.total_prbs() == n_rb);  // overflow fills the band exactly

    Allocation again = action_to_allocation(ratios, n_rb, min_prb);
    for (int i = 0; i < k; ++i) {
      CHECK(again.grants[i].start_prb == a.grants[i].start_prb);
      CHECK(again.grants[i].num_prb == a.grants[i].num_prb);
    }
  }
}

TEST_CASE("scheduler policy names round-trip") {
  for (auto p : {SchedPolicy::ProportionalFair, SchedPolicy::RoundRobin,
                 SchedPolicy::MaxThroughput, SchedPolicy::EarliestDeadline}) {
    CHECK(sched_policy_from_string(to_string(p)) == p);
  }
  CHECK(sched_policy_from_string("pf") == SchedPolicy::ProportionalFair);
  CHECK(sched_policy_from_string("edf") == SchedPolicy::EarliestDeadline);
  CHECK_THROWS_AS(sched_policy_from_string("fifo"), std::invalid_argument);
}
