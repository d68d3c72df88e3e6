#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "xslice/e2lite.hpp"
#include "xslice/ransim.hpp"
#include "xslice/types.hpp"

using namespace xslice;

namespace {

std::string data_path(const std::string& name) {
  const char* dir = std::getenv("XSLICE_TEST_DATA");
  REQUIRE(dir != nullptr);
  return std::string(dir) + "/" + name;
}

SliceSpec spec(int id, double p, double t, double z) {
  SliceSpec s;
  s.id = id;
  s.throughput_demand_mbps = p;
  s.delay_demand_ms = t;
  s.bler_demand = z;
  return s;
}

Scenario tiny_scenario() {
  Scenario sc;
  sc.n_rb = 20;
  sc.slices = {spec(0, 10, 100, 0.2), spec(1, 10, 100, 0.2)};
  SessionTemplate s;
  s.id = 0;
  s.slice = 0;
  s.mean_snr_db = 30.0;
  s.corr = 0.0;
  s.noise_db = 0.0;
  s.demand_kind = "constant";
  s.rate_mbps = 5.0;
  sc.sessions = {s};
  return sc;
}

Allocation even_split() {
  Allocation a;
  a.grants = {{0, 10}, {10, 10}};
  return a;
}

bool same_message(const E2Message& a, const E2Message& b) {
  return encode(a) == encode(b);
}

}  // namespace

TEST_CASE("golden corpus: decode then encode reproduces every line byte for byte") {
  std::ifstream in(data_path("e2_corpus.jsonl"));
  REQUIRE(in.good());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    E2Message msg = decode(line);
    CHECK(encode(msg) == line + "\n");
  }
  CHECK(n >= 40);  // the corpus covers all five message types many times over
}

TEST_CASE("round trip preserves every field") {
  KpmReport rep;
  rep.round = 42;
  rep.digest = "00ff00ff00ff00ff";
  KpmRecord r;
  r.session_id = 3;
  r.throughput_mbps = 123.456789;
  r.delay_ms = 0.125;
  r.bler = 0.0625;
  r.prbs_used = 17;
  r.pusch_snr_db = -3.5;
  r.phr_db = 12.75;
  r.mcs = 19;
  r.current_tbs = 5;
  r.scheduled_rbs = 18;
  rep.records = {r};

  E2Message back = decode(encode(rep));
  auto* d = std::get_if<KpmReport>(&back);
  REQUIRE(d != nullptr);
  CHECK(d->round == 42);
  CHECK(d->digest == "00ff00ff00ff00ff");
  REQUIRE(d->records.size() == 1);
  CHECK(d->records[0].session_id == 3);
  CHECK(d->records[0].throughput_mbps == 123.456789);  // exact, not approximate
  CHECK(d->records[0].delay_ms == 0.125);
  CHECK(d->records[0].bler == 0.0625);
  CHECK(d->records[0].prbs_used == 17);
  CHECK(d->records[0].pusch_snr_db == -3.5);
  CHECK(d->records[0].phr_db == 12.75);
  CHECK(d->records[0].mcs == 19);
  CHECK(d->records[0].current_tbs == 5);
  CHECK(d->records[0].scheduled_rbs == 18);

  SliceCommand cmd;
  cmd.round = 7;
  cmd.allocation.grants = {{0, 13}, {13, 7}};
  back = decode(encode(cmd));
  auto* c = std::get_if<SliceCommand>(&back);
  REQUIRE(c != nullptr);
  CHECK(c->round == 7);
  REQUIRE(c->allocation.grants.size() == 2);
  CHECK(c->allocation.grants[1].start_prb == 13);
  CHECK(c->allocation.grants[1].num_prb == 7);

  CHECK(same_message(decode(encode(Subscribe{33.5})), Subscribe{33.5}));
  CHECK(same_message(decode(encode(Ack{9})), Ack{9}));
  CHECK(same_message(decode(encode(Bye{})), Bye{}));
}

TEST_CASE("format_double strings parse back exactly") {
  std::mt19937_64 rng(20260816);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    double v = u(rng);
    CHECK(std::stod(format_double(v)) == v);
  }
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -0.0, 0.0})
    CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("decode rejects malformed input without aborting") {
  CHECK_THROWS_AS(decode(""), DecodeError);
  CHECK_THROWS_AS(decode("{"), DecodeError);
  CHECK_THROWS_AS(decode("[1,2,3]"), DecodeError);
  CHECK_THROWS_AS(decode("\"just a string\""), DecodeError);
  CHECK_THROWS_AS(decode("{\"round\":1}"), DecodeError);                       // no type
  CHECK_THROWS_AS(decode("{\"type\":\"warp_drive\"}"), UnsupportedMessage);    // unknown type
  CHECK_THROWS_AS(decode("{\"type\":\"ack\"}"), DecodeError);                  // missing round
  CHECK_THROWS_AS(decode("{\"type\":\"ack\",\"round\":\"ten\"}"), DecodeError);
  CHECK_THROWS_AS(decode("{\"type\":\"ack\",\"round\":1.5}"), DecodeError);    // not an integer
  CHECK_THROWS_AS(decode("{\"type\":\"subscribe\",\"period_ms\":\"fast\"}"), DecodeError);
  CHECK_THROWS_AS(decode("{\"type\":\"kpm_report\",\"round\":1,\"digest\":\"x\",\"records\":3}"),
                  DecodeError);
  CHECK_THROWS_AS(decode("{\"type\":\"kpm_report\",\"round\":1,\"digest\":\"x\",\"records\":[5]}"),
                  DecodeError);
  CHECK_THROWS_AS(decode("{\"type\":\"slice_command\",\"round\":1,\"grants\":[{\"start_prb\":0}]}"),
                  DecodeError);

  // parse errors report a byte offset into the line
  try {
    decode("{\"type\":\"ack\",");
    FAIL("expected DecodeError");
  } catch (const DecodeError& e) {
    CHECK(e.byte_offset > 0);
  }
}

TEST_CASE("decode ignores unknown fields") {
  E2Message m = decode("{\"type\":\"ack\",\"round\":4,\"vendor_ext\":{\"a\":[1,2]}}");
  auto* a = std::get_if<Ack>(&m);
  REQUIRE(a != nullptr);
  CHECK(a->round == 4);
}

TEST_CASE("fuzzed truncations and mutations never escape DecodeError") {
  std::vector<std::string> seeds;
  {
    std::ifstream in(data_path("e2_corpus.jsonl"));
    REQUIRE(in.good());
    std::string line;
    while (std::getline(in, line)) seeds.push_back(line);
  }
  REQUIRE(!seeds.empty());

  auto try_decode = [](const std::string& s) {
    try {
      (void)decode(s);
    } catch (const DecodeError&) {
      // expected failure mode
    }
    // anything else (segfault, std::terminate, other exception) fails the test
  };

  // every strict prefix of every corpus line
  for (const auto& line : seeds)
    for (size_t cut = 0; cut < line.size(); cut += 3) try_decode(line.substr(0, cut));

  // random single-byte mutations
  std::mt19937_64 rng(99);
  for (int i = 0; i < 3000; ++i) {
    std::string s = seeds[rng() % seeds.size()];
    s[rng() % s.size()] = static_cast<char>(rng() % 256);
    try_decode(s);
  }

  // random garbage
  for (int i = 0; i < 1000; ++i) {
    std::string s;
    size_t len = rng() % 64;
    for (size_t b = 0; b < len; ++b) s += static_cast<char>(rng() % 256);
    try_decode(s);
  }
  CHECK(true);  // reaching here means no fuzz case escaped
}

TEST_CASE("slice digest pins the full slice configuration") {
  std::vector<SliceSpec> a = {spec(0, 10, 100, 0.2), spec(1, 20, 50, 0.1)};
  std::string d = slice_digest(a);
  CHECK(d.size() == 16);
  CHECK(d.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(slice_digest(a) == d);  // deterministic

  auto differs = [&](auto mutate) {
    auto b = a;
    mutate(b);
    return slice_digest(b) != d;
  };
  CHECK(differs([](auto& v) { v[0].throughput_demand_mbps = 11; }));
  CHECK(differs([](auto& v) { v[0].delay_demand_ms = 99; }));
  CHECK(differs([](auto& v) { v[1].bler_demand = 0.15; }));
  CHECK(differs([](auto& v) { v[1].weight_tp = 2.0; }));
  CHECK(differs([](auto& v) { v[0].weight_delay = 0.5; }));
  CHECK(differs([](auto& v) { v[0].weight_rel = 1.0; }));
  CHECK(differs([](auto& v) { v[1].scheduler = SchedPolicy::RoundRobin; }));
  CHECK(differs([](auto& v) { v.pop_back(); }));
}

TEST_CASE("inproc transport queues lines and reports closure") {
  auto [a, b] = make_inproc_pair();
  CHECK(a->send_line("hello\n"));
  CHECK(a->send_line("world\n"));

  std::string line;
  CHECK(b->recv_line(line, -1) == RecvStatus::Ok);
  CHECK(line == "hello");  // trailing newline stripped
  CHECK(b->recv_line(line, -1) == RecvStatus::Ok);
  CHECK(line == "world");
  CHECK(b->recv_line(line, 10) == RecvStatus::Timeout);

  // close drains queued lines before reporting Closed, and sends fail fast
  CHECK(b->send_line("reply\n"));
  b->close();
  CHECK(a->recv_line(line, -1) == RecvStatus::Ok);
  CHECK(line == "reply");
  CHECK(a->recv_line(line, -1) == RecvStatus::Closed);
  CHECK_FALSE(a->send_line("too late\n"));
}

TEST_CASE("unix transport reassembles lines and survives closure") {
  const std::string path = "/tmp/xslice_test_e2lite.sock";
  std::unique_ptr<Transport> server;
  std::thread listener([&] { server = unix_listen(path); });
  auto client = unix_connect(path);
  listener.join();
  REQUIRE(server != nullptr);

  // a line split across writes arrives whole
  CHECK(client->send_line("par"));
  CHECK(client->send_line("tial line\n"));
  std::string line;
  CHECK(server->recv_line(line, 2000) == RecvStatus::Ok);
  CHECK(line == "partial line");

  // two lines in one write come out as two receives
  CHECK(server->send_line("a\nb\n"));
  CHECK(client->recv_line(line, 2000) == RecvStatus::Ok);
  CHECK(line == "a");
  CHECK(client->recv_line(line, 2000) == RecvStatus::Ok);
  CHECK(line == "b");

  CHECK(client->recv_line(line, 30) == RecvStatus::Timeout);

  // complete buffered lines are flushed before the eof shows through
  CHECK(server->send_line("last\nhalf"));
  server->close();
  CHECK(client->recv_line(line, 2000) == RecvStatus::Ok);
  CHECK(line == "last");
  CHECK(client->recv_line(line, 2000) == RecvStatus::Closed);
}

TEST_CASE("lockstep endpoint answers every round fresh") {
  Scenario sc = tiny_scenario();
  RanEnv env(sc, 1);
  auto [ran_t, xapp_t] = make_inproc_pair();

  RanEndpointStats rst;
  std::thread ran([&] { rst = run_ran_endpoint(env, *ran_t, 0, 5, even_split()); });

  std::vector<int> seen_rounds;
  const std::string want_digest = slice_digest(sc.slices);
  XappEndpointStats xst = run_xapp_endpoint(
      *xapp_t, 100.0,
      [&](const KpmReport& rep) {
        CHECK(rep.digest == want_digest);
        seen_rounds.push_back(rep.round);
        SliceCommand ignored;  // the loop owns encoding; just return grants
        Allocation a = even_split();
        return a;
      },
      nullptr);
  ran.join();

  CHECK(rst.rounds == 5);
  CHECK(rst.fresh_commands == 5);
  CHECK(rst.stale_fallbacks == 0);
  CHECK(rst.clean_shutdown);
  CHECK(xst.clean_shutdown);
  // reports for rounds 0..5: the closing report carries the final state
  CHECK(seen_rounds == std::vector<int>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("stale commands are dropped and the previous allocation persists") {
  Scenario sc = tiny_scenario();
  RanEnv env(sc, 1);
  auto [ran_t, xapp_t] = make_inproc_pair();

  RanEndpointStats rst;
  std::thread ran([&] { rst = run_ran_endpoint(env, *ran_t, 60, 4, even_split()); });

  // scripted peer: subscribe, then answer every report with a command for the
  // *previous* round; the endpoint must drop each one and fall back
  CHECK(xapp_t->send_line(encode(Subscribe{100.0})));
  std::string line;
  REQUIRE(xapp_t->recv_line(line, 2000) == RecvStatus::Ok);  // ack
  while (true) {
    RecvStatus rs = xapp_t->recv_line(line, 2000);
    REQUIRE(rs == RecvStatus::Ok);
    E2Message msg = decode(line);
    if (std::holds_alternative<Bye>(msg)) break;
    const auto& rep = std::get<KpmReport>(msg);
    SliceCommand cmd;
    cmd.round = rep.round - 1;  // always stale
    cmd.allocation = even_split();
    CHECK(xapp_t->send_line(encode(cmd)));
  }
  ran.join();

  CHECK(rst.rounds == 4);
  CHECK(rst.fresh_commands == 0);
  CHECK(rst.stale_fallbacks == 4);
}

TEST_CASE("silent subscriber forces fallback every round") {
  Scenario sc = tiny_scenario();
  RanEnv env(sc, 1);
  auto [ran_t, xapp_t] = make_inproc_pair();

  RanEndpointStats rst;
  std::thread ran([&] { rst = run_ran_endpoint(env, *ran_t, 25, 3, even_split()); });

  CHECK(xapp_t->send_line(encode(Subscribe{100.0})));
  ran.join();  // peer never answers any report

  CHECK(rst.rounds == 3);
  CHECK(rst.fresh_commands == 0);
  CHECK(rst.stale_fallbacks == 3);
}

TEST_CASE("peer disconnect mid-run returns without deadlock") {
  Scenario sc = tiny_scenario();
  RanEnv env(sc, 1);
  auto [ran_t, xapp_t] = make_inproc_pair();

  RanEndpointStats rst;
  std::thread ran([&] { rst = run_ran_endpoint(env, *ran_t, 0, 100, even_split()); });

  CHECK(xapp_t->send_line(encode(Subscribe{100.0})));
  std::string line;
  REQUIRE(xapp_t->recv_line(line, 2000) == RecvStatus::Ok);  // ack
  for (int i = 0; i < 3; ++i) {
    REQUIRE(xapp_t->recv_line(line, 2000) == RecvStatus::Ok);
    const auto& rep = std::get<KpmReport>(decode(line));
    SliceCommand cmd;
    cmd.round = rep.round;
    cmd.allocation = even_split();
    CHECK(xapp_t->send_line(encode(cmd)));
  }
  xapp_t->close();  // vanish without a bye
  ran.join();       // must terminate promptly

  CHECK(rst.rounds <= 4);
  CHECK_FALSE(rst.clean_shutdown);
}

TEST_CASE("xapp endpoint counts decode errors and survives garbage") {
  auto [fake_ran, xapp_t] = make_inproc_pair();

  XappEndpointStats xst;
  int decided = 0;
  std::thread xapp([&] {
    xst = run_xapp_endpoint(
        *xapp_t, 100.0,
        [&](const KpmReport& rep) {
          ++decided;
          Allocation a;
          a.grants = {{0, 20}};
          return a;
        },
        nullptr);
  });

  std::string line;
  REQUIRE(fake_ran->recv_line(line, 2000) == RecvStatus::Ok);  // subscribe
  CHECK(std::holds_alternative<Subscribe>(decode(line)));
  CHECK(fake_ran->send_line(encode(Ack{0})));

  KpmReport rep;
  rep.round = 0;
  rep.digest = "0000000000000000";
  CHECK(fake_ran->send_line(encode(rep)));
  REQUIRE(fake_ran->recv_line(line, 2000) == RecvStatus::Ok);  // command 0

  CHECK(fake_ran->send_line("this is not json\n"));  // swallowed, counted

  rep.round = 1;
  CHECK(fake_ran->send_line(encode(rep)));
  REQUIRE(fake_ran->recv_line(line, 2000) == RecvStatus::Ok);  // command 1
  CHECK(std::get<SliceCommand>(decode(line)).round == 1);

  CHECK(fake_ran->send_line(encode(Bye{})));
  xapp.join();

  CHECK(decided == 2);
  CHECK(xst.rounds == 2);
  CHECK(xst.decode_errors == 1);
  CHECK(xst.clean_shutdown);
}

TEST_CASE("endpoints run over unix sockets end to end") {
  const std::string path = "/tmp/xslice_test_e2e.sock";
  Scenario sc = tiny_scenario();
  RanEnv env(sc, 2);

  RanEndpointStats rst;
  std::thread ran([&] {
    auto t = unix_listen(path);
    rst = run_ran_endpoint(env, *t, 0, 4, even_split());
  });

  auto t = unix_connect(path);
  XappEndpointStats xst = run_xapp_endpoint(
      *t, 100.0, [&](const KpmReport&) { return even_split(); }, nullptr);
  ran.join();

  CHECK(rst.rounds == 4);
  CHECK(rst.fresh_commands == 4);
  CHECK(rst.clean_shutdown);
  CHECK(xst.clean_shutdown);
  CHECK(xst.rounds >= 4);
}
