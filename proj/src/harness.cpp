#include "xslice/harness.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "xslice/ransim.hpp"
#include "xslice/regret.hpp"

namespace xslice {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---- inject events ----

namespace {

std::map<std::string, std::string> parse_kv(const std::string& s) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("event: expected key=value, got '" + item + "'");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return kv;
}

int kv_int(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ConfigError("event: missing '" + key + "'");
  try {
    return std::stoi(it->second);
  } catch (...) {
    throw ConfigError("event: '" + key + "' must be an integer");
  }
}

double kv_num(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ConfigError("event: missing '" + key + "'");
  try {
    return std::stod(it->second);
  } catch (...) {
    throw ConfigError("event: '" + key + "' must be a number");
  }
}

}  // namespace

InjectEvent parse_event(const std::string& spec) {
  auto colon = spec.find(':');
  if (colon == std::string::npos) throw ConfigError("event: expected kind:key=value,...");
  InjectEvent ev;
  ev.kind = spec.substr(0, colon);
  auto kv = parse_kv(spec.substr(colon + 1));
  ev.round = kv_int(kv, "round");
  if (ev.kind == "arrival") {
    ev.slice = kv_int(kv, "slice");
    ev.rate_mbps = kv_num(kv, "rate");
    if (kv.count("snr")) ev.mean_snr_db = kv_num(kv, "snr");
  } else if (ev.kind == "departure") {
    ev.session_id = kv_int(kv, "id");
  } else if (ev.kind == "demand-step") {
    ev.session_id = kv_int(kv, "id");
    ev.rate_mbps = kv_num(kv, "rate");
  } else {
    throw ConfigError("event: unknown kind '" + ev.kind +
                      "' (expected arrival|departure|demand-step)");
  }
  return ev;
}

void inject_event(Scenario& sc, const InjectEvent& ev) {
  if (ev.kind == "arrival") {
    if (ev.slice < 0 || ev.slice >= static_cast<int>(sc.slices.size()))
      throw ConfigError("event: arrival references unknown slice " + std::to_string(ev.slice));
    SessionTemplate s;
    s.id = sc.next_session_id();
    s.slice = ev.slice;
    s.mean_snr_db = ev.mean_snr_db;
    s.arrival_round = ev.round;
    s.demand_kind = "constant";
    s.rate_mbps = ev.rate_mbps;
    sc.sessions.push_back(std::move(s));
    return;
  }
  auto it = std::find_if(sc.sessions.begin(), sc.sessions.end(),
                         [&](const SessionTemplate& s) { return s.id == ev.session_id; });
  if (it == sc.sessions.end())
    throw ConfigError("event: unknown session id " + std::to_string(ev.session_id));
  if (ev.kind == "departure") {
    it->departure_round = ev.round;
  } else {  // demand-step: explicit steps override the generative process
    it->steps.push_back({ev.round, ev.rate_mbps});
    std::stable_sort(it->steps.begin(), it->steps.end(),
                     [](const DemandStep& a, const DemandStep& b) { return a.round < b.round; });
  }
}

// ---- config ----

void ExperimentConfig::validate() const {
  if (rounds < 1) throw ConfigError("config: rounds must be >= 1");
  if (policy != "xslice" && policy != "single" && policy != "nvs" && policy != "prop")
    throw ConfigError("config: policy must be xslice|single|nvs|prop");
  if (transport != "inproc" && transport != "socket")
    throw ConfigError("config: transport must be inproc|socket");
  if (deadline_ms < 0 || deadline_ms > 1000)
    throw ConfigError("config: deadline_ms must be in [0, 1000] (0 = lockstep)");
  if (!weight_case.empty() && weight_case != "A" && weight_case != "B" && weight_case != "C" &&
      weight_case != "D")
    throw ConfigError("config: weight_case must be A|B|C|D");
  try {
    ppo.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

namespace {

// case A: paper-default weights everywhere; B/C/D double one slice's triple
void apply_weight_case(Scenario& sc, const std::string& wcase) {
  if (wcase.empty() || wcase == "A") return;
  int idx = wcase == "B" ? 0 : wcase == "C" ? 1 : 2;
  if (idx >= static_cast<int>(sc.slices.size()))
    throw ConfigError("config: weight_case '" + wcase + "' needs slice " + std::to_string(idx));
  sc.slices[idx].weight_tp *= 2.0;
  sc.slices[idx].weight_delay *= 2.0;
  sc.slices[idx].weight_rel *= 2.0;
}

void apply_weight_perturb(Scenario& sc, double d) {
  if (d == 0.0) return;
  for (auto& s : sc.slices) {
    s.weight_tp = std::max(0.0, s.weight_tp + d);
    s.weight_delay = std::max(0.0, s.weight_delay + d);
    s.weight_rel = std::max(0.0, s.weight_rel + d);
  }
}

}  // namespace

// ---- metrics ----

MetricsRow make_metrics_row(int round, std::span<const SliceSpec> specs,
                            std::span<const KpmRecord> records,
                            const std::map<int, int>& membership, const Allocation& alloc,
                            bool penalty) {
  const int k = static_cast<int>(specs.size());
  RegretBreakdown b = evaluate_round(specs, records, membership, alloc, 0.0);

  MetricsRow row;
  row.round = round;
  row.reward_norm = b.reward_norm;
  row.reward_raw = b.reward_raw;
  row.regret = b.total;
  row.utilization = b.utilization;
  row.penalty = penalty ? 1 : 0;
  row.slices.resize(k);

  int n_sessions = 0;
  for (const auto& r : records) {
    int s = membership.at(r.session_id);
    auto& sm = row.slices[s];
    sm.tp_mbps += r.throughput_mbps;
    sm.delay_ms += r.delay_ms;
    sm.bler += r.bler;
    ++sm.sessions;
    if (r.throughput_mbps < specs[s].throughput_demand_mbps ||
        r.delay_ms > specs[s].delay_demand_ms || r.bler > specs[s].bler_demand)
      sm.sla = 0;
    row.total_tp_mbps += r.throughput_mbps;
    row.mean_delay_ms += r.delay_ms;
    row.mean_bler += r.bler;
    ++n_sessions;
  }
  for (int s = 0; s < k; ++s) {
    auto& sm = row.slices[s];
    if (sm.sessions > 0) {
      sm.delay_ms /= sm.sessions;
      sm.bler /= sm.sessions;
    }
    sm.regret = b.per_slice_weighted[s];
    if (static_cast<int>(alloc.grants.size()) == k) sm.prbs = alloc.grants[s].num_prb;
  }
  if (static_cast<int>(alloc.grants.size()) != k) {
    for (const auto& r : records) row.slices[membership.at(r.session_id)].prbs += r.scheduled_rbs;
  }
  if (n_sessions > 0) {
    row.mean_delay_ms /= n_sessions;
    row.mean_bler /= n_sessions;
  }
  return row;
}

std::string metrics_csv(std::span<const MetricsRow> rows, int k) {
  std::string out = "# metrics schema v1\n";
  out += "round,reward,reward_raw,regret,utilization,penalty";
  for (int s = 0; s < k; ++s) {
    std::string p = ",slice" + std::to_string(s) + "_";
    out += p + "tp_mbps" + p + "delay_ms" + p + "bler" + p + "regret" + p + "prbs" + p +
           "sessions" + p + "sla";
  }
  out += ",total_tp_mbps,mean_delay_ms,mean_bler\n";
  for (const auto& r : rows) {
    out += std::to_string(r.round);
    out += ',' + format_double(r.reward_norm);
    out += ',' + format_double(r.reward_raw);
    out += ',' + format_double(r.regret);
    out += ',' + format_double(r.utilization);
    out += ',' + std::to_string(r.penalty);
    for (const auto& sm : r.slices) {
      out += ',' + format_double(sm.tp_mbps);
      out += ',' + format_double(sm.delay_ms);
      out += ',' + format_double(sm.bler);
      out += ',' + format_double(sm.regret);
      out += ',' + std::to_string(sm.prbs);
      out += ',' + std::to_string(sm.sessions);
      out += ',' + std::to_string(sm.sla);
    }
    out += ',' + format_double(r.total_tp_mbps);
    out += ',' + format_double(r.mean_delay_ms);
    out += ',' + format_double(r.mean_bler);
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(ss, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = split_csv_line(line);
    break;
  }
  if (header.empty()) throw ConfigError("metrics csv: no header line");

  int k = 0;
  while (std::find(header.begin(), header.end(),
                   "slice" + std::to_string(k) + "_tp_mbps") != header.end())
    ++k;
  if (k == 0) throw ConfigError("metrics csv: no per-slice columns found");
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("metrics csv: missing column " + name);
    return static_cast<size_t>(it - header.begin());
  };

  std::vector<MetricsRow> rows;
  while (std::getline(ss, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ConfigError("metrics csv: row has " + std::to_string(cells.size()) +
                        " cells, header has " + std::to_string(header.size()));
    MetricsRow r;
    r.round = std::stoi(cells[col("round")]);
    r.reward_norm = std::stod(cells[col("reward")]);
    r.reward_raw = std::stod(cells[col("reward_raw")]);
    r.regret = std::stod(cells[col("regret")]);
    r.utilization = std::stod(cells[col("utilization")]);
    r.penalty = std::stoi(cells[col("penalty")]);
    r.slices.resize(k);
    for (int s = 0; s < k; ++s) {
      std::string p = "slice" + std::to_string(s) + "_";
      auto& sm = r.slices[s];
      sm.tp_mbps = std::stod(cells[col(p + "tp_mbps")]);
      sm.delay_ms = std::stod(cells[col(p + "delay_ms")]);
      sm.bler = std::stod(cells[col(p + "bler")]);
      sm.regret = std::stod(cells[col(p + "regret")]);
      sm.prbs = std::stoi(cells[col(p + "prbs")]);
      sm.sessions = std::stoi(cells[col(p + "sessions")]);
      sm.sla = std::stoi(cells[col(p + "sla")]);
    }
    r.total_tp_mbps = std::stod(cells[col("total_tp_mbps")]);
    r.mean_delay_ms = std::stod(cells[col("mean_delay_ms")]);
    r.mean_bler = std::stod(cells[col("mean_bler")]);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---- run ----

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << content;
}

ojson config_json(const ExperimentConfig& cfg) {
  ojson j;
  j["scenario"] = cfg.scenario;
  j["policy"] = cfg.policy;
  j["rounds"] = cfg.rounds;
  j["seed"] = cfg.seed;
  j["transport"] = cfg.transport;
  j["deadline_ms"] = cfg.deadline_ms;
  j["weight_case"] = cfg.weight_case;
  j["weight_perturb"] = cfg.weight_perturb;
  j["events"] = ojson::array();
  for (const auto& ev : cfg.events) {
    ojson je;
    je["kind"] = ev.kind;
    je["round"] = ev.round;
    if (ev.kind == "arrival") {
      je["slice"] = ev.slice;
      je["rate_mbps"] = ev.rate_mbps;
      je["mean_snr_db"] = ev.mean_snr_db;
    } else {
      je["session_id"] = ev.session_id;
      if (ev.kind == "demand-step") je["rate_mbps"] = ev.rate_mbps;
    }
    j["events"].push_back(std::move(je));
  }
  ojson jp;
  jp["alpha"] = cfg.ppo.alpha;
  jp["gamma"] = cfg.ppo.gamma;
  jp["gae_lambda"] = cfg.ppo.gae_lambda;
  jp["clip_eps"] = cfg.ppo.clip_eps;
  jp["epochs"] = cfg.ppo.epochs;
  jp["minibatch"] = cfg.ppo.minibatch;
  jp["rollout"] = cfg.ppo.rollout;
  jp["penalty_value"] = cfg.ppo.penalty_value;
  jp["min_rb"] = cfg.ppo.min_rb;
  jp["penalty_mode"] = cfg.ppo.penalty_mode;
  jp["hidden"] = cfg.ppo.hidden;
  jp["embedding"] = cfg.ppo.embedding;
  jp["gcn_layers"] = cfg.ppo.gcn_layers;
  jp["n_max"] = cfg.ppo.n_max;
  jp["shared_encoder"] = cfg.ppo.shared_encoder;
  jp["warmup_steps"] = cfg.ppo.warmup_steps;
  jp["critic_warm_rounds"] = cfg.ppo.critic_warm_rounds;
  jp["sigma_init"] = cfg.ppo.sigma_init;
  jp["sigma_decay"] = cfg.ppo.sigma_decay;
  jp["sigma_floor"] = cfg.ppo.sigma_floor;
  j["ppo"] = std::move(jp);
  return j;
}

std::string training_csv(std::span<const UpdateStats> log) {
  std::string out = "update,round,mean_reward,actor_loss,critic_loss,sigma_mean,penalty_count,aborted\n";
  int i = 0;
  for (const auto& u : log) {
    out += std::to_string(i++);
    out += ',' + std::to_string(u.round);
    out += ',' + format_double(u.mean_reward);
    out += ',' + format_double(u.actor_loss);
    out += ',' + format_double(u.critic_loss);
    out += ',' + format_double(u.sigma_mean);
    out += ',' + std::to_string(u.penalty_count);
    out += ',' + std::to_string(u.aborted ? 1 : 0);
    out += '\n';
  }
  return out;
}

std::string timing_csv(std::span<const long> decision_us) {
  std::string out = "report,decision_time_us\n";
  for (size_t i = 0; i < decision_us.size(); ++i)
    out += std::to_string(i) + ',' + std::to_string(decision_us[i]) + '\n';
  return out;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  Scenario sc = resolve_scenario(cfg.scenario);
  apply_weight_case(sc, cfg.weight_case);
  apply_weight_perturb(sc, cfg.weight_perturb);
  for (const auto& ev : cfg.events) inject_event(sc, ev);
  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("scenario after events: ") + e.what());
  }
  if (cfg.policy == "xslice" && static_cast<int>(sc.sessions.size()) > cfg.ppo.n_max)
    throw ConfigError("config: scenario can host " + std::to_string(sc.sessions.size()) +
                      " sessions but the graph only fits " + std::to_string(cfg.ppo.n_max) +
                      " (raise n_max)");

  const int k = static_cast<int>(sc.slices.size());
  const bool merged = policy_is_merged(cfg.policy);

  RunResult res;
  res.scenario = sc;
  res.out_dir = cfg.out_dir;

  RanEnv env(sc, cfg.seed, merged);
  auto agent = make_agent(cfg.policy, sc, cfg.ppo, cfg.seed);
  auto membership = membership_of(sc);

  Allocation initial;
  if (merged) {
    initial = single_slice_alloc(sc.n_rb);
  } else {
    std::vector<double> eq(static_cast<size_t>(k), 1.0 / k);
    initial = action_to_allocation(eq, sc.n_rb, 1);
  }

  if (!cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);

  Allocation prev_alloc;
  bool have_prev = false;
  auto decide = [&](const KpmReport& rep) -> Allocation {
    auto t0 = std::chrono::steady_clock::now();
    Allocation a = agent->decide(rep);
    auto t1 = std::chrono::steady_clock::now();
    res.decision_us.push_back(
        std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count());
    if (rep.round > 0 && have_prev)
      res.metrics.push_back(make_metrics_row(rep.round - 1, sc.slices, rep.records, membership,
                                             prev_alloc, agent->last_penalty()));
    prev_alloc = a;
    have_prev = true;
    return a;
  };
  auto after = [&](const KpmReport& rep) { agent->after_reply(rep); };

  std::exception_ptr ran_error, xapp_error;
  if (cfg.transport == "inproc") {
    auto pair = make_inproc_pair();
    std::thread ran_thread([&, rt = std::move(pair.first)]() mutable {
      try {
        res.ran = run_ran_endpoint(env, *rt, cfg.deadline_ms, cfg.rounds, initial);
      } catch (...) {
        ran_error = std::current_exception();
      }
      rt->close();
    });
    try {
      res.xapp = run_xapp_endpoint(*pair.second, sc.round_ms, decide, after);
    } catch (...) {
      xapp_error = std::current_exception();
    }
    pair.second->close();
    ran_thread.join();
  } else {
    std::string path = cfg.socket_path;
    if (path.empty())
      path = (cfg.out_dir.empty() ? "/tmp" : cfg.out_dir) + "/e2-" +
             std::to_string(static_cast<long>(::getpid())) + ".sock";
    std::thread ran_thread([&]() {
      try {
        auto rt = unix_listen(path);
        res.ran = run_ran_endpoint(env, *rt, cfg.deadline_ms, cfg.rounds, initial);
        rt->close();
      } catch (...) {
        ran_error = std::current_exception();
      }
    });
    try {
      auto xt = unix_connect(path);
      res.xapp = run_xapp_endpoint(*xt, sc.round_ms, decide, after);
      xt->close();
    } catch (...) {
      xapp_error = std::current_exception();
    }
    ran_thread.join();
    ::unlink(path.c_str());
  }
  if (ran_error) std::rethrow_exception(ran_error);
  if (xapp_error) std::rethrow_exception(xapp_error);

  agent->finish();
  if (const auto* log = agent->training_log()) res.training = *log;

  if (!cfg.out_dir.empty()) {
    write_file(cfg.out_dir + "/config.json", config_json(cfg).dump(2) + "\n");
    save_scenario(cfg.out_dir + "/scenario.json", sc);
    write_file(cfg.out_dir + "/metrics.csv", metrics_csv(res.metrics, k));
    write_file(cfg.out_dir + "/timing.csv", timing_csv(res.decision_us));
    if (cfg.policy == "xslice") {
      write_file(cfg.out_dir + "/training_log.csv", training_csv(res.training));
      if (const auto* p = agent->policy_params())
        save_checkpoint(cfg.out_dir + "/checkpoint.bin", *p, cfg.seed);
    }
    if (!res.metrics.empty()) {
      int a = cfg.rounds > 500 ? 500 : 0;
      SummaryRow s = summarize_rows(res.metrics, cfg.policy, a, cfg.rounds);
      std::vector<SummaryRow> rows{s};
      write_file(cfg.out_dir + "/summary.csv", summary_csv(rows));
      write_file(cfg.out_dir + "/summary.txt", summary_table(rows));
    }
  }
  return res;
}

// ---- summaries ----

namespace {

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  auto idx = static_cast<size_t>(std::llround(p * (static_cast<double>(v.size()) - 1.0)));
  return v[std::min(idx, v.size() - 1)];
}

}  // namespace

SummaryRow summarize_rows(std::span<const MetricsRow> rows, const std::string& label, int a,
                          int b) {
  if (rows.empty()) throw ConfigError("summarize: no rows");
  const int lo = rows.front().round;
  const int hi = rows.back().round + 1;
  if (b <= 0) b = hi;
  if (a < lo || b > hi || a >= b)
    throw ConfigError("summarize: window " + std::to_string(a) + ":" + std::to_string(b) +
                      " outside available rounds [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + ")");

  SummaryRow s;
  s.label = label;
  s.window_start = a;
  s.window_end = b;
  const size_t k = rows.front().slices.size();
  s.sla.assign(k, 0.0);

  std::vector<double> regrets;
  int n = 0;
  for (const auto& r : rows) {
    if (r.round < a || r.round >= b) continue;
    s.mean_tp += r.total_tp_mbps;
    s.mean_delay += r.mean_delay_ms;
    s.mean_bler += r.mean_bler;
    s.mean_regret += r.regret;
    s.mean_reward += r.reward_norm;
    regrets.push_back(r.regret);
    if (r.slices.size() != k) throw ConfigError("summarize: inconsistent slice count");
    for (size_t i = 0; i < k; ++i) s.sla[i] += r.slices[i].sla;
    ++n;
  }
  if (n == 0)
    throw ConfigError("summarize: window contains no rows");
  s.mean_tp /= n;
  s.mean_delay /= n;
  s.mean_bler /= n;
  s.mean_regret /= n;
  s.mean_reward /= n;
  for (auto& v : s.sla) v /= n;
  s.p50_regret = percentile(regrets, 0.50);
  s.p95_regret = percentile(regrets, 0.95);
  return s;
}

SummaryRow summarize_csv_file(const std::string& path, int a, int b) {
  std::ifstream in(path);
  if (!in) throw ConfigError("summarize: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  auto rows = parse_metrics_csv(buf.str());

  // label from the sibling config snapshot when present, directory otherwise
  std::string label;
  fs::path p(path);
  fs::path sibling = p.parent_path() / "config.json";
  if (fs::exists(sibling)) {
    try {
      std::ifstream cin(sibling);
      auto j = nlohmann::json::parse(cin);
      if (j.contains("policy")) label = j["policy"].get<std::string>();
    } catch (...) {
    }
  }
  if (label.empty())
    label = p.parent_path().empty() ? p.stem().string() : p.parent_path().filename().string();
  return summarize_rows(rows, label, a, b);
}

std::string summary_csv(std::span<const SummaryRow> rows) {
  if (rows.empty()) throw ConfigError("summary: no rows");
  const size_t k = rows.front().sla.size();
  std::string out =
      "label,window_start,window_end,mean_tp_mbps,mean_delay_ms,mean_bler,mean_regret,"
      "p50_regret,p95_regret,mean_reward";
  for (size_t i = 0; i < k; ++i) out += ",sla" + std::to_string(i);
  out += '\n';
  for (const auto& s : rows) {
    if (s.sla.size() != k) throw ConfigError("summary: rows mix slice counts");
    out += s.label;
    out += ',' + std::to_string(s.window_start);
    out += ',' + std::to_string(s.window_end);
    out += ',' + format_double(s.mean_tp);
    out += ',' + format_double(s.mean_delay);
    out += ',' + format_double(s.mean_bler);
    out += ',' + format_double(s.mean_regret);
    out += ',' + format_double(s.p50_regret);
    out += ',' + format_double(s.p95_regret);
    out += ',' + format_double(s.mean_reward);
    for (double v : s.sla) out += ',' + format_double(v);
    out += '\n';
  }
  return out;
}

std::string summary_table(std::span<const SummaryRow> rows) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-10s %8s %10s %10s %8s %10s %10s %10s %9s", "policy",
                "window", "tp_mbps", "delay_ms", "bler", "regret", "p50", "p95", "reward");
  std::string out = std::string(buf) + "  sla/slice\n";
  for (const auto& s : rows) {
    std::string win = std::to_string(s.window_start) + ":" + std::to_string(s.window_end);
    std::snprintf(buf, sizeof(buf), "%-10s %8s %10.3f %10.3f %8.4f %10.4f %10.4f %10.4f %9.4f",
                  s.label.c_str(), win.c_str(), s.mean_tp, s.mean_delay, s.mean_bler,
                  s.mean_regret, s.p50_regret, s.p95_regret, s.mean_reward);
    out += buf;
    out += "  ";
    for (size_t i = 0; i < s.sla.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%s%.3f", i ? "/" : "", s.sla[i]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

// ---- sweeps ----

std::vector<SweepRow> sweep(const std::string& param, const std::vector<int>& values,
                            const ExperimentConfig& base, bool parallel) {
  if (param != "hidden" && param != "gcn_layers" && param != "embedding")
    throw ConfigError("sweep: param must be hidden|gcn_layers|embedding");
  if (values.empty()) throw ConfigError("sweep: no values");

  std::vector<SweepRow> out(values.size());
  auto run_one = [&](size_t i) {
    SweepRow& r = out[i];
    r.param = param;
    r.value = values[i];
    try {
      ExperimentConfig c = base;
      if (param == "hidden")
        c.ppo.hidden = values[i];
      else if (param == "gcn_layers")
        c.ppo.gcn_layers = values[i];
      else
        c.ppo.embedding = values[i];
      if (!base.out_dir.empty())
        c.out_dir = base.out_dir + "/" + param + "-" + std::to_string(values[i]);
      RunResult rr = run_experiment(c);
      int a = c.rounds > 500 ? 500 : 0;
      SummaryRow s = summarize_rows(rr.metrics, param, a, c.rounds);
      r.mean_regret = s.mean_regret;
      r.p50_regret = s.p50_regret;
      r.p95_regret = s.p95_regret;
      r.ok = true;
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
  };

  if (parallel) {
    std::vector<std::thread> threads;
    threads.reserve(values.size());
    for (size_t i = 0; i < values.size(); ++i) threads.emplace_back(run_one, i);
    for (auto& t : threads) t.join();
  } else {
    for (size_t i = 0; i < values.size(); ++i) run_one(i);
  }
  return out;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "param,value,status,mean_regret,p50_regret,p95_regret,error\n";
  for (const auto& r : rows) {
    out += r.param;
    out += ',' + format_double(r.value);
    out += r.ok ? ",ok" : ",failed";
    out += ',' + format_double(r.mean_regret);
    out += ',' + format_double(r.p50_regret);
    out += ',' + format_double(r.p95_regret);
    std::string err = r.error;
    for (auto& c : err)
      if (c == ',' || c == '\n') c = ';';
    out += ',' + err;
    out += '\n';
  }
  return out;
}

}  // namespace xslice
