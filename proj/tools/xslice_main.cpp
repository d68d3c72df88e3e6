// xslice command line: run experiments, summarize metrics, sweep model sizes,
// dump scenario presets.
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xslice/harness.hpp"

namespace {

using namespace xslice;

void add_ppo_options(CLI::App* app, PpoConfig& ppo) {
  app->add_option("--alpha", ppo.alpha, "learning rate");
  app->add_option("--gamma", ppo.gamma, "discount factor");
  app->add_option("--gae-lambda", ppo.gae_lambda, "GAE lambda");
  app->add_option("--clip", ppo.clip_eps, "PPO clip epsilon");
  app->add_option("--epochs", ppo.epochs, "epochs per update");
  app->add_option("--minibatch", ppo.minibatch, "minibatch size");
  app->add_option("--rollout", ppo.rollout, "rollout buffer length");
  app->add_option("--penalty-value", ppo.penalty_value, "reward override on penalty rounds");
  app->add_option("--min-rb", ppo.min_rb, "per-slice PRB floor under the penalty rule");
  app->add_option("--penalty-mode", ppo.penalty_mode, "mask | skip | full | off");
  app->add_option("--hidden", ppo.hidden, "actor/critic hidden width");
  app->add_option("--embedding", ppo.embedding, "GCN embedding width");
  app->add_option("--gcn-layers", ppo.gcn_layers, "GCN depth");
  app->add_option("--n-max", ppo.n_max, "session slots in the graph");
  app->add_flag("--shared-encoder,!--split-encoder", ppo.shared_encoder,
                "share the GCN between actor and critic");
  app->add_option("--warmup-steps", ppo.warmup_steps, "offline warm-up iterations");
  app->add_option("--critic-warm-rounds", ppo.critic_warm_rounds,
                  "online rounds of critic-only updates before the actor moves");
  app->add_option("--sigma-init", ppo.sigma_init, "exploration stddev after warm-up");
  app->add_option("--sigma-decay", ppo.sigma_decay, "stddev decay factor per update");
  app->add_option("--sigma-floor", ppo.sigma_floor, "exploration stddev floor");
}

void add_run_options(CLI::App* app, ExperimentConfig& cfg, std::vector<std::string>& events) {
  app->add_option("--scenario", cfg.scenario, "preset name or scenario file")
      ->capture_default_str();
  app->add_option("--policy", cfg.policy, "xslice | single | nvs | prop")->capture_default_str();
  app->add_option("--rounds", cfg.rounds, "rounds to simulate")->capture_default_str();
  app->add_option("--seed", cfg.seed, "run seed")->capture_default_str();
  app->add_option("--out", cfg.out_dir, "output directory (omit to skip files)");
  app->add_option("--transport", cfg.transport, "inproc | socket")->capture_default_str();
  app->add_option("--deadline-ms", cfg.deadline_ms, "command deadline, 0 = lockstep")
      ->capture_default_str();
  app->add_option("--socket", cfg.socket_path, "unix socket path (socket transport)");
  app->add_option("--weight-case", cfg.weight_case, "A | B | C | D regret-weight case");
  app->add_option("--weight-perturb", cfg.weight_perturb, "delta added to every regret weight");
  app->add_option("--event", events,
                  "scripted event, e.g. arrival:round=1000,slice=0,rate=100 "
                  "(repeatable)");
  add_ppo_options(app, cfg.ppo);
}

int do_run(ExperimentConfig cfg, const std::vector<std::string>& events) {
  for (const auto& e : events) cfg.events.push_back(parse_event(e));
  RunResult res = run_experiment(cfg);
  int a = cfg.rounds > 500 ? 500 : 0;
  SummaryRow s = summarize_rows(res.metrics, cfg.policy, a, cfg.rounds);
  std::vector<SummaryRow> rows{s};
  std::cout << summary_table(rows);
  if (!cfg.out_dir.empty()) std::cout << "results in " << cfg.out_dir << "\n";
  return 0;
}

int do_summarize(const std::vector<std::string>& files, const std::string& window,
                 bool as_csv) {
  int a = 0, b = 0;
  if (!window.empty()) {
    auto colon = window.find(':');
    if (colon == std::string::npos)
      throw ConfigError("summarize: window must be A:B (B empty = end)");
    std::string lhs = window.substr(0, colon), rhs = window.substr(colon + 1);
    a = lhs.empty() ? 0 : std::stoi(lhs);
    b = rhs.empty() ? 0 : std::stoi(rhs);
  }
  std::vector<SummaryRow> rows;
  rows.reserve(files.size());
  for (const auto& f : files) rows.push_back(summarize_csv_file(f, a, b));
  std::cout << (as_csv ? summary_csv(rows) : summary_table(rows));
  return 0;
}

int do_sweep(const std::string& param, const std::vector<int>& values, ExperimentConfig cfg,
             const std::vector<std::string>& events, bool parallel) {
  for (const auto& e : events) cfg.events.push_back(parse_event(e));
  auto rows = sweep(param, values, cfg, parallel);
  std::cout << sweep_csv(rows);
  bool all_ok = true;
  for (const auto& r : rows) all_ok = all_ok && r.ok;
  return all_ok ? 0 : 1;
}

int do_scenario(const std::string& name, const std::string& out) {
  Scenario sc = resolve_scenario(name);
  if (out.empty()) {
    std::cout << scenario_to_json(sc);
  } else {
    save_scenario(out, sc);
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xslice: slice-aware RAN resource control testbed"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  std::vector<std::string> events;
  auto* run = app.add_subcommand("run", "run one experiment");
  add_run_options(run, cfg, events);

  std::vector<std::string> files;
  std::string window;
  bool as_csv = false;
  auto* summarize = app.add_subcommand("summarize", "summarize metrics.csv files");
  summarize->add_option("files", files, "metrics.csv paths")->required()->expected(-1);
  summarize->add_option("--window", window, "round window A:B, default 500:end when available");
  summarize->add_flag("--csv", as_csv, "emit csv instead of a table");

  ExperimentConfig sweep_cfg;
  std::vector<std::string> sweep_events;
  std::string param;
  std::vector<int> values;
  bool parallel = false;
  auto* sw = app.add_subcommand("sweep", "run a model-size sweep");
  sw->add_option("--param", param, "hidden | gcn_layers | embedding")->required();
  sw->add_option("--values", values, "comma separated values")->required()->delimiter(',');
  sw->add_flag("--parallel", parallel, "one thread per value");
  add_run_options(sw, sweep_cfg, sweep_events);

  std::string sc_name, sc_out;
  auto* scn = app.add_subcommand("scenario", "print or write a scenario");
  scn->add_option("name", sc_name, "preset name or scenario file")->required();
  scn->add_option("--out", sc_out, "write json here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return do_run(cfg, events);
    if (summarize->parsed()) return do_summarize(files, window, as_csv);
    if (sw->parsed()) return do_sweep(param, values, sweep_cfg, sweep_events, parallel);
    if (scn->parsed()) return do_scenario(sc_name, sc_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
