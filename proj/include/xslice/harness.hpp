#pragma once
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "xslice/agents.hpp"
#include "xslice/e2lite.hpp"
#include "xslice/scenario.hpp"

namespace xslice {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- scripted scenario edits ----

struct InjectEvent {
  std::string kind;  // arrival | departure | demand-step
  int round = 0;
  // arrival
  int slice = 0;
  double rate_mbps = 0.0;
  double mean_snr_db = 24.0;
  // departure & demand-step
  int session_id = -1;
};

// "arrival:round=1000,slice=0,rate=100[,snr=24]"
// "departure:round=500,id=3"
// "demand-step:round=1000,id=2,rate=100"
InjectEvent parse_event(const std::string& spec);
void inject_event(Scenario& sc, const InjectEvent& ev);

// ---- experiment configuration ----

struct ExperimentConfig {
  std::string scenario = "medium";  // preset name or file path
  std::string policy = "xslice";    // xslice | single | nvs | prop
  int rounds = 2000;
  uint64_t seed = 1;
  std::string out_dir;               // empty: keep results in memory only
  std::string transport = "inproc";  // inproc | socket
  int deadline_ms = 0;               // 0 = lockstep (fully synchronous)
  std::string socket_path;           // default: <out_dir>/e2.sock
  PpoConfig ppo;
  std::string weight_case;    // "", "A".."D": B/C/D double one slice's weights
  double weight_perturb = 0.0;  // added to every regret weight (sensitivity study)
  std::vector<InjectEvent> events;

  void validate() const;
};

// ---- per-round metrics (CSV schema v1) ----

struct SliceRoundMetrics {
  double tp_mbps = 0.0;
  double delay_ms = 0.0;  // mean over the slice's sessions
  double bler = 0.0;      // mean
  double regret = 0.0;    // weighted slice regret
  int prbs = 0;
  int sessions = 0;
  int sla = 1;  // 1 when every session met all three demands this round
};

struct MetricsRow {
  int round = 0;
  double reward_norm = 0.0;
  double reward_raw = 0.0;
  double regret = 0.0;
  double utilization = 0.0;
  int penalty = 0;
  std::vector<SliceRoundMetrics> slices;
  double total_tp_mbps = 0.0;
  double mean_delay_ms = 0.0;
  double mean_bler = 0.0;
};

MetricsRow make_metrics_row(int round, std::span<const SliceSpec> specs,
                            std::span<const KpmRecord> records,
                            const std::map<int, int>& membership, const Allocation& alloc,
                            bool penalty);

std::string metrics_csv(std::span<const MetricsRow> rows, int k);
std::vector<MetricsRow> parse_metrics_csv(const std::string& text);

// ---- run ----

struct RunResult {
  Scenario scenario;  // resolved, weights applied, events injected
  std::vector<MetricsRow> metrics;
  std::vector<long> decision_us;  // one per answered report (wall clock)
  std::vector<UpdateStats> training;
  RanEndpointStats ran;
  XappEndpointStats xapp;
  std::string out_dir;
};

// Wires env <-> agent over the configured transport, runs cfg.rounds rounds,
// writes metrics/timing/training/summary/config/checkpoint files into
// cfg.out_dir (when set) and returns everything in memory.
RunResult run_experiment(const ExperimentConfig& cfg);

// ---- summaries ----

struct SummaryRow {
  std::string label;
  int window_start = 0;
  int window_end = 0;
  double mean_tp = 0.0;
  double mean_delay = 0.0;
  double mean_bler = 0.0;
  double mean_regret = 0.0;
  double p50_regret = 0.0;
  double p95_regret = 0.0;
  double mean_reward = 0.0;
  std::vector<double> sla;  // per-slice satisfied-round fraction
};

// window [a, b); b <= 0 means "to the end"; rows outside the data error out
SummaryRow summarize_rows(std::span<const MetricsRow> rows, const std::string& label, int a,
                          int b);
SummaryRow summarize_csv_file(const std::string& path, int a, int b);

std::string summary_csv(std::span<const SummaryRow> rows);
std::string summary_table(std::span<const SummaryRow> rows);

// ---- sweeps ----

struct SweepRow {
  std::string param;
  double value = 0.0;
  bool ok = false;
  std::string error;
  double mean_regret = 0.0;
  double p50_regret = 0.0;
  double p95_regret = 0.0;
};

// param in {hidden, gcn_layers, embedding}; one run per value, shared seed;
// failures are recorded per value and the sweep continues
std::vector<SweepRow> sweep(const std::string& param, const std::vector<int>& values,
                            const ExperimentConfig& base, bool parallel = false);
std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace xslice
