#pragma once
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "xslice/rng.hpp"
#include "xslice/types.hpp"

namespace xslice {

// ---- link adaptation ----

// 4-bit CQI table, spectral efficiency in bits per resource element.
extern const double kCqiEfficiency[16];

int snr_to_cqi(double snr_db);
double cqi_to_efficiency(int cqi);
int mcs_from_cqi(int cqi);
// Block error probability for a given MCS at a given SNR (logistic in the
// SNR margin over the MCS decoding threshold).
double bler_probability(double snr_db, int mcs);
// Net bits one PRB carries in one round of T ms (12 subcarriers x 14 symbols
// per 0.5 ms slot, scaled by the DL share of the TDD pattern and by control/
// reference overhead).
double prb_capacity_bits(double efficiency, double t_ms, double dl_fraction, double overhead);

// Gauss-Markov (AR(1)) shadowing around a per-session mean.
struct ChannelState {
  double mean_snr_db = 15.0;
  double corr = 0.9;       // rho_c in [0, 1)
  double noise_db = 1.5;   // sigma_n, innovation stddev
  double snr_db = 15.0;
};
void step_channel(ChannelState& ch, Rng& rng);

// ---- scenario description ----

struct DemandStep {
  int round = 0;
  double rate_mbps = 0.0;
};

struct SessionTemplate {
  int id = 0;
  int slice = 0;
  double mean_snr_db = 15.0;
  double corr = 0.9;
  double noise_db = 1.5;
  int arrival_round = 0;
  int departure_round = -1;          // -1: stays for the whole run
  std::string demand_kind = "class"; // class | constant | steps
  double rate_mbps = 0.0;            // for constant
  std::vector<DemandStep> steps;     // for steps, and event overrides
};

struct Scenario {
  std::string name = "custom";
  double round_ms = 100.0;
  int n_rb = 106;
  double dl_fraction = 0.7;
  double overhead = 0.14;
  double drop_ms = 2000.0;  // delay-budget discard horizon; <= 0 keeps queues unbounded
  std::string traffic_class = "custom";  // light | medium | intensive | custom
  std::vector<SliceSpec> slices;
  std::vector<SessionTemplate> sessions;

  void validate() const;
  int next_session_id() const;
};

// offered-rate range (Mbps) for a named traffic class
std::pair<double, double> traffic_class_range(const std::string& name);

// ---- per-round outputs ----

struct SessionRoundStats {
  int session_id = 0;
  int slice = 0;
  int granted_prbs = 0;
  int used_prbs = 0;
  int attempted_blocks = 0;
  int failed_blocks = 0;
  double delivered_bytes = 0.0;
  double offered_bytes = 0.0;
  double queued_bytes = 0.0;
  double delay_ms = 0.0;
};

// ---- simulator ----

class RanEnv {
 public:
  // merged_pool dissolves slice boundaries: the first grant is treated as a
  // single band shared by every active session under proportional fair.
  RanEnv(const Scenario& scenario, uint64_t seed, bool merged_pool = false);

  // Run one round under the given allocation; returns the KPM records for
  // every active session, ordered by session id.
  std::vector<KpmRecord> step(const Allocation& alloc);

  int round() const { return round_; }
  int num_slices() const { return static_cast<int>(scenario_.slices.size()); }
  const Scenario& scenario() const { return scenario_; }
  const std::vector<SessionRoundStats>& last_stats() const { return last_stats_; }

  // conservation bookkeeping, per session id (cumulative while active)
  struct Ledger {
    double offered_bytes = 0.0;
    double delivered_bytes = 0.0;
    double queued_bytes = 0.0;
    double dropped_bytes = 0.0;
  };
  Ledger ledger(int session_id) const;

  std::vector<int> active_session_ids() const;
  int slice_of(int session_id) const;

 private:
  struct Packet {
    double bytes;
    int arrival_round;
  };
  struct Session {
    SessionTemplate tpl;
    ChannelState ch;
    Rng ch_rng{0};
    Rng bler_rng{0};
    Rng demand_rng{0};
    std::deque<Packet> queue;
    double queued_bytes = 0.0;
    double avg_rate_mbps = 0.0;  // PF exponential average of served rate
    double offered_total = 0.0;
    double delivered_total = 0.0;
    double dropped_total = 0.0;
    // demand process state
    double cur_rate = 0.0;
    int next_change = 0;
    size_t next_step = 0;
    bool active = false;
  };

  void refresh_demand(Session& s, int r);
  void schedule_pool(std::span<Session*> pool, int n_prb, SchedPolicy policy, int& rr_cursor,
                     std::vector<SessionRoundStats*>& stats);

  Scenario scenario_;
  uint64_t seed_;
  bool merged_;
  int round_ = 0;
  std::vector<Session> sessions_;
  std::vector<int> rr_cursor_;  // per slice (one extra slot for the merged pool)
  std::vector<SessionRoundStats> last_stats_;
};

}  // namespace xslice
