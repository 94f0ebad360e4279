#pragma once

#include "teg/agents.hpp"
#include "teg/config.hpp"
#include "teg/events.hpp"
#include "teg/field.hpp"
#include "teg/governor.hpp"
#include "teg/ledger.hpp"
#include "teg/metrics.hpp"
#include "teg/nodesim.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace teg {

enum class RunMode { Full, Dynamics, Stress, Placement };

/// A prescribed potential well for dynamics-mode scenarios.
struct WellSpec {
  double cx = 0, cy = 0;
  double depth = 1.0;
  double radius = 2.0;
  bool quadratic = false;  // exact k/2*d^2 bowl instead of a gaussian dip
};

struct ArrivalBurst {
  long epoch = 0;
  int count = 0;
};

struct ScenarioConfig {
  // domain & zones
  LatticeDomain domain{16, 16, true};
  int zones_per_side = 1;
  int radix_m = 4;  // probe fan-out of the placement protocol

  // population
  int initial_count = 32;
  double arrival_rate = 0.0;  // poisson mean per epoch
  std::vector<ArrivalBurst> bursts;
  double mem_min = 4.0, mem_max = 8.0;
  Tokens e_init_min = 200, e_init_max = 400;
  double sla_max = 1.0;
  double risk_max = 0.5;
  double consumption_rate = 0.5;
  long lifetime = 0;  // 0 = unbounded
  double need0_frac = 0.25;
  double whale_fraction = 0.0;
  int whale_block_level = 1;
  double whale_mem_scale = 4.0;
  double v_inject = 0.0;  // launch speed for stress arrivals

  // dynamics & flight policy
  DynamicsParams dynamics;
  double settle_speed = 0.2;
  long max_flight_epochs = 20;
  double bid_fraction = 0.2;
  long bankrupt_grace = 10;
  int probe_every = 2;  // ticks between wealth probes while in flight

  // field
  GprParams gpr;
  FieldWeights weights;
  double lambda_heat = 0.2;
  int gpr_stride = 0;  // 0 = auto (keeps the dense solve at desk scale)

  // ledger & economy
  std::size_t ring_capacity = 4096;
  Tokens c_txn = 1;
  double mu_friction = 0.1;
  double reserve_frac = 0.1;
  double hold_rate = 0.05;  // tokens per memory-unit per epoch
  double jit_horizon = 1.0;
  double dual_trigger = 0.05;
  double checkpoint_frac = 0.1;

  // nodes
  double node_capacity = 100.0;
  double k_mem = 1.0;

  // governor
  GovernorParams governor;
  int broadcast_delay = 0;  // epochs of gamma lag
  bool governor_enabled = true;
  double fixed_gamma = 0.1;  // used when the governor is disabled

  // run
  long duration = 100;
  int ticks_per_epoch = 10;
  int substeps = 2;
  std::uint64_t seed = 1;
  int threads = 1;
  RunMode mode = RunMode::Full;

  // dynamics-mode field
  std::vector<WellSpec> wells;
  double prescribed_heat = 0.0;
  double converge_speed = 1e-3;
  int converge_checks = 3;

  // placement-mode shape
  double fill_fraction = 0.5;

  // metrics model
  CopModel cop;

  static ScenarioConfig from_config(const ConfigFile& cfg);
};

struct TraceSample {
  long tick = 0;  // global substep index
  Vec2 pos = Vec2::Zero();
  Vec2 vel = Vec2::Zero();
};

/// Composes the field, agents, ledgers, nodes and governor into one
/// deterministic tick pipeline. Events stream into the log; metrics are
/// folded from the same events the log serializes.
class Simulation {
 public:
  explicit Simulation(const ScenarioConfig& cfg);

  void run();

  const ScenarioConfig& config() const { return cfg_; }
  const EventLog& log() const { return log_; }
  const RunMetrics& metrics() const { return acc_.metrics(); }
  const TokenSupply& supply() const { return supply_; }
  const std::vector<AgentState>& agents() const { return agents_; }
  const std::vector<AgentSpec>& specs() const { return specs_; }
  const std::vector<NodeState>& nodes() const { return nodes_; }
  const FieldState& field() const { return field_; }
  const GovernorState& governor_state() const { return gov_; }

  // diagnostics for the verification harness
  bool capture_traces = false;
  std::map<int, std::vector<TraceSample>> traces;
  double total_dissipation() const { return total_dissipation_; }
  double total_path_length() const { return total_path_length_; }
  double max_re() const { return max_re_; }
  double min_h_barrier() const { return min_h_barrier_; }
  long conservation_checks() const { return conservation_checks_; }

  /// Force magnitude the dynamics would apply at a position (used by the
  /// equilibrium checks).
  double force_norm_at(const Vec2& pos) const;

  bool all_converged() const;

 private:
  void build_world();
  void spawn_agent(const AgentSpec& spec, const Vec2& pos, const Vec2& vel);
  void epoch_begin();
  void project_field();
  void tick(int tick_index);
  void step_agents_parallel();
  void agent_decisions(int tick_index);
  void consume_ledgers();
  void seat_winner(ZoneLedger& zone, const Order& bid, const Settlement& s);
  void seat_whale(ZoneLedger& zone, const Order& bid, const QuadBook::BlockRoot& root);
  void attempt_expansion(int agent_id, double delta);
  void release_seat(int agent_id, const char* event_name);
  void airlock_scan();
  void epoch_end();
  double gamma_effective() const;
  ZoneLedger& zone_of(int cx, int cy);
  int node_index(int cx, int cy) const { return cfg_.domain.cell_index(cx, cy); }
  AuctionContext auction_context(int cx, int cy) const;

  void emit(const Json& e) {
    log_.emit(e);
    acc_.consume(e);
  }
  void emit_agent(const AgentState& a, const char* event, long epoch);

  ScenarioConfig cfg_;
  LatticeDomain domain_;
  FieldState field_;
  Grid phi_prev_epoch_;
  std::vector<NodeState> nodes_;
  std::vector<std::unique_ptr<ZoneLedger>> zones_;
  std::vector<AgentState> agents_;
  std::vector<AgentSpec> specs_;
  std::vector<Tokens> wallets_view_;  // scratch for select_weak
  TokenSupply supply_;
  GovernorState gov_;
  std::deque<double> gamma_history_;
  EventLog log_;
  MetricsAccumulator acc_;
  CounterRng spawn_rng_;

  long epoch_ = 0;
  long substep_counter_ = 0;
  std::vector<MacroTelemetry> batches_;
  MacroTelemetry batch_acc_;
  std::vector<Order> tick_orders_;  // this tick's submissions, for heat
  long probes_issued_ = 0;
  long bids_issued_ = 0;

  // converged-flag per agent for dynamics mode
  std::vector<int> quiet_checks_;

  double total_dissipation_ = 0.0;
  double total_path_length_ = 0.0;
  double max_re_ = 0.0;
  double min_h_barrier_ = 1e300;
  long conservation_checks_ = 0;
};

/// Run a scenario and write metrics.csv, events.jsonl and summary.json
/// under out_dir (created if needed). Returns the summary document.
Json run_scenario_to_dir(const ScenarioConfig& cfg, const std::string& out_dir,
                         bool dump_field = false);

/// Draw one workload spec from the scenario's population mix. The TEG
/// run and the baseline replay the same stream.
AgentSpec sample_spec(CounterRng& rng, const ScenarioConfig& cfg, bool allow_whale);

}  // namespace teg
