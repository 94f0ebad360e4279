#pragma once

#include "teg/field.hpp"
#include "teg/ledger.hpp"
#include "teg/rng.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace teg {

struct AgentSpec {
  double mem_size = 1.0;        // memory-units at full working set
  Tokens e_init = 100;          // initial endowment (> 0; mass uses log)
  double sla_prio = 0.0;
  double risk_factor = 0.0;
  double consumption_rate = 0.0;  // memory-units per epoch of need growth
  long lifetime = 0;              // epochs of useful work once seated (0 = unbounded)
  int block_level = 0;            // > 0: whale needing a contiguous 2^k x 2^k block
};

enum class AgentPhase { Flight, Seated, Glassy, Frozen, Suspended, Evacuating, Terminated };

const char* to_string(AgentPhase p);

struct AgentState {
  int id = -1;
  Vec2 pos = Vec2::Zero();
  Vec2 vel = Vec2::Zero();
  double mass = 1.0;
  double charge = 0.0;
  Tokens wallet = 0;
  double footprint = 0.0;  // memory-units currently leased
  AgentPhase phase = AgentPhase::Flight;

  // lifecycle bookkeeping
  int home_cell_x = -1, home_cell_y = -1;  // seat cell (block root for whales)
  double need = 0.0;                       // current working-set size
  long spawn_epoch = 0;
  long seated_epoch = -1;
  long flight_epochs = 0;
  long bankrupt_epochs = 0;
  double hold_accrual = 0.0;  // fractional holding tax carried between epochs

  bool holds_footprint() const {
    return phase == AgentPhase::Seated || phase == AgentPhase::Glassy ||
           phase == AgentPhase::Frozen || phase == AgentPhase::Suspended;
  }
};

struct DynamicsParams {
  double alpha_m = 1.0;  // mass per memory-unit
  double beta_m = 1.0;   // mass per log-token
  double gamma = 0.0;    // damping, set by the governor
  double temperature = 0.0;
  double dt = 0.01;          // epoch fraction per integration step
  double lookahead = 1.0;    // epochs of dual-part prediction
  double k_dual = 1.0;       // predictive damping gain on rising potential
  double m_min = 1e-3;
};

/// Raised when an agent's state goes non-finite; carries the diagnostic
/// run_scenario dumps before aborting.
struct SimulationFault : std::runtime_error {
  explicit SimulationFault(const std::string& what) : std::runtime_error(what) {}
};

/// m = alpha*MemSize + beta*log(E_init), clamped to m_min from below.
double agent_mass(const AgentSpec& spec, const DynamicsParams& params);

/// q = SLA_prio * (1 + RiskFactor)
double agent_charge(const AgentSpec& spec);

/// Maximum-entropy start: uniform positions, zero velocity, Flight phase,
/// wallet = endowment. Position stream is (seed, agent id), so layouts are
/// reproducible for any population size.
std::vector<AgentState> init_agents(int n, const AgentSpec& spec,
                                    const DynamicsParams& params,
                                    const LatticeDomain& domain, std::uint64_t seed,
                                    int first_id = 0);

struct StepDiag {
  double gamma_eff = 0.0;  // damping actually applied (gamma + gamma_dual)
};

/// One semi-implicit Euler step of the Langevin force law on the
/// dual-extended field. The Lorentz term is applied as an exact in-plane
/// rotation; drag uses gamma plus the predictive dual damping.
void step_langevin(AgentState& agent, const FieldState& field,
                   const DynamicsParams& params, CounterRng& rng,
                   StepDiag* diag = nullptr);

/// Zero-cost probe: a virtual order priced by proof-of-wealth. Never
/// debits the wallet or touches the book.
Order probe_wealth(const AgentState& agent, const AgentSpec& spec, int cx, int cy,
                   double bid_fraction);

/// Economic-order-quantity lease stride: sqrt(2*C_txn*R / gamma_hold),
/// clamped to one minimal unit. gamma_hold = 0 is rejected.
double jit_bid_stride(double consumption_rate, double c_txn, double gamma_hold);

struct JitPolicy {
  double stride = 1.0;
  double dual_trigger = 0.0;  // pre-emptive bid when phi.dual exceeds this
  Tokens c_txn = 0;
  double price_per_unit = 0.0;  // current memory price estimate
};

struct JitDecision {
  bool bid = false;
  double delta = 0.0;
  bool starved = false;  // wanted to bid but could not fund it
};

/// JIT incremental bidding: expand when projected need within the horizon
/// exceeds the lease, or pre-emptively when the local price is rising.
JitDecision jit_expand_decision(const AgentState& agent, const AgentSpec& spec,
                                DualScalar phi_at_pos, double horizon,
                                const JitPolicy& policy);

}  // namespace teg
