#include "teg/agents.hpp"

#include <cmath>
#include <sstream>

namespace teg {

const char* to_string(AgentPhase p) {
  switch (p) {
    case AgentPhase::Flight: return "Flight";
    case AgentPhase::Seated: return "Seated";
    case AgentPhase::Glassy: return "Glassy";
    case AgentPhase::Frozen: return "Frozen";
    case AgentPhase::Suspended: return "Suspended";
    case AgentPhase::Evacuating: return "Evacuating";
    case AgentPhase::Terminated: return "Terminated";
  }
  return "?";
}

double agent_mass(const AgentSpec& spec, const DynamicsParams& params) {
  if (spec.e_init <= 0) throw std::invalid_argument("e_init must be > 0");
  const double m =
      params.alpha_m * spec.mem_size + params.beta_m * std::log(static_cast<double>(spec.e_init));
  return m > 0.0 ? m : params.m_min;
}

double agent_charge(const AgentSpec& spec) {
  return spec.sla_prio * (1.0 + spec.risk_factor);
}

std::vector<AgentState> init_agents(int n, const AgentSpec& spec,
                                    const DynamicsParams& params,
                                    const LatticeDomain& domain, std::uint64_t seed,
                                    int first_id) {
  std::vector<AgentState> out;
  out.reserve(std::max(n, 0));
  for (int i = 0; i < n; ++i) {
    AgentState a;
    a.id = first_id + i;
    CounterRng rng(seed, static_cast<std::uint64_t>(a.id));
    a.pos = Vec2(rng.next_uniform(0.0, domain.width), rng.next_uniform(0.0, domain.height));
    a.vel = Vec2::Zero();
    a.mass = agent_mass(spec, params);
    a.charge = agent_charge(spec);
    a.wallet = spec.e_init;
    a.phase = AgentPhase::Flight;
    out.push_back(a);
  }
  return out;
}

void step_langevin(AgentState& agent, const FieldState& field,
                   const DynamicsParams& params, CounterRng& rng, StepDiag* diag) {
  if (agent.phase != AgentPhase::Flight)
    throw std::logic_error("step_langevin requires a Flight agent");
  const double m = agent.mass;
  const double dt = params.dt;

  const Vec2 grad = field.grad_predicted(agent.pos, params.lookahead);
  const double dual_here = field.phi_at(agent.pos).dual;
  const double gamma_dual = params.k_dual * std::max(0.0, dual_here);
  const double gamma_eff = params.gamma + gamma_dual;
  if (diag) diag->gamma_eff = gamma_eff;

  Vec2 v = agent.vel;
  v += (dt / m) * (-grad);

  // Lorentz sorting: exact rotation, does no work
  const double bz = field.bz_at(agent.pos);
  const double theta = agent.charge * bz * dt / m;
  if (theta != 0.0) {
    const double c = std::cos(theta), s = std::sin(theta);
    v = Vec2(c * v.x() + s * v.y(), -s * v.x() + c * v.y());
  }

  v *= (1.0 - gamma_eff * dt / m);

  if (params.temperature > 0.0 && gamma_eff > 0.0) {
    const double sigma = std::sqrt(2.0 * gamma_eff * params.temperature * dt) / m;
    v += sigma * rng.next_gauss2();
  }

  Vec2 p = agent.pos + dt * v;
  p = field.domain.wrap_pos(p);

  if (!p.allFinite() || !v.allFinite()) {
    std::ostringstream os;
    os << "non-finite agent state: id=" << agent.id << " pos=(" << agent.pos.x() << ","
       << agent.pos.y() << ") vel=(" << agent.vel.x() << "," << agent.vel.y() << ")";
    throw SimulationFault(os.str());
  }
  agent.pos = p;
  agent.vel = v;
}

Order probe_wealth(const AgentState& agent, const AgentSpec& spec, int cx, int cy,
                   double bid_fraction) {
  Order o;
  o.agent_id = agent.id;
  o.kind = OrderKind::Bid;
  o.cx = cx;
  o.cy = cy;
  o.quantity = 1;
  o.limit_price = static_cast<Tokens>(std::floor(bid_fraction * static_cast<double>(agent.wallet)));
  o.virtual_probe = true;
  o.footprint = spec.mem_size;
  o.escrow = 0;
  return o;
}

double jit_bid_stride(double consumption_rate, double c_txn, double gamma_hold) {
  if (consumption_rate <= 0.0) throw std::invalid_argument("consumption rate must be > 0");
  if (c_txn < 0.0) throw std::invalid_argument("c_txn must be >= 0");
  if (gamma_hold <= 0.0) throw std::invalid_argument("holding tax must be > 0 (unbounded hoarding)");
  const double q = std::sqrt(2.0 * c_txn * consumption_rate / gamma_hold);
  return std::max(1.0, q);
}

JitDecision jit_expand_decision(const AgentState& agent, const AgentSpec& spec,
                                DualScalar phi_at_pos, double horizon,
                                const JitPolicy& policy) {
  JitDecision d;
  const double projected =
      std::min(spec.mem_size, agent.need + spec.consumption_rate * horizon);
  double delta = 0.0;
  if (projected > agent.footprint) {
    const double deficit = projected - agent.footprint;
    delta = std::ceil(deficit / policy.stride) * policy.stride;
  } else if (phi_at_pos.dual > policy.dual_trigger && agent.footprint < spec.mem_size) {
    delta = policy.stride;  // pre-emptive stride against a rising price
  } else {
    return d;  // hold
  }
  delta = std::min(delta, std::max(0.0, spec.mem_size - agent.footprint));
  if (delta <= 0.0) return d;

  const Tokens cost = static_cast<Tokens>(std::ceil(policy.price_per_unit * delta)) + policy.c_txn;
  if (agent.wallet < cost) {
    d.starved = true;  // no bid; the agent starves toward bankruptcy
    return d;
  }
  d.bid = true;
  d.delta = delta;
  return d;
}

}  // namespace teg
