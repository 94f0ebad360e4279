#include <doctest.h>

#include "teg/agents.hpp"

#include <cmath>

using namespace teg;

namespace {

FieldState flat_field(int side = 8, double heat = 0.0, double kappa = 0.0) {
  FieldState f{LatticeDomain(side, side, true)};
  f.h_auction.setConstant(heat);
  FieldWeights w;
  w.kappa_b = kappa;
  f.refresh_layers(w);
  return f;
}

AgentState flight_agent(double mass, Vec2 pos, Vec2 vel, double charge = 0.0) {
  AgentState a;
  a.id = 0;
  a.mass = mass;
  a.charge = charge;
  a.pos = pos;
  a.vel = vel;
  a.phase = AgentPhase::Flight;
  return a;
}

}  // namespace

TEST_CASE("agent mass: memory and log-endowment terms") {
  DynamicsParams p;
  p.alpha_m = 1.0;
  p.beta_m = 0.0;
  AgentSpec s;
  s.mem_size = 8.0;
  s.e_init = 50;
  CHECK(agent_mass(s, p) == doctest::Approx(8.0));

  p.alpha_m = 0.0;
  p.beta_m = 1.0;
  s.mem_size = 0.0;
  s.e_init = 3;  // ~e^1.0986
  CHECK(agent_mass(s, p) == doctest::Approx(std::log(3.0)));

  p.alpha_m = 0.5;
  p.beta_m = 2.0;
  s.mem_size = 4.0;
  s.e_init = 100;
  CHECK(agent_mass(s, p) == doctest::Approx(2.0 + 2.0 * std::log(100.0)));  // ~11.21

  // whale/shrimp ordering: strictly increasing in both drivers
  AgentSpec small = s, big = s;
  big.mem_size = 5.0;
  CHECK(agent_mass(big, p) > agent_mass(small, p));
  big = s;
  big.e_init = 200;
  CHECK(agent_mass(big, p) > agent_mass(small, p));
}

TEST_CASE("agent mass clamps to m_min when the formula goes nonpositive") {
  DynamicsParams p;
  p.alpha_m = 1.0;
  p.beta_m = 1.0;
  AgentSpec s;
  s.mem_size = 0.0;
  s.e_init = 1;  // log(1) = 0
  CHECK(agent_mass(s, p) == doctest::Approx(1e-3));
  s.e_init = 0;
  CHECK_THROWS_AS(agent_mass(s, p), std::invalid_argument);
}

TEST_CASE("agent charge: SLA priority scaled by risk") {
  AgentSpec s;
  s.sla_prio = 0.0;
  CHECK(agent_charge(s) == doctest::Approx(0.0));
  s.sla_prio = 1.0;
  s.risk_factor = 0.0;
  CHECK(agent_charge(s) == doctest::Approx(1.0));
  s.sla_prio = 2.0;
  s.risk_factor = 0.5;
  CHECK(agent_charge(s) == doctest::Approx(3.0));
}

TEST_CASE("max-entropy init: uniform, zero velocity, reproducible") {
  LatticeDomain dom(100, 100, true);
  AgentSpec s;
  s.e_init = 100;
  DynamicsParams p;
  const auto agents = init_agents(10000, s, p, dom, 1234);
  REQUIRE(agents.size() == 10000);

  // chi-square style uniformity oracle: per-quadrant counts within 4 sigma
  int q[4] = {0, 0, 0, 0};
  for (const auto& a : agents) {
    CHECK(a.vel.norm() == 0.0);
    CHECK(a.phase == AgentPhase::Flight);
    const int ix = a.pos.x() < 50 ? 0 : 1;
    const int iy = a.pos.y() < 50 ? 0 : 1;
    q[iy * 2 + ix]++;
  }
  const double expect = 2500.0, sigma = std::sqrt(10000 * 0.25 * 0.75);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(q[i] - expect) < 4.0 * sigma);

  // determinism contract: bit-identical across runs
  const auto again = init_agents(10000, s, p, dom, 1234);
  for (int i = 0; i < 10000; ++i) {
    CHECK(agents[i].pos.x() == again[i].pos.x());
    CHECK(agents[i].pos.y() == again[i].pos.y());
  }
  CHECK(init_agents(0, s, p, dom, 1).empty());
}

TEST_CASE("free damping tracks the closed-form exponential within 1%") {
  FieldState f = flat_field();
  DynamicsParams p;
  p.gamma = 0.5;
  p.temperature = 0.0;
  p.dt = 0.01;
  p.k_dual = 0.0;
  AgentState a = flight_agent(1.0, {4.0, 4.0}, {1.0, 0.0});
  CounterRng rng(1, 1);
  for (double t = 0.0; t < 5.0 - 1e-9; t += p.dt) {
    step_langevin(a, f, p, rng);
    const double expected = std::exp(-p.gamma * (t + p.dt) / 1.0);
    CHECK(std::abs(a.vel.norm() - expected) / expected < 0.01);
  }
}

TEST_CASE("lorentz rotation does no work") {
  FieldState f = flat_field(8, 1.0, 2.0);  // uniform b_z = 2
  DynamicsParams p;
  p.gamma = 0.0;
  p.temperature = 0.0;
  p.dt = 0.01;
  p.k_dual = 0.0;
  AgentState a = flight_agent(1.0, {4.0, 4.0}, {1.3, 0.0}, 1.5);
  CounterRng rng(1, 1);
  double drift = 0.0;
  for (int i = 0; i < 100; ++i) {  // one time unit
    const double before = a.vel.norm();
    step_langevin(a, f, p, rng);
    drift += std::abs(a.vel.norm() - before);
  }
  CHECK(drift < 1e-3);  // exact rotation: kinetic energy preserved
  // and the velocity actually rotated
  CHECK(std::abs(a.vel.y()) > 0.1);
}

TEST_CASE("quadratic bowl: agent converges to the minimum") {
  // grid bowl; node-difference force field makes it an exact spring
  FieldState f{LatticeDomain(16, 16, false)};
  const Vec2 c(8.5, 8.5);
  for (int cy = 0; cy < 16; ++cy)
    for (int cx = 0; cx < 16; ++cx)
      f.s_phys(cy, cx) = 0.1 * 0.5 * (Vec2(cx + 0.5, cy + 0.5) - c).squaredNorm();
  FieldWeights w;
  f.refresh_layers(w);

  DynamicsParams p;
  p.gamma = 0.8;
  p.temperature = 0.0;
  p.dt = 0.01;
  AgentState a = flight_agent(1.0, {3.2, 11.7}, {0.0, 0.0});
  CounterRng rng(1, 1);
  for (int i = 0; i < 40000; ++i) step_langevin(a, f, p, rng);
  // reference high-accuracy oracle: the damped spring settles at the
  // center; the sampled force there must vanish
  CHECK((a.pos - c).norm() < 1e-3);
  CHECK(f.grad_predicted(a.pos, 0.0).norm() < 1e-4);
  CHECK(a.vel.norm() < 1e-6);
}

TEST_CASE("fluctuation-dissipation: long-run <v^2> approaches 2T/m") {
  FieldState f = flat_field();
  DynamicsParams p;
  p.gamma = 1.0;
  p.temperature = 0.5;
  p.dt = 0.01;
  p.k_dual = 0.0;
  const double m = 2.0;
  AgentState a = flight_agent(m, {4.0, 4.0}, {0.0, 0.0});
  CounterRng rng(2024, 9);
  const int burn = 20000, steps = 300000;
  for (int i = 0; i < burn; ++i) step_langevin(a, f, p, rng);
  double acc = 0.0;
  for (int i = 0; i < steps; ++i) {
    step_langevin(a, f, p, rng);
    acc += a.vel.squaredNorm();
  }
  const double measured = acc / steps;
  const double expected = 2.0 * p.temperature / m;
  CHECK(std::abs(measured - expected) / expected < 0.05);
}

TEST_CASE("trajectories are bit-identical for identical seeds") {
  FieldState f = flat_field();
  DynamicsParams p;
  p.gamma = 0.3;
  p.temperature = 1.0;
  p.dt = 0.01;
  AgentState a1 = flight_agent(1.0, {2.0, 2.0}, {0.5, -0.2});
  AgentState a2 = a1;
  CounterRng r1(77, 3), r2(77, 3);
  for (int i = 0; i < 1000; ++i) {
    step_langevin(a1, f, p, r1);
    step_langevin(a2, f, p, r2);
  }
  CHECK(a1.pos.x() == a2.pos.x());
  CHECK(a1.pos.y() == a2.pos.y());
  CHECK(a1.vel.x() == a2.vel.x());
}

TEST_CASE("non-finite state raises a simulation fault") {
  FieldState f = flat_field();
  DynamicsParams p;
  AgentState a = flight_agent(1.0, {2.0, 2.0}, {0.0, 0.0});
  a.vel = Vec2(std::numeric_limits<double>::quiet_NaN(), 0.0);
  CounterRng rng(1, 1);
  CHECK_THROWS_AS(step_langevin(a, f, p, rng), SimulationFault);
}

TEST_CASE("probe_wealth: zero-cost proof-of-wealth order") {
  AgentState a;
  a.id = 7;
  a.wallet = 50;
  a.phase = AgentPhase::Flight;
  AgentSpec s;
  s.mem_size = 6.0;

  const Order o = probe_wealth(a, s, 3, 4, 0.2);
  CHECK(o.virtual_probe);
  CHECK(o.limit_price == 10);  // policy fraction of the wallet
  CHECK(o.footprint == doctest::Approx(6.0));
  CHECK(o.escrow == 0);
  CHECK(a.wallet == 50);  // zero-cost contract: wallet untouched

  a.wallet = 0;
  const Order dead = probe_wealth(a, s, 3, 4, 0.2);
  CHECK(dead.limit_price == 0);  // always killed
}

TEST_CASE("jit stride: economic order quantity") {
  // numeric minimization oracle for c=2, R=1, hold=1: scan the cost curve
  double best_q = 0.0, best_cost = 1e18;
  for (double q = 0.05; q < 10.0; q += 0.0005) {
    const double cost = 2.0 * 1.0 / q + 1.0 * q / 2.0;
    if (cost < best_cost) {
      best_cost = cost;
      best_q = q;
    }
  }
  CHECK(jit_bid_stride(1.0, 2.0, 1.0) == doctest::Approx(best_q).epsilon(1e-3));
  CHECK(jit_bid_stride(1.0, 2.0, 1.0) == doctest::Approx(2.0));

  CHECK(jit_bid_stride(1.0, 0.0, 1.0) == doctest::Approx(1.0));  // clamped minimal unit
  // quadrupling the friction doubles the stride
  CHECK(jit_bid_stride(1.0, 8.0, 1.0) == doctest::Approx(2.0 * jit_bid_stride(1.0, 2.0, 1.0)));
  CHECK_THROWS_AS(jit_bid_stride(1.0, 2.0, 0.0), std::invalid_argument);
}

TEST_CASE("jit expand decision") {
  AgentState a;
  a.wallet = 1000;
  a.footprint = 10.0;
  a.need = 10.0;
  a.phase = AgentPhase::Seated;
  AgentSpec s;
  s.mem_size = 30.0;
  s.consumption_rate = 0.0;
  JitPolicy pol;
  pol.stride = 2.0;
  pol.dual_trigger = 0.05;
  pol.c_txn = 1;
  pol.price_per_unit = 0.5;

  // covered and flat: hold
  CHECK_FALSE(jit_expand_decision(a, s, {1.0, 0.0}, 1.0, pol).bid);

  // deficit of 3 with stride 2: two strides
  a.need = 13.0;
  const auto d = jit_expand_decision(a, s, {1.0, 0.0}, 1.0, pol);
  CHECK(d.bid);
  CHECK(d.delta == doctest::Approx(4.0));

  // flat need but rising price: one pre-emptive stride
  a.need = 10.0;
  const auto pre = jit_expand_decision(a, s, {1.0, 0.2}, 1.0, pol);
  CHECK(pre.bid);
  CHECK(pre.delta == doctest::Approx(2.0));

  // broke: wanted to bid but starves
  a.need = 13.0;
  a.wallet = 1;
  const auto broke = jit_expand_decision(a, s, {1.0, 0.0}, 1.0, pol);
  CHECK_FALSE(broke.bid);
  CHECK(broke.starved);
}
