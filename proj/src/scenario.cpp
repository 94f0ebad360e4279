#include "teg/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string_view>
#include <thread>

namespace teg {

namespace {

std::vector<ArrivalBurst> parse_bursts(const std::string& spec) {
  std::vector<ArrivalBurst> out;
  std::istringstream in(spec);
  std::string item;
  while (std::getline(in, item, ';')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw std::runtime_error("bad burst spec: " + spec);
    out.push_back({std::stol(item.substr(0, colon)), std::stoi(item.substr(colon + 1))});
  }
  return out;
}

std::vector<WellSpec> parse_wells(const std::string& spec, bool quadratic) {
  std::vector<WellSpec> out;
  std::istringstream in(spec);
  std::string item;
  while (std::getline(in, item, ';')) {
    if (item.empty()) continue;
    std::istringstream fields(item);
    std::string tok;
    std::vector<double> v;
    while (std::getline(fields, tok, ',')) v.push_back(std::stod(tok));
    if (v.size() < 3) throw std::runtime_error("bad well spec: " + item);
    WellSpec w;
    w.cx = v[0];
    w.cy = v[1];
    w.depth = v[2];
    w.radius = v.size() > 3 ? v[3] : 2.0;
    w.quadratic = quadratic;
    out.push_back(w);
  }
  return out;
}

}  // namespace

AgentSpec sample_spec(CounterRng& rng, const ScenarioConfig& cfg, bool allow_whale) {
  AgentSpec spec;
  const bool whale =
      allow_whale && cfg.whale_fraction > 0.0 && rng.next_uniform() < cfg.whale_fraction;
  spec.mem_size =
      rng.next_uniform(cfg.mem_min, cfg.mem_max) * (whale ? cfg.whale_mem_scale : 1.0);
  spec.e_init =
      cfg.e_init_min + static_cast<Tokens>(rng.next_uniform() *
                                           static_cast<double>(cfg.e_init_max - cfg.e_init_min));
  spec.sla_prio = rng.next_uniform(0.0, cfg.sla_max);
  spec.risk_factor = rng.next_uniform(0.0, cfg.risk_max);
  spec.consumption_rate = whale ? 0.0 : cfg.consumption_rate;
  spec.lifetime = cfg.lifetime;
  spec.block_level = whale ? cfg.whale_block_level : 0;
  return spec;
}

ScenarioConfig ScenarioConfig::from_config(const ConfigFile& cfg) {
  ScenarioConfig s;
  s.domain = LatticeDomain(cfg.get_int("domain.width", 16), cfg.get_int("domain.height", 16),
                           cfg.get_bool("domain.wrap", true));
  s.zones_per_side = cfg.get_int("zones.per_side", 1);
  s.radix_m = cfg.get_int("zones.radix_m", 4);

  s.initial_count = cfg.get_int("agents.initial_count", 32);
  s.arrival_rate = cfg.get_double("agents.arrival_rate", 0.0);
  s.bursts = parse_bursts(cfg.get_string("agents.bursts", ""));
  s.mem_min = cfg.get_double("agents.mem_min", 4.0);
  s.mem_max = cfg.get_double("agents.mem_max", 8.0);
  s.e_init_min = cfg.get_long("agents.e_init_min", 200);
  s.e_init_max = cfg.get_long("agents.e_init_max", 400);
  s.sla_max = cfg.get_double("agents.sla_max", 1.0);
  s.risk_max = cfg.get_double("agents.risk_max", 0.5);
  s.consumption_rate = cfg.get_double("agents.consumption_rate", 0.5);
  s.lifetime = cfg.get_long("agents.lifetime", 0);
  s.need0_frac = cfg.get_double("agents.need0_frac", 0.25);
  s.whale_fraction = cfg.get_double("agents.whale_fraction", 0.0);
  s.whale_block_level = cfg.get_int("agents.whale_block_level", 1);
  s.whale_mem_scale = cfg.get_double("agents.whale_mem_scale", 4.0);
  s.v_inject = cfg.get_double("agents.v_inject", 0.0);

  s.dynamics.alpha_m = cfg.get_double("dynamics.alpha_m", 1.0);
  s.dynamics.beta_m = cfg.get_double("dynamics.beta_m", 1.0);
  s.dynamics.gamma = cfg.get_double("dynamics.gamma", 0.0);
  s.dynamics.temperature = cfg.get_double("dynamics.temperature", 0.0);
  s.dynamics.dt = cfg.get_double("dynamics.dt", 0.01);
  s.dynamics.lookahead = cfg.get_double("dynamics.lookahead", 1.0);
  s.dynamics.k_dual = cfg.get_double("dynamics.k_dual", 1.0);
  s.settle_speed = cfg.get_double("dynamics.settle_speed", 0.2);
  s.max_flight_epochs = cfg.get_long("dynamics.max_flight_epochs", 20);
  s.bid_fraction = cfg.get_double("dynamics.bid_fraction", 0.2);
  s.bankrupt_grace = cfg.get_long("dynamics.bankrupt_grace", 10);
  s.probe_every = cfg.get_int("dynamics.probe_every", 2);

  s.gpr.lengthscale = cfg.get_double("field.lengthscale", 3.0);
  s.gpr.signal_variance = cfg.get_double("field.signal_variance", 1.0);
  s.gpr.noise_variance = cfg.get_double("field.noise_variance", 1e-4);
  s.gpr.prior_mean = cfg.get_double("field.prior_mean", 0.0);
  s.weights.w1 = cfg.get_double("field.w1", 1.0);
  s.weights.w2 = cfg.get_double("field.w2", 1.0);
  s.weights.price_k = cfg.get_double("field.price_k", 1.0);
  s.weights.eps_price = cfg.get_double("field.eps_price", 0.01);
  s.weights.kappa_b = cfg.get_double("field.kappa_b", 0.0);
  s.lambda_heat = cfg.get_double("field.lambda_heat", 0.2);
  s.gpr_stride = cfg.get_int("field.gpr_stride", 0);

  s.ring_capacity = static_cast<std::size_t>(cfg.get_long("ledger.ring_capacity", 4096));
  s.c_txn = cfg.get_long("ledger.c_txn", 1);
  s.mu_friction = cfg.get_double("ledger.mu_friction", 0.1);
  s.reserve_frac = cfg.get_double("ledger.reserve_frac", 0.1);
  s.hold_rate = cfg.get_double("ledger.hold_rate", 0.05);
  s.jit_horizon = cfg.get_double("ledger.jit_horizon", 1.0);
  s.dual_trigger = cfg.get_double("ledger.dual_trigger", 0.05);
  s.checkpoint_frac = cfg.get_double("ledger.checkpoint_frac", 0.1);

  s.node_capacity = cfg.get_double("node.capacity", 100.0);
  s.k_mem = cfg.get_double("node.k_mem", 1.0);

  s.governor.landau.a = cfg.get_double("governor.a", 1.0);
  s.governor.landau.b = cfg.get_double("governor.b", 1.0);
  s.governor.landau.re_c = cfg.get_double("governor.re_c", 50.0);
  s.governor.landau.gamma_min = cfg.get_double("governor.gamma_min", -1.0);
  s.governor.landau.gamma_max = cfg.get_double("governor.gamma_max", 10.0);
  s.governor.hocbf.re_max = cfg.get_double("governor.re_max", 1000.0);
  s.governor.hocbf.gamma_max = cfg.get_double("governor.gamma_max", 10.0);
  s.governor.hocbf.alpha_cbf = cfg.get_double("governor.alpha_cbf", 1.0);
  s.governor.hocbf.m_eff = cfg.get_double("governor.m_eff", 1.0);
  s.governor.thresholds.s_lo = cfg.get_double("governor.s_lo", 0.1);
  s.governor.thresholds.s_hi = cfg.get_double("governor.s_hi", 1.0);
  s.governor.thresholds.r_lo = cfg.get_double("governor.r_lo", 10.0);
  s.governor.thresholds.r_hi = cfg.get_double("governor.r_hi", 100.0);
  s.governor.nu0 = cfg.get_double("governor.nu0", 0.5);
  s.governor.h0 = cfg.get_double("governor.h0", 0.5);
  s.governor.ema_half_life = cfg.get_double("governor.ema_half_life", 10.0);
  s.governor.hocbf_enabled = cfg.get_bool("governor.hocbf_enabled", true);
  s.broadcast_delay = cfg.get_int("governor.broadcast_delay", 0);
  s.governor_enabled = cfg.get_bool("governor.enabled", true);
  s.fixed_gamma = cfg.get_double("governor.fixed_gamma", 0.1);

  s.duration = cfg.get_long("run.duration", 100);
  s.ticks_per_epoch = cfg.get_int("run.ticks_per_epoch", 10);
  s.substeps = cfg.get_int("run.substeps", 2);
  s.seed = static_cast<std::uint64_t>(cfg.get_long("run.seed", 1));
  s.threads = cfg.get_int("run.threads", 1);
  const std::string mode = cfg.get_string("run.mode", "full");
  if (mode == "full") s.mode = RunMode::Full;
  else if (mode == "dynamics") s.mode = RunMode::Dynamics;
  else if (mode == "stress") s.mode = RunMode::Stress;
  else if (mode == "placement") s.mode = RunMode::Placement;
  else throw std::runtime_error("unknown run.mode: " + mode);

  s.wells = parse_wells(cfg.get_string("wells.gauss", ""), false);
  for (const auto& w : parse_wells(cfg.get_string("wells.quad", ""), true)) s.wells.push_back(w);
  s.prescribed_heat = cfg.get_double("wells.heat", 0.0);
  s.converge_speed = cfg.get_double("wells.converge_speed", 1e-3);
  s.converge_checks = cfg.get_int("wells.converge_checks", 3);
  s.fill_fraction = cfg.get_double("zones.fill_fraction", 0.5);

  s.cop.cop_min = cfg.get_double("metrics.cop_min", 2.5);
  s.cop.cop_max = cfg.get_double("metrics.cop_max", 3.5);
  s.cop.slope = cfg.get_double("metrics.cop_slope", 1.0);
  s.cop.power_per_util = cfg.get_double("metrics.power_per_util", 1.0);

  s.governor.batches_per_epoch = s.ticks_per_epoch;
  return s;
}

Simulation::Simulation(const ScenarioConfig& cfg)
    : cfg_(cfg),
      domain_(cfg.domain),
      field_(cfg.domain),
      phi_prev_epoch_(cfg.domain.zero_grid()),
      acc_(cfg.cop),
      spawn_rng_(cfg.seed, 0xA5A5A5A5ULL) {
  cfg_.governor.batches_per_epoch = cfg_.ticks_per_epoch;
  build_world();
}

void Simulation::build_world() {
  const int w = domain_.width, h = domain_.height;
  nodes_.reserve(domain_.cells());
  for (int cy = 0; cy < h; ++cy)
    for (int cx = 0; cx < w; ++cx)
      nodes_.emplace_back(domain_.cell_index(cx, cy), cfg_.node_capacity);

  const int z = std::max(1, cfg_.zones_per_side);
  if (w % z != 0 || h % z != 0)
    throw std::runtime_error("zones must tile the domain exactly");
  int zid = 0;
  for (int zy = 0; zy < z; ++zy)
    for (int zx = 0; zx < z; ++zx)
      zones_.push_back(std::make_unique<ZoneLedger>(zid++, zx * (w / z), zy * (h / z),
                                                    w / z, h / z, cfg_.ring_capacity,
                                                    cfg_.c_txn, cfg_.mu_friction));

  // prescribed potential landscape, if any
  if (!cfg_.wells.empty()) {
    Grid s = domain_.zero_grid();
    double base = 0.0;
    for (const auto& well : cfg_.wells)
      if (!well.quadratic) base += well.depth;
    for (int cy = 0; cy < h; ++cy) {
      for (int cx = 0; cx < w; ++cx) {
        const Vec2 c(cx + 0.5, cy + 0.5);
        double v = base;
        for (const auto& well : cfg_.wells) {
          const Vec2 d = domain_.min_image(c - Vec2(well.cx, well.cy));
          if (well.quadratic)
            v += 0.5 * well.depth * d.squaredNorm();
          else
            v -= well.depth * std::exp(-d.squaredNorm() / (2.0 * well.radius * well.radius));
        }
        s(cy, cx) = std::max(0.0, v);
      }
    }
    field_.s_phys = s;
  }
  field_.h_auction.setConstant(cfg_.prescribed_heat);
  field_.refresh_layers(cfg_.weights);
  phi_prev_epoch_ = field_.phi.real;

  Json meta{{"type", "meta"},
            {"domain_w", w},
            {"domain_h", h},
            {"wrap", domain_.wrap},
            {"nodes", domain_.cells()},
            {"node_capacity", cfg_.node_capacity},
            {"zones_per_side", z},
            {"duration", cfg_.duration},
            {"ticks_per_epoch", cfg_.ticks_per_epoch},
            {"seed", cfg_.seed},
            {"mode", static_cast<int>(cfg_.mode)},
            {"cop_min", cfg_.cop.cop_min},
            {"cop_max", cfg_.cop.cop_max},
            {"cop_slope", cfg_.cop.slope},
            {"power_per_util", cfg_.cop.power_per_util}};
  emit(meta);
}

void Simulation::emit_agent(const AgentState& a, const char* event, long epoch) {
  emit(Json{{"type", "agent"},
            {"epoch", epoch},
            {"agent", a.id},
            {"phase", to_string(a.phase)},
            {"x", a.pos.x()},
            {"y", a.pos.y()},
            {"wallet", a.wallet},
            {"footprint", a.footprint},
            {"event", event}});
}

void Simulation::spawn_agent(const AgentSpec& spec, const Vec2& pos, const Vec2& vel) {
  AgentState a;
  a.id = static_cast<int>(agents_.size());
  a.pos = pos;
  a.vel = vel;
  a.mass = agent_mass(spec, cfg_.dynamics);
  a.charge = agent_charge(spec);
  a.phase = AgentPhase::Flight;
  a.need = std::max(1.0, spec.mem_size * cfg_.need0_frac);
  a.spawn_epoch = epoch_;
  supply_.inject(a.wallet, spec.e_init);
  agents_.push_back(a);
  specs_.push_back(spec);
  quiet_checks_.push_back(0);
  emit(Json{{"type", "agent"},
            {"epoch", epoch_},
            {"agent", a.id},
            {"phase", "Flight"},
            {"x", a.pos.x()},
            {"y", a.pos.y()},
            {"wallet", a.wallet},
            {"footprint", 0.0},
            {"event", "spawn"},
            {"e_init", spec.e_init},
            {"mem_size", spec.mem_size}});
}

ZoneLedger& Simulation::zone_of(int cx, int cy) {
  const int z = std::max(1, cfg_.zones_per_side);
  const int zw = domain_.width / z, zh = domain_.height / z;
  const int zx = std::min(cx / zw, z - 1), zy = std::min(cy / zh, z - 1);
  return *zones_[zy * z + zx];
}

AuctionContext Simulation::auction_context(int cx, int cy) const {
  const double s_local = field_.s_phys(cy, cx);
  const Tokens cap = price_cap_tokens(s_local, cfg_.weights);
  const Tokens reserve = std::max<Tokens>(
      1, static_cast<Tokens>(std::floor(cfg_.reserve_frac * static_cast<double>(cap))));
  return {reserve, cap};
}

double Simulation::gamma_effective() const {
  if (!cfg_.governor_enabled) return cfg_.fixed_gamma;
  if (gamma_history_.empty()) return 0.0;
  const long idx = static_cast<long>(gamma_history_.size()) - 1 - cfg_.broadcast_delay;
  if (idx < 0) return gamma_history_.front();
  return gamma_history_[idx];
}

void Simulation::run() {
  if (cfg_.mode == RunMode::Placement) {
    // radix-M probe placement protocol; no continuous dynamics
    for (int i = 0; i < static_cast<int>(cfg_.fill_fraction * domain_.cells()); ++i) {
      AgentSpec spec;
      spec.mem_size = 1.0;
      spec.e_init = 100;
      CounterRng r(cfg_.seed, static_cast<std::uint64_t>(i));
      spawn_agent(spec, Vec2(r.next_uniform(0, domain_.width), r.next_uniform(0, domain_.height)),
                  Vec2::Zero());
    }
    for (epoch_ = 0; epoch_ < cfg_.duration; ++epoch_) {
      for (auto& a : agents_) {
        if (a.phase != AgentPhase::Flight) continue;
        CounterRng prng(cfg_.seed ^ 0xBEEF, static_cast<std::uint64_t>(a.id) * 1000003ULL + epoch_);
        int examined = 0;
        for (int p = 0; p < cfg_.radix_m; ++p) {
          const int cx = static_cast<int>(prng.next_uniform(0, domain_.width));
          const int cy = static_cast<int>(prng.next_uniform(0, domain_.height));
          ++examined;
          ZoneLedger& zone = zone_of(cx, cy);
          const int lx = cx - zone.x0(), ly = cy - zone.y0();
          if (!zone.book().occupied(lx, ly)) {
            zone.book().occupy(lx, ly);
            a.phase = AgentPhase::Seated;
            a.pos = Vec2(cx + 0.5, cy + 0.5);
            a.home_cell_x = cx;
            a.home_cell_y = cy;
            emit_agent(a, "seat", epoch_);
            break;
          }
        }
        emit(Json{{"type", "decision"}, {"epoch", epoch_}, {"agent", a.id}, {"examined", examined}});
      }
      emit(Json{{"type", "epoch_end"}, {"epoch", epoch_}});
    }
    return;
  }

  for (epoch_ = 0; epoch_ < cfg_.duration; ++epoch_) {
    epoch_begin();
    project_field();
    batches_.clear();
    for (int t = 0; t < cfg_.ticks_per_epoch; ++t) tick(t);
    if (cfg_.mode == RunMode::Full) airlock_scan();
    epoch_end();
    if (cfg_.mode == RunMode::Dynamics && all_converged()) {
      // keep emitting epoch rows so every series stays `duration` long
      for (long e = epoch_ + 1; e < cfg_.duration; ++e) {
        emit(Json{{"type", "epoch_end"}, {"epoch", e}});
      }
      break;
    }
  }
}

bool Simulation::all_converged() const {
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    if (agents_[i].phase != AgentPhase::Flight) continue;
    if (quiet_checks_[i] < cfg_.converge_checks) return false;
  }
  return !agents_.empty();
}

void Simulation::epoch_begin() {
  const bool economy = cfg_.mode == RunMode::Full;

  // arrivals: initial wave at epoch 0, then poisson plus scripted bursts
  auto spawn_one = [&](const AgentSpec& spec) {
    CounterRng prng(cfg_.seed, static_cast<std::uint64_t>(agents_.size()));
    Vec2 pos(prng.next_uniform(0, domain_.width), prng.next_uniform(0, domain_.height));
    Vec2 vel = Vec2::Zero();
    if (cfg_.v_inject > 0.0) {
      const double th = prng.next_uniform(0.0, 2.0 * M_PI);
      vel = cfg_.v_inject * Vec2(std::cos(th), std::sin(th));
    }
    spawn_agent(spec, pos, vel);
  };
  if (epoch_ == 0) {
    for (int i = 0; i < cfg_.initial_count; ++i)
      spawn_one(sample_spec(spawn_rng_, cfg_, true));
  }
  int arriving = 0;
  if (cfg_.arrival_rate > 0.0) arriving += spawn_rng_.next_poisson(cfg_.arrival_rate);
  for (const auto& b : cfg_.bursts)
    if (b.epoch == epoch_) arriving += b.count;
  for (int i = 0; i < arriving; ++i) spawn_one(sample_spec(spawn_rng_, cfg_, false));

  for (std::size_t i = 0; i < agents_.size(); ++i) {
    AgentState& a = agents_[i];
    const AgentSpec& spec = specs_[i];
    switch (a.phase) {
      case AgentPhase::Flight: {
        ++a.flight_epochs;
        // stress agents expire in flight; full-mode flight agents starve
        if (cfg_.mode == RunMode::Stress && spec.lifetime > 0 &&
            epoch_ - a.spawn_epoch >= spec.lifetime) {
          a.phase = AgentPhase::Terminated;
          emit_agent(a, "terminate", epoch_);
          break;
        }
        if (economy) {
          if (a.wallet < cfg_.c_txn) {
            if (++a.bankrupt_epochs > cfg_.bankrupt_grace) {
              a.phase = AgentPhase::Terminated;
              emit_agent(a, "bankrupt", epoch_);
            }
          } else {
            a.bankrupt_epochs = 0;
          }
        }
        break;
      }
      case AgentPhase::Seated:
      case AgentPhase::Glassy: {
        if (!economy) break;
        // working-set growth (throttled residents still accrue need;
        // their footprint stays frozen)
        a.need = std::min(spec.mem_size, a.need + spec.consumption_rate);
        // lifetime expiry: useful work complete
        if (spec.lifetime > 0 && a.seated_epoch >= 0 &&
            epoch_ - a.seated_epoch >= spec.lifetime) {
          release_seat(a.id, "terminate");
          break;
        }
        // holding tax, fractional accrual carried between epochs
        a.hold_accrual += cfg_.hold_rate * a.footprint;
        const Tokens tax = static_cast<Tokens>(std::floor(a.hold_accrual));
        if (tax > 0) {
          const Tokens paid = std::min(tax, a.wallet);
          if (paid > 0) {
            supply_.burn_from_wallet(a.wallet, paid);
            zone_of(a.home_cell_x, a.home_cell_y).add_burned(paid);
            emit(Json{{"type", "agent"},
                      {"epoch", epoch_},
                      {"agent", a.id},
                      {"phase", to_string(a.phase)},
                      {"x", a.pos.x()},
                      {"y", a.pos.y()},
                      {"wallet", a.wallet},
                      {"footprint", a.footprint},
                      {"event", "tax"},
                      {"burned", paid}});
          }
          a.hold_accrual -= static_cast<double>(paid);
          if (paid < tax) a.hold_accrual = 0.0;  // wallet exhausted
        }
        break;
      }
      default:
        break;
    }
  }
}

void Simulation::project_field() {
  if (cfg_.wells.empty() && cfg_.mode == RunMode::Full) {
    // holographic projection of node telemetry
    int stride = cfg_.gpr_stride;
    if (stride <= 0) {
      stride = 1;
      while (domain_.cells() / (stride * stride) > 256) ++stride;
    }
    std::vector<FieldSample> samples;
    for (int cy = 0; cy < domain_.height; cy += stride)
      for (int cx = 0; cx < domain_.width; cx += stride) {
        const NodeState& n = nodes_[node_index(cx, cy)];
        samples.push_back({cx, cy, n.allocated / n.c_total});
      }
    double mean = 0.0;
    for (const auto& s : samples) mean += s.value;
    if (!samples.empty()) mean /= samples.size();
    GprParams gp = cfg_.gpr;
    gp.prior_mean = mean;
    field_.s_phys = teg::project_field(samples, gp, domain_);
  }
  field_.refresh_layers(cfg_.weights);
  field_.roll_epoch(phi_prev_epoch_, 1);
  phi_prev_epoch_ = field_.phi.real;
}

void Simulation::step_agents_parallel() {
  const int n = static_cast<int>(agents_.size());
  if (n == 0) return;
  const double gamma = gamma_effective();
  DynamicsParams dp = cfg_.dynamics;
  dp.gamma = gamma;

  std::vector<double> diss(n, 0.0), path(n, 0.0);
  std::vector<int> moved(n, 0);

  auto step_range = [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      AgentState& a = agents_[i];
      if (a.phase != AgentPhase::Flight) continue;
      const int cx0 = domain_.cell_x(a.pos.x()), cy0 = domain_.cell_y(a.pos.y());
      for (int s = 0; s < cfg_.substeps; ++s) {
        StepDiag diag;
        CounterRng rng(cfg_.seed ^ 0x5EED0001ULL,
                       (static_cast<std::uint64_t>(a.id) << 24) ^
                           static_cast<std::uint64_t>(substep_counter_ + s));
        const Vec2 before = a.pos;
        step_langevin(a, field_, dp, rng, &diag);
        const Vec2 d = domain_.min_image(a.pos - before);
        path[i] += d.norm();
        diss[i] += std::abs(diag.gamma_eff) * a.vel.squaredNorm() * dp.dt;
      }
      const int cx1 = domain_.cell_x(a.pos.x()), cy1 = domain_.cell_y(a.pos.y());
      if (cx0 != cx1 || cy0 != cy1) moved[i] = 1;
      if (capture_traces)
        traces[a.id].push_back({substep_counter_, a.pos, a.vel});
      if (a.vel.norm() < cfg_.converge_speed)
        ++quiet_checks_[i];
      else
        quiet_checks_[i] = 0;
    }
  };

  const int threads = std::max(1, cfg_.threads);
  if (threads == 1 || n < 2 * threads) {
    step_range(0, n);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int lo = t * chunk, hi = std::min(n, (t + 1) * chunk);
      if (lo < hi) pool.emplace_back(step_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  substep_counter_ += cfg_.substeps;

  // fixed-order reduction keeps telemetry identical across thread counts
  for (int i = 0; i < n; ++i) {
    batch_acc_.dissipation += diss[i];
    total_dissipation_ += diss[i];
    total_path_length_ += path[i];
    batch_acc_.migration_rate += moved[i];
  }
}

void Simulation::tick(int tick_index) {
  tick_orders_.clear();
  batch_acc_ = MacroTelemetry{};

  step_agents_parallel();

  if (cfg_.mode == RunMode::Full) {
    agent_decisions(tick_index);
    consume_ledgers();
    heat_update(field_.h_auction, tick_orders_, cfg_.lambda_heat);
    field_.refresh_layers(cfg_.weights);
  }

  // micro-batch telemetry
  int active = 0;
  double speed_sum = 0.0;
  for (const auto& a : agents_) {
    if (a.phase == AgentPhase::Terminated) continue;
    ++active;
    speed_sum += a.vel.norm();
  }
  const double batch_dt = 1.0 / cfg_.ticks_per_epoch;
  batch_acc_.mean_speed = active ? speed_sum / active : 0.0;
  batch_acc_.agent_density = static_cast<double>(active) / domain_.cells();
  batch_acc_.bid_rate = static_cast<double>(bids_issued_) / batch_dt;
  batch_acc_.migration_rate /= batch_dt;
  batch_acc_.dissipation /= batch_dt;
  bids_issued_ = 0;
  batches_.push_back(batch_acc_);
}

void Simulation::agent_decisions(int tick_index) {
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    AgentState& a = agents_[i];
    const AgentSpec& spec = specs_[i];
    if (a.phase == AgentPhase::Flight) {
      const int cx = domain_.cell_x(a.pos.x()), cy = domain_.cell_y(a.pos.y());
      ZoneLedger& zone = zone_of(cx, cy);
      if (tick_index % cfg_.probe_every == 0 && a.wallet > 0) {
        Order probe = probe_wealth(a, spec, cx, cy, cfg_.bid_fraction);
        if (zone.submit(probe)) {
          tick_orders_.push_back(probe);
          ++probes_issued_;
        }
      }
      const bool desperate = a.flight_epochs >= cfg_.max_flight_epochs;
      const bool slow = a.vel.norm() < cfg_.settle_speed;
      if ((slow || desperate) && a.wallet > cfg_.c_txn) {
        Order bid;
        bid.agent_id = a.id;
        bid.kind = spec.block_level > 0 ? OrderKind::FokBlock : OrderKind::Bid;
        bid.cx = cx;
        bid.cy = cy;
        bid.quantity = spec.block_level > 0 ? (1 << (2 * spec.block_level)) : 1;
        Tokens limit = static_cast<Tokens>(
            std::floor(cfg_.bid_fraction * static_cast<double>(a.wallet) / bid.quantity));
        limit = std::min(limit, (a.wallet - cfg_.c_txn) / bid.quantity);
        if (limit >= 1) {
          bid.limit_price = limit;
          bid.virtual_probe = false;
          bid.footprint = a.need;
          bid.escrow = limit * bid.quantity + cfg_.c_txn;
          supply_.lock_escrow(a.wallet, bid.escrow);
          if (zone.submit(bid)) {
            tick_orders_.push_back(bid);
            ++bids_issued_;
          } else {
            supply_.refund_escrow(a.wallet, bid.escrow);  // backpressure
            emit_agent(a, "backpressure", epoch_);
          }
        }
      }
    } else if (a.phase == AgentPhase::Seated || a.phase == AgentPhase::Glassy) {
      NodeState& node = nodes_[node_index(a.home_cell_x, a.home_cell_y)];
      Resident* r = node.find_resident(a.id);
      if (r && r->mode == CgroupMode::Throttled && r->pending_expand > 0.0) {
        attempt_expansion(a.id, r->pending_expand);  // glassy retry
      } else if (tick_index == 0 && spec.consumption_rate > 0.0) {
        JitPolicy pol;
        pol.stride = jit_bid_stride(spec.consumption_rate, static_cast<double>(cfg_.c_txn),
                                    cfg_.hold_rate);
        pol.dual_trigger = cfg_.dual_trigger;
        pol.c_txn = cfg_.c_txn;
        const MemoryPrice mp = memory_price(node.allocated, node.c_total, cfg_.k_mem);
        pol.price_per_unit = mp.saturated ? 1e18 : mp.price;
        const JitDecision d =
            jit_expand_decision(a, spec, field_.phi_at(a.pos), cfg_.jit_horizon, pol);
        if (d.bid) attempt_expansion(a.id, d.delta);
      }
    }
  }
}

void Simulation::attempt_expansion(int agent_id, double delta) {
  AgentState& a = agents_[agent_id];
  NodeState& node = nodes_[node_index(a.home_cell_x, a.home_cell_y)];
  ZoneLedger& zone = zone_of(a.home_cell_x, a.home_cell_y);
  const MemoryPrice mp = memory_price(node.allocated, node.c_total, cfg_.k_mem);
  if (mp.saturated) {
    // asymptote reached: no payment, glassy throttle
    if (try_expand(node, agent_id, delta) == ExpandResult::GlassyTriggered) {
      a.phase = AgentPhase::Glassy;
      emit(Json{{"type", "node"}, {"epoch", epoch_}, {"node", node.node_id},
                {"event", "glassy"}, {"agent", agent_id}, {"bytes", delta}});
    }
    return;
  }
  const Tokens cost = static_cast<Tokens>(std::ceil(mp.price * delta)) + cfg_.c_txn;
  if (a.wallet < cost) return;  // starve toward bankruptcy
  supply_.lock_escrow(a.wallet, cost);
  const ExpandResult res = try_expand(node, agent_id, delta);
  if (res == ExpandResult::Granted) {
    ++bids_issued_;  // lease expansions are market churn
    evaporate(supply_, cost);
    zone.add_burned(cost);
    a.footprint = node.find_resident(agent_id)->footprint;
    if (a.phase == AgentPhase::Glassy) a.phase = AgentPhase::Seated;
    emit(Json{{"type", "node"}, {"epoch", epoch_}, {"node", node.node_id},
              {"event", "grant"}, {"agent", agent_id}, {"bytes", delta},
              {"burned", cost}});
  } else {
    supply_.refund_escrow(a.wallet, cost);
    a.phase = AgentPhase::Glassy;
    emit(Json{{"type", "node"}, {"epoch", epoch_}, {"node", node.node_id},
              {"event", "glassy"}, {"agent", agent_id}, {"bytes", delta}});
  }
}

void Simulation::consume_ledgers() {
  for (auto& zone_ptr : zones_) {
    ZoneLedger& zone = *zone_ptr;
    // drain in seq order; cell bids batch into per-cell auctions
    std::map<std::pair<int, int>, std::vector<Order>> cell_bids;
    std::optional<Order> o;
    while ((o = zone.next_order())) {
      if (o->kind == OrderKind::Release) {
        const int lx = o->cx - zone.x0(), ly = o->cy - zone.y0();
        if (zone.book().occupied(lx, ly)) zone.book().release(lx, ly);
        continue;
      }
      if (o->kind == OrderKind::FokBlock) {
        if (o->virtual_probe) continue;  // probes never touch the book
        AgentState& a = agents_[o->agent_id];
        if (a.phase != AgentPhase::Flight) {
          supply_.refund_escrow(a.wallet, o->escrow);
          continue;
        }
        std::optional<QuadBook::BlockRoot> root;
        try {
          root = zone.match_fok(*o);
        } catch (const std::invalid_argument&) {
          supply_.refund_escrow(a.wallet, o->escrow);
          continue;
        }
        if (!root) {
          supply_.refund_escrow(a.wallet, o->escrow);  // Kill
          continue;
        }
        seat_whale(zone, *o, *root);
        continue;
      }
      if (o->virtual_probe) continue;  // heat only
      cell_bids[{o->cy, o->cx}].push_back(*o);
    }

    for (auto& [cell, bids] : cell_bids) {
      const int cx = cell.second, cy = cell.first;
      const AuctionContext ctx = auction_context(cx, cy);
      const auto settlement = settle_vickrey(bids, ctx);
      for (const Order& b : bids) {
        if (settlement && b.seq == settlement->winner_seq) continue;
        supply_.refund_escrow(agents_[b.agent_id].wallet, b.escrow);  // losers
      }
      if (!settlement) continue;
      const Order* win = nullptr;
      for (const Order& b : bids)
        if (b.seq == settlement->winner_seq) win = &b;
      seat_winner(zone, *win, *settlement);
    }
  }
}

void Simulation::seat_winner(ZoneLedger& zone, const Order& bid, const Settlement& s) {
  AgentState& a = agents_[bid.agent_id];
  if (a.phase != AgentPhase::Flight) {  // stale bid from an already-seated agent
    supply_.refund_escrow(a.wallet, bid.escrow);
    return;
  }
  NodeState& node = nodes_[node_index(bid.cx, bid.cy)];

  double lease = std::min(bid.footprint, a.need);
  if (lease > node.free_space() + 1e-12 && !node.residents.empty()) {
    // eviction regime: static friction against the weakest incumbent
    wallets_view_.assign(agents_.size(), 0);
    for (const auto& ag : agents_) wallets_view_[ag.id] = ag.wallet;
    const int victim = node.residents.size() >= 2
                           ? select_weak(node, wallets_view_)
                           : node.residents.front().agent_id;
    const Tokens p_local = zone.clearing_price(bid.cx, bid.cy);
    if (eviction_check(bid.limit_price, p_local, agents_[victim].mass,
                       zone.mu_friction())) {
      release_seat(victim, "evict");
    }
  }
  lease = std::min(lease, std::max(0.0, node.free_space()));
  const MemoryPrice mp = memory_price(node.allocated, node.c_total, cfg_.k_mem);
  if (mp.saturated || lease < 1.0) {
    supply_.refund_escrow(a.wallet, bid.escrow);  // kill: no room to land
    return;
  }
  // seat payment (price + friction) burns from escrow
  const Tokens pay = s.price + cfg_.c_txn;
  evaporate(supply_, pay);
  zone.add_burned(pay);
  supply_.refund_escrow(a.wallet, bid.escrow - pay);

  // initial JIT lease clears through the memory market from the wallet
  Tokens mem_cost = static_cast<Tokens>(std::ceil(mp.price * lease));
  if (mem_cost > a.wallet) {
    lease = std::floor(static_cast<double>(a.wallet) / mp.price);
    mem_cost = static_cast<Tokens>(std::ceil(mp.price * lease));
    if (lease < 1.0) {
      // settled but cannot lease memory; seat fails, price stands
      zone.set_clearing_price(bid.cx, bid.cy, s.price);
      return;
    }
  }
  supply_.burn_from_wallet(a.wallet, mem_cost);
  zone.add_burned(mem_cost);

  const bool first_resident = node.residents.empty();
  node.add_resident(a.id, lease);
  if (first_resident)
    zone.book().occupy(bid.cx - zone.x0(), bid.cy - zone.y0());

  a.phase = AgentPhase::Seated;
  a.pos = Vec2(bid.cx + 0.5, bid.cy + 0.5);
  a.vel = Vec2::Zero();
  a.footprint = lease;
  a.home_cell_x = bid.cx;
  a.home_cell_y = bid.cy;
  a.seated_epoch = epoch_;
  zone.set_clearing_price(bid.cx, bid.cy, s.price);

  emit(Json{{"type", "settle"}, {"epoch", epoch_}, {"zone", zone.zone_id()},
            {"cx", bid.cx}, {"cy", bid.cy}, {"winner", a.id}, {"price", s.price},
            {"second", s.second}, {"burned", pay + mem_cost}, {"kind", "bid"}});
  emit(Json{{"type", "agent"}, {"epoch", epoch_}, {"agent", a.id}, {"phase", "Seated"},
            {"x", a.pos.x()}, {"y", a.pos.y()}, {"wallet", a.wallet},
            {"footprint", a.footprint}, {"event", "seat"}, {"node", node.node_id}});
  emit(Json{{"type", "decision"}, {"epoch", epoch_}, {"agent", a.id},
            {"examined", 1.0 + static_cast<double>(a.flight_epochs)}});
  emit(Json{{"type", "node"}, {"epoch", epoch_}, {"node", node.node_id},
            {"event", "grant"}, {"agent", a.id}, {"bytes", lease}, {"burned", mem_cost}});
}

void Simulation::seat_whale(ZoneLedger& zone, const Order& bid,
                            const QuadBook::BlockRoot& root) {
  AgentState& a = agents_[bid.agent_id];
  const AgentSpec& spec = specs_[bid.agent_id];
  const int side = 1 << root.level;
  const double share = spec.mem_size / bid.quantity;

  // every block cell was book-free, hence resident-free; verify the
  // memory share fits and fund the lease before committing
  Tokens mem_cost = 0;
  for (int by = 0; by < side; ++by) {
    for (int bx = 0; bx < side; ++bx) {
      const NodeState& node = nodes_[node_index(root.lx + bx, root.ly + by)];
      const MemoryPrice mp = memory_price(node.allocated, node.c_total, cfg_.k_mem);
      if (mp.saturated || share > node.free_space() + 1e-12) mem_cost = -1;
      if (mem_cost >= 0) mem_cost += static_cast<Tokens>(std::ceil(mp.price * share));
    }
  }
  const AuctionContext ctx = auction_context(root.lx, root.ly);
  const Tokens pay = ctx.reserve * bid.quantity + cfg_.c_txn;
  if (mem_cost < 0 || bid.escrow < pay || a.wallet < mem_cost) {
    zone.book().release_block(
        {root.lx - zone.x0(), root.ly - zone.y0(), root.level});
    supply_.refund_escrow(a.wallet, bid.escrow);  // cannot fund the block
    return;
  }
  evaporate(supply_, pay);
  zone.add_burned(pay);
  supply_.refund_escrow(a.wallet, bid.escrow - pay);
  supply_.burn_from_wallet(a.wallet, mem_cost);
  zone.add_burned(mem_cost);

  for (int by = 0; by < side; ++by)
    for (int bx = 0; bx < side; ++bx)
      nodes_[node_index(root.lx + bx, root.ly + by)].add_resident(a.id, share);

  a.phase = AgentPhase::Seated;
  a.pos = Vec2(root.lx + side * 0.5, root.ly + side * 0.5);
  a.vel = Vec2::Zero();
  a.footprint = spec.mem_size;
  a.need = spec.mem_size;
  a.home_cell_x = root.lx;
  a.home_cell_y = root.ly;
  a.seated_epoch = epoch_;

  emit(Json{{"type", "settle"}, {"epoch", epoch_}, {"zone", zone.zone_id()},
            {"cx", root.lx}, {"cy", root.ly}, {"block_side", side}, {"winner", a.id},
            {"price", ctx.reserve}, {"second", ctx.reserve},
            {"burned", pay + mem_cost}, {"kind", "fok"}});
  emit(Json{{"type", "agent"}, {"epoch", epoch_}, {"agent", a.id}, {"phase", "Seated"},
            {"x", a.pos.x()}, {"y", a.pos.y()}, {"wallet", a.wallet},
            {"footprint", a.footprint}, {"event", "seat"},
            {"node", node_index(root.lx, root.ly)}});
  emit(Json{{"type", "decision"}, {"epoch", epoch_}, {"agent", a.id},
            {"examined", 1.0 + static_cast<double>(a.flight_epochs)}});
}

void Simulation::release_seat(int agent_id, const char* event_name) {
  AgentState& a = agents_[agent_id];
  const AgentSpec& spec = specs_[agent_id];
  const int q = spec.block_level > 0 ? (1 << spec.block_level) : 1;
  const bool evict = std::string_view(event_name) == "evict";
  for (int by = 0; by < q; ++by) {
    for (int bx = 0; bx < q; ++bx) {
      const int cx = a.home_cell_x + bx, cy = a.home_cell_y + by;
      NodeState& node = nodes_[node_index(cx, cy)];
      if (node.find_resident(agent_id)) {
        node.remove_resident(agent_id);
        if (node.residents.empty()) {
          ZoneLedger& zone = zone_of(cx, cy);
          zone.book().release(cx - zone.x0(), cy - zone.y0());
        }
      }
    }
  }
  a.footprint = 0.0;
  a.phase = evict ? AgentPhase::Flight : AgentPhase::Terminated;
  if (a.phase == AgentPhase::Flight) {
    a.flight_epochs = 0;
    a.seated_epoch = -1;
  }
  emit_agent(a, event_name, epoch_);
}

void Simulation::airlock_scan() {
  for (auto& node : nodes_) {
    if (node.residents.size() < 2) continue;
    // a throttled expander is the strong party if someone weaker co-resides
    int strong = -1;
    double pending = 0.0;
    for (const auto& r : node.residents) {
      if (r.mode == CgroupMode::Throttled && r.pending_expand > pending) {
        strong = r.agent_id;
        pending = r.pending_expand;
      }
    }
    if (strong < 0) continue;
    wallets_view_.assign(agents_.size(), 0);
    for (const auto& ag : agents_) wallets_view_[ag.id] = ag.wallet;
    const int weak = select_weak(node, wallets_view_);
    if (weak == strong) continue;  // the expander is itself the weakest
    if (wallets_view_[weak] >= wallets_view_[strong]) continue;

    AgentState& w = agents_[weak];
    const double checkpoint =
        std::min(cfg_.checkpoint_frac * std::max(1.0, w.footprint), node.buffer_reserved);
    AirlockPlan plan{weak, strong, AirlockStage::IceSeal};
    std::vector<NodeEvent> seq;
    try {
      seq = run_airlock(node, plan, checkpoint);
    } catch (const std::invalid_argument&) {
      continue;  // oversized checkpoint: plan rejected before mutation
    }
    for (const auto& ev : seq) {
      emit(Json{{"type", "node"}, {"epoch", epoch_}, {"node", node.node_id},
                {"event", to_string(ev.kind)}, {"agent", ev.agent_id},
                {"bytes", ev.bytes}, {"allocated", ev.allocated_after}});
    }
    // weak agent escapes with its remaining wallet; the strong expander
    // still co-resides, so the book cell stays occupied
    w.footprint = 0.0;
    w.phase = AgentPhase::Evacuating;
    emit_agent(w, "escape", epoch_);
    w.phase = AgentPhase::Terminated;
    emit_agent(w, "terminate", epoch_);
    if (node.residents.empty()) {
      ZoneLedger& zone = zone_of(w.home_cell_x, w.home_cell_y);
      zone.book().release(w.home_cell_x - zone.x0(), w.home_cell_y - zone.y0());
    }

    // freed space: the strong agent's pending expansion retries now
    attempt_expansion(strong, pending);
  }
}

void Simulation::epoch_end() {
  // governor decision (epochs are the only cadence gamma changes at)
  if (cfg_.governor_enabled && !batches_.empty()) {
    gov_ = governor_tick(gov_, batches_, domain_, cfg_.governor);
    gamma_history_.push_back(gov_.gamma);
    max_re_ = std::max(max_re_, gov_.epoch_max_re);
    min_h_barrier_ = std::min(min_h_barrier_, gov_.epoch_min_h);
    emit(Json{{"type", "governor"}, {"epoch", epoch_}, {"re", gov_.re},
              {"sdot", gov_.sdot}, {"phase", to_string(gov_.phase)},
              {"h_barrier", gov_.h_barrier}, {"gamma_desired", gov_.gamma_desired},
              {"gamma_safe", gov_.gamma}, {"h_field", gov_.h_field}});
  }

  // usage rows for seated agents
  for (const auto& a : agents_) {
    if (!a.holds_footprint()) continue;
    const double used = std::min(a.need, a.footprint);
    emit(Json{{"type", "usage"}, {"epoch", epoch_}, {"agent", a.id},
              {"node", node_index(a.home_cell_x, a.home_cell_y)},
              {"leased", a.footprint}, {"used", used}});
  }

  // supply audit: exact integer conservation, every epoch
  Tokens wallet_sum = 0;
  for (const auto& a : agents_) wallet_sum += a.wallet;
  if (wallet_sum != supply_.circulating || !supply_.conserved())
    throw SimulationFault("token conservation violated at epoch " + std::to_string(epoch_));
  ++conservation_checks_;
  emit(Json{{"type", "supply"}, {"epoch", epoch_}, {"injected", supply_.injected},
            {"circulating", supply_.circulating}, {"escrowed", supply_.escrowed},
            {"burned", supply_.burned}});

  emit(Json{{"type", "epoch_end"}, {"epoch", epoch_}});
}

double Simulation::force_norm_at(const Vec2& pos) const {
  return field_.grad_predicted(pos, 0.0).norm();
}

Json run_scenario_to_dir(const ScenarioConfig& cfg, const std::string& out_dir,
                         bool dump_field) {
  namespace fs = std::filesystem;
  if (!out_dir.empty()) fs::create_directories(out_dir);

  Simulation sim(cfg);
  Json summary;
  try {
    sim.run();
  } catch (const SimulationFault& fault) {
    summary["fault"] = fault.what();
    if (!out_dir.empty()) {
      sim.log().write_jsonl_file(out_dir + "/events.jsonl");
      std::ofstream s(out_dir + "/summary.json");
      s << summary.dump(2) << '\n';
    }
    throw;
  }

  std::map<std::string, int> phases;
  for (const auto& a : sim.agents()) phases[to_string(a.phase)]++;
  summary = Json{{"mode", static_cast<int>(cfg.mode)},
                 {"seed", cfg.seed},
                 {"duration", cfg.duration},
                 {"agents", sim.agents().size()},
                 {"phases", phases},
                 {"supply",
                  {{"injected", sim.supply().injected},
                   {"circulating", sim.supply().circulating},
                   {"escrowed", sim.supply().escrowed},
                   {"burned", sim.supply().burned},
                   {"conserved", sim.supply().conserved()}}},
                 {"max_re", sim.max_re()},
                 {"min_h_barrier", sim.min_h_barrier()},
                 {"total_dissipation", sim.total_dissipation()},
                 {"total_path_length", sim.total_path_length()}};

  if (!out_dir.empty()) {
    sim.log().write_jsonl_file(out_dir + "/events.jsonl");
    std::ofstream m(out_dir + "/metrics.csv");
    sim.metrics().write_csv(m);
    std::ofstream s(out_dir + "/summary.json");
    s << summary.dump(2) << '\n';
    if (dump_field) {
      std::ofstream f(out_dir + "/field.tsv");
      write_field_tsv(f, sim.field());
    }
  }
  return summary;
}

}  // namespace teg
