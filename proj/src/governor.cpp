#include "teg/governor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace teg {

const char* to_string(Phase p) {
  switch (p) {
    case Phase::ColdStasis: return "ColdStasis";
    case Phase::HeatDeath: return "HeatDeath";
    case Phase::LaminarFlow: return "LaminarFlow";
  }
  return "?";
}

double reynolds(const MacroTelemetry& t, const LatticeDomain& domain, double gamma,
                double nu0) {
  return (t.mean_speed * t.agent_density * domain.diameter()) / (std::abs(gamma) + nu0);
}

double entropy_production(const MacroTelemetry& t, double c_txn) {
  return t.dissipation + c_txn * t.bid_rate;
}

Phase classify_phase(double re, double sdot, const PhaseThresholds& thr, Phase previous) {
  if (sdot < thr.s_lo && re < thr.r_lo) return Phase::ColdStasis;
  if (sdot < thr.s_lo && re >= thr.r_hi) return Phase::HeatDeath;
  if (sdot >= thr.s_lo && re < thr.r_hi) return Phase::LaminarFlow;
  return previous;  // ambiguous corner: hysteresis
}

double landau_free_energy(double gamma, double re, const LandauParams& p) {
  const double g2 = gamma * gamma;
  return 0.5 * p.a * (p.re_c - re) * g2 + 0.25 * p.b * g2 * g2 - p.h_field * gamma;
}

namespace {

// real roots of t^3 + pt + q = 0
std::vector<double> depressed_cubic_roots(double pc, double qc) {
  std::vector<double> roots;
  const double disc = -4.0 * pc * pc * pc - 27.0 * qc * qc;
  if (disc > 0.0) {
    // three real roots (trigonometric form); pc < 0 here
    const double r = 2.0 * std::sqrt(-pc / 3.0);
    const double arg = std::clamp(3.0 * qc / (pc * r), -1.0, 1.0);
    const double phi = std::acos(arg);
    for (int k = 0; k < 3; ++k)
      roots.push_back(r * std::cos((phi - 2.0 * M_PI * k) / 3.0));
  } else {
    // one real root (Cardano)
    const double half_q = qc / 2.0;
    const double d = std::sqrt(std::max(0.0, half_q * half_q + pc * pc * pc / 27.0));
    const double u = std::cbrt(-half_q + d);
    const double v = std::cbrt(-half_q - d);
    roots.push_back(u + v);
  }
  return roots;
}

}  // namespace

double landau_gamma(double re, const LandauParams& p) {
  if (p.b <= 0.0) throw std::invalid_argument("landau b must be > 0");
  std::vector<double> candidates{p.gamma_min, p.gamma_max};

  if (p.h_field == 0.0) {
    // pitchfork: exact stationary points keep the sweep at closed-form
    // precision
    candidates.push_back(0.0);
    const double s2 = p.a * (re - p.re_c) / p.b;
    if (s2 > 0.0) {
      const double s = std::sqrt(s2);
      candidates.push_back(s);
      candidates.push_back(-s);
    }
  } else {
    for (double r : depressed_cubic_roots(p.a * (p.re_c - re) / p.b, -p.h_field / p.b))
      candidates.push_back(r);
  }

  double best = 0.0, best_f = 0.0;
  bool have = false;
  for (double g : candidates) {
    if (g < p.gamma_min || g > p.gamma_max) continue;
    const double f = landau_free_energy(g, re, p);
    // prefer the non-negative branch among symmetric minima
    if (!have || f < best_f - 1e-12 * (1.0 + std::abs(best_f)) ||
        (std::abs(f - best_f) <= 1e-12 * (1.0 + std::abs(best_f)) && g > best)) {
      best = g;
      best_f = f;
      have = true;
    }
  }
  return have ? best : 0.0;
}

double subsidy_drive(double sdot, Phase phase, double h0, double s_lo) {
  if (phase != Phase::ColdStasis) return 0.0;
  return -h0 * std::max(0.0, 1.0 - sdot / s_lo);
}

double hocbf_barrier(double re, double re_dot, const HocbfParams& p) {
  double h = p.re_max - re;
  if (re_dot > 0.0) h -= 0.5 * p.m_eff * re_dot * re_dot / p.gamma_max;
  return h;
}

double hocbf_filter(double gamma_desired, double re, double re_dot,
                    const HocbfParams& p, double dt) {
  (void)dt;  // hdot is modeled from re_dot directly
  const double h = hocbf_barrier(re, re_dot, p);
  if (h <= 0.0) return p.gamma_max;  // at or past the wall: maximal braking

  // hdot(gamma) = -re_dot + gamma*re_dot^2/gamma_max while approaching;
  // receding needs no braking reserve
  auto constraint = [&](double g) {
    double hdot = -re_dot;
    if (re_dot > 0.0) hdot += g * re_dot * re_dot / p.gamma_max;
    return hdot + p.alpha_cbf * h;
  };
  if (constraint(gamma_desired) >= 0.0) return gamma_desired;
  if (re_dot <= 0.0) return gamma_desired;  // nothing to brake
  const double g_req = (re_dot - p.alpha_cbf * h) * p.gamma_max / (re_dot * re_dot);
  return std::clamp(std::max(gamma_desired, g_req), gamma_desired, p.gamma_max);
}

GovernorState governor_tick(const GovernorState& state,
                            std::span<const MacroTelemetry> micro_batches,
                            const LatticeDomain& domain, const GovernorParams& p) {
  if (micro_batches.empty()) throw std::invalid_argument("governor needs telemetry");
  GovernorState s = state;
  const double alpha = 1.0 - std::exp2(-1.0 / p.ema_half_life);
  const double batch_dt = 1.0 / std::max(1, p.batches_per_epoch);  // epochs

  s.epoch_max_re = 0.0;
  s.epoch_min_h = hocbf_barrier(s.re, s.re_dot, p.hocbf);
  for (const MacroTelemetry& t : micro_batches) {
    const double re_raw = reynolds(t, domain, s.gamma, p.nu0);
    const double sd_raw = entropy_production(t, p.c_txn);
    const double re_prev = s.re;
    s.re = (1.0 - alpha) * s.re + alpha * re_raw;
    s.sdot = (1.0 - alpha) * s.sdot + alpha * sd_raw;
    const double rd_raw = (s.re - re_prev) / batch_dt;
    s.re_dot = (1.0 - alpha) * s.re_dot + alpha * rd_raw;
    s.epoch_max_re = std::max(s.epoch_max_re, s.re);
    s.epoch_min_h = std::min(s.epoch_min_h, hocbf_barrier(s.re, s.re_dot, p.hocbf));
  }

  s.phase = classify_phase(s.re, s.sdot, p.thresholds, s.phase);
  s.h_field = subsidy_drive(s.sdot, s.phase, p.h0, p.thresholds.s_lo);
  LandauParams lp = p.landau;
  lp.h_field = s.h_field;
  s.gamma_desired = landau_gamma(s.re, lp);
  s.h_barrier = hocbf_barrier(s.re, s.re_dot, p.hocbf);
  double g = s.gamma_desired;
  if (p.hocbf_enabled) g = hocbf_filter(g, s.re, s.re_dot, p.hocbf, 1.0);
  s.gamma = std::clamp(g, p.landau.gamma_min, std::max(p.landau.gamma_max, p.hocbf.gamma_max));
  ++s.epoch;
  return s;
}

}  // namespace teg
