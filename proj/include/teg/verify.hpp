#pragma once

#include "teg/baseline.hpp"
#include "teg/scenario.hpp"

#include <vector>

namespace teg {

/// Least-squares quadratic fit of a potential grid over the 3x3 node
/// neighborhood of (cx,cy). Returns the isotropic stiffness K_p; center
/// receives the fitted stationary point, resid the relative fit error.
double fit_kp_quadratic(const Grid& phi, const LatticeDomain& dom, int cx, int cy,
                        Vec2* center = nullptr, double* resid = nullptr);

struct LyapunovCheck {
  bool inconclusive = false;   // non-quadratic neighborhood
  bool monotone = false;       // no increase beyond tolerance after transient
  bool growth_flagged = false; // sustained V growth detected
  double max_increase = 0.0;   // largest single-step V increase after transient
  double vdot_rms_err = 0.0;   // relative RMS error of Vdot vs -gamma*||v||^2
  double fit_residual = 0.0;
};

/// Energy-Lyapunov audit of one trace near a quadratic attractor:
/// V = 0.5*Kp*||e||^2 + 0.5*m*||v||^2 must not increase (beyond tol)
/// after the transient, and Vdot must track -(gamma_gov+gamma_dual)*||v||^2.
LyapunovCheck verify_lyapunov(const std::vector<TraceSample>& trace, double k_p,
                              const Vec2& center, double mass, double gamma_total,
                              double dt, double transient_frac = 0.3,
                              double tol = 1e-6, double fit_residual = 0.0);

/// Paired dynamics runs (B off / B on) over multi-well fields: equilibria
/// must coincide while the magnetic run pays more dissipation. Uses the
/// built-in field bank when cfg carries no wells.
Json verify_equilibrium_invariance(const ScenarioConfig& cfg, double grad_tol = 1e-3);

/// Lyapunov verdicts for every converged agent of a quadratic-bowl
/// dynamics scenario.
Json verify_lyapunov_scenario(const ScenarioConfig& cfg, double tol = 1e-6);

/// Dual-damping A/B: with a delayed gamma broadcast, the dual-enabled run
/// must not overshoot Re harder than the dual-disabled run.
Json verify_damping_comparison(const ScenarioConfig& cfg);

struct ConvergencePoint {
  int n_nodes = 0;
  int radix_m = 0;
  double decay_ratio = 0.0;
  long quiescence_epochs = -1;  // -1: never quiesced
  double teg_latency = 0.0;     // mean cells examined per decision
  double baseline_latency = 0.0;
};

/// Placement-protocol scaling sweep: geometric Delta-S decay per radix,
/// O(1) TEG decision latency vs the N*tau baseline.
Json measure_convergence(const ScenarioConfig& base, const std::vector<int>& n_values,
                         const std::vector<int>& m_values,
                         std::vector<ConvergencePoint>* points = nullptr);

/// Fear premium comparison: measured over-provisioning ratio of the TEG
/// run vs the hoarding baseline, plus the implied released capacity.
Json measure_fear_premium(const ScenarioConfig& cfg, const BaselineModel& model);

/// Thermal comparison of two metric sets under the linear COP model.
Json thermal_proxy(const RunMetrics& teg, const RunMetrics& baseline);

/// Built-in multi-well field bank used by the equilibrium checks.
std::vector<std::vector<WellSpec>> builtin_well_bank();

}  // namespace teg
