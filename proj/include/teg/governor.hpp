#pragma once

#include "teg/lattice.hpp"

#include <span>

namespace teg {

/// Per-micro-batch telemetry summary. All fields are non-negative rates
/// or densities; dissipation uses the magnitude of the applied damping.
struct MacroTelemetry {
  double mean_speed = 0.0;
  double agent_density = 0.0;  // agents per cell
  double dissipation = 0.0;    // sum |gamma| * ||v||^2 over the batch
  double migration_rate = 0.0; // cross-cell moves per epoch
  double bid_rate = 0.0;       // bids per epoch
};

struct LandauParams {
  double a = 1.0;
  double b = 1.0;     // > 0 keeps the free energy bounded below
  double re_c = 50.0;
  double h_field = 0.0;  // external (subsidy) drive
  double gamma_min = -1.0;
  double gamma_max = 10.0;
};

struct HocbfParams {
  double re_max = 1000.0;
  double gamma_max = 10.0;  // maximal braking damping
  double alpha_cbf = 1.0;   // class-K gain
  double m_eff = 1.0;       // effective macro inertia
};

struct PhaseThresholds {
  double s_lo = 0.1, s_hi = 1.0;
  double r_lo = 10.0, r_hi = 100.0;
};

enum class Phase { ColdStasis, HeatDeath, LaminarFlow };

const char* to_string(Phase p);

/// Cluster Reynolds analog: (mean speed * density * diameter) /
/// (|gamma| + nu0).
double reynolds(const MacroTelemetry& t, const LatticeDomain& domain, double gamma,
                double nu0);

/// Entropy production: frictional heat plus market churn.
double entropy_production(const MacroTelemetry& t, double c_txn);

/// Phase classification with hysteresis on the ambiguous corners.
Phase classify_phase(double re, double sdot, const PhaseThresholds& thr, Phase previous);

/// Landau free energy F(g) = (a/2)(Re_c - Re) g^2 + (b/4) g^4 - H g.
double landau_free_energy(double gamma, double re, const LandauParams& p);

/// Global minimizer of F over [gamma_min, gamma_max]; among symmetric
/// minima the non-negative branch wins.
double landau_gamma(double re, const LandauParams& p);

/// Melt drive: H = -h0 * max(0, 1 - sdot/s_lo) in Cold Stasis, else 0.
double subsidy_drive(double sdot, Phase phase, double h0, double s_lo);

/// Barrier h = headroom - worst-case stopping distance (momentum term
/// only while approaching the wall).
double hocbf_barrier(double re, double re_dot, const HocbfParams& p);

/// Monotone safety filter: returns the smallest gamma >= gamma_desired
/// restoring hdot + alpha*h >= 0 under the braking model
/// d(Re_dot)/dt = -(gamma/m_eff) Re_dot; maximal braking at h <= 0.
double hocbf_filter(double gamma_desired, double re, double re_dot,
                    const HocbfParams& p, double dt);

struct GovernorParams {
  LandauParams landau;
  HocbfParams hocbf;
  PhaseThresholds thresholds;
  double nu0 = 0.5;
  double c_txn = 0.0;
  double h0 = 0.5;               // subsidy drive scale
  double ema_half_life = 10.0;   // micro-batches
  int batches_per_epoch = 20;
  bool hocbf_enabled = true;
};

struct GovernorState {
  double gamma = 0.0;
  double re = 0.0;    // smoothed
  double sdot = 0.0;  // smoothed
  double re_dot = 0.0;
  Phase phase = Phase::ColdStasis;
  long epoch = 0;

  // last decision diagnostics (for the governor log row)
  double gamma_desired = 0.0;
  double h_barrier = 0.0;
  double h_field = 0.0;

  // batch-granularity extremes seen during the last epoch
  double epoch_max_re = 0.0;
  double epoch_min_h = 0.0;
};

/// One governor epoch: smooth the micro-batch stream, then classify ->
/// subsidy -> Landau -> HOCBF. The returned gamma is the epoch broadcast;
/// it never changes between epochs.
GovernorState governor_tick(const GovernorState& state,
                            std::span<const MacroTelemetry> micro_batches,
                            const LatticeDomain& domain, const GovernorParams& p);

}  // namespace teg
