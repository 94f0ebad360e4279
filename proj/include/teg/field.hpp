#pragma once

#include "teg/dual.hpp"
#include "teg/lattice.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace teg {

/// RBF hyperparameters broadcast by the governor; agents (here: the
/// projection routine) reconstruct the field from these plus samples.
struct GprParams {
  double lengthscale = 3.0;      // lattice cells
  double signal_variance = 1.0;
  double noise_variance = 1e-4;
  double prior_mean = 0.0;
};

struct FieldWeights {
  double w1 = 1.0;        // weight on physical entropy layer
  double w2 = 1.0;        // weight on auction heat layer
  double price_k = 1.0;   // token scale for entropic price caps
  double eps_price = 0.01;
  double kappa_b = 0.0;   // magnetic coupling
};

struct FieldSample {
  int cx = 0, cy = 0;
  double value = 0.0;
};

inline constexpr int kMaxGprSamples = 4096;

/// Exact GPR posterior mean over the whole lattice (RBF kernel on
/// torus-aware cell distance, dense solve).
Grid project_field(std::span<const FieldSample> samples, const GprParams& params,
                   const LatticeDomain& domain);

/// Phi_eff = w1*S_phys + w2*H_auction, cell-wise.
template <typename D1, typename D2>
auto effective_potential(const Eigen::ArrayBase<D1>& s_phys,
                         const Eigen::ArrayBase<D2>& h_auction, const FieldWeights& w) {
  return w.w1 * s_phys.derived() + w.w2 * h_auction.derived();
}

/// Out-of-plane magnetic magnitude from local bidding heat.
template <typename D>
auto magnetic_field(const Eigen::ArrayBase<D>& h_auction, const FieldWeights& w) {
  return w.kappa_b * h_auction.derived();
}

/// Dual-extend a potential: real = now, dual = backward difference over
/// logical epochs. d_epoch = 0 is rejected.
DualGrid dualize(const Grid& phi_now, const Grid& phi_prev, int d_epoch);

/// Price ceiling inversely proportional to local entropy density.
inline double entropic_price_cap(double s_local, const FieldWeights& w) {
  return w.price_k / (s_local + w.eps_price);
}

/// The holographic dual-layer field plus the caches the dynamics sample.
///
/// grad_real / grad_dual hold per-node central differences of the two
/// phi layers, bilinearly interpolated by the force law; this keeps the
/// force continuous across cells (sample_gradient, the raw surface
/// differencer, stays available for diagnostics).
struct FieldState {
  LatticeDomain domain;
  Grid s_phys, h_auction;
  DualGrid phi;
  Grid b_z;
  long epoch = 0;

  VectorGrid grad_real, grad_dual;

  explicit FieldState(const LatticeDomain& dom)
      : domain(dom),
        s_phys(dom.zero_grid()),
        h_auction(dom.zero_grid()),
        phi(DualGrid::zero(dom)),
        b_z(dom.zero_grid()),
        grad_real(VectorGrid::zero(dom)),
        grad_dual(VectorGrid::zero(dom)) {}

  /// Recompute phi.real, b_z and the real-part gradient from the layers.
  void refresh_layers(const FieldWeights& w) {
    phi.real = effective_potential(s_phys, h_auction, w);
    b_z = magnetic_field(h_auction, w);
    grad_real = node_gradient(domain, phi.real);
  }

  /// Epoch boundary: recompute the dual layer against the previous
  /// epoch's potential.
  void roll_epoch(const Grid& phi_prev_epoch, int d_epoch) {
    phi = dualize(phi.real, phi_prev_epoch, d_epoch);
    grad_dual = node_gradient(domain, phi.dual);
    ++epoch;
  }

  DualScalar phi_at(const Vec2& pos) const { return phi.sample(domain, pos); }
  double bz_at(const Vec2& pos) const { return surface_value(domain, b_z, pos); }

  /// Gradient of the dual-extended potential real + lookahead*dual.
  Vec2 grad_predicted(const Vec2& pos, double lookahead) const {
    Vec2 g = sample_vector(domain, grad_real, pos);
    if (lookahead != 0.0) g += lookahead * sample_vector(domain, grad_dual, pos);
    return g;
  }
};

/// Columnar snapshot: cell_x cell_y s_phys h_auction phi_real phi_dual b_z
void write_field_tsv(std::ostream& os, const FieldState& f);

}  // namespace teg
