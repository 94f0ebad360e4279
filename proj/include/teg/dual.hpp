#pragma once

#include "teg/lattice.hpp"

namespace teg {

/// Dual number a + eps*b with eps^2 = 0. The dual slot carries the
/// per-epoch time derivative of the real slot.
template <typename Scalar = double>
struct Dual {
  Scalar real{};
  Scalar dual{};

  Dual() = default;
  Dual(Scalar r, Scalar d) : real(r), dual(d) {}

  friend Dual operator+(const Dual& a, const Dual& b) {
    return {a.real + b.real, a.dual + b.dual};
  }
  friend Dual operator-(const Dual& a, const Dual& b) {
    return {a.real - b.real, a.dual - b.dual};
  }
  friend Dual operator*(const Dual& a, const Dual& b) {
    return {a.real * b.real, a.real * b.dual + a.dual * b.real};
  }
  friend Dual operator*(Scalar s, const Dual& a) { return {s * a.real, s * a.dual}; }
  friend Dual operator*(const Dual& a, Scalar s) { return s * a; }
  Dual operator-() const { return {-real, -dual}; }

  // first-order extrapolation to now + dt epochs
  Scalar predict(Scalar dt) const { return real + dt * dual; }

  friend bool operator==(const Dual& a, const Dual& b) {
    return a.real == b.real && a.dual == b.dual;
  }
};

using DualScalar = Dual<double>;

/// Grid of dual scalars stored as two coupled layers.
struct DualGrid {
  Grid real, dual;

  static DualGrid zero(const LatticeDomain& dom) {
    return {dom.zero_grid(), dom.zero_grid()};
  }

  DualScalar at(int cx, int cy) const { return {real(cy, cx), dual(cy, cx)}; }

  DualScalar sample(const LatticeDomain& dom, const Vec2& pos) const {
    return {surface_value(dom, real, pos), surface_value(dom, dual, pos)};
  }
};

}  // namespace teg
