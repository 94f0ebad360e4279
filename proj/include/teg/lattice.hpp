#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace teg {

using Grid = Eigen::ArrayXXd;  // indexed (cy, cx): rows = height, cols = width
using Vec2 = Eigen::Vector2d;

/// 2-D lattice of node-cells. Continuous positions live in
/// [0,width) x [0,height); the node value of cell (cx,cy) sits at the
/// cell center (cx+0.5, cy+0.5).
struct LatticeDomain {
  int width = 1;
  int height = 1;
  bool wrap = true;  // torus vs bounded
  double cell_size = 1.0;

  LatticeDomain() = default;
  LatticeDomain(int w, int h, bool wrap_ = true) : width(w), height(h), wrap(wrap_) {
    if (w < 1 || h < 1) throw std::invalid_argument("lattice dimensions must be >= 1");
  }

  int cells() const { return width * height; }
  int cell_index(int cx, int cy) const { return cy * width + cx; }

  Grid zero_grid() const { return Grid::Zero(height, width); }

  // geometric diameter: farthest pair of points
  double diameter() const {
    if (wrap) return std::hypot(width * 0.5, height * 0.5);
    return std::hypot(static_cast<double>(width), static_cast<double>(height));
  }

  static int wrap_index(int i, int n) {
    int m = i % n;
    return m < 0 ? m + n : m;
  }

  // cell containing a continuous position (positions outside a bounded
  // domain clamp to the edge cell)
  int cell_x(double x) const {
    int cx = static_cast<int>(std::floor(x));
    if (wrap) return wrap_index(cx, width);
    return std::clamp(cx, 0, width - 1);
  }
  int cell_y(double y) const {
    int cy = static_cast<int>(std::floor(y));
    if (wrap) return wrap_index(cy, height);
    return std::clamp(cy, 0, height - 1);
  }

  Vec2 wrap_pos(Vec2 p) const {
    if (!wrap) return p;
    p.x() -= width * std::floor(p.x() / width);
    p.y() -= height * std::floor(p.y() / height);
    return p;
  }

  // minimum-image displacement a - b
  Vec2 min_image(Vec2 d) const {
    if (!wrap) return d;
    d.x() -= width * std::round(d.x() / width);
    d.y() -= height * std::round(d.y() / height);
    return d;
  }

  // squared distance between two cell centers (torus-aware), in cell units
  double cell_dist2(int ax, int ay, int bx, int by) const {
    double dx = std::abs(ax - bx);
    double dy = std::abs(ay - by);
    if (wrap) {
      dx = std::min(dx, width - dx);
      dy = std::min(dy, height - dy);
    }
    return dx * dx + dy * dy;
  }

  bool contains(const Vec2& p) const {
    return p.x() >= 0.0 && p.x() < width && p.y() >= 0.0 && p.y() < height;
  }
};

namespace detail {

// clamp a node coordinate for bounded domains; (u,v) are in node space
// (u = x - 0.5 so that node (cx,cy) sits at u = cx)
inline void corner_weights(int n, bool wrap, double u, int& i0, int& i1, double& f) {
  if (wrap) {
    double fl = std::floor(u);
    f = u - fl;
    i0 = LatticeDomain::wrap_index(static_cast<int>(fl), n);
    i1 = LatticeDomain::wrap_index(i0 + 1, n);
  } else {
    u = std::clamp(u, 0.0, static_cast<double>(n - 1));
    i0 = std::min(static_cast<int>(std::floor(u)), n - 1);
    i1 = std::min(i0 + 1, n - 1);
    f = u - i0;
  }
}

}  // namespace detail

/// Bilinear interpolation of a node grid at a continuous position.
/// Outside a bounded domain the surface extends flat from the edge.
inline double surface_value(const LatticeDomain& dom, const Grid& g, const Vec2& pos) {
  int i0, i1, j0, j1;
  double fx, fy;
  detail::corner_weights(dom.width, dom.wrap, pos.x() - 0.5, i0, i1, fx);
  detail::corner_weights(dom.height, dom.wrap, pos.y() - 0.5, j0, j1, fy);
  const double v00 = g(j0, i0), v10 = g(j0, i1), v01 = g(j1, i0), v11 = g(j1, i1);
  return (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
}

/// Finite-difference gradient of the bilinearly interpolated surface.
/// Positions outside a bounded domain are clamped and an outward-repelling
/// boundary term is added so that -grad pushes back inside.
inline Vec2 sample_gradient(const LatticeDomain& dom, const Grid& g, Vec2 pos,
                            double delta = 1e-4, double wall_gain = 1.0) {
  Vec2 wall = Vec2::Zero();
  if (!dom.wrap) {
    Vec2 clamped(std::clamp(pos.x(), 0.0, static_cast<double>(dom.width)),
                 std::clamp(pos.y(), 0.0, static_cast<double>(dom.height)));
    wall = wall_gain * (pos - clamped);
    pos = clamped;
  }
  const double gx = (surface_value(dom, g, pos + Vec2(delta, 0)) -
                     surface_value(dom, g, pos - Vec2(delta, 0))) /
                    (2 * delta);
  const double gy = (surface_value(dom, g, pos + Vec2(0, delta)) -
                     surface_value(dom, g, pos - Vec2(0, delta))) /
                    (2 * delta);
  return Vec2(gx, gy) + wall;
}

/// Per-node vector field (e.g. a gradient field), bilinearly sampled.
struct VectorGrid {
  Grid x, y;

  static VectorGrid zero(const LatticeDomain& dom) {
    return {dom.zero_grid(), dom.zero_grid()};
  }
};

/// Central differences of a node grid, one component per node.
/// Torus-wrapped when the domain wraps; one-sided at bounded edges.
inline VectorGrid node_gradient(const LatticeDomain& dom, const Grid& g) {
  VectorGrid out = VectorGrid::zero(dom);
  const int w = dom.width, h = dom.height;
  for (int cy = 0; cy < h; ++cy) {
    for (int cx = 0; cx < w; ++cx) {
      int xl = cx - 1, xr = cx + 1, yl = cy - 1, yr = cy + 1;
      double sx = 2.0, sy = 2.0;
      if (dom.wrap) {
        xl = LatticeDomain::wrap_index(xl, w);
        xr = LatticeDomain::wrap_index(xr, w);
        yl = LatticeDomain::wrap_index(yl, h);
        yr = LatticeDomain::wrap_index(yr, h);
      } else {
        if (xl < 0) { xl = 0; sx = 1.0; }
        if (xr >= w) { xr = w - 1; sx = 1.0; }
        if (yl < 0) { yl = 0; sy = 1.0; }
        if (yr >= h) { yr = h - 1; sy = 1.0; }
        if (w == 1) sx = 1.0;
        if (h == 1) sy = 1.0;
      }
      out.x(cy, cx) = (g(cy, xr) - g(cy, xl)) / sx;
      out.y(cy, cx) = (g(yr, cx) - g(yl, cx)) / sy;
    }
  }
  return out;
}

/// Sample a node vector field at a continuous position (bilinear per
/// component, wall term at bounded edges as in sample_gradient).
inline Vec2 sample_vector(const LatticeDomain& dom, const VectorGrid& vg, Vec2 pos,
                          double wall_gain = 1.0) {
  Vec2 wall = Vec2::Zero();
  if (!dom.wrap) {
    Vec2 clamped(std::clamp(pos.x(), 0.0, static_cast<double>(dom.width)),
                 std::clamp(pos.y(), 0.0, static_cast<double>(dom.height)));
    wall = wall_gain * (pos - clamped);
    pos = clamped;
  }
  return Vec2(surface_value(dom, vg.x, pos), surface_value(dom, vg.y, pos)) + wall;
}

}  // namespace teg
