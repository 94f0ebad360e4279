#include <doctest.h>

#include "teg/lattice.hpp"
#include "teg/rng.hpp"

using namespace teg;

TEST_CASE("constant grid has zero gradient everywhere") {
  LatticeDomain dom(8, 8, true);
  Grid g = Grid::Constant(8, 8, 3.7);
  CounterRng rng(1, 1);
  for (int i = 0; i < 20; ++i) {
    const Vec2 p(rng.next_uniform(0, 8), rng.next_uniform(0, 8));
    const Vec2 grad = sample_gradient(dom, g, p);
    CHECK(grad.norm() == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("linear plane gradient equals its slope to 1e-9") {
  LatticeDomain dom(12, 9, false);
  Grid g(9, 12);
  for (int cy = 0; cy < 9; ++cy)
    for (int cx = 0; cx < 12; ++cx) g(cy, cx) = cx + 0.5;  // value = x coordinate
  for (double x : {2.0, 4.7, 8.3}) {
    for (double y : {1.5, 4.4, 7.2}) {
      const Vec2 grad = sample_gradient(dom, g, {x, y});
      CHECK(grad.x() == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(grad.y() == doctest::Approx(0.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("quadratic bowl: gradient vanishes at the minimum node") {
  LatticeDomain dom(16, 16, false);
  Grid g(16, 16);
  const Vec2 c(8.5, 8.5);  // on a node center
  for (int cy = 0; cy < 16; ++cy)
    for (int cx = 0; cx < 16; ++cx)
      g(cy, cx) = 0.5 * (Vec2(cx + 0.5, cy + 0.5) - c).squaredNorm();
  // symbolic oracle: minimum of the interpolated surface is the center node
  const Vec2 grad = sample_gradient(dom, g, c);
  CHECK(grad.norm() < 1e-6);
}

TEST_CASE("sample_gradient matches finite differences of the surface") {
  // property: the reported gradient IS the central difference of the
  // interpolated surface, for arbitrary grids and positions
  LatticeDomain dom(10, 7, true);
  CounterRng rng(99, 3);
  Grid g(7, 10);
  for (int cy = 0; cy < 7; ++cy)
    for (int cx = 0; cx < 10; ++cx) g(cy, cx) = rng.next_uniform(-5, 5);
  for (int i = 0; i < 200; ++i) {
    const Vec2 p(rng.next_uniform(0, 10), rng.next_uniform(0, 7));
    const Vec2 grad = sample_gradient(dom, g, p);
    const double d = 1e-4;
    const double fx = (surface_value(dom, g, p + Vec2(d, 0)) -
                       surface_value(dom, g, p - Vec2(d, 0))) / (2 * d);
    const double fy = (surface_value(dom, g, p + Vec2(0, d)) -
                       surface_value(dom, g, p - Vec2(0, d))) / (2 * d);
    CHECK(grad.x() == doctest::Approx(fx).epsilon(1e-6));
    CHECK(grad.y() == doctest::Approx(fy).epsilon(1e-6));
  }
}

TEST_CASE("positions outside a bounded domain feel an inward push") {
  LatticeDomain dom(8, 8, false);
  Grid g = Grid::Zero(8, 8);
  const Vec2 outside(9.5, 4.0);
  const Vec2 grad = sample_gradient(dom, g, outside);
  // -grad is the force: must point back toward the domain
  CHECK(-grad.x() < 0.0);
  CHECK(grad.y() == doctest::Approx(0.0));
}

TEST_CASE("torus wrap: interpolation is periodic") {
  LatticeDomain dom(8, 8, true);
  CounterRng rng(5, 5);
  Grid g(8, 8);
  for (int cy = 0; cy < 8; ++cy)
    for (int cx = 0; cx < 8; ++cx) g(cy, cx) = rng.next_uniform(0, 1);
  const Vec2 p(0.2, 3.3);
  CHECK(surface_value(dom, g, p) ==
        doctest::Approx(surface_value(dom, g, p + Vec2(8, 0))).epsilon(1e-12));
  CHECK(surface_value(dom, g, p) ==
        doctest::Approx(surface_value(dom, g, p + Vec2(0, -8))).epsilon(1e-12));
}

TEST_CASE("node gradient of an exact quadratic is the exact derivative") {
  // central differences of a quadratic are exact at the nodes, so the
  // interpolated force field is an exact linear spring
  LatticeDomain dom(16, 16, false);
  Grid g(16, 16);
  const Vec2 c(8.5, 8.5);
  const double k = 0.3;
  for (int cy = 0; cy < 16; ++cy)
    for (int cx = 0; cx < 16; ++cx)
      g(cy, cx) = 0.5 * k * (Vec2(cx + 0.5, cy + 0.5) - c).squaredNorm();
  const VectorGrid vg = node_gradient(dom, g);
  CounterRng rng(17, 2);
  for (int i = 0; i < 50; ++i) {
    const Vec2 p(rng.next_uniform(2, 14), rng.next_uniform(2, 14));
    const Vec2 grad = sample_vector(dom, vg, p);
    const Vec2 expected = k * (p - c);
    CHECK(grad.x() == doctest::Approx(expected.x()).epsilon(1e-9));
    CHECK(grad.y() == doctest::Approx(expected.y()).epsilon(1e-9));
  }
}

TEST_CASE("domain diameter") {
  CHECK(LatticeDomain(60, 80, false).diameter() == doctest::Approx(100.0));
  CHECK(LatticeDomain(8, 6, true).diameter() == doctest::Approx(5.0));
}

TEST_CASE("cell mapping and invariants") {
  CHECK_THROWS_AS(LatticeDomain(0, 5), std::invalid_argument);
  LatticeDomain dom(4, 4, true);
  CHECK(dom.cell_x(4.2) == 0);  // wraps
  CHECK(dom.cell_x(-0.1) == 3);
  LatticeDomain bounded(4, 4, false);
  CHECK(bounded.cell_x(4.2) == 3);  // clamps
  // every node index maps to exactly one cell
  std::vector<int> seen(16, 0);
  for (int cy = 0; cy < 4; ++cy)
    for (int cx = 0; cx < 4; ++cx) seen[dom.cell_index(cx, cy)]++;
  for (int s : seen) CHECK(s == 1);
}
