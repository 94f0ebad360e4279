#include <doctest.h>

#include "teg/field.hpp"
#include "teg/rng.hpp"

#include <sstream>
#include <vector>

using namespace teg;

TEST_CASE("gpr with no samples returns the prior everywhere") {
  LatticeDomain dom(6, 6, true);
  GprParams p;
  p.prior_mean = 0.42;
  const Grid g = project_field({}, p, dom);
  CHECK(g.minCoeff() == doctest::Approx(0.42));
  CHECK(g.maxCoeff() == doctest::Approx(0.42));
}

TEST_CASE("single-sample posterior matches the hand solve k(k+s)^-1 y") {
  LatticeDomain dom(9, 9, true);
  GprParams p;
  p.signal_variance = 1.0;
  p.noise_variance = 0.1;
  p.prior_mean = 0.0;
  p.lengthscale = 2.0;
  std::vector<FieldSample> s{{4, 4, 1.0}};
  const Grid g = project_field(s, p, dom);
  // hand-solve oracle: posterior at the sample cell = k/(k+sigma_n^2) * y
  CHECK(g(4, 4) == doctest::Approx(1.0 / 1.1).epsilon(1e-12));
  // and one cell away: k(d=1) * alpha with alpha = y/(k0+sigma_n^2)
  const double k1 = std::exp(-1.0 / (2.0 * 4.0));
  CHECK(g(4, 5) == doctest::Approx(k1 / 1.1).epsilon(1e-12));
}

TEST_CASE("cells far beyond the lengthscale decay to the prior") {
  LatticeDomain dom(32, 32, false);
  GprParams p;
  p.lengthscale = 1.0;
  p.prior_mean = 0.25;
  p.noise_variance = 0.01;
  std::vector<FieldSample> s{{0, 0, 3.0}, {1, 0, 2.0}};
  const Grid g = project_field(s, p, dom);
  CHECK(std::abs(g(31, 31) - 0.25) < 1e-6);
}

TEST_CASE("gpr posterior interpolates samples within noise tolerance") {
  LatticeDomain dom(12, 12, true);
  GprParams p;
  p.lengthscale = 2.5;
  p.noise_variance = 1e-6;
  CounterRng rng(3, 3);
  std::vector<FieldSample> s;
  for (int i = 0; i < 12; ++i)
    s.push_back({static_cast<int>(rng.next_uniform(0, 12)),
                 static_cast<int>(rng.next_uniform(0, 12)), rng.next_uniform(0, 2)});
  // dedupe cells (zero-distance pairs would need noise)
  std::vector<FieldSample> uniq;
  for (const auto& a : s) {
    bool dup = false;
    for (const auto& b : uniq) dup = dup || (a.cx == b.cx && a.cy == b.cy);
    if (!dup) uniq.push_back(a);
  }
  const Grid g = project_field(uniq, p, dom);
  for (const auto& a : uniq) CHECK(std::abs(g(a.cy, a.cx) - a.value) < 1e-3);
}

TEST_CASE("gpr posterior is invariant to sample ordering") {
  LatticeDomain dom(10, 10, true);
  GprParams p;
  std::vector<FieldSample> s{{1, 1, 0.5}, {7, 2, 1.5}, {4, 8, -0.7}, {2, 6, 0.9}};
  const Grid a = project_field(s, p, dom);
  std::reverse(s.begin(), s.end());
  const Grid b = project_field(s, p, dom);
  CHECK((a - b).abs().maxCoeff() < 1e-9);
}

TEST_CASE("duplicate samples with zero noise are rejected") {
  LatticeDomain dom(5, 5, true);
  GprParams p;
  p.noise_variance = 0.0;
  std::vector<FieldSample> s{{2, 2, 1.0}, {2, 2, 1.1}};
  CHECK_THROWS_AS(project_field(s, p, dom), std::invalid_argument);
}

TEST_CASE("samples outside the domain are rejected") {
  LatticeDomain dom(5, 5, true);
  GprParams p;
  std::vector<FieldSample> s{{5, 2, 1.0}};
  CHECK_THROWS_AS(project_field(s, p, dom), std::invalid_argument);
}

TEST_CASE("effective potential is the weighted layer sum") {
  LatticeDomain dom(4, 4, true);
  FieldWeights w;
  w.w1 = 1.0;
  w.w2 = 2.0;
  Grid s = Grid::Constant(4, 4, 0.3);
  Grid h = Grid::Constant(4, 4, 0.1);
  const Grid phi = effective_potential(s, h, w);
  CHECK(phi(0, 0) == doctest::Approx(0.5));

  w.w2 = 0.0;
  const Grid phi2 = effective_potential(s, h, w);
  CHECK((phi2 - s).abs().maxCoeff() == doctest::Approx(0.0));  // zero weight

  // idle-but-hot node repels: s = 0, h > 0 still yields a positive hill
  w.w1 = 1.0;
  w.w2 = 1.0;
  Grid s0 = Grid::Zero(4, 4);
  const Grid phi3 = effective_potential(s0, h, w);
  CHECK(phi3(2, 2) == doctest::Approx(0.1));
}

TEST_CASE("effective potential is linear in each layer") {
  LatticeDomain dom(3, 3, true);
  FieldWeights w;
  w.w1 = 0.7;
  w.w2 = 1.3;
  CounterRng rng(8, 1);
  Grid s(3, 3), h(3, 3);
  for (int i = 0; i < 9; ++i) {
    s(i / 3, i % 3) = rng.next_uniform(0, 1);
    h(i / 3, i % 3) = rng.next_uniform(0, 1);
  }
  const Grid a = effective_potential(s, h, w);
  const Grid b = effective_potential(Grid(2.0 * s), h, w);
  CHECK(((b - a) - w.w1 * s).abs().maxCoeff() < 1e-12);
}

TEST_CASE("dualize: backward difference over logical epochs") {
  LatticeDomain dom(4, 4, true);
  Grid now = Grid::Constant(4, 4, 1.5);
  Grid prev = Grid::Constant(4, 4, 1.0);

  const DualGrid d1 = dualize(now, prev, 2);
  CHECK(d1.at(1, 1).real == doctest::Approx(1.5));
  CHECK(d1.at(1, 1).dual == doctest::Approx(0.25));

  const DualGrid d2 = dualize(now, now, 1);  // static field
  CHECK(d2.at(2, 3).dual == doctest::Approx(0.0));

  Grid prev2 = now - 0.2;
  const DualGrid d3 = dualize(now, prev2, 1);  // unit difference
  CHECK(d3.at(0, 0).dual == doctest::Approx(0.2));

  CHECK_THROWS_AS(dualize(now, prev, 0), std::invalid_argument);
}

TEST_CASE("entropic price cap: inverse entropy with a floor guard") {
  FieldWeights w;
  w.price_k = 1.0;
  w.eps_price = 0.01;
  CHECK(entropic_price_cap(0.0, w) == doctest::Approx(100.0));
  CHECK(entropic_price_cap(0.99, w) == doctest::Approx(1.0));
  CHECK(entropic_price_cap(1e9, w) < 1e-6);  // asymptote to zero

  // strictly decreasing
  double prev = entropic_price_cap(0.0, w);
  for (double s = 0.1; s < 5.0; s += 0.1) {
    const double cur = entropic_price_cap(s, w);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("magnetic field is proportional to bidding heat") {
  FieldWeights w;
  w.kappa_b = 2.0;
  Grid h = Grid::Constant(3, 3, 0.5);
  const Grid b = magnetic_field(h, w);
  CHECK(b(1, 1) == doctest::Approx(1.0));

  Grid h0 = Grid::Zero(3, 3);
  const Grid b0 = magnetic_field(h0, w);
  CHECK(b0.abs().maxCoeff() == doctest::Approx(0.0));  // calm market, no sorting

  // peak heat -> peak deflection at the same cell
  Grid hp = Grid::Zero(3, 3);
  hp(2, 1) = 3.0;
  const Grid bp = magnetic_field(hp, w);
  int max_r = 0, max_c = 0;
  bp.maxCoeff(&max_r, &max_c);
  CHECK(max_r == 2);
  CHECK(max_c == 1);
}

TEST_CASE("field snapshot serializes the documented columns") {
  FieldState f{LatticeDomain(2, 2, true)};
  f.s_phys(0, 1) = 0.5;
  FieldWeights w;
  f.refresh_layers(w);
  std::ostringstream os;
  write_field_tsv(os, f);
  std::istringstream in(os.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "cell_x\tcell_y\ts_phys\th_auction\tphi_real\tphi_dual\tb_z");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 4);
}
