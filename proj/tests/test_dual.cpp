#include <doctest.h>

#include "teg/dual.hpp"
#include "teg/rng.hpp"

using teg::Dual;
using teg::DualScalar;

TEST_CASE("dual arithmetic follows the eps^2 = 0 product rule") {
  const DualScalar a(2.0, 3.0), b(5.0, -1.0);
  const DualScalar p = a * b;
  CHECK(p.real == 10.0);
  CHECK(p.dual == 2.0 * -1.0 + 3.0 * 5.0);

  const DualScalar s = a + b;
  CHECK(s.real == 7.0);
  CHECK(s.dual == 2.0);
}

TEST_CASE("product rule holds exactly for random duals") {
  teg::CounterRng rng(42, 7);
  for (int i = 0; i < 1000; ++i) {
    const DualScalar a(rng.next_uniform(-10, 10), rng.next_uniform(-10, 10));
    const DualScalar b(rng.next_uniform(-10, 10), rng.next_uniform(-10, 10));
    const DualScalar p = a * b;
    CHECK(p.dual == a.real * b.dual + a.dual * b.real);  // bitwise, no tolerance
  }
}

TEST_CASE("predict extrapolates along the dual slot") {
  const DualScalar phi(1.5, 0.25);
  CHECK(phi.predict(0.0) == 1.5);
  CHECK(phi.predict(2.0) == doctest::Approx(2.0));
}

TEST_CASE("scalar multiplication scales both slots") {
  const DualScalar a(4.0, -2.0);
  const DualScalar b = 0.5 * a;
  CHECK(b.real == 2.0);
  CHECK(b.dual == -1.0);
}
