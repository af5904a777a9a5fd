#include <doctest.h>

#include <cmath>
#include <random>

#include "diffsmooth/closure.hpp"
#include "diffsmooth/error.hpp"
#include "diffsmooth/gaussian.hpp"

using namespace diffsmooth;

TEST_CASE("Laurent arithmetic matches pointwise evaluation") {
  const Laurent p{1.0, -2.0, 0.5};
  const Laurent q = Laurent::monomial(3.0, -1) + Laurent{0.0, 1.0};
  for (double x : {-1.5, 0.3, 2.0}) {
    CHECK((p * q)(x) == doctest::Approx(p(x) * q(x)));
    CHECK((p + q)(x) == doctest::Approx(p(x) + q(x)));
    CHECK((p - q)(x) == doctest::Approx(p(x) - q(x)));
    CHECK((2.5 * p)(x) == doctest::Approx(2.5 * p(x)));
    CHECK(p.shifted(-2)(x) == doctest::Approx(p(x) / (x * x)));
    CHECK(p.derivative()(x) == doctest::Approx(-2.0 + x));
    CHECK(q.derivative()(x) == doctest::Approx(-3.0 / (x * x) + 1.0));
  }
  CHECK(p.degree() == 2);
  CHECK(Laurent().degree() < Laurent::kMinExp);
}

TEST_CASE("Laurent product with zero edge coefficients") {
  Laurent a;
  a.set(-3, 0.0);
  a.set(4, 0.0);
  a.set(1, 2.0);
  Laurent b;
  b.set(-4, 0.0);
  b.set(8, 0.0);
  b.set(2, 3.0);
  const Laurent c = a * b;
  CHECK(c.coef(3) == 6.0);
  CHECK(c(2.0) == doctest::Approx(48.0));
}

TEST_CASE("Laurent exponent range") {
  CHECK_THROWS_AS(Laurent::monomial(1.0, 11), Error);
  CHECK_THROWS_AS(Laurent::monomial(1.0, 6) * Laurent::monomial(1.0, 6), Error);
  CHECK_NOTHROW(Laurent::monomial(0.0, 20));
}

TEST_CASE("closure expectations match raw moments") {
  const GaussianMoments g(1.3, 0.4, InverseMomentRule::FirstOrder);
  const Laurent p{0.5, -1.0, 2.0, 0.25};
  double expect = 0.0;
  for (int n = 0; n <= 3; ++n) expect += p.coef(n) * gaussian_raw_moment(n, 1.3, 0.4);
  CHECK(g.expect(p) == doctest::Approx(expect));
  CHECK(g.moment(-1) == doctest::Approx(inverse_moment_approx(1, GaussianParams(1.3, 0.4))));
  CHECK(g.moment(-2) == doctest::Approx(inverse_moment_approx(2, GaussianParams(1.3, 0.4))));
  const GaussianMoments h(1.3, 0.4, InverseMomentRule::SecondOrder);
  CHECK(h.moment(-1) == doctest::Approx(inverse_moment_second_order(1, GaussianParams(1.3, 0.4))));
  CHECK(h.moment(-2) == doctest::Approx(inverse_moment_second_order(2, GaussianParams(1.3, 0.4))));
}

TEST_CASE("closure derivatives match finite differences") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> mu(0.5, 3.0), var(0.01, 0.5), c(-1.0, 1.0);
  for (auto rule : {InverseMomentRule::FirstOrder, InverseMomentRule::SecondOrder}) {
    for (int trial = 0; trial < 50; ++trial) {
      Laurent p;
      for (int e = -2; e <= 6; ++e) p.set(e, c(rng));
      const double m = mu(rng);
      const double S = var(rng);
      const GaussianMoments g(m, S, rule);
      const double hm = 1e-6 * m;
      const double hS = 1e-6 * S;
      const double dm = (GaussianMoments(m + hm, S, rule).expect(p) -
                         GaussianMoments(m - hm, S, rule).expect(p)) / (2 * hm);
      const double dS = (GaussianMoments(m, S + hS, rule).expect(p) -
                         GaussianMoments(m, S - hS, rule).expect(p)) / (2 * hS);
      CHECK(g.d_mean(p) == doctest::Approx(dm).epsilon(1e-6));
      CHECK(g.d_var(p) == doctest::Approx(dS).epsilon(1e-6));
    }
  }
}

TEST_CASE("closure refuses unsupported inverse moments") {
  const GaussianMoments g(1.0, 0.1, InverseMomentRule::FirstOrder);
  CHECK_THROWS_AS(g.expect(Laurent::monomial(1.0, -3)), Error);
  const GaussianMoments z(0.0, 0.1, InverseMomentRule::FirstOrder);
  try {
    z.expect(Laurent::monomial(1.0, -1));
    FAIL("expected near-singular mean");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NearSingularMean);
  }
  CHECK(z.expect(Laurent{1.0, 0.0, 1.0}) == doctest::Approx(1.1));
}
