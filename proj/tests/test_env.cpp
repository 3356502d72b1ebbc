#include <doctest.h>

#include <cmath>

#include "cutwalk/environment.hpp"
#include "cutwalk/rng.hpp"

using namespace cutwalk;

namespace {

// Independent oracle: the two roots of x^2 = a x + b straight from the
// quadratic formula, plus residual checks.
struct Roots {
  double rho, sigma;
};
Roots quadratic_oracle(double a, double b) {
  double d = std::sqrt(a * a + 4.0 * b);
  return Roots{0.5 * (a + d), 0.5 * (a - d)};
}

Environment e0() { return Environment::constant(0.5, 0.25, 0.25); }
Environment e1() { return Environment::constant(0.7, 0.2, 0.1); }

}  // namespace

TEST_CASE("constant environment: a_k, b_k from direct substitution") {
  Environment env = e0();
  CHECK(env.a_k(2) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(env.b_k(2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(env.limit_a() == doctest::Approx(1.0));
  CHECK(env.limit_b() == doctest::Approx(0.5));

  Environment env1 = e1();
  CHECK(env1.a_k(7) == doctest::Approx(3.0 / 7.0).epsilon(1e-15));
  CHECK(env1.b_k(7) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
}

TEST_CASE("constant environment rejects non-model laws") {
  CHECK_THROWS_AS(Environment::constant(0.5, 0.5, 0.0), ConfigError);   // p2 = 0
  CHECK_THROWS_AS(Environment::constant(0.0, 0.5, 0.5), ConfigError);   // q = 0
  CHECK_THROWS_AS(Environment::constant(0.5, -0.1, 0.6), ConfigError);  // p1 < 0
  CHECK_THROWS_AS(Environment::constant(0.5, 0.3, 0.3), ConfigError);   // sum != 1
}

TEST_CASE("site_params matches the quadratic-root oracle") {
  // Frozen oracle values for E0 and E1.
  Roots r0 = quadratic_oracle(1.0, 0.5);
  CHECK(r0.rho == doctest::Approx(1.3660254037844386).epsilon(1e-15));
  CHECK(r0.sigma == doctest::Approx(-0.3660254037844386).epsilon(1e-15));
  Roots r1 = quadratic_oracle(3.0 / 7.0, 1.0 / 7.0);
  CHECK(r1.rho == doctest::Approx(0.6487687521641585).epsilon(1e-15));
  CHECK(r1.sigma == doctest::Approx(-0.2201973235927300).epsilon(1e-14));

  SiteParams p0 = e0().site_params(5);
  CHECK(p0.rho == doctest::Approx(r0.rho).epsilon(1e-14));
  CHECK(p0.sigma == doctest::Approx(r0.sigma).epsilon(1e-14));
  SiteParams p1 = e1().site_params(17);
  CHECK(p1.rho == doctest::Approx(r1.rho).epsilon(1e-14));
  CHECK(p1.sigma == doctest::Approx(r1.sigma).epsilon(1e-14));

  CHECK_THROWS_AS(e0().site_params(1), ModelError);  // sites 0,1 forced
}

TEST_CASE("companion_roots degenerate b = 0") {
  EigenPair ev = companion_roots(0.8, 0.0);
  CHECK(ev.rho == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(ev.sigma == 0.0);
  EigenPair ev1 = companion_roots(1.0, 0.0);
  CHECK(ev1.rho == doctest::Approx(1.0));
  CHECK(ev1.sigma == 0.0);
}

TEST_CASE("limit constants and tau branches") {
  LimitConstants lc0 = e0().limits();
  CHECK(lc0.rho == doctest::Approx(1.3660254037844386).epsilon(1e-14));
  CHECK(lc0.sigma == doctest::Approx(-0.3660254037844386).epsilon(1e-14));
  CHECK(lc0.tau == doctest::Approx(0.3660254037844386).epsilon(1e-14));  // rho >= 1: -sigma
  CHECK(lc0.rho * lc0.sigma == doctest::Approx(-lc0.b).epsilon(1e-13));
  CHECK(lc0.rho + lc0.sigma == doctest::Approx(lc0.a).epsilon(1e-13));

  LimitConstants lc1 = e1().limits();
  CHECK(lc1.a_hat == doctest::Approx(0.8990133820363501).epsilon(1e-13));
  CHECK(lc1.tau == doctest::Approx(0.1377865986823390).epsilon(1e-13));
  CHECK(lc1.tau == doctest::Approx(0.137788).epsilon(1e-4));  // stated decimal
}

TEST_CASE("corollary r_n and the near-critical target") {
  CHECK(corollary_r(2, 0.0) == corollary_r(4, 0.0));
  CHECK(corollary_r(3, 1.0) == corollary_r(4, 1.0));
  // beta = 0: 3 r_k = 2/k.
  CHECK(3.0 * corollary_r(10'000, 0.0) == doctest::Approx(2e-4).epsilon(1e-12));
  // beta = 1 at n = 4 overshoots 1, killing the X-side inversion.
  CHECK(3.0 * corollary_r(4, 1.0) == doctest::Approx(1.0153820515233869).epsilon(1e-13));

  Environment env = Environment::corollary(0.0, PerturbSign::Y, 0.25, 16);
  CHECK(env.rho_k(10'000) == doctest::Approx(1.0002).epsilon(1e-13));
  CHECK(env.near_critical());
  CHECK(env.limits().rho == doctest::Approx(1.0).epsilon(1e-13));

  try {
    Environment::corollary(1.0, PerturbSign::X, 0.25, 4);
    FAIL("expected FeasibilityError");
  } catch (const FeasibilityError& e) {
    CHECK(e.smallest_feasible_n0 > 4);
    CHECK(3.0 * corollary_r(e.smallest_feasible_n0, 1.0) < 1.0);
  }
}

TEST_CASE("corollary inversion round trip") {
  for (double beta : {0.0, 0.5, 2.0}) {
    for (PerturbSign sign : {PerturbSign::X, PerturbSign::Y}) {
      Environment env = Environment::corollary(beta, sign, 0.25);
      for (std::int64_t k : {2ll, 5ll, 37ll, 1000ll, 123456ll}) {
        SiteLaw s = env.site(k);
        CHECK(s.q + s.p1 + s.p2 == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(s.q > 0.0);
        CHECK(s.p1 >= 0.0);
        CHECK(s.p2 > 0.0);
        SiteParams p = env.site_params(k);
        CHECK(p.rho == doctest::Approx(env.rho_k(k)).epsilon(1e-12));
      }
      // clamped region carries rho_{n0}
      CHECK(env.rho_k(2) == doctest::Approx(env.rho_k(env.n0())).epsilon(1e-15));
    }
  }
}

TEST_CASE("corollary rho monotone on the tail") {
  Environment ey = Environment::corollary(0.5, PerturbSign::Y, 0.25, 16);
  Environment ex = Environment::corollary(0.5, PerturbSign::X, 0.25, 16);
  double prev_y = ey.rho_k(16), prev_x = ex.rho_k(16);
  for (std::int64_t k = 17; k < 3000; k += 13) {
    double ry = ey.rho_k(k), rx = ex.rho_k(k);
    CHECK(ry < prev_y);  // decreasing toward 1 from above
    CHECK(rx > prev_x);  // increasing toward 1 from below
    CHECK(ry > 1.0);
    CHECK(rx < 1.0);
    prev_y = ry;
    prev_x = rx;
  }
  CHECK(ey.rho_monotonicity() == RhoMonotonicity::Decreasing);
  CHECK(ex.rho_monotonicity() == RhoMonotonicity::Increasing);
}

TEST_CASE("from_rho reproduces a target rho table") {
  RngStream rng(81234, 0);
  std::vector<double> rho;
  for (int i = 0; i < 200; ++i) rho.push_back(0.8 + 0.5 * rng.next_unit());
  Environment env = Environment::from_rho(rho, 0.25);
  for (std::size_t i = 0; i < rho.size(); ++i) {
    std::int64_t k = 2 + static_cast<std::int64_t>(i);
    CHECK(env.site_params(k).rho == doctest::Approx(rho[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(env.site(2 + 200), ModelError);  // past materialized max
}

TEST_CASE("table environment bounds") {
  std::vector<SiteLaw> rows(10, SiteLaw{0.5, 0.25, 0.25});
  Environment env = Environment::table(rows);
  CHECK(env.max_site() == 11);
  CHECK(env.site(11).q == doctest::Approx(0.5));
  CHECK_THROWS_AS(env.site(12), ModelError);
}

TEST_CASE("random laws: eigenvalue identities hold") {
  RngStream rng(424242, 7);
  for (int i = 0; i < 500; ++i) {
    double q = 0.2 + 0.6 * rng.next_unit();
    double rest = 1.0 - q;
    double p2 = rest * (0.05 + 0.95 * rng.next_unit());
    double p1 = rest - p2;
    Environment env = Environment::constant(q, p1, p2);
    SiteParams p = env.site_params(3);
    CHECK(p.rho > 0.0);
    CHECK(p.sigma < 0.0);
    CHECK(p.sigma > -1.0);
    CHECK(p.rho * p.sigma == doctest::Approx(-p.b).epsilon(1e-12));
    CHECK(p.rho + p.sigma == doctest::Approx(p.a).epsilon(1e-12));
    CHECK(p.a >= p.b);
  }
}
