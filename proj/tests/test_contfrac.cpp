#include <doctest.h>

#include <cmath>

#include "cutwalk/contfrac.hpp"
#include "cutwalk/environment.hpp"
#include "cutwalk/rng.hpp"

using namespace cutwalk;

namespace {

// Fixed-point oracle for constant fractions: x = beta/(alpha + x), positive root.
double fixed_point(double alpha, double beta) {
  return 0.5 * (-alpha + std::sqrt(alpha * alpha + 4.0 * beta));
}

ContinuedFraction random_cf(std::uint64_t seed, std::uint64_t id, double alpha_lo) {
  ContinuedFraction cf;
  cf.alpha = [seed, id, alpha_lo](std::int64_t j) {
    RngStream r(seed ^ (id * 1315423911ull), static_cast<std::uint64_t>(2 * j));
    return alpha_lo + 2.0 * r.next_unit();
  };
  cf.beta = [seed, id](std::int64_t j) {
    RngStream r(seed ^ (id * 2654435761ull), static_cast<std::uint64_t>(2 * j + 1));
    return 0.25 + 2.75 * r.next_unit();
  };
  return cf;
}

}  // namespace

TEST_CASE("approximant: single and two-level values") {
  ContinuedFraction cf23 = constant_fraction(2.0, 3.0);
  CHECK(approximant(cf23, 4, 4) == doctest::Approx(1.5).epsilon(1e-15));  // beta/alpha
  ContinuedFraction cf11 = constant_fraction(1.0, 1.0);
  CHECK(approximant(cf11, 1, 2) == doctest::Approx(0.5).epsilon(1e-15));  // 1/(1+1)
  CHECK_THROWS_AS(approximant(cf11, 0, 3), ConfigError);
  CHECK_THROWS_AS(approximant(cf11, 3, 2), ConfigError);
}

TEST_CASE("approximant converges to the fixed point") {
  ContinuedFraction cf = constant_fraction(2.0, 3.0);
  CHECK(fixed_point(2.0, 3.0) == doctest::Approx(1.0).epsilon(1e-15));  // frozen oracle
  CHECK(approximant(cf, 1, 120) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("tail_value brackets the fixed point") {
  TailValue t = tail_value(constant_fraction(2.0, 3.0), 7, 1e-12);
  CHECK(t.value == doctest::Approx(1.0).epsilon(1e-11));
  CHECK(t.bracket_lo <= 1.0 + 1e-14);
  CHECK(t.bracket_hi >= 1.0 - 1e-14);

  // Environment-derived fraction with alpha_j = a_j, beta_j = b_j: the tail is
  // -sigma (the escape recursion of eta).
  TailValue s = tail_value(constant_fraction(1.0, 0.5), 1, 1e-13);
  CHECK(s.value == doctest::Approx(0.3660254037844386).epsilon(1e-12));
}

TEST_CASE("tail_value respects the depth cap with bracket payload") {
  // Slowly-converging fraction: alpha tiny relative to beta.
  ContinuedFraction cf = constant_fraction(0.01, 1.0);
  try {
    tail_value(cf, 1, 1e-14, 8);
    FAIL("expected TailDepthError");
  } catch (const TailDepthError& e) {
    CHECK(e.bracket_lo < e.bracket_hi);
    CHECK(e.depth == 8);
    double fp = fixed_point(0.01, 1.0);
    CHECK(e.bracket_lo <= fp);
    CHECK(e.bracket_hi >= fp);
  }
}

TEST_CASE("dominated small-beta family stays under sum of betas") {
  // beta_j = 2^-j, alpha_j = 1: tail_1 < sum beta_j = 1/2 + ... small head.
  ContinuedFraction cf;
  cf.alpha = [](std::int64_t) { return 1.0; };
  cf.beta = [](std::int64_t j) { return std::ldexp(1.0, -static_cast<int>(j)); };
  TailValue t = tail_value(cf, 1, 1e-13);
  CHECK(t.value < 0.5 * 1.05);
  CHECK(t.value > 0.0);
}

TEST_CASE("limit_formula cases") {
  CHECK(limit_formula(2.0, 3.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(limit_formula(1.0, 0.0) == 0.0);
  CHECK(limit_formula(1.0, 0.5) == doctest::Approx(0.3660254037844386).epsilon(1e-14));
  CHECK_THROWS_AS(limit_formula(0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(limit_formula(1.0, -0.5), ConfigError);
}

TEST_CASE("limit_formula equals tail_value on random constant fractions") {
  RngStream rng(5150, 3);
  for (int i = 0; i < 100; ++i) {
    double alpha = 0.2 + 3.0 * rng.next_unit();
    double beta = 0.2 + 3.0 * rng.next_unit();
    double lim = limit_formula(alpha, beta);
    TailValue t = tail_value(constant_fraction(alpha, beta), 1, 1e-12);
    CHECK(t.value == doctest::Approx(lim).epsilon(1e-10));
  }
}

TEST_CASE("alternation sign of approximants around the tail") {
  ContinuedFraction cf = constant_fraction(2.0, 3.0);
  double xi = 1.0;
  // n - k + 1 even => below; odd => above (strict for nondegenerate tails).
  CHECK(approximant(cf, 1, 4) < xi);   // depth 4
  CHECK(approximant(cf, 1, 3) > xi);   // depth 3
  for (std::int64_t n = 1; n <= 12; ++n) {
    double v = approximant(cf, 1, n);
    if (n % 2 == 0)
      CHECK(v < xi);
    else
      CHECK(v > xi);
  }
}

TEST_CASE("bracket width shrinks along the Seidel-Stern class") {
  ContinuedFraction cf = random_cf(99, 1, 1.0);
  REQUIRE(bounded_ratio_witness(cf, 16.0, 1, 400));
  double xi = tail_value(cf, 1, 1e-13).value;
  double prev_width = 1e100;
  for (std::int64_t d = 2; d <= 64; d *= 2) {
    double a = approximant(cf, 1, d);
    double b = approximant(cf, 1, d + 1);
    double w = std::fabs(a - b);
    CHECK(w <= prev_width * (1.0 + 1e-12));
    CHECK(std::min(a, b) <= xi + 1e-12);
    CHECK(std::max(a, b) >= xi - 1e-12);
    prev_width = w;
  }
}

TEST_CASE("tail inequality families on explicit examples") {
  ContinuedFraction cf = constant_fraction(2.0, 3.0);
  TailInequalityReport rep = check_tail_inequalities(cf, 1, 4, true);
  CHECK(rep.all_pass);
  // Alternation orientation matches the parity claims.
  bool saw_alt = false;
  for (const InequalityCheck& c : rep.items) {
    if (c.name == "alternation") {
      saw_alt = true;
      CHECK(c.lhs < c.rhs);  // depth 4 even: xi_{1,4} < xi_1
    }
  }
  CHECK(saw_alt);
  TailInequalityReport rep3 = check_tail_inequalities(cf, 1, 3, true);
  for (const InequalityCheck& c : rep3.items)
    if (c.name == "alternation") CHECK(c.lhs > c.rhs);  // odd depth: above
}

TEST_CASE("sum sandwich evaluates all three sums") {
  ContinuedFraction cf = random_cf(7, 4, 1.0);
  std::int64_t k = 2, n = 9;
  std::vector<double> tails = tail_values_range(cf, k, n + 1, 1e-13);
  std::vector<double> appr = approximant_profile(cf, k, n);
  double s_tail = 0, s_appr = 0, p_t = 1, p_a = 1;
  for (std::int64_t j = k; j <= n; ++j) {
    p_t *= tails[static_cast<std::size_t>(j - k)];
    p_a *= appr[static_cast<std::size_t>(j - k)];
    s_tail += p_t;
    s_appr += p_a;
  }
  double s_tail_plus = s_tail + p_t * tails[static_cast<std::size_t>(n + 1 - k)];
  CHECK(s_tail <= s_appr + 1e-12);
  CHECK(s_appr <= s_tail_plus + 1e-12);
}

TEST_CASE("randomized inequality suite (alpha >= 1)") {
  std::int64_t failures = 0, items = 0;
  for (std::uint64_t t = 0; t < 300; ++t) {
    ContinuedFraction cf = random_cf(20240817, t, 1.0);
    std::int64_t k = 1 + static_cast<std::int64_t>(t % 3);
    std::int64_t n = k + 1 + static_cast<std::int64_t>(t % 40);
    TailInequalityReport rep = check_tail_inequalities(cf, k, n, true);
    for (const InequalityCheck& c : rep.items) {
      ++items;
      if (!c.pass) ++failures;
    }
  }
  CHECK(items > 2000);
  CHECK(failures == 0);
}

TEST_CASE("alpha >= 1 families are rejected when alpha dips below 1") {
  ContinuedFraction cf = random_cf(5, 6, 0.5);  // alpha in [0.5, 2.5]
  CHECK_THROWS_AS(check_tail_inequalities(cf, 1, 10, true), ConfigError);
  // ...but the parity/product families still run without the flag.
  TailInequalityReport rep = check_tail_inequalities(cf, 1, 10, false);
  CHECK(rep.all_pass);
  for (const InequalityCheck& c : rep.items) {
    CHECK(c.name != "pair_sum");
    CHECK(c.name != "last_level");
    CHECK(c.name != "sum_sandwich_lo");
  }
}
