#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "cutwalk/matprod.hpp"
#include "cutwalk/rng.hpp"

using namespace cutwalk;

namespace {

Environment e0() { return Environment::constant(0.5, 0.25, 0.25); }
Environment e1() { return Environment::constant(0.7, 0.2, 0.1); }

Environment random_env(std::uint64_t seed) {
  RngStream rng(seed, 11);
  double q = 0.2 + 0.6 * rng.next_unit();
  double rest = 1.0 - q;
  double p2 = rest * (0.1 + 0.9 * rng.next_unit());
  return Environment::constant(q, rest - p2, p2);
}

}  // namespace

TEST_CASE("ScaledReal round trip and arithmetic") {
  for (double v : {1.0, -3.25, 0.0, 1e-300, 7.75e290}) {
    ScaledReal s(v);
    CHECK(s.to_double() == v);
    if (v != 0.0) {
      CHECK(std::fabs(s.mantissa()) >= 1.0);
      CHECK(std::fabs(s.mantissa()) < 2.0);
    }
  }
  ScaledReal a(3.0), b(-0.5);
  CHECK((a * b).to_double() == doctest::Approx(-1.5));
  CHECK((a + b).to_double() == doctest::Approx(2.5));
  CHECK((a - b).to_double() == doctest::Approx(3.5));
  CHECK(ratio(a, b) == doctest::Approx(-6.0));

  // Far-out-of-range products survive and come back by ratio.
  ScaledReal big(1.5);
  for (int i = 0; i < 5000; ++i) big *= ScaledReal(2.0);
  CHECK(std::isinf(big.to_double()));
  ScaledReal big2 = big * ScaledReal(3.0);
  CHECK(ratio(big2, big) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(big.log2_abs() == doctest::Approx(5000.0 + std::log2(1.5)).epsilon(1e-12));
}

TEST_CASE("entry_product identity and single factor") {
  Environment env = e0();
  CHECK(entry_product(env, 5, 4, 1, 1).to_double() == 1.0);  // empty product
  CHECK(entry_product(env, 5, 4, 1, 2).to_double() == 0.0);
  CHECK(entry_product(env, 5, 5, 1, 1).to_double() == doctest::Approx(1.0));   // a
  CHECK(entry_product(env, 5, 5, 1, 2).to_double() == doctest::Approx(0.5));   // b
  CHECK(entry_product(env, 5, 5, 2, 1).to_double() == doctest::Approx(1.0));
  CHECK(entry_product(env, 5, 5, 2, 2).to_double() == doctest::Approx(0.0));
}

TEST_CASE("entry products follow the two-term recurrence and closed form") {
  // u_j = e1 A^j e1^t obeys u_j = a u_{j-1} + b u_{j-2}; for (a,b) = (1, 0.5):
  // u_0 = 1, u_1 = 1, u_2 = 1.5, u_3 = 2.0 (frozen by the recurrence oracle).
  Environment env = e0();
  auto u = [&](std::int64_t j) {
    return entry_product(env, 2, 2 + j - 1, 1, 1).to_double();
  };
  CHECK(u(2) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(u(3) == doctest::Approx(2.0).epsilon(1e-15));

  double rho = 1.3660254037844386, sigma = -0.3660254037844386;
  for (std::int64_t j = 1; j <= 40; ++j) {
    double closed =
        (std::pow(rho, j + 1) - std::pow(sigma, j + 1)) / (rho - sigma);
    CHECK(u(j) == doctest::Approx(closed).epsilon(1e-12));
  }
}

TEST_CASE("zeta single level and limit") {
  CHECK(zeta(e0(), 7, 7) == doctest::Approx(1.0).epsilon(1e-15));  // 1/a_k
  CHECK(zeta(e0(), 2, 400) == doctest::Approx(0.7320508075688772).epsilon(1e-13));
}

TEST_CASE("zeta telescoping against entry products") {
  for (std::uint64_t s = 0; s < 25; ++s) {
    Environment env = random_env(1000 + s);
    std::int64_t k = 2 + static_cast<std::int64_t>(s % 5);
    std::int64_t n = k + 3 + static_cast<std::int64_t>((s * 37) % 297);
    std::vector<double> prof = zeta_profile(env, k, n);
    ScaledReal prod(1.0);
    for (double z : prof) prod *= ScaledReal(1.0 / z);
    double direct = ratio(prod, entry_product(env, k, n, 1, 1));
    CHECK(direct == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("theta profile against a dense 2x2 product oracle") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    Environment env = random_env(4000 + s);
    std::int64_t k = 2, n = 2 + 40;
    // z_{k,n} = e1 A_n ... A_k e1^t built explicitly.
    auto z = [&](std::int64_t kk) {
      Eigen::Matrix2d M = Eigen::Matrix2d::Identity();
      for (std::int64_t i = n; i >= kk; --i) M = M * companion_matrix(env, i);
      return M(0, 0);
    };
    std::vector<double> prof = theta_profile(env, k, n);
    for (std::int64_t kk = k; kk <= n; ++kk) {
      double expect = (kk == n ? 1.0 : z(kk + 1)) / z(kk);
      CHECK(prof[static_cast<std::size_t>(kk - k)] ==
            doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("zeta and theta tails: fixed points and near-critical trend") {
  // Constant env: both tails equal 1/rho.
  TailValue z0 = zeta_tail(e0(), 5, 1e-12);
  CHECK(z0.value == doctest::Approx(0.7320508075688772).epsilon(1e-11));
  TailValue t0 = theta_tail(e0(), 5, 1e-12);
  CHECK(t0.value == doctest::Approx(0.7320508075688772).epsilon(1e-11));
  TailValue z1 = zeta_tail(e1(), 3, 1e-12);
  CHECK(z1.value == doctest::Approx(1.5413812651491098).epsilon(1e-11));

  // Corollary family: |zeta_k - 1| shrinks along k (rho_k -> 1).
  Environment ey = Environment::corollary(0.0, PerturbSign::Y, 0.25, 16);
  double d3 = std::fabs(zeta_tail(ey, 1000, 1e-12).value - 1.0);
  double d5 = std::fabs(zeta_tail(ey, 100000, 1e-12).value - 1.0);
  CHECK(d5 < d3);
}

TEST_CASE("batched tails agree with single tails") {
  Environment env = e1();
  std::vector<double> zs = zeta_tails_range(env, 2, 40, 1e-13);
  for (std::int64_t k : {2ll, 17ll, 40ll})
    CHECK(zs[static_cast<std::size_t>(k - 2)] ==
          doctest::Approx(zeta_tail(env, k, 1e-13).value).epsilon(1e-12));
  std::vector<double> ts = theta_tails_range(env, 2, 40, 1e-13);
  for (std::int64_t k : {2ll, 17ll, 40ll})
    CHECK(ts[static_cast<std::size_t>(k - 2)] ==
          doctest::Approx(theta_tail(env, k, 1e-13).value).epsilon(1e-12));
}

TEST_CASE("f and H base values and recursion identity") {
  Environment env = e0();
  CHECK(f_seq(env, 3, 1) == doctest::Approx(0.5).epsilon(1e-15));  // b/(a)
  CHECK(H_seq(env, 3, 1) == 0.0);

  // f_n f_{n-1} + a_{k+n} f_n = b_{k+n} at every step, to 1e-14.
  std::vector<FHPair> fh = fH_profile(env, 2, 60);
  double f_prev = 0.0;
  for (std::size_t j = 0; j < fh.size(); ++j) {
    double f = fh[j].f;
    CHECK(f * f_prev + 1.0 * f == doctest::Approx(0.5).epsilon(1e-14));
    f_prev = f;
  }
}

TEST_CASE("H recursion equals the explicit alternating sum") {
  for (std::uint64_t s = 0; s < 8; ++s) {
    Environment env = random_env(7000 + s);
    std::int64_t k = 1 + static_cast<std::int64_t>(s % 4);
    std::vector<FHPair> fh = fH_profile(env, k, 30);
    for (std::int64_t n = 2; n <= 30; ++n) {
      // H_n = sum_{s=1}^{n-1} (-1)^{n-s} f_s f_{s+1} ... f_n
      double total = 0.0;
      for (std::int64_t j = 1; j <= n - 1; ++j) {
        double prod = 1.0;
        for (std::int64_t i = j; i <= n; ++i) prod *= fh[static_cast<std::size_t>(i - 1)].f;
        total += ((n - j) % 2 == 0 ? 1.0 : -1.0) * prod;
      }
      CHECK(fh[static_cast<std::size_t>(n - 1)].H ==
            doctest::Approx(total).epsilon(1e-12));
    }
  }
}

TEST_CASE("f and H limits on the constant environment") {
  Environment env = e0();
  std::vector<FHPair> fh = fH_profile(env, 4, 200);
  CHECK(fh.back().f == doctest::Approx(0.3660254037844386).epsilon(1e-10));
  // H_n + f_n -> -sigma/(1-sigma) (the alternating-sum limit).
  CHECK(fh.back().H + fh.back().f ==
        doctest::Approx(0.2679491924311227).epsilon(1e-8));
}

TEST_CASE("entry_product guard") {
  CHECK_THROWS_AS(entry_product(e0(), 2, 2 + 10'001, 1, 1), CapError);
}
