#include <doctest.h>

#include <cmath>

#include "cutwalk/prob.hpp"
#include "cutwalk/rng.hpp"

using namespace cutwalk;

namespace {

Environment e0() { return Environment::constant(0.5, 0.25, 0.25); }
Environment e1() { return Environment::constant(0.7, 0.2, 0.1); }

Environment random_env(std::uint64_t seed) {
  RngStream rng(seed, 23);
  double q = 0.2 + 0.6 * rng.next_unit();
  double rest = 1.0 - q;
  double p2 = rest * (0.1 + 0.9 * rng.next_unit());
  return Environment::constant(q, rest - p2, p2);
}

}  // namespace

TEST_CASE("constant-environment closed forms (rigorous tails)") {
  // F_X(m) = 1/(1-a-b) on E1.
  SeriesResult fx = series_F_X(e1(), 5);
  CHECK(!fx.diverged);
  CHECK(fx.kind == TailKind::Rigorous);
  CHECK(fx.value == doctest::Approx(7.0 / 3.0).epsilon(1e-10));
  CHECK(7.0 / 3.0 >= fx.value - 1e-14);                  // truth inside
  CHECK(7.0 / 3.0 <= fx.value + fx.tail_bound + 1e-14);  // [value, value+bound]

  // F_Y(m) = rho/(rho-1) on E0.
  SeriesResult fy = series_F_Y(e0(), 3);
  CHECK(fy.value == doctest::Approx(3.7320508075688772).epsilon(1e-10));
  CHECK(3.7320508075688772 <= fy.value + fy.tail_bound + 1e-13);

  // D_X(n) = 1/(1-rho) on E1.
  SeriesResult dx = series_D(e1(), WalkKind::X, 9);
  CHECK(dx.value == doctest::Approx(2.8471270883830366).epsilon(1e-10));

  // Divergent sides flagged, not thrown.
  CHECK(series_F_X(e0(), 5).diverged);
  CHECK(series_F_Y(e1(), 5).diverged);
  CHECK(series_D(e0(), WalkKind::X, 3).diverged);
}

TEST_CASE("finite series are exact partial sums") {
  Environment env = e1();
  CHECK(series_F_X(env, 4, 5).value == doctest::Approx(1.0));            // empty sum
  CHECK(series_F_X(env, 4, 6).value == doctest::Approx(1.0 + 3.0 / 7.0));  // one term a
  CHECK(series_F_Y(env, 4, 5).value == doctest::Approx(1.0));
  CHECK(series_G(env, 4, 5).value == doctest::Approx(1.0));
  CHECK(series_D(env, WalkKind::X, 4, 5).value == doctest::Approx(1.0));
}

TEST_CASE("escape_Y_split: one-step interval") {
  EscapeSplit es = escape_Y_split(e0(), 5, 6, 7);
  CHECK(es.q_plus == doctest::Approx(0.5).epsilon(1e-14));   // p1 + p2
  CHECK(es.q_low == doctest::Approx(0.25).epsilon(1e-14));   // exit at n
  CHECK(es.q_high == doctest::Approx(0.25).epsilon(1e-14));  // exit at n+1
  // Boundary starts.
  CHECK(escape_Y_split(e0(), 5, 5, 9).q_plus == 0.0);
  CHECK(escape_Y_split(e0(), 5, 9, 9).q_low == 1.0);
  CHECK(escape_Y_split(e0(), 5, 10, 9).q_high == 1.0);
}

TEST_CASE("escape_X_down: one-step interval and boundaries") {
  CHECK(escape_X_down(e1(), 5, 6, 7) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(escape_X_down(e1(), 5, 5, 9) == 1.0);
  CHECK(escape_X_down(e1(), 5, 9, 9) == 0.0);
}

TEST_CASE("escape formulas agree with the absorption oracle") {
  RngStream pick(2024, 99);
  for (std::uint64_t s = 0; s < 40; ++s) {
    Environment env = random_env(5200 + s);
    std::int64_t m = 1 + static_cast<std::int64_t>(pick.next_unit() * 6);
    std::int64_t n = m + 2 + static_cast<std::int64_t>(pick.next_unit() * 298);
    std::int64_t k = m + 1 + static_cast<std::int64_t>(pick.next_unit() *
                                                       static_cast<double>(n - m - 1));
    AbsorptionResult oy = absorption_solve(AbsorptionProblem{&env, WalkKind::Y, m, n});
    EscapeSplit es = escape_Y_split(env, m, k, n);
    CHECK(std::fabs(es.q_low - oy.at(1, k)) < 1e-10);
    CHECK(std::fabs(es.q_high - oy.at(2, k)) < 1e-10);
    CHECK(std::fabs(es.q_plus - (oy.at(1, k) + oy.at(2, k))) < 1e-10);
    CHECK(std::fabs(es.q_low + es.q_high - es.q_plus) < 1e-12);

    AbsorptionResult ox = absorption_solve(AbsorptionProblem{&env, WalkKind::X, m, n});
    double p_down = escape_X_down(env, m, k, n);
    CHECK(std::fabs(p_down - (ox.at(0, k) + ox.at(1, k))) < 1e-10);
    // Complementarity: down-escape + up-escape = 1.
    CHECK(p_down + ox.at(2, k) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("escape monotonicity in the start point") {
  Environment env = random_env(31);
  std::int64_t m = 2, n = 40;
  double prev_q = -1.0, prev_p = 2.0;
  for (std::int64_t k = m + 1; k < n; ++k) {
    double qp = escape_Y_split(env, m, k, n).q_plus;
    double pd = escape_X_down(env, m, k, n);
    CHECK(qp >= prev_q - 1e-12);
    CHECK(pd <= prev_p + 1e-12);
    prev_q = qp;
    prev_p = pd;
  }
}

TEST_CASE("sandwich: 1/F_Y(m,n+1) <= Q_{m+1}(m,n,+) <= 1/F_Y(m,n)") {
  for (Environment env : {e0(), random_env(88), random_env(89)}) {
    for (std::int64_t m : {1ll, 4ll}) {
      for (std::int64_t n : {m + 3, m + 17, m + 60}) {
        double q = escape_Y_split(env, m, m + 1, n).q_plus;
        double lo = 1.0 / series_F_Y(env, m, n + 1).value;
        double hi = 1.0 / series_F_Y(env, m, n).value;
        CHECK(q >= lo - 1e-12);
        CHECK(q <= hi + 1e-12);
      }
    }
  }
}

TEST_CASE("escape to infinity and never-return identities") {
  CHECK(escape_Y_to_inf(e0(), 4) == doctest::Approx(0.2679491924311227).epsilon(1e-10));
  CHECK(escape_Y_to_inf(e1(), 4) == 0.0);  // F_Y diverges

  NeverReturnX nr = escape_X_never_return(e1(), 6);
  CHECK(nr.never_return == doctest::Approx(3.0 / 7.0).epsilon(1e-10));
  CHECK(nr.p_down_limit == doctest::Approx(4.0 / 7.0).epsilon(1e-10));
  NeverReturnX nr0 = escape_X_never_return(e0(), 6);
  CHECK(nr0.never_return == 0.0);
  CHECK(nr0.p_down_limit == 1.0);
}

TEST_CASE("return probabilities against the receding-guard oracle") {
  Environment env = e0();
  for (std::int64_t x : {6ll, 9ll, 14ll}) {
    double formula = escape_Y_return_prob(env, 4, x, 1e-12);
    double oracle = oracle_Y_return_prob(env, 4, x, 1e-11);
    CHECK(formula == doctest::Approx(oracle).epsilon(1e-9));
  }
  Environment ex = e1();
  for (std::int64_t x : {6ll, 9ll, 14ll}) {
    double formula = escape_X_return_prob(ex, 4, x, 1e-12);
    double oracle = oracle_X_return_prob(ex, 4, x, 1e-11);
    CHECK(formula == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("limit identity: P_{n+1}(n,inf,-) via guarded oracle") {
  Environment env = e1();
  NeverReturnX nr = escape_X_never_return(env, 7);
  double oracle = oracle_X_return_prob(env, 7, 8, 1e-11);
  CHECK(nr.p_down_limit == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("eta and h recursions: hand values and limits") {
  Environment env = e0();
  CHECK(eta_diag(env, 2) == doctest::Approx(0.5).epsilon(1e-15));  // b_2/a_2
  LayerHit h1 = h_layer(env, 1);
  CHECK(h1.h1 == 1.0);
  CHECK(h1.h2 == 0.0);
  LayerHit h2 = h_layer(env, 2);
  CHECK(h2.h2 == doctest::Approx(1.0 / 6.0).epsilon(1e-14));  // two steps by hand
  CHECK(h2.h1 + h2.h2 == 1.0);

  CHECK(eta_diag(env, 1000) == doctest::Approx(0.3660254037844386).epsilon(1e-9));
  CHECK(h_layer(env, 1000).h2 == doctest::Approx(0.2679491924311227).epsilon(1e-6));
}

TEST_CASE("cutpoint probabilities for X") {
  CHECK(p_cut_X(e1(), 50) == doctest::Approx(0.3).epsilon(1e-10));  // q - p1 - 2 p2
  CHECK(p_cut_X(e0(), 50) == 0.0);                                  // recurrent side
  // F_X(2,3) = 1 (empty sum): joint = q^2 / F_X(3).
  CHECK(p_cut_X_joint(e1(), 2, 3) == doctest::Approx(0.21).epsilon(1e-10));
}

TEST_CASE("layer cutpoint probability for Y: asym and bracket") {
  Environment env = e0();
  LayerCutProb pc = p_cut_layer_Y(env, 200);
  CHECK(pc.asym == doctest::Approx(0.1435935394489816).epsilon(1e-9));
  CHECK(pc.exact >= pc.lower - 1e-12);
  CHECK(pc.exact <= pc.upper + 1e-12);
  CHECK(pc.asym == doctest::Approx(pc.exact).epsilon(1e-6));
  for (std::int64_t k = 50; k <= 450; k += 50) {
    LayerCutProb b = p_cut_layer_Y(env, k);
    CHECK(b.asym >= b.lower - 1e-9);
    CHECK(b.asym <= b.upper + 1e-9);
  }
  // Recurrent side: zero.
  CHECK(p_cut_layer_Y(e1(), 10).exact == 0.0);
}

TEST_CASE("transience classification") {
  CHECK(transient(e1(), WalkKind::X).verdict == Transience::Transient);
  CHECK(transient(e1(), WalkKind::X).witness == "geometric");
  CHECK(transient(e0(), WalkKind::X).verdict == Transience::Recurrent);
  CHECK(transient(e0(), WalkKind::Y).verdict == Transience::Transient);
  CHECK(transient(e1(), WalkKind::Y).verdict == Transience::Recurrent);

  Environment ey = Environment::corollary(0.0, PerturbSign::Y, 0.25, 16);
  TransienceReport ty = transient(ey, WalkKind::Y);
  CHECK(ty.verdict == Transience::Transient);
  CHECK(ty.witness == "comparison");
  CHECK(transient(ey, WalkKind::X).verdict == Transience::Recurrent);

  Environment ex = Environment::corollary(0.5, PerturbSign::X, 0.25);
  CHECK(transient(ex, WalkKind::X).verdict == Transience::Transient);
}

TEST_CASE("grid sweeps agree with direct summation") {
  // Constant env: closed forms at every m.
  std::vector<double> fx = series_F_X_grid(e1(), 50, 1e-8);
  for (std::int64_t m = 1; m <= 50; ++m)
    CHECK(fx[static_cast<std::size_t>(m)] == doctest::Approx(7.0 / 3.0).epsilon(1e-7));
  std::vector<double> dy = series_D_grid(e0(), WalkKind::Y, 50, 1e-8);
  double dy_expect = 1.0 / (1.0 - 0.7320508075688772);
  for (std::int64_t m = 1; m <= 50; ++m)
    CHECK(dy[static_cast<std::size_t>(m)] == doctest::Approx(dy_expect).epsilon(1e-7));
  std::vector<double> fyg = series_F_Y_grid(e0(), 30, 1e-8);
  CHECK(fyg[7] == doctest::Approx(3.7320508075688772).epsilon(1e-7));
  // Divergent side: infinities.
  CHECK(std::isinf(series_F_X_grid(e0(), 10)[5]));

  // Near-critical: spot values against capped direct summation.
  Environment ex = Environment::corollary(0.0, PerturbSign::X, 0.25, 16);
  SeriesOptions opts;
  opts.rel_tol = 1e-10;
  opts.term_cap = 3'000'000;
  std::vector<double> fxg = series_F_X_grid(ex, 64, 1e-6);
  SeriesResult direct = series_F_X(ex, 64, std::nullopt, opts);
  CHECK(fxg[64] == doctest::Approx(direct.value).epsilon(2e-3));

  Environment eyy = Environment::corollary(0.0, PerturbSign::Y, 0.25, 16);
  std::vector<double> dyy = series_D_grid(eyy, WalkKind::Y, 64, 1e-6);
  SeriesResult dyd = series_D(eyy, WalkKind::Y, 64, std::nullopt, opts);
  CHECK(dyy[64] == doctest::Approx(dyd.value).epsilon(2e-3));
}

TEST_CASE("quadrature horizon estimate vs direct summation (beta > 0)") {
  // For beta = 0.5 the direct sum at small n still converges within the cap;
  // the grid (quadrature-initialized) value must match.
  Environment ex = Environment::corollary(0.5, PerturbSign::X, 0.25);
  SeriesOptions opts;
  opts.rel_tol = 1e-9;
  opts.term_cap = 20'000'000;
  std::vector<double> dg = series_D_grid(ex, WalkKind::X, 32, 1e-6);
  SeriesResult direct = series_D(ex, WalkKind::X, 32, std::nullopt, opts);
  CHECK(dg[32] == doctest::Approx(direct.value).epsilon(5e-3));
}

TEST_CASE("cutpoint criterion classifications") {
  Environment fin = Environment::corollary(2.0, PerturbSign::X, 0.25);
  CutpointCriterionReport r_fin = cutpoint_criterion(fin, WalkKind::X, 100'000);
  CHECK(r_fin.predicted == "finite");
  CHECK(r_fin.rho_monotone_ok);
  CHECK(r_fin.side_condition_ok);

  Environment inf = Environment::corollary(0.5, PerturbSign::X, 0.25);
  CutpointCriterionReport r_inf = cutpoint_criterion(inf, WalkKind::X, 100'000);
  CHECK(r_inf.predicted == "infinite");

  // Strongly transient: D bounded, sum 1/(D log n) diverges like the
  // harmonic-log series.
  CutpointCriterionReport r_const = cutpoint_criterion(e1(), WalkKind::X, 100'000);
  CHECK(r_const.predicted == "infinite");
  CHECK(r_const.side_condition_ok);

  Environment fin_y = Environment::corollary(2.0, PerturbSign::Y, 0.25);
  CHECK(cutpoint_criterion(fin_y, WalkKind::Y, 100'000).predicted == "finite");
}

TEST_CASE("tau re-export") {
  CHECK(tau(e0()) == doctest::Approx(0.3660254037844386).epsilon(1e-13));
  CHECK(tau(e1()) == doctest::Approx(0.1377865986823390).epsilon(1e-12));
}
