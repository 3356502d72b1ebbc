#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cutwalk/errors.hpp"

namespace cutwalk {

// Continued fraction with positive elements, given as pure generators over
// the level index j >= 1: levels are beta_j / (alpha_j + ...).
struct ContinuedFraction {
  std::function<double(std::int64_t)> alpha;
  std::function<double(std::int64_t)> beta;
  std::optional<double> alpha_limit;
  std::optional<double> beta_limit;
};

ContinuedFraction constant_fraction(double alpha, double beta);

// Seidel-Stern hypothesis witness: positivity plus B^-1 <= beta_j/alpha_j <= B
// on the sampled tail [lo, hi].
bool bounded_ratio_witness(const ContinuedFraction& cf, double B, std::int64_t lo,
                           std::int64_t hi);

// Approximant xi_{k,n}: backward recurrence x <- beta_j/(alpha_j + x) from
// j = n down to k, x initialized to 0.
double approximant(const ContinuedFraction& cf, std::int64_t k, std::int64_t n);

// Approximants xi_{j,n} for every j in [k, n], one backward sweep.
std::vector<double> approximant_profile(const ContinuedFraction& cf, std::int64_t k,
                                        std::int64_t n);

struct TailValue {
  double value;
  std::int64_t depth;  // levels used (n - k + 1)
  double bracket_lo;
  double bracket_hi;
};

// Tail xi_k as the limit of xi_{k,n}.  Consecutive-depth approximants bracket
// the tail (even depth below, odd above); stops once the bracket closes
// within tol, else throws TailDepthError carrying the bracket.
TailValue tail_value(const ContinuedFraction& cf, std::int64_t k, double tol,
                     std::int64_t depth_cap = 1'000'000);

// Tails xi_j for all j in [lo, hi] via shared doubling sweeps.
std::vector<double> tail_values_range(const ContinuedFraction& cf, std::int64_t lo,
                                      std::int64_t hi, double tol,
                                      std::int64_t depth_cap = 1'000'000);

// Limit value of a continued fraction with constant-limit elements:
// (alpha/2)(sqrt(1 + 4 beta/alpha^2) - 1).
double limit_formula(double alpha, double beta);

struct InequalityCheck {
  std::string name;
  std::int64_t k, n;
  double lhs, rhs;
  bool pass;
  double slack;  // signed margin in the passing direction
};

struct TailInequalityReport {
  std::vector<InequalityCheck> items;
  bool all_pass = true;
};

// Evaluates both sides of the tail/approximant inequality families at (k, n):
// alternation, pair products, product sandwich, last-level bound, pair sums,
// the (1 + xi_{n+1}) product bound, the sum sandwich, and the bracketing of
// the tail by consecutive-depth approximants.  Families requiring alpha >= 1
// are skipped unless require_alpha_ge_1 is set.
TailInequalityReport check_tail_inequalities(const ContinuedFraction& cf, std::int64_t k,
                                             std::int64_t n, bool require_alpha_ge_1,
                                             double slack_tol = 1e-12);

}  // namespace cutwalk
