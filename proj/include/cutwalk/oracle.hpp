#pragma once

#include <cstdint>
#include <vector>

#include "cutwalk/environment.hpp"

namespace cutwalk {

enum class WalkKind { X, Y };

// First-step-analysis discretization of an interval escape query: interior
// states m+1..n-1, absorbing classes split by exit site.
//   Y: Down (hits [0,m], necessarily at m), ExitN (enters [n,inf) at n),
//      ExitN1 (enters at n+1).
//   X: Down (exits at m), Down2 (exits at m-1 by a size-2 jump), ExitN
//      (enters [n,inf), necessarily at n); Down2 reported in the ExitN1 slot's
//      place, see AbsorptionResult.
struct AbsorptionProblem {
  const Environment* env;
  WalkKind kind;
  std::int64_t m, n;
};

inline constexpr std::int64_t kAbsorptionGuard = 10'000;

struct AbsorptionResult {
  std::int64_t m, n;
  // Per interior state m+1..n-1, probability of each absorbing class.
  // Y: class0 = down at m, class1 = exit at n, class2 = exit at n+1.
  // X: class0 = exit at m, class1 = exit at m-1, class2 = up into [n,inf).
  std::vector<double> class0, class1, class2;

  double at(int cls, std::int64_t state) const;
};

// Banded elimination (bandwidth 2, no pivoting; the system is strictly
// diagonally dominant).  Deterministic.
AbsorptionResult absorption_solve(const AbsorptionProblem& problem);

// Escape queries against a receding upper (or lower) guard, doubled until the
// answer moves by less than tol; the guarded limits are monotone.
// Y: probability of ever hitting [0,m] from start k > m.
double oracle_Y_return_prob(const Environment& env, std::int64_t m, std::int64_t k, double tol);
// X: probability of ever hitting [0,m] from start k > m.
double oracle_X_return_prob(const Environment& env, std::int64_t m, std::int64_t k, double tol);

struct McEstimate {
  double estimate;
  double ci_halfwidth;  // 3 sigma binomial
  std::int64_t trials;
};

// Naive Monte Carlo frequency of the (m,n)-escape event from start k.
// For Y the event is "hits [n,inf) first"; for X it is "hits [0,m] first".
// Reproducible: per-trajectory streams keyed by (seed, index).
McEstimate mc_escape_estimate(const Environment& env, WalkKind kind, std::int64_t m,
                              std::int64_t k, std::int64_t n, std::int64_t trials,
                              std::uint64_t seed);

// Never-return estimate from start k > m: a trajectory counts as "never
// returns to [0,m]" once it reaches the certified level high (caller computes
// high so that the return probability from there is negligible).
McEstimate mc_never_return(const Environment& env, WalkKind kind, std::int64_t m,
                           std::int64_t k, std::int64_t high, std::int64_t trials,
                           std::uint64_t seed);

// Return frequency within a step horizon (recurrence evidence: should climb
// to 1 as the horizon doubles on the recurrent side).
McEstimate mc_return_frequency(const Environment& env, WalkKind kind, std::int64_t m,
                               std::int64_t k, std::uint64_t horizon, std::int64_t trials,
                               std::uint64_t seed);

}  // namespace cutwalk
