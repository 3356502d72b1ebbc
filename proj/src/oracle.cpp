#include "cutwalk/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cutwalk/rng.hpp"

namespace cutwalk {

namespace {

struct Band {
  // Row r covers columns [r-lb, r+ub]; storage row-major, width lb+ub+1.
  std::int64_t N, lb, ub;
  std::vector<double> a;
  std::vector<double> rhs0, rhs1, rhs2;

  double& at(std::int64_t r, std::int64_t c) { return a[r * (lb + ub + 1) + (c - r + lb)]; }
};

// In-place banded LU without pivoting + solve for the three class vectors.
// The matrix is I - T with T substochastic and every interior state leaking,
// so it is strictly diagonally dominant.
void eliminate(Band& b) {
  const std::int64_t N = b.N;
  for (std::int64_t j = 0; j < N; ++j) {
    double piv = b.at(j, j);
    std::int64_t ilim = std::min(j + b.lb, N - 1);
    for (std::int64_t i = j + 1; i <= ilim; ++i) {
      double f = b.at(i, j) / piv;
      if (f == 0.0) continue;
      std::int64_t clim = std::min(j + b.ub, N - 1);
      for (std::int64_t c = j; c <= clim; ++c) b.at(i, c) -= f * b.at(j, c);
      b.rhs0[i] -= f * b.rhs0[j];
      b.rhs1[i] -= f * b.rhs1[j];
      b.rhs2[i] -= f * b.rhs2[j];
    }
  }
  for (std::int64_t i = N - 1; i >= 0; --i) {
    std::int64_t clim = std::min(i + b.ub, N - 1);
    for (std::int64_t c = i + 1; c <= clim; ++c) {
      double v = b.at(i, c);
      b.rhs0[i] -= v * b.rhs0[c];
      b.rhs1[i] -= v * b.rhs1[c];
      b.rhs2[i] -= v * b.rhs2[c];
    }
    double piv = b.at(i, i);
    b.rhs0[i] /= piv;
    b.rhs1[i] /= piv;
    b.rhs2[i] /= piv;
  }
}

AbsorptionResult solve_unguarded(const Environment& env, WalkKind kind, std::int64_t m,
                                 std::int64_t n) {
  const std::int64_t N = n - m - 1;
  Band b;
  b.N = N;
  b.lb = kind == WalkKind::Y ? 1 : 2;
  b.ub = kind == WalkKind::Y ? 2 : 1;
  b.a.assign(static_cast<std::size_t>(N * (b.lb + b.ub + 1)), 0.0);
  b.rhs0.assign(static_cast<std::size_t>(N), 0.0);
  b.rhs1.assign(static_cast<std::size_t>(N), 0.0);
  b.rhs2.assign(static_cast<std::size_t>(N), 0.0);

  for (std::int64_t r = 0; r < N; ++r) {
    std::int64_t i = m + 1 + r;
    SiteLaw s = env.site(i);
    b.at(r, r) = 1.0;
    if (kind == WalkKind::Y) {
      // moves: i-1 w.p. q, i+1 w.p. p1, i+2 w.p. p2
      if (r - 1 >= 0)
        b.at(r, r - 1) = -s.q;
      else
        b.rhs0[r] += s.q;  // absorbed at m
      if (r + 1 < N)
        b.at(r, r + 1) = -s.p1;
      else
        b.rhs1[r] += s.p1;  // i+1 == n
      if (r + 2 < N)
        b.at(r, r + 2) = -s.p2;
      else if (i + 2 == n)
        b.rhs1[r] += s.p2;  // lands exactly at n
      else
        b.rhs2[r] += s.p2;  // i == n-1, overshoots to n+1
    } else {
      // moves: i+1 w.p. q, i-1 w.p. p1, i-2 w.p. p2
      if (r + 1 < N)
        b.at(r, r + 1) = -s.q;
      else
        b.rhs2[r] += s.q;  // enters [n, inf) at n
      if (r - 1 >= 0)
        b.at(r, r - 1) = -s.p1;
      else
        b.rhs0[r] += s.p1;  // i-1 == m
      if (r - 2 >= 0)
        b.at(r, r - 2) = -s.p2;
      else if (i - 2 == m)
        b.rhs0[r] += s.p2;
      else
        b.rhs1[r] += s.p2;  // i == m+1, lands at m-1
    }
  }

  eliminate(b);

  AbsorptionResult res;
  res.m = m;
  res.n = n;
  if (kind == WalkKind::Y) {
    res.class0 = std::move(b.rhs0);
    res.class1 = std::move(b.rhs1);
    res.class2 = std::move(b.rhs2);
  } else {
    res.class0 = std::move(b.rhs0);  // exit at m
    res.class1 = std::move(b.rhs1);  // exit at m-1
    res.class2 = std::move(b.rhs2);  // up
  }
  return res;
}

}  // namespace

double AbsorptionResult::at(int cls, std::int64_t state) const {
  if (state <= m || state >= n) throw ConfigError("AbsorptionResult::at: state not interior");
  std::size_t idx = static_cast<std::size_t>(state - m - 1);
  switch (cls) {
    case 0:
      return class0[idx];
    case 1:
      return class1[idx];
    case 2:
      return class2[idx];
  }
  throw ConfigError("AbsorptionResult::at: class must be 0, 1 or 2");
}

AbsorptionResult absorption_solve(const AbsorptionProblem& problem) {
  if (problem.env == nullptr) throw ConfigError("absorption_solve: null environment");
  std::int64_t m = problem.m, n = problem.n;
  if (n - m < 2) throw ConfigError("absorption_solve: need n - m >= 2");
  if (n - m > kAbsorptionGuard) throw CapError("absorption_solve: interval exceeds size guard");
  if (m < 0) throw ConfigError("absorption_solve: need m >= 0");
  if (m + 1 < 2) throw ConfigError("absorption_solve: interior states start at 2");
  return solve_unguarded(*problem.env, problem.kind, m, n);
}

namespace {

double guarded_return_prob(const Environment& env, WalkKind kind, std::int64_t m,
                           std::int64_t k, double tol) {
  if (k <= m) return 1.0;
  std::int64_t guard = std::max<std::int64_t>(2 * k, m + 64);
  double prev = -1.0;
  for (int iter = 0; iter < 48; ++iter) {
    AbsorptionResult r = solve_unguarded(env, kind, m, guard);
    double down = r.class0[static_cast<std::size_t>(k - m - 1)] +
                  (kind == WalkKind::X ? r.class1[static_cast<std::size_t>(k - m - 1)] : 0.0);
    if (prev >= 0.0 && std::fabs(down - prev) < tol) return down;
    prev = down;
    if (guard > (std::int64_t{1} << 26))
      throw CapError("oracle return probability: receding guard exceeded size cap");
    guard *= 2;
  }
  throw CapError("oracle return probability: guard doubling did not settle");
}

std::int64_t mc_step(const SiteLaw& s, WalkKind kind, std::int64_t pos, double u) {
  if (kind == WalkKind::X) {
    if (u < s.q) return pos + 1;
    if (u < s.q + s.p1) return pos - 1;
    return pos - 2;
  }
  if (u < s.q) return pos - 1;
  if (u < s.q + s.p1) return pos + 1;
  return pos + 2;
}

}  // namespace

double oracle_Y_return_prob(const Environment& env, std::int64_t m, std::int64_t k,
                            double tol) {
  return guarded_return_prob(env, WalkKind::Y, m, k, tol);
}

double oracle_X_return_prob(const Environment& env, std::int64_t m, std::int64_t k,
                            double tol) {
  return guarded_return_prob(env, WalkKind::X, m, k, tol);
}

McEstimate mc_escape_estimate(const Environment& env, WalkKind kind, std::int64_t m,
                              std::int64_t k, std::int64_t n, std::int64_t trials,
                              std::uint64_t seed) {
  if (trials < 1000) throw ConfigError("mc_escape_estimate: need trials >= 1e3");
  if (!(m < k && k < n)) throw ConfigError("mc_escape_estimate: need m < k < n");
  std::int64_t hits = 0;
  for (std::int64_t t = 0; t < trials; ++t) {
    RngStream rng(seed, static_cast<std::uint64_t>(t));
    std::int64_t pos = k;
    while (pos > m && pos < n) {
      if (pos < 2) {  // forced boundary moves
        pos = (kind == WalkKind::X) ? pos + 1 : (pos == 1 ? 0 : 2);
        continue;
      }
      pos = mc_step(env.site(pos), kind, pos, rng.next_unit());
    }
    bool success = (kind == WalkKind::Y) ? pos >= n : pos <= m;
    hits += success ? 1 : 0;
  }
  double p = static_cast<double>(hits) / static_cast<double>(trials);
  double ci = 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
  return McEstimate{p, ci, trials};
}

McEstimate mc_never_return(const Environment& env, WalkKind kind, std::int64_t m,
                           std::int64_t k, std::int64_t high, std::int64_t trials,
                           std::uint64_t seed) {
  if (trials < 1000) throw ConfigError("mc_never_return: need trials >= 1e3");
  if (!(m < k && k <= high)) throw ConfigError("mc_never_return: need m < k <= high");
  std::int64_t never = 0;
  for (std::int64_t t = 0; t < trials; ++t) {
    RngStream rng(seed, static_cast<std::uint64_t>(t));
    std::int64_t pos = k;
    while (pos > m && pos < high) {
      if (pos < 2) {
        pos = (kind == WalkKind::X) ? pos + 1 : (pos == 1 ? 0 : 2);
        continue;
      }
      pos = mc_step(env.site(pos), kind, pos, rng.next_unit());
    }
    never += pos >= high ? 1 : 0;
  }
  double p = static_cast<double>(never) / static_cast<double>(trials);
  double ci = 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
  return McEstimate{p, ci, trials};
}

McEstimate mc_return_frequency(const Environment& env, WalkKind kind, std::int64_t m,
                               std::int64_t k, std::uint64_t horizon, std::int64_t trials,
                               std::uint64_t seed) {
  if (trials < 1000) throw ConfigError("mc_return_frequency: need trials >= 1e3");
  if (k <= m) throw ConfigError("mc_return_frequency: need k > m");
  std::int64_t returned = 0;
  for (std::int64_t t = 0; t < trials; ++t) {
    RngStream rng(seed, static_cast<std::uint64_t>(t));
    std::int64_t pos = k;
    for (std::uint64_t step = 0; step < horizon && pos > m; ++step) {
      if (pos < 2) {
        pos = (kind == WalkKind::X) ? pos + 1 : (pos == 1 ? 0 : 2);
        continue;
      }
      pos = mc_step(env.site(pos), kind, pos, rng.next_unit());
    }
    returned += pos <= m ? 1 : 0;
  }
  double p = static_cast<double>(returned) / static_cast<double>(trials);
  double ci = 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
  return McEstimate{p, ci, trials};
}

}  // namespace cutwalk
