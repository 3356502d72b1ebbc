#include "cutwalk/contfrac.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cutwalk {

namespace {

double level_alpha(const ContinuedFraction& cf, std::int64_t j) {
  double a = cf.alpha(j);
  if (!(a > 0.0) || !std::isfinite(a)) {
    std::ostringstream msg;
    msg << "continued fraction: alpha_" << j << " = " << a << " not positive";
    throw ConfigError(msg.str());
  }
  return a;
}

double level_beta(const ContinuedFraction& cf, std::int64_t j) {
  double b = cf.beta(j);
  if (!(b > 0.0) || !std::isfinite(b)) {
    std::ostringstream msg;
    msg << "continued fraction: beta_" << j << " = " << b << " not positive";
    throw ConfigError(msg.str());
  }
  return b;
}

}  // namespace

ContinuedFraction constant_fraction(double alpha, double beta) {
  ContinuedFraction cf;
  cf.alpha = [alpha](std::int64_t) { return alpha; };
  cf.beta = [beta](std::int64_t) { return beta; };
  cf.alpha_limit = alpha;
  cf.beta_limit = beta;
  return cf;
}

bool bounded_ratio_witness(const ContinuedFraction& cf, double B, std::int64_t lo,
                           std::int64_t hi) {
  if (B < 1.0) return false;
  for (std::int64_t j = lo; j <= hi; ++j) {
    double r = level_beta(cf, j) / level_alpha(cf, j);
    if (r < 1.0 / B || r > B) return false;
  }
  return true;
}

double approximant(const ContinuedFraction& cf, std::int64_t k, std::int64_t n) {
  if (k < 1 || n < k) throw ConfigError("approximant: need 1 <= k <= n");
  double x = 0.0;
  for (std::int64_t j = n; j >= k; --j) x = level_beta(cf, j) / (level_alpha(cf, j) + x);
  if (!std::isfinite(x)) throw CapError("approximant: non-finite intermediate");
  return x;
}

std::vector<double> approximant_profile(const ContinuedFraction& cf, std::int64_t k,
                                        std::int64_t n) {
  if (k < 1 || n < k) throw ConfigError("approximant_profile: need 1 <= k <= n");
  std::vector<double> out(static_cast<std::size_t>(n - k + 1));
  double x = 0.0;
  for (std::int64_t j = n; j >= k; --j) {
    x = level_beta(cf, j) / (level_alpha(cf, j) + x);
    out[static_cast<std::size_t>(j - k)] = x;
  }
  return out;
}

TailValue tail_value(const ContinuedFraction& cf, std::int64_t k, double tol,
                     std::int64_t depth_cap) {
  if (k < 1) throw ConfigError("tail_value: need k >= 1");
  double lo = 0.0, hi = 0.0;
  std::int64_t depth = 1;
  while (true) {
    // Depths d and d+1 have opposite parity, so they bracket the tail.
    double a = approximant(cf, k, k + depth - 1);
    double b = approximant(cf, k, k + depth);
    lo = std::min(a, b);
    hi = std::max(a, b);
    if (hi - lo < tol) return TailValue{0.5 * (lo + hi), depth + 1, lo, hi};
    if (depth >= depth_cap) {
      std::ostringstream msg;
      msg << "tail_value: bracket width " << (hi - lo) << " > tol " << tol << " at depth cap "
          << depth_cap;
      throw TailDepthError(msg.str(), lo, hi, depth);
    }
    depth = std::min(depth * 2, depth_cap);
  }
}

std::vector<double> tail_values_range(const ContinuedFraction& cf, std::int64_t lo,
                                      std::int64_t hi, double tol, std::int64_t depth_cap) {
  if (lo < 1 || hi < lo) throw ConfigError("tail_values_range: need 1 <= lo <= hi");
  std::int64_t depth = 32;
  std::vector<double> lo_vals, hi_vals;
  while (true) {
    std::vector<double> a = approximant_profile(cf, lo, hi + depth - 1);
    std::vector<double> b = approximant_profile(cf, lo, hi + depth);
    double width = 0.0;
    std::size_t count = static_cast<std::size_t>(hi - lo + 1);
    lo_vals.assign(count, 0.0);
    hi_vals.assign(count, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
      lo_vals[i] = std::min(a[i], b[i]);
      hi_vals[i] = std::max(a[i], b[i]);
      width = std::max(width, hi_vals[i] - lo_vals[i]);
    }
    if (width < tol) {
      std::vector<double> out(count);
      for (std::size_t i = 0; i < count; ++i) out[i] = 0.5 * (lo_vals[i] + hi_vals[i]);
      return out;
    }
    if (depth >= depth_cap) {
      std::ostringstream msg;
      msg << "tail_values_range: bracket width " << width << " > tol " << tol
          << " at depth cap " << depth_cap;
      throw TailDepthError(msg.str(), lo_vals[0], hi_vals[0], depth);
    }
    depth = std::min(depth * 2, depth_cap);
  }
}

double limit_formula(double alpha, double beta) {
  if (alpha == 0.0) throw ConfigError("limit_formula: alpha must be nonzero");
  double disc = 1.0 + 4.0 * beta / (alpha * alpha);
  if (disc < 0.0) throw ConfigError("limit_formula: alpha^2 + 4 beta must be >= 0");
  // (alpha/2)(sqrt(1+4 beta/alpha^2) - 1) without the subtraction.
  return 2.0 * beta / (alpha * (std::sqrt(disc) + 1.0));
}

namespace {

bool le(double a, double b, double tol) { return a <= b + tol * std::max({1.0, a, b}); }
bool ge(double a, double b, double tol) { return a >= b - tol * std::max({1.0, a, b}); }

}  // namespace

TailInequalityReport check_tail_inequalities(const ContinuedFraction& cf, std::int64_t k,
                                             std::int64_t n, bool require_alpha_ge_1,
                                             double slack_tol) {
  if (k < 1 || n < k) throw ConfigError("check_tail_inequalities: need 1 <= k <= n");
  if (require_alpha_ge_1) {
    for (std::int64_t j = k; j <= n + 1; ++j)
      if (level_alpha(cf, j) < 1.0)
        throw ConfigError("check_tail_inequalities: alpha_j >= 1 required");
  }

  const double tail_tol = std::min(slack_tol, 1e-13);
  std::vector<double> appr = approximant_profile(cf, k, n);     // xi_{j,n}
  std::vector<double> appr1 = approximant_profile(cf, k, n + 1);
  std::vector<double> tails = tail_values_range(cf, k, n + 1, tail_tol);
  auto xi_n = [&](std::int64_t j) { return appr[static_cast<std::size_t>(j - k)]; };
  auto xi = [&](std::int64_t j) { return tails[static_cast<std::size_t>(j - k)]; };

  const bool even = ((n - k + 1) % 2) == 0;
  TailInequalityReport rep;
  auto add = [&](const std::string& name, double lhs, double rhs, bool pass) {
    rep.items.push_back(InequalityCheck{name, k, n, lhs, rhs, pass, rhs - lhs});
    rep.all_pass = rep.all_pass && pass;
  };

  // Alternation: xi_{k,n} below the tail at even depth, above at odd.
  {
    double lhs = xi_n(k), rhs = xi(k);
    add("alternation", lhs, rhs, even ? le(lhs, rhs, slack_tol) : ge(lhs, rhs, slack_tol));
  }

  if (k <= n - 1) {
    double lhs = xi_n(k) * xi_n(k + 1), rhs = xi(k) * xi(k + 1);
    add("pair_product", lhs, rhs, even ? ge(lhs, rhs, slack_tol) : le(lhs, rhs, slack_tol));
  }

  // Product sandwich: xi_k...xi_n <= xi_{k,n}...xi_{n,n} <= xi_k...xi_{n-1} xi_{n,n}.
  {
    double p_appr = 1.0, p_tail = 1.0, p_mixed = 1.0;
    for (std::int64_t j = k; j <= n; ++j) {
      p_appr *= xi_n(j);
      p_tail *= xi(j);
      p_mixed *= (j == n) ? xi_n(n) : xi(j);
    }
    add("product_sandwich_lo", p_tail, p_appr, le(p_tail, p_appr, slack_tol));
    add("product_sandwich_hi", p_appr, p_mixed, le(p_appr, p_mixed, slack_tol));

    if (require_alpha_ge_1) {
      add("last_level", xi_n(n), xi(n) + xi(n) * xi(n + 1),
          le(xi_n(n), xi(n) + xi(n) * xi(n + 1), slack_tol));
      add("product_tail_hi", p_appr, p_tail * (1.0 + xi(n + 1)),
          le(p_appr, p_tail * (1.0 + xi(n + 1)), slack_tol));
    }
  }

  if (require_alpha_ge_1 && k <= n - 1) {
    double lhs = xi_n(k) + xi_n(k) * xi_n(k + 1);
    double rhs = xi(k) + xi(k) * xi(k + 1);
    add("pair_sum", lhs, rhs, even ? ge(lhs, rhs, slack_tol) : le(lhs, rhs, slack_tol));
  }

  if (require_alpha_ge_1) {
    // Sum sandwich over j in [k,n] (tails) vs approximants vs one extra term.
    double s_appr = 0.0, s_tail = 0.0, p_a = 1.0, p_t = 1.0;
    for (std::int64_t j = k; j <= n; ++j) {
      p_a *= xi_n(j);
      p_t *= xi(j);
      s_appr += p_a;
      s_tail += p_t;
    }
    double s_tail_plus = s_tail + p_t * xi(n + 1);
    add("sum_sandwich_lo", s_tail, s_appr, le(s_tail, s_appr, slack_tol));
    add("sum_sandwich_hi", s_appr, s_tail_plus, le(s_appr, s_tail_plus, slack_tol));
  }

  // Consecutive-depth approximants bracket the tail.
  {
    double a = xi_n(k), b = appr1[0], t = xi(k);
    bool pass = ge(t, std::min(a, b), slack_tol) && le(t, std::max(a, b), slack_tol);
    add("bracketing", std::min(a, b), std::max(a, b), pass);
  }

  return rep;
}

}  // namespace cutwalk
