#include "cutwalk/matprod.hpp"

#include <cmath>
#include <sstream>

namespace cutwalk {

Eigen::Matrix2d companion_matrix(const Environment& env, std::int64_t k) {
  Eigen::Matrix2d A;
  A << env.a_k(k), env.b_k(k), 1.0, 0.0;
  return A;
}

ScaledReal entry_product(const Environment& env, std::int64_t k, std::int64_t n, int i, int j) {
  if (k < 2 || n < k - 1) throw ConfigError("entry_product: need 2 <= k, n >= k-1");
  if ((i != 1 && i != 2) || (j != 1 && j != 2))
    throw ConfigError("entry_product: i, j must be 1 or 2");
  if (n - k + 1 > kEntryProductGuard)
    throw CapError("entry_product: range exceeds raw-product size guard");

  if (n == k - 1) return ScaledReal(i == j ? 1.0 : 0.0);  // identity

  Eigen::RowVector2d v = i == 1 ? Eigen::RowVector2d(1.0, 0.0) : Eigen::RowVector2d(0.0, 1.0);
  std::int64_t exp2 = 0;
  for (std::int64_t s = k; s <= n; ++s) {
    v = v * companion_matrix(env, s);
    double scale = v.cwiseAbs().maxCoeff();
    if (scale > 0x1p+512 || (scale > 0.0 && scale < 0x1p-512)) {
      int e = 0;
      std::frexp(scale, &e);
      v *= std::ldexp(1.0, -e);
      exp2 += e;
    }
  }
  ScaledReal r(v(j - 1));
  if (r.is_zero()) return r;
  // fold the accumulated renormalization exponent back in
  return ScaledReal::from_parts(r.mantissa(), r.exponent() + exp2);
}

std::vector<double> zeta_profile(const Environment& env, std::int64_t k, std::int64_t n) {
  if (k < 2 || n < k) throw ConfigError("zeta_profile: need 2 <= k <= n");
  std::vector<double> out(static_cast<std::size_t>(n - k + 1));
  double z = 0.0;
  for (std::int64_t s = n; s >= k; --s) {
    z = 1.0 / (env.a_k(s) + env.b_k(s) * z);
    out[static_cast<std::size_t>(s - k)] = z;
  }
  return out;
}

double zeta(const Environment& env, std::int64_t k, std::int64_t n) {
  if (k < 2 || n < k) throw ConfigError("zeta: need 2 <= k <= n");
  double z = 0.0;
  for (std::int64_t s = n; s >= k; --s) z = 1.0 / (env.a_k(s) + env.b_k(s) * z);
  return z;
}

std::vector<double> theta_profile(const Environment& env, std::int64_t k, std::int64_t n) {
  if (k < 2 || n < k) throw ConfigError("theta_profile: need 2 <= k <= n");
  std::vector<double> out(static_cast<std::size_t>(n - k + 1));
  double t = 0.0;
  for (std::int64_t s = n; s >= k; --s) {
    t = (s == n) ? 1.0 / env.a_k(n) : 1.0 / (env.a_k(s) + env.b_k(s + 1) * t);
    out[static_cast<std::size_t>(s - k)] = t;
  }
  return out;
}

double theta(const Environment& env, std::int64_t k, std::int64_t n) {
  if (k < 2 || n < k) throw ConfigError("theta: need 2 <= k <= n");
  double t = 0.0;
  for (std::int64_t s = n; s >= k; --s)
    t = (s == n) ? 1.0 / env.a_k(n) : 1.0 / (env.a_k(s) + env.b_k(s + 1) * t);
  return t;
}

namespace {

// zeta_{k,n} as a continued fraction: level j carries (b_j^{-1}, a_j b_j^{-1}).
ContinuedFraction zeta_fraction(const Environment& env) {
  ContinuedFraction cf;
  cf.alpha = [&env](std::int64_t j) { return env.a_k(j) / env.b_k(j); };
  cf.beta = [&env](std::int64_t j) { return 1.0 / env.b_k(j); };
  cf.alpha_limit = env.limit_a() / env.limit_b();
  cf.beta_limit = 1.0 / env.limit_b();
  return cf;
}

// theta_{k,n}: level j carries (b_{j+1}^{-1}, a_j b_{j+1}^{-1}).
ContinuedFraction theta_fraction(const Environment& env) {
  ContinuedFraction cf;
  cf.alpha = [&env](std::int64_t j) { return env.a_k(j) / env.b_k(j + 1); };
  cf.beta = [&env](std::int64_t j) { return 1.0 / env.b_k(j + 1); };
  cf.alpha_limit = env.limit_a() / env.limit_b();
  cf.beta_limit = 1.0 / env.limit_b();
  return cf;
}

}  // namespace

TailValue zeta_tail(const Environment& env, std::int64_t k, double tol) {
  if (k < 2) throw ConfigError("zeta_tail: need k >= 2");
  return tail_value(zeta_fraction(env), k, tol);
}

TailValue theta_tail(const Environment& env, std::int64_t k, double tol) {
  if (k < 2) throw ConfigError("theta_tail: need k >= 2");
  return tail_value(theta_fraction(env), k, tol);
}

std::vector<double> zeta_tails_range(const Environment& env, std::int64_t lo, std::int64_t hi,
                                     double tol) {
  if (lo < 2) throw ConfigError("zeta_tails_range: need lo >= 2");
  return tail_values_range(zeta_fraction(env), lo, hi, tol);
}

std::vector<double> theta_tails_range(const Environment& env, std::int64_t lo, std::int64_t hi,
                                      double tol) {
  if (lo < 2) throw ConfigError("theta_tails_range: need lo >= 2");
  return tail_values_range(theta_fraction(env), lo, hi, tol);
}

std::vector<FHPair> fH_profile(const Environment& env, std::int64_t k, std::int64_t n) {
  if (k < 1 || n < 1) throw ConfigError("fH_profile: need k >= 1, n >= 1");
  std::vector<FHPair> out(static_cast<std::size_t>(n));
  double f_prev = 0.0, H = 0.0;
  for (std::int64_t j = 1; j <= n; ++j) {
    double f = env.b_k(k + j) / (env.a_k(k + j) + f_prev);
    H = (j == 1) ? 0.0 : -f * f_prev - f * H;
    out[static_cast<std::size_t>(j - 1)] = FHPair{f, H};
    f_prev = f;
  }
  return out;
}

double f_seq(const Environment& env, std::int64_t k, std::int64_t n) {
  return fH_profile(env, k, n).back().f;
}

double H_seq(const Environment& env, std::int64_t k, std::int64_t n) {
  return fH_profile(env, k, n).back().H;
}

}  // namespace cutwalk
