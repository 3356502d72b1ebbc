#include "cutwalk/prob.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>

#include <Eigen/Dense>

namespace cutwalk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lazily extended tail table over sites [lo, ...]; extension recomputes the
// whole range (doubling keeps total work ~2x final).
class TailSupplier {
 public:
  enum class Which { Zeta, Theta };
  TailSupplier(const Environment& env, Which which, std::int64_t lo, double tol)
      : env_(env), which_(which), lo_(lo), tol_(tol) {}

  double at(std::int64_t i) {
    if (i < lo_) throw ConfigError("TailSupplier: index below range start");
    if (i >= lo_ + static_cast<std::int64_t>(vals_.size())) {
      std::int64_t hi = std::max(i, lo_ + 2 * std::max<std::int64_t>(
                                           static_cast<std::int64_t>(vals_.size()), 64));
      vals_ = which_ == Which::Zeta ? zeta_tails_range(env_, lo_, hi, tol_)
                                    : theta_tails_range(env_, lo_, hi, tol_);
    }
    return vals_[static_cast<std::size_t>(i - lo_)];
  }

 private:
  const Environment& env_;
  Which which_;
  std::int64_t lo_;
  double tol_;
  std::vector<double> vals_;
};

// Shared driver for the four series shapes 1 + sum_j prod_{i<=j} r_i.
// ratio(j) yields r at term index j = 1,2,...; limit_ratio is the declared
// asymptotic ratio; monotone_family enables the rigorous geometric tail rule.
struct SeriesSpec {
  std::function<double(std::int64_t)> ratio;
  double limit_ratio;
  bool monotone_family;
};

SeriesResult sum_finite(const SeriesSpec& spec, std::int64_t nterms) {
  SeriesResult res;
  res.kind = TailKind::Exact;
  ScaledReal partial(1.0);
  ScaledReal term(1.0);
  for (std::int64_t j = 1; j <= nterms; ++j) {
    term *= ScaledReal(spec.ratio(j));
    partial += term;
  }
  res.value = partial.to_double();
  res.terms_used = nterms;
  return res;
}

SeriesResult sum_infinite(const SeriesSpec& spec, const SeriesOptions& opts) {
  SeriesResult res;
  // Declared supercritical ratio: the series diverges; report a short partial.
  if (spec.limit_ratio > 1.0 + 1e-9) {
    double partial = 1.0, term = 1.0;
    std::int64_t j = 0;
    while (j < 1024 && partial < 1.0 / opts.tol && term < 1e100) {
      ++j;
      term *= spec.ratio(j);
      partial += term;
    }
    res.value = partial;
    res.terms_used = j;
    res.kind = TailKind::Divergent;
    res.diverged = true;
    return res;
  }

  double partial = 1.0, term = 1.0;
  double prev_ratio = spec.limit_ratio;
  std::int64_t stall = 0, nondecay = 0;
  for (std::int64_t j = 1; j <= opts.term_cap; ++j) {
    double r = spec.ratio(j);
    term *= r;
    partial += term;

    if (term > 1e290 || partial > 1e290) {
      res.value = partial;
      res.terms_used = j;
      res.kind = TailKind::Divergent;
      res.diverged = true;
      return res;
    }

    // Rigorous geometric tail once the remaining-ratio envelope is below 1.
    if (spec.monotone_family && j >= 2) {
      double sup = std::max({r, prev_ratio, spec.limit_ratio});
      if (sup < 1.0) {
        double bound = term * sup / (1.0 - sup) * (1.0 + 1e-12);
        if (bound < opts.tol) {
          res.value = partial;
          res.terms_used = j;
          res.tail_bound = bound;
          res.kind = TailKind::Rigorous;
          return res;
        }
      }
    }
    // Heuristic stall rule.
    stall = (term < opts.rel_tol * partial) ? stall + 1 : 0;
    if (stall >= 32) {
      res.value = partial;
      res.terms_used = j;
      res.tail_bound = r < 1.0 ? term * r / (1.0 - r) : term;
      res.kind = TailKind::Heuristic;
      return res;
    }
    // Non-decaying terms: divergence (recurrent side of a critical family).
    nondecay = (r >= 1.0 - 1e-15) ? nondecay + 1 : 0;
    if (nondecay >= 4096 && partial > 1.0 / opts.tol) {
      res.value = partial;
      res.terms_used = j;
      res.kind = TailKind::Divergent;
      res.diverged = true;
      return res;
    }
    prev_ratio = r;
  }
  res.value = partial;
  res.terms_used = opts.term_cap;
  res.tail_bound = term;
  res.kind = TailKind::Heuristic;
  return res;
}

// Entry-ratio recursion for F_X: r_s = z_{m+1,s}/z_{m+1,s-1} with
// z_{m+1,s} = e1 A_s...A_{m+1} e1^t; r_{m+1} = a_{m+1}.
class EntryRatio {
 public:
  EntryRatio(const Environment& env, std::int64_t m) : env_(env), m_(m) {}
  double operator()(std::int64_t j) {
    std::int64_t s = m_ + j;
    r_ = (j == 1) ? env_.a_k(s) : env_.a_k(s) + env_.b_k(s) / r_;
    return r_;
  }

 private:
  const Environment& env_;
  std::int64_t m_;
  double r_ = 0.0;
};

bool monotone_builtin(const Environment& env) {
  return env.rho_monotonicity() != RhoMonotonicity::Unknown;
}

}  // namespace

SeriesResult series_F_X(const Environment& env, std::int64_t m,
                        std::optional<std::int64_t> n, const SeriesOptions& opts) {
  if (m < 1) throw ConfigError("series_F_X: need m >= 1");
  auto ratio_state = std::make_shared<EntryRatio>(env, m);
  SeriesSpec spec{[ratio_state](std::int64_t j) { return (*ratio_state)(j); },
                  env.limits().rho, monotone_builtin(env)};
  if (n) {
    if (*n < m + 1) throw ConfigError("series_F_X: need n >= m+1");
    return sum_finite(spec, *n - 1 - m);
  }
  return sum_infinite(spec, opts);
}

ScaledReal series_F_X_scaled(const Environment& env, std::int64_t m, std::int64_t n) {
  if (m < 1 || n < m + 1) throw ConfigError("series_F_X_scaled: need 1 <= m < n");
  ScaledReal partial(1.0), term(1.0);
  double r = 0.0;
  for (std::int64_t s = m + 1; s <= n - 1; ++s) {
    r = (s == m + 1) ? env.a_k(s) : env.a_k(s) + env.b_k(s) / r;
    term *= ScaledReal(r);
    partial += term;
  }
  return partial;
}

SeriesResult series_F_Y(const Environment& env, std::int64_t m,
                        std::optional<std::int64_t> n, const SeriesOptions& opts) {
  if (m < 1) throw ConfigError("series_F_Y: need m >= 1");
  auto tails = std::make_shared<TailSupplier>(env, TailSupplier::Which::Zeta, m + 1,
                                              std::min(opts.tol, 1e-13));
  double zeta_limit = 1.0 / env.limits().rho;  // zeta tails converge to 1/rho
  SeriesSpec spec{[tails, m](std::int64_t j) { return tails->at(m + j); }, zeta_limit,
                  monotone_builtin(env)};
  if (n) {
    if (*n < m + 1) throw ConfigError("series_F_Y: need n >= m+1");
    return sum_finite(spec, *n - 1 - m);
  }
  return sum_infinite(spec, opts);
}

SeriesResult series_D(const Environment& env, WalkKind kind, std::int64_t n,
                      std::optional<std::int64_t> upto, const SeriesOptions& opts) {
  if (n < 1) throw ConfigError("series_D: need n >= 1");
  SeriesSpec spec{[&env, kind, n](std::int64_t j) {
                    double rho = env.rho_k(n + j);
                    return kind == WalkKind::X ? rho : 1.0 / rho;
                  },
                  kind == WalkKind::X ? env.limits().rho : 1.0 / env.limits().rho,
                  monotone_builtin(env)};
  if (upto) {
    if (*upto < n + 1) throw ConfigError("series_D: need upto >= n+1");
    return sum_finite(spec, *upto - 1 - n);
  }
  return sum_infinite(spec, opts);
}

SeriesResult series_G(const Environment& env, std::int64_t m,
                      std::optional<std::int64_t> n, const SeriesOptions& opts) {
  if (m < 1) throw ConfigError("series_G: need m >= 1");
  auto tails = std::make_shared<TailSupplier>(env, TailSupplier::Which::Theta, m + 1,
                                              std::min(opts.tol, 1e-13));
  SeriesSpec spec{[tails, m](std::int64_t j) { return 1.0 / tails->at(m + j); },
                  env.limits().rho, monotone_builtin(env)};
  if (n) {
    if (*n < m + 1) throw ConfigError("series_G: need n >= m+1");
    return sum_finite(spec, *n - 1 - m);
  }
  return sum_infinite(spec, opts);
}

ScaledReal series_G_scaled(const Environment& env, std::int64_t m, std::int64_t n) {
  if (m < 1 || n < m + 1) throw ConfigError("series_G_scaled: need 1 <= m < n");
  if (n - m < 2) return ScaledReal(1.0);
  std::vector<double> tails = theta_tails_range(env, m + 1, n - 1, 1e-13);
  ScaledReal partial(1.0), term(1.0);
  for (std::int64_t s = m + 1; s <= n - 1; ++s) {
    term *= ScaledReal(1.0 / tails[static_cast<std::size_t>(s - m - 1)]);
    partial += term;
  }
  return partial;
}

namespace {

struct GridSweepResult {
  std::vector<double> values;
  bool settled;
  std::int64_t horizon;
};

// Per-site series ratio of the D_Z series at a real-valued site (corollary
// family): rho(x)^{+-1} with rho(x) = 1 -+ 3 r(max(x, n0)).
double corollary_ratio_real(const Environment& env, WalkKind kind, double x) {
  double xx = std::max(x, static_cast<double>(env.n0()));
  double beta = env.beta();
  double ll = std::log(std::log(xx));
  double corr = beta == 0.0 ? 1.0 : std::pow(ll, -beta);
  double r3 = (1.0 + corr) / xx;
  double rho = env.sign() == PerturbSign::X ? 1.0 - r3 : 1.0 + r3;
  return kind == WalkKind::X ? rho : 1.0 / rho;
}

// sum_{j>H} prod_{i=H+1}^{j} ratio_i for a corollary env, by quadrature of
// the exponential of the integrated log-ratio (the product decays like a
// power with a (log log)^-beta exponent correction, far too slowly for
// term-by-term summation at high beta).  Relative accuracy ~1e-4 or better
// for H >= 1e5; divergent sides return +inf.
double corollary_series_tail(const Environment& env, WalkKind kind, double H) {
  if (std::log(corollary_ratio_real(env, kind, H)) >= 0.0) return kInf;
  const double du = 1.0 / 64.0;
  double u0 = std::log(H);
  auto g = [&](double u) {
    double x = std::exp(u);
    return x * std::log(corollary_ratio_real(env, kind, x));
  };
  // Trapezoid accumulation of both L(u) = int g and I = int exp(L + u - u0).
  double L = 0.0, I = 0.0;
  double g_prev = g(u0);
  double h_prev = 1.0;  // exp(L + u - u0) at u0
  for (double u = u0 + du; u - u0 < 40000.0; u += du) {
    double g_cur = g(u);
    L += 0.5 * du * (g_prev + g_cur);
    double h_cur = std::exp(L + (u - u0));
    I += 0.5 * du * (h_prev + h_cur);
    if (h_cur < 1e-14 * std::max(1.0, I)) break;
    g_prev = g_cur;
    h_prev = h_cur;
  }
  // Euler-Maclaurin: sum_{j>H} t(j) ~ int_H^inf t(x) dx - t(H)/2; the
  // integral in x is H * I under x = H e^{u-u0}.
  return std::max(0.0, H * I - 0.5);
}

// F_X(H) for a corollary env: exact entry-ratio burn-in to J = H + B, then
// the remaining tail via the rho-product quadrature (the entry ratios track
// rho_i with O(1/i^2) lag there).
double corollary_fx_estimate(const Environment& env, double H) {
  const std::int64_t Hi = static_cast<std::int64_t>(H);
  const std::int64_t J = Hi + 20'000;
  double S = 0.0, z = 1.0, r = 0.0;
  for (std::int64_t s = Hi + 1; s <= J; ++s) {
    r = (s == Hi + 1) ? env.a_k(s) : env.a_k(s) + env.b_k(s) / r;
    z *= r;
    S += z;
  }
  double tail = corollary_series_tail(env, WalkKind::X, static_cast<double>(J));
  return 1.0 + S + z * tail;
}

double corollary_fy_estimate(const Environment& env, double H) {
  const std::int64_t Hi = static_cast<std::int64_t>(H);
  const std::int64_t J = Hi + 20'000;
  std::vector<double> tails = zeta_tails_range(env, Hi + 1, J, 1e-13);
  double S = 0.0, p = 1.0;
  for (std::int64_t s = Hi + 1; s <= J; ++s) {
    p *= tails[static_cast<std::size_t>(s - Hi - 1)];
    S += p;
  }
  double tail = corollary_series_tail(env, WalkKind::Y, static_cast<double>(J));
  return 1.0 + S + p * tail;
}

// One backward sweep of F_X(m) = 1 + T(m) e1^t, T(m-1) = (e1 + T(m)) A_m.
std::vector<double> fx_sweep(const Environment& env, std::int64_t m_max,
                             std::int64_t horizon) {
  Eigen::RowVector2d T(0.0, 0.0);
  if (env.kind() == Environment::Kind::Corollary) {
    double F = corollary_fx_estimate(env, static_cast<double>(horizon));
    T(0) = F - 1.0;
    T(1) = env.b_k(horizon + 1) * F;
  } else {
    double a = env.a_k(horizon + 1), b = env.b_k(horizon + 1);
    EigenPair ev = companion_roots(a, b);
    if (ev.rho < 1.0) {
      Eigen::Matrix2d A;
      A << a, b, 1.0, 0.0;
      Eigen::Matrix2d M = Eigen::Matrix2d::Identity() - A;
      T = (Eigen::RowVector2d(a, b)) * M.inverse();
    }
  }
  std::vector<double> F(static_cast<std::size_t>(m_max + 1), kInf);
  Eigen::RowVector2d e1(1.0, 0.0);
  for (std::int64_t m = horizon; m >= 1; --m) {
    double a = env.a_k(m + 1), b = env.b_k(m + 1);
    // T(m) = (e1 + T(m+1)) * A_{m+1}
    Eigen::RowVector2d u = e1 + T;
    T(0) = u(0) * a + u(1);
    T(1) = u(0) * b;
    if (!(T(0) < 1e290)) return std::vector<double>(static_cast<std::size_t>(m_max + 1), kInf);
    if (m <= m_max) F[static_cast<std::size_t>(m)] = 1.0 + T(0);
  }
  if (m_max >= 0) F[0] = F[std::min<std::size_t>(1, F.size() - 1)];
  return F;
}

std::vector<double> d_sweep(const Environment& env, WalkKind kind, std::int64_t n_max,
                            std::int64_t horizon) {
  std::vector<double> D(static_cast<std::size_t>(n_max + 1), kInf);
  double d;
  if (env.kind() == Environment::Kind::Corollary) {
    d = 1.0 + corollary_series_tail(env, kind, static_cast<double>(horizon));
  } else {
    double rho_h = env.rho_k(horizon + 1);
    double r_h = kind == WalkKind::X ? rho_h : 1.0 / rho_h;
    d = r_h < 1.0 ? 1.0 / (1.0 - r_h) : 1.0;
  }
  if (std::isinf(d)) return D;
  for (std::int64_t n = horizon; n >= 1; --n) {
    double rho = env.rho_k(n + 1);
    double r = kind == WalkKind::X ? rho : 1.0 / rho;
    d = 1.0 + r * d;
    if (!(d < 1e290)) return std::vector<double>(static_cast<std::size_t>(n_max + 1), kInf);
    if (n <= n_max) D[static_cast<std::size_t>(n)] = d;
  }
  return D;
}

template <typename Sweep>
GridSweepResult doubling_sweep(Sweep sweep, std::int64_t m_max, double rel_tol,
                               std::int64_t horizon_cap) {
  std::int64_t horizon = std::max<std::int64_t>(4 * m_max, 4096);
  std::vector<double> prev = sweep(horizon);
  while (horizon < horizon_cap) {
    std::int64_t next_h = std::min(horizon * 2, horizon_cap);
    std::vector<double> cur = sweep(next_h);
    double worst = 0.0;
    for (std::size_t i = 1; i < cur.size(); ++i) {
      if (std::isinf(prev[i]) && std::isinf(cur[i])) continue;
      worst = std::max(worst, std::fabs(cur[i] - prev[i]) /
                                  std::max(1.0, std::min(std::fabs(cur[i]), std::fabs(prev[i]))));
    }
    if (worst < rel_tol) return GridSweepResult{std::move(cur), true, next_h};
    prev = std::move(cur);
    horizon = next_h;
  }
  return GridSweepResult{std::move(prev), false, horizon};
}

}  // namespace

std::vector<double> series_F_X_grid(const Environment& env, std::int64_t m_max,
                                    double rel_tol, std::int64_t horizon_cap) {
  if (m_max < 1) throw ConfigError("series_F_X_grid: need m_max >= 1");
  if (env.limits().rho > 1.0 + 1e-9)
    return std::vector<double>(static_cast<std::size_t>(m_max + 1), kInf);
  GridSweepResult r = doubling_sweep(
      [&](std::int64_t h) { return fx_sweep(env, m_max, h); }, m_max, rel_tol, horizon_cap);
  return std::move(r.values);
}

std::vector<double> series_D_grid(const Environment& env, WalkKind kind, std::int64_t n_max,
                                  double rel_tol, std::int64_t horizon_cap) {
  if (n_max < 1) throw ConfigError("series_D_grid: need n_max >= 1");
  double limit_r = kind == WalkKind::X ? env.limits().rho : 1.0 / env.limits().rho;
  if (limit_r > 1.0 + 1e-9)
    return std::vector<double>(static_cast<std::size_t>(n_max + 1), kInf);
  GridSweepResult r = doubling_sweep(
      [&](std::int64_t h) { return d_sweep(env, kind, n_max, h); }, n_max, rel_tol,
      horizon_cap);
  return std::move(r.values);
}

namespace {

std::vector<double> fy_sweep(const Environment& env, std::int64_t m_max, std::int64_t horizon) {
  std::vector<double> tails = zeta_tails_range(env, 2, horizon + 1, 1e-13);
  std::vector<double> F(static_cast<std::size_t>(m_max + 1), kInf);
  double f;
  if (env.kind() == Environment::Kind::Corollary) {
    f = corollary_fy_estimate(env, static_cast<double>(horizon));
  } else {
    double zeta_h = tails.back();
    f = zeta_h < 1.0 ? 1.0 / (1.0 - zeta_h) : 1.0;
  }
  if (std::isinf(f)) return F;
  for (std::int64_t m = horizon; m >= 1; --m) {
    f = 1.0 + tails[static_cast<std::size_t>(m + 1 - 2)] * f;
    if (!(f < 1e290)) return std::vector<double>(static_cast<std::size_t>(m_max + 1), kInf);
    if (m <= m_max) F[static_cast<std::size_t>(m)] = f;
  }
  F[0] = F[std::min<std::size_t>(1, F.size() - 1)];
  return F;
}

}  // namespace

std::vector<double> series_F_Y_grid(const Environment& env, std::int64_t m_max,
                                    double rel_tol, std::int64_t horizon_cap) {
  if (m_max < 1) throw ConfigError("series_F_Y_grid: need m_max >= 1");
  if (1.0 / env.limits().rho > 1.0 + 1e-9)
    return std::vector<double>(static_cast<std::size_t>(m_max + 1), kInf);
  GridSweepResult r = doubling_sweep(
      [&](std::int64_t h) { return fy_sweep(env, m_max, h); }, m_max, rel_tol, horizon_cap);
  return std::move(r.values);
}

EscapeSplit escape_Y_split(const Environment& env, std::int64_t m, std::int64_t k,
                           std::int64_t n) {
  if (m < 1 || n < m + 1) throw ConfigError("escape_Y_split: need 1 <= m < n");
  if (k < m || k > n + 1) throw ConfigError("escape_Y_split: need m <= k <= n+1");
  if (k == m) return EscapeSplit{0.0, 0.0, 0.0};
  if (k == n) return EscapeSplit{1.0, 0.0, 1.0};
  if (k == n + 1) return EscapeSplit{0.0, 1.0, 1.0};

  // y1_s = e1 A_s...A_{n-1} e1^t and y2_s = e1 A_s...A_{n-1} e2^t
  //      = b_{n-1} * (e1 A_s...A_{n-2} e1^t), accumulated via zeta profiles.
  const std::int64_t lo = m + 1;
  const std::size_t count = static_cast<std::size_t>(n - 1 - lo + 1);
  std::vector<double> zp1 = zeta_profile(env, lo, n - 1);
  std::vector<double> zp2 =
      (n - 2 >= lo) ? zeta_profile(env, lo, n - 2) : std::vector<double>();

  std::vector<ScaledReal> y1(count), y2(count);
  ScaledReal acc1(1.0);
  for (std::int64_t s = n - 1; s >= lo; --s) {
    acc1 *= ScaledReal(1.0 / zp1[static_cast<std::size_t>(s - lo)]);
    y1[static_cast<std::size_t>(s - lo)] = acc1;
  }
  double b_top = env.b_k(n - 1);
  ScaledReal acc2(1.0);
  for (std::int64_t s = n - 1; s >= lo; --s) {
    if (s <= n - 2) acc2 *= ScaledReal(1.0 / zp2[static_cast<std::size_t>(s - lo)]);
    y2[static_cast<std::size_t>(s - lo)] = acc2 * ScaledReal(b_top);
  }

  ScaledReal S1_k, S2_k, S1_all, S2_all;
  for (std::int64_t s = lo; s <= n - 1; ++s) {
    S1_all += y1[static_cast<std::size_t>(s - lo)];
    S2_all += y2[static_cast<std::size_t>(s - lo)];
    if (s == k) {
      S1_k = S1_all;
      S2_k = S2_all;
    }
  }

  ScaledReal one(1.0);
  ScaledReal den = one + S1_all;
  double q_plus = ratio(S1_k, den);
  double q_low = ratio(S1_k * (one + S2_all) - S2_k * den, den);
  double q_high = ratio(S2_k * den - S1_k * S2_all, den);
  q_low = std::clamp(q_low, 0.0, 1.0);
  q_high = std::clamp(q_high, 0.0, 1.0);
  q_plus = std::clamp(q_plus, 0.0, 1.0);
  return EscapeSplit{q_low, q_high, q_plus};
}

double escape_Y_to_inf(const Environment& env, std::int64_t m, double tol) {
  SeriesOptions opts;
  opts.tol = tol;
  SeriesResult fy = series_F_Y(env, m, std::nullopt, opts);
  if (fy.diverged) return 0.0;
  return 1.0 / fy.value;
}

double escape_Y_return_prob(const Environment& env, std::int64_t m, std::int64_t x,
                            double tol) {
  if (x <= m) return 1.0;
  SeriesOptions opts;
  opts.tol = tol;
  SeriesResult fy = series_F_Y(env, m, std::nullopt, opts);
  if (fy.diverged) return 1.0;
  // sum_{s=m+1}^{x} zeta_{m+1}...zeta_{s-1}
  double num = 1.0;
  if (x > m + 1) {
    std::vector<double> tails = zeta_tails_range(env, m + 1, x - 1, std::min(tol, 1e-13));
    double prod = 1.0;
    for (std::int64_t s = m + 2; s <= x; ++s) {
      prod *= tails[static_cast<std::size_t>(s - 2 - m)];
      num += prod;
    }
  }
  return std::clamp(1.0 - num / fy.value, 0.0, 1.0);
}

double escape_X_down(const Environment& env, std::int64_t m, std::int64_t k, std::int64_t n) {
  if (m < 1 || n < m + 1) throw ConfigError("escape_X_down: need 1 <= m < n");
  if (k < m || k > n) throw ConfigError("escape_X_down: need m <= k <= n");
  if (k == m) return 1.0;
  if (k == n) return 0.0;
  ScaledReal num, den(1.0), term(1.0);
  double r = 0.0;
  for (std::int64_t s = m + 1; s <= n - 1; ++s) {
    r = (s == m + 1) ? env.a_k(s) : env.a_k(s) + env.b_k(s) / r;
    term *= ScaledReal(r);
    den += term;
    if (s >= k) num += term;
  }
  return std::clamp(ratio(num, den), 0.0, 1.0);
}

NeverReturnX escape_X_never_return(const Environment& env, std::int64_t n, double tol) {
  if (n < 1) throw ConfigError("escape_X_never_return: need n >= 1");
  SeriesOptions opts;
  opts.tol = tol;
  SeriesResult fx = series_F_X(env, n, std::nullopt, opts);
  if (fx.diverged) return NeverReturnX{1.0, 0.0, fx};
  double nr = 1.0 / fx.value;
  return NeverReturnX{1.0 - nr, nr, fx};
}

double escape_X_return_prob(const Environment& env, std::int64_t m, std::int64_t x,
                            double tol) {
  if (x <= m) return 1.0;
  SeriesOptions opts;
  opts.tol = tol;
  SeriesResult fx = series_F_X(env, m, std::nullopt, opts);
  if (fx.diverged) return 1.0;
  SeriesResult fxm = series_F_X(env, m, x, opts);
  return std::clamp(1.0 - fxm.value / fx.value, 0.0, 1.0);
}

std::vector<double> eta_diag_profile(const Environment& env, std::int64_t k_max) {
  if (k_max < 1) throw ConfigError("eta_diag_profile: need k >= 1");
  std::vector<double> eta(static_cast<std::size_t>(k_max + 1), 0.0);
  for (std::int64_t j = 2; j <= k_max; ++j)
    eta[static_cast<std::size_t>(j)] =
        env.b_k(j) / (env.a_k(j) + eta[static_cast<std::size_t>(j - 1)]);
  return eta;
}

double eta_diag(const Environment& env, std::int64_t k) {
  return eta_diag_profile(env, k).back();
}

LayerHit h_layer(const Environment& env, std::int64_t k) {
  if (k < 1) throw ConfigError("h_layer: need k >= 1");
  if (k == 1) return LayerHit{1.0, 0.0};
  std::vector<double> eta = eta_diag_profile(env, 2 * k - 1);
  double h2 = 0.0;
  for (std::int64_t j = 1; j <= k - 1; ++j) {
    double e_even = eta[static_cast<std::size_t>(2 * j)];
    double e_odd = eta[static_cast<std::size_t>(2 * j + 1)];
    h2 = h2 * (e_even * e_odd) + (1.0 - e_even) * e_odd;
  }
  return LayerHit{1.0 - h2, h2};
}

double p_cut_X(const Environment& env, std::int64_t k, double tol) {
  if (k < 2) throw ConfigError("p_cut_X: need k >= 2");
  SeriesOptions opts;
  opts.tol = tol;
  SeriesResult fx = series_F_X(env, k, std::nullopt, opts);
  if (fx.diverged) return 0.0;
  return env.site(k).q / fx.value;
}

double p_cut_X_joint(const Environment& env, std::int64_t j, std::int64_t k, double tol) {
  if (!(2 <= j && j < k)) throw ConfigError("p_cut_X_joint: need 2 <= j < k");
  SeriesOptions opts;
  opts.tol = tol;
  SeriesResult fk = series_F_X(env, k, std::nullopt, opts);
  if (fk.diverged) return 0.0;
  SeriesResult fjk = series_F_X(env, j, k, opts);
  return env.site(j).q * env.site(k).q / (fjk.value * fk.value);
}

LayerCutProb p_cut_layer_Y(const Environment& env, std::int64_t k, double tol) {
  if (k < 1) throw ConfigError("p_cut_layer_Y: need k >= 1");
  SeriesOptions opts;
  opts.tol = tol;
  SeriesResult f_2k = series_F_Y(env, 2 * k, std::nullopt, opts);
  if (f_2k.diverged) return LayerCutProb{0.0, 0.0, 0.0, 0.0};
  SeriesResult f_2k1 = series_F_Y(env, 2 * k + 1, std::nullopt, opts);
  LimitConstants lc = env.limits();
  LayerHit h = h_layer(env, k);
  double eta = eta_diag(env, 2 * k);
  double numer = h.h1 * eta + h.h2;
  LayerCutProb out{};
  out.asym = (-2.0 * lc.sigma / (1.0 - lc.sigma)) / f_2k.value;
  out.exact = h.h1 * eta / f_2k1.value + h.h2 / f_2k.value;
  out.lower = numer / std::max(f_2k.value, f_2k1.value);
  out.upper = numer / std::min(f_2k.value, f_2k1.value);
  return out;
}

TransienceReport transient(const Environment& env, WalkKind kind, double tol) {
  TransienceReport rep;
  rep.kind = kind;
  LimitConstants lc = env.limits();
  double limit_ratio = kind == WalkKind::X ? lc.rho : 1.0 / lc.rho;
  SeriesOptions opts;
  opts.tol = tol;
  opts.term_cap = 10'000'000;

  if (limit_ratio < 1.0 - 1e-9) {
    rep.series = series_D(env, kind, 1, std::nullopt, opts);
    rep.verdict = Transience::Transient;
    rep.witness = "geometric";
    return rep;
  }
  if (limit_ratio > 1.0 + 1e-9) {
    rep.series = series_D(env, kind, 1, std::nullopt, opts);
    rep.verdict = Transience::Recurrent;
    rep.witness = "divergent-ratio";
    return rep;
  }

  // Critical limit: inspect the term decay directly.  Terms t_j = prod of the
  // per-site ratios from site 2 to j+1.
  double log_t = 0.0;
  std::vector<double> log_at;  // log t at j = 2^i
  std::int64_t next_mark = 1;
  bool any_ratio_below_1 = false, all_ratio_ge_1 = true;
  const std::int64_t j_max = std::int64_t{1} << 22;
  for (std::int64_t j = 1; j <= j_max; ++j) {
    double rho = env.rho_k(1 + j);
    double r = kind == WalkKind::X ? rho : 1.0 / rho;
    if (r < 1.0) any_ratio_below_1 = true;
    if (r < 1.0 - 1e-15) all_ratio_ge_1 = false;
    log_t += std::log(r);
    if (j == next_mark) {
      log_at.push_back(log_t);
      next_mark *= 2;
    }
  }
  (void)any_ratio_below_1;
  if (all_ratio_ge_1) {
    rep.verdict = Transience::Recurrent;
    rep.witness = "divergent-ratio";
    rep.series = series_D(env, kind, 1, std::nullopt, opts);
    return rep;
  }
  // Local decay exponents over the last few doublings.
  std::size_t nmarks = log_at.size();
  bool decays_fast = nmarks >= 5;
  for (std::size_t i = nmarks >= 5 ? nmarks - 4 : 0; i + 1 < nmarks; ++i) {
    double p_hat = -(log_at[i + 1] - log_at[i]) / std::log(2.0);
    if (p_hat < 1.1) decays_fast = false;
  }
  SeriesOptions loose = opts;
  loose.rel_tol = 1e-9;
  loose.term_cap = 10'000'000;
  rep.series = series_D(env, kind, 1, std::nullopt, loose);
  if (decays_fast && !rep.series.diverged) {
    rep.verdict = Transience::Transient;
    rep.witness = "comparison";
  } else {
    rep.verdict = Transience::Inconclusive;
    rep.witness = "critical-tail";
  }
  return rep;
}

CutpointCriterionReport cutpoint_criterion(const Environment& env, WalkKind kind,
                                           std::int64_t N_max) {
  if (N_max < 100) throw ConfigError("cutpoint_criterion: need N_max >= 100");
  CutpointCriterionReport rep;
  rep.kind = kind;

  std::vector<double> D = series_D_grid(env, kind, N_max, 1e-4);

  // Log-spaced snapshot grid; partial sums accumulate over every integer n.
  std::vector<std::int64_t> marks;
  for (double x = 16.0; x < static_cast<double>(N_max); x *= 1.30103)
    marks.push_back(static_cast<std::int64_t>(x));
  marks.push_back(N_max);
  std::size_t mark_idx = 0;
  double partial = 0.0;
  for (std::int64_t n = 2; n <= N_max; ++n) {
    double dn = D[static_cast<std::size_t>(n)];
    double t = std::isinf(dn) ? 0.0 : 1.0 / (dn * std::log(static_cast<double>(n)));
    partial += t;
    while (mark_idx < marks.size() && n == marks[mark_idx]) {
      rep.grid.push_back(CriterionPoint{n, dn, t, partial});
      ++mark_idx;
    }
  }

  // Fit the local decay exponent of t(n) and the (log log n)^beta correction
  // of D(n)/n on the top half of the grid.
  std::size_t half = rep.grid.size() / 2;
  auto slope = [](const std::vector<double>& xs, const std::vector<double>& ys) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double num = 0, den = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      num += (xs[i] - mx) * (ys[i] - my);
      den += (xs[i] - mx) * (xs[i] - mx);
    }
    return num / den;
  };
  std::vector<double> lx, lt, lll, ldn;
  for (std::size_t i = half; i < rep.grid.size(); ++i) {
    const CriterionPoint& p = rep.grid[i];
    if (std::isinf(p.D) || p.term <= 0.0) continue;
    double n = static_cast<double>(p.n);
    lx.push_back(std::log(n));
    lt.push_back(std::log(p.term));
    lll.push_back(std::log(std::log(std::log(n))));
    ldn.push_back(std::log(p.D / n));
  }
  if (lx.size() >= 3) {
    rep.decay_exponent = -slope(lx, lt);
    rep.beta_hat = slope(lll, ldn);
  } else {
    rep.decay_exponent = 0.0;
    rep.beta_hat = 0.0;
  }

  // Monotonicity hypothesis of rho_k (nonstrict, in the theorem's direction).
  rep.rho_monotone_ok = true;
  double prev_rho = env.rho_k(std::max<std::int64_t>(2, 16));
  for (const CriterionPoint& p : rep.grid) {
    double rho = env.rho_k(std::max<std::int64_t>(2, p.n));
    if (kind == WalkKind::X ? rho < prev_rho - 1e-12 : rho > prev_rho + 1e-12)
      rep.rho_monotone_ok = false;
    prev_rho = rho;
  }

  // Side condition D(n) <= delta n log n: the sampled ratio must not blow up.
  double ratio_mid = 0.0, ratio_top = 0.0;
  if (!rep.grid.empty()) {
    const CriterionPoint& mid = rep.grid[rep.grid.size() / 2];
    const CriterionPoint& top = rep.grid.back();
    ratio_mid = mid.D / (static_cast<double>(mid.n) * std::log(static_cast<double>(mid.n)));
    ratio_top = top.D / (static_cast<double>(top.n) * std::log(static_cast<double>(top.n)));
  }
  rep.side_condition_ok = std::isfinite(ratio_top) && ratio_top <= std::max(2.0 * ratio_mid, 1e6);

  if (std::isinf(rep.grid.back().D)) {
    rep.predicted = "finite";  // divergent D: the criterion series is 0-term
  } else if (rep.decay_exponent >= 1.3) {
    rep.predicted = "finite";
  } else if (rep.decay_exponent < 0.9) {
    rep.predicted = rep.side_condition_ok ? "infinite" : "inconclusive";
  } else if (rep.beta_hat > 1.15) {
    rep.predicted = "finite";
  } else if (rep.beta_hat < 0.85) {
    rep.predicted = rep.side_condition_ok ? "infinite" : "inconclusive";
  } else {
    rep.predicted = "inconclusive";
  }
  return rep;
}

double tau(const Environment& env) { return env.limits().tau; }

}  // namespace cutwalk
