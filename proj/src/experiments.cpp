#include "cutwalk/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace cutwalk {

namespace {

// Errors may bounce around once they reach float noise; require the sequence
// to be nonincreasing (with slack) on its second half.
bool eventually_decreasing(const std::vector<double>& errs) {
  if (errs.size() < 2) return true;
  std::size_t start = errs.size() / 2;
  for (std::size_t i = start + 1; i < errs.size(); ++i) {
    if (errs[i] > std::max(1.05 * errs[i - 1], 1e-13)) return false;
  }
  return true;
}

}  // namespace

ConvergenceReport make_convergence_report(std::string quantity, double target,
                                          std::vector<ConvergencePoint> grid, double tol) {
  ConvergenceReport rep;
  rep.quantity = std::move(quantity);
  rep.target = target;
  rep.grid = std::move(grid);
  std::vector<double> errs;
  errs.reserve(rep.grid.size());
  for (const ConvergencePoint& p : rep.grid) errs.push_back(p.abs_error);
  rep.final_error = errs.empty() ? 0.0 : errs.back();
  rep.pass = !errs.empty() && rep.final_error < tol && eventually_decreasing(errs);
  return rep;
}

double corner_via_contfrac(const Environment& env, std::int64_t k, std::int64_t n) {
  if (k < 1 || n < 2) throw ConfigError("corner_via_contfrac: need k >= 1, n >= 2");
  // Level j in [k+1, k+n-1] carries beta_j = b_j and
  // alpha_j = a_j + 1/R_j with R_j = sum_{s=k+1}^{j} e1 A_s...A_{j-1} e1^t;
  // rho_vec accumulates the partial-sum row vector with exponent tracking.
  Eigen::RowVector2d rho_vec(1.0, 0.0);  // j = k+1: empty product; true value * 2^exp2
  std::int64_t exp2 = 0;
  double x = 0.0;
  for (std::int64_t j = k + 1; j <= k + n - 1; ++j) {
    double invR = rho_vec(0) > 0.0 && exp2 < 1000
                      ? 1.0 / std::ldexp(rho_vec(0), static_cast<int>(exp2))
                      : 0.0;
    double alpha = env.a_k(j) + invR;
    x = env.b_k(j) / (alpha + x);
    // advance to j+1: rho_{j+1} = rho_j A_j + e1
    Eigen::Matrix2d A;
    A << env.a_k(j), env.b_k(j), 1.0, 0.0;
    rho_vec = rho_vec * A;
    if (exp2 <= 1060) rho_vec(0) += std::ldexp(1.0, -static_cast<int>(exp2));
    double scale = rho_vec.cwiseAbs().maxCoeff();
    if (scale > 0x1p+512) {
      int e = 0;
      std::frexp(scale, &e);
      rho_vec *= std::ldexp(1.0, -e);
      exp2 += e;
    }
  }
  return x;
}

std::vector<ConvergenceReport> verify_prop1_limits(const Environment& env,
                                                   const std::vector<std::int64_t>& n_grid,
                                                   const std::vector<std::int64_t>& k_samples,
                                                   double tol, double cross_tol) {
  LimitConstants lc = env.limits();
  std::vector<ConvergenceReport> out;

  {
    std::vector<ConvergencePoint> grid;
    for (std::int64_t n : n_grid) {
      double v = eta_diag(env, n);
      grid.push_back(ConvergencePoint{n, v, -lc.sigma, std::fabs(v + lc.sigma)});
    }
    out.push_back(make_convergence_report("eta_diag", -lc.sigma, std::move(grid), tol));
  }
  {
    double target = -lc.sigma / (1.0 - lc.sigma);
    std::vector<ConvergencePoint> grid;
    for (std::int64_t n : n_grid) {
      double v = h_layer(env, n).h2;
      grid.push_back(ConvergencePoint{n, v, target, std::fabs(v - target)});
    }
    out.push_back(make_convergence_report("h_layer", target, std::move(grid), tol));
  }
  for (std::int64_t k : k_samples) {
    double target = -1.0 / lc.sigma;
    std::vector<ConvergencePoint> grid;
    for (std::int64_t n : n_grid) {
      EscapeSplit es = escape_Y_split(env, k, k + 1, k + n);
      double v = es.q_low / es.q_high;
      grid.push_back(ConvergencePoint{n, v, target, std::fabs(v - target)});
    }
    out.push_back(make_convergence_report("q_ratio_k" + std::to_string(k), target,
                                          std::move(grid), tol));
  }
  for (std::int64_t k : k_samples) {
    std::vector<ConvergencePoint> grid;
    bool cross_ok = true;
    for (std::int64_t n : n_grid) {
      if (n < 2) continue;
      double v = escape_Y_split(env, k, k + n - 1, k + n).q_high;
      double v_cf = corner_via_contfrac(env, k, n);
      if (std::fabs(v - v_cf) > cross_tol) cross_ok = false;
      grid.push_back(ConvergencePoint{n, v, lc.tau, std::fabs(v - lc.tau)});
    }
    ConvergenceReport rep =
        make_convergence_report("corner_k" + std::to_string(k), lc.tau, std::move(grid), tol);
    rep.pass = rep.pass && cross_ok;
    out.push_back(std::move(rep));
  }
  return out;
}

std::vector<ConvergenceReport> verify_ratio_limits(const Environment& env,
                                                   const std::vector<std::int64_t>& n_grid,
                                                   const std::vector<std::int64_t>& m_samples,
                                                   double tol) {
  LimitConstants lc = env.limits();
  const double target = lc.rho / (lc.rho - lc.sigma);
  std::vector<ConvergenceReport> out;

  std::int64_t n_max = *std::max_element(n_grid.begin(), n_grid.end());
  for (std::int64_t k : m_samples) {
    std::vector<double> tails = zeta_tails_range(env, k + 1, k + n_max, 1e-13);
    auto zeta_tail_at = [&](std::int64_t i) {
      return tails[static_cast<std::size_t>(i - (k + 1))];
    };
    // Product ratio: y_{k+1,k+n} * prod zeta_i.
    std::vector<ConvergencePoint> grid_prod, grid_sum;
    for (std::int64_t n : n_grid) {
      ScaledReal y = entry_product(env, k + 1, k + n, 1, 1);
      ScaledReal pz(1.0);
      for (std::int64_t i = k + 1; i <= k + n; ++i) pz *= ScaledReal(zeta_tail_at(i));
      double v = (y * pz).to_double();
      grid_prod.push_back(ConvergencePoint{n, v, target, std::fabs(v - target)});

      // Sum ratio: sum_s y_{k+s,k+n} over sum_s prod_{i>=k+s} zeta_i^{-1}.
      std::vector<double> prof = zeta_profile(env, k + 1, k + n);
      ScaledReal num, den, acc_num(1.0), acc_den(1.0);
      num += acc_num;
      den += acc_den;
      for (std::int64_t s = k + n; s >= k + 1; --s) {
        acc_num *= ScaledReal(1.0 / prof[static_cast<std::size_t>(s - (k + 1))]);
        acc_den *= ScaledReal(1.0 / zeta_tail_at(s));
        num += acc_num;
        den += acc_den;
      }
      double vs = ratio(num, den);
      grid_sum.push_back(ConvergencePoint{n, vs, target, std::fabs(vs - target)});
    }
    out.push_back(make_convergence_report("entry_zeta_prod_k" + std::to_string(k), target,
                                          std::move(grid_prod), tol));
    out.push_back(make_convergence_report("entry_zeta_sum_k" + std::to_string(k), target,
                                          std::move(grid_sum), tol));
  }
  for (std::int64_t m : m_samples) {
    std::vector<ConvergencePoint> grid;
    for (std::int64_t n : n_grid) {
      double v = ratio(series_F_X_scaled(env, m, m + n), series_G_scaled(env, m, m + n));
      grid.push_back(ConvergencePoint{n, v, target, std::fabs(v - target)});
    }
    out.push_back(make_convergence_report("fx_over_g_m" + std::to_string(m), target,
                                          std::move(grid), tol));
  }
  return out;
}

std::vector<BoundedRatioReport> verify_bounded_ratios(const Environment& env,
                                                      const std::vector<std::int64_t>& m_grid) {
  std::vector<BoundedRatioReport> out;
  auto finish = [](BoundedRatioReport& r) {
    r.pass = r.skipped ||
             (r.min_ratio > 0.0 && std::isfinite(r.max_ratio) &&
              r.max_ratio / r.min_ratio < 1e3);
  };

  {
    BoundedRatioReport r;
    r.family = "entry_over_rho";
    r.min_ratio = std::numeric_limits<double>::infinity();
    r.max_ratio = 0.0;
    for (std::int64_t m : m_grid) {
      if (m - 2 > kEntryProductGuard) continue;
      ScaledReal y = entry_product(env, 2, m, 1, 1);
      ScaledReal pr(1.0);
      for (std::int64_t i = 2; i <= m; ++i) pr *= ScaledReal(1.0 / env.rho_k(i));
      double v = (y * pr).to_double();
      r.min_ratio = std::min(r.min_ratio, v);
      r.max_ratio = std::max(r.max_ratio, v);
    }
    finish(r);
    out.push_back(r);
  }

  SeriesOptions opts;
  opts.tol = 1e-10;
  opts.term_cap = 10'000'000;
  for (WalkKind kind : {WalkKind::X, WalkKind::Y}) {
    BoundedRatioReport r;
    r.family = kind == WalkKind::X ? "FX_over_DX" : "FY_over_DY";
    r.min_ratio = std::numeric_limits<double>::infinity();
    r.max_ratio = 0.0;
    for (std::int64_t m : m_grid) {
      SeriesResult f = kind == WalkKind::X ? series_F_X(env, m, std::nullopt, opts)
                                           : series_F_Y(env, m, std::nullopt, opts);
      SeriesResult d = series_D(env, kind, m, std::nullopt, opts);
      if (f.diverged || d.diverged) {
        r.skipped = true;
        break;
      }
      double v = f.value / d.value;
      r.min_ratio = std::min(r.min_ratio, v);
      r.max_ratio = std::max(r.max_ratio, v);
    }
    finish(r);
    out.push_back(r);
  }
  return out;
}

GrowthReport growth_curve(WalkKind kind, double beta, const std::vector<std::int64_t>& n_grid,
                          std::int64_t trials, std::uint64_t seed, int workers,
                          double eps_conf, double b_base) {
  if (n_grid.empty()) throw ConfigError("growth_curve: empty grid");
  Environment env = Environment::corollary(
      beta, kind == WalkKind::X ? PerturbSign::X : PerturbSign::Y, b_base);

  GrowthReport rep;
  rep.kind = kind;
  rep.beta = beta;
  rep.n_grid = n_grid;

  std::int64_t n_max = *std::max_element(n_grid.begin(), n_grid.end());
  if (kind == WalkKind::X) {
    // E S_n = sum_{k=2}^{n} q_k / F_X(k), Lemma 4.1 + linearity.
    std::vector<double> F = series_F_X_grid(env, n_max, 1e-5);
    double acc = 0.0;
    std::size_t g = 0;
    std::vector<std::int64_t> sorted = n_grid;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> es_at(sorted.size(), 0.0);
    for (std::int64_t k = 2; k <= n_max; ++k) {
      acc += env.site(k).q / F[static_cast<std::size_t>(k)];
      while (g < sorted.size() && sorted[g] == k) es_at[g++] = acc;
    }
    for (std::int64_t n : n_grid) {
      std::size_t idx = static_cast<std::size_t>(
          std::lower_bound(sorted.begin(), sorted.end(), n) - sorted.begin());
      rep.es_exact.push_back(es_at[idx]);
    }
  } else {
    // Exact layer series: sum_k h1 eta/F_Y(2k+1) + h2/F_Y(2k) over layers with
    // both sites <= n (diagnostic; Theorem 1.2 comparisons use MC site counts).
    std::int64_t m_max = n_max + 1;
    std::vector<double> FY = series_F_Y_grid(env, m_max, 1e-5);
    std::vector<double> eta = eta_diag_profile(env, m_max);
    std::vector<double> es_prefix(static_cast<std::size_t>(n_max / 2 + 2), 0.0);
    double h2 = 0.0;  // h_1(2) = 0
    double acc = 0.0;
    for (std::int64_t k = 1; 2 * k + 1 <= n_max; ++k) {
      double e2k = eta[static_cast<std::size_t>(2 * k)];
      acc += (1.0 - h2) * e2k / FY[static_cast<std::size_t>(2 * k + 1)] +
             h2 / FY[static_cast<std::size_t>(2 * k)];
      es_prefix[static_cast<std::size_t>(k)] = acc;
      double e_odd = eta[static_cast<std::size_t>(2 * k + 1)];
      h2 = h2 * (e2k * e_odd) + (1.0 - e2k) * e_odd;
    }
    for (std::int64_t n : n_grid)
      rep.es_exact.push_back(es_prefix[static_cast<std::size_t>(std::max<std::int64_t>(
          1, (n - 1) / 2))]);
  }

  double mn = std::numeric_limits<double>::infinity(), mx = 0.0;
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    double n = static_cast<double>(n_grid[i]);
    double norm = rep.es_exact[i] / (std::log(n) * std::pow(std::log(std::log(n)), -beta));
    rep.normalized.push_back(norm);
    mn = std::min(mn, norm);
    mx = std::max(mx, norm);
  }
  rep.norm_max_over_min = mx / mn;
  rep.exact_pass = rep.norm_max_over_min < 3.0;

  if (trials > 0) {
    std::int64_t K = n_max;
    CensusBatchResult batch = census_batch(env, kind, K, eps_conf, 10'000'000'000ull, seed,
                                           trials, workers, n_grid);
    rep.sn_samples = batch.sn_samples;
    rep.mc.n_grid = n_grid;
    rep.mc.trials = trials;
    for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
      double sum = 0, sumsq = 0;
      for (std::int64_t v : batch.sn_samples[gi]) {
        sum += static_cast<double>(v);
        sumsq += static_cast<double>(v) * static_cast<double>(v);
      }
      double mean = sum / static_cast<double>(trials);
      double var = std::max(0.0, sumsq / static_cast<double>(trials) - mean * mean);
      rep.mc.mean.push_back(mean);
      rep.mc.ci.push_back(3.0 * std::sqrt(var / static_cast<double>(trials)));
    }
  }
  return rep;
}

namespace {

double hash_unit(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed ^ (a * 0x9E3779B97F4A7C15ull) ^ (b * 0xD1B54A32D192ED03ull);
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1p-53;
}

}  // namespace

Lemma24Summary lemma24_suite(std::int64_t n_cfs, std::int64_t max_depth, std::uint64_t seed,
                             double slack_tol) {
  Lemma24Summary sum;
  for (std::int64_t t = 0; t < n_cfs; ++t) {
    ContinuedFraction cf;
    std::uint64_t tid = static_cast<std::uint64_t>(t);
    cf.alpha = [seed, tid](std::int64_t j) {
      return 1.0 + 2.0 * hash_unit(seed, tid, 2 * static_cast<std::uint64_t>(j));
    };
    cf.beta = [seed, tid](std::int64_t j) {
      return 0.25 + 2.75 * hash_unit(seed, tid, 2 * static_cast<std::uint64_t>(j) + 1);
    };
    std::int64_t k = 1 + static_cast<std::int64_t>(hash_unit(seed, tid, 1'000'001) * 3.0);
    std::int64_t depth =
        1 + static_cast<std::int64_t>(hash_unit(seed, tid, 1'000'003) *
                                      static_cast<double>(max_depth));
    std::int64_t n = k + depth - 1;
    TailInequalityReport rep = check_tail_inequalities(cf, k, n, true, slack_tol);
    sum.cfs_checked += 1;
    sum.items_checked += static_cast<std::int64_t>(rep.items.size());
    for (const InequalityCheck& item : rep.items)
      if (!item.pass) sum.failures += 1;
  }
  sum.pass = sum.failures == 0;
  return sum;
}

}  // namespace cutwalk
