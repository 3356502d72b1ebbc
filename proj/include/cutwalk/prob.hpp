#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cutwalk/environment.hpp"
#include "cutwalk/matprod.hpp"
#include "cutwalk/oracle.hpp"

namespace cutwalk {

enum class TailKind { Exact, Rigorous, Heuristic, Divergent };

// Truncated-series value.  When kind is Rigorous the true value lies in
// [value, value + tail_bound]; Heuristic carries the last stopping estimate
// only; Divergent means value is a partial sum.
struct SeriesResult {
  double value = 0.0;
  std::int64_t terms_used = 0;
  double tail_bound = 0.0;
  TailKind kind = TailKind::Exact;
  bool diverged = false;
};

struct SeriesOptions {
  double tol = 1e-12;            // absolute tail target for the rigorous rule
  double rel_tol = 1e-12;        // relative stall threshold for the heuristic rule
  std::int64_t term_cap = 100'000'000;
};

// F_X(m,n) = 1 + sum_{s=m+1}^{n-1} e1 A_s...A_{m+1} e1^t; n omitted = limit.
SeriesResult series_F_X(const Environment& env, std::int64_t m,
                        std::optional<std::int64_t> n = std::nullopt,
                        const SeriesOptions& opts = {});

// F_Y(m,n) = 1 + sum_{j=m+1}^{n-1} prod_{i=m+1}^{j} zeta_i (tail values).
SeriesResult series_F_Y(const Environment& env, std::int64_t m,
                        std::optional<std::int64_t> n = std::nullopt,
                        const SeriesOptions& opts = {});

// D_X(n) = 1 + sum_{j>n} prod_{i=n+1}^{j} rho_i; D_Y with rho_i^{-1}.
// The finite variant (upto) sums j < upto.
SeriesResult series_D(const Environment& env, WalkKind kind, std::int64_t n,
                      std::optional<std::int64_t> upto = std::nullopt,
                      const SeriesOptions& opts = {});

// G(m,n) = 1 + sum_{s=m+1}^{n-1} theta_s^{-1}...theta_{m+1}^{-1} (tails).
SeriesResult series_G(const Environment& env, std::int64_t m,
                      std::optional<std::int64_t> n = std::nullopt,
                      const SeriesOptions& opts = {});

// Overflow-safe finite sums for ratio experiments where F_X(m,n) or G(m,n)
// alone exceeds double range.
ScaledReal series_F_X_scaled(const Environment& env, std::int64_t m, std::int64_t n);
ScaledReal series_G_scaled(const Environment& env, std::int64_t m, std::int64_t n);

// F_X(m) for every m in [0, m_max] by the backward two-vector sweep with a
// receding horizon (values for m < 1 padded with F_X(1)); rel_tol governs the
// horizon-doubling stop.  Entry [m] holds F_X(m); infinity when divergent.
std::vector<double> series_F_X_grid(const Environment& env, std::int64_t m_max,
                                    double rel_tol = 1e-6,
                                    std::int64_t horizon_cap = 2'000'000'000);

// D_Z(n) for every n in [1, n_max] by the backward scalar sweep.
std::vector<double> series_D_grid(const Environment& env, WalkKind kind, std::int64_t n_max,
                                  double rel_tol = 1e-6,
                                  std::int64_t horizon_cap = 2'000'000'000);

// F_Y(m) for every m in [0, m_max] via F_Y(m) = 1 + zeta_{m+1} F_Y(m+1).
std::vector<double> series_F_Y_grid(const Environment& env, std::int64_t m_max,
                                    double rel_tol = 1e-6,
                                    std::int64_t horizon_cap = 200'000'000);

// Lemma 2.1 split: q_low = Q_k^n(m,n), q_high = Q_k^{n+1}(m,n),
// q_plus = Q_k(m,n,+).  Boundary starts k == m, n, n+1 return the trivial
// 0/1 splits.
struct EscapeSplit {
  double q_low, q_high, q_plus;
};
EscapeSplit escape_Y_split(const Environment& env, std::int64_t m, std::int64_t k,
                           std::int64_t n);

// Q_{m+1}(m,inf,+) = 1/F_Y(m); 0 on the recurrent side.
double escape_Y_to_inf(const Environment& env, std::int64_t m, double tol = 1e-12);

// Probability that Y started at x > m ever hits [0,m]: 1 - sum/F_Y closed form.
double escape_Y_return_prob(const Environment& env, std::int64_t m, std::int64_t x,
                            double tol = 1e-12);

// Lemma 2.2: P_k(m,n,-).
double escape_X_down(const Environment& env, std::int64_t m, std::int64_t k, std::int64_t n);

// P_{n+1}(n,inf,-) = 1 - 1/F_X(n), plus the never-return complement.
struct NeverReturnX {
  double p_down_limit;
  double never_return;
  SeriesResult fx;
};
NeverReturnX escape_X_never_return(const Environment& env, std::int64_t n, double tol = 1e-12);

// Probability that X started at x > m ever hits [0,m]: 1 - F_X(m,x)/F_X(m).
double escape_X_return_prob(const Environment& env, std::int64_t m, std::int64_t x,
                            double tol = 1e-12);

// eta_{k,k}(2) by the forward recursion from eta_{1,1}(2) = 0.
double eta_diag(const Environment& env, std::int64_t k);
std::vector<double> eta_diag_profile(const Environment& env, std::int64_t k_max);

// Layer-entry split (h_k(1), h_k(2)); h_k(1) + h_k(2) = 1.
struct LayerHit {
  double h1, h2;
};
LayerHit h_layer(const Environment& env, std::int64_t k);

// P(k in C) = q_k / F_X(k) and the pair probability of Lemma 4.1.
double p_cut_X(const Environment& env, std::int64_t k, double tol = 1e-12);
double p_cut_X_joint(const Environment& env, std::int64_t j, std::int64_t k,
                     double tol = 1e-12);

// Layer-cutpoint probability for Y: the asymptotic value
// (-2 sigma/(1-sigma))/F_Y(2k), the exact expression, and the two-sided
// bracket from the escape decomposition.
struct LayerCutProb {
  double asym;
  double exact;
  double lower, upper;
};
LayerCutProb p_cut_layer_Y(const Environment& env, std::int64_t k, double tol = 1e-12);

enum class Transience { Transient, Recurrent, Inconclusive };

struct TransienceReport {
  Transience verdict = Transience::Inconclusive;
  WalkKind kind = WalkKind::X;
  SeriesResult series;   // the rho-product criterion series
  std::string witness;   // "geometric", "divergent-ratio", "comparison", ...
};
TransienceReport transient(const Environment& env, WalkKind kind, double tol = 1e-10);

struct CriterionPoint {
  std::int64_t n;
  double D;
  double term;         // 1/(D log n)
  double partial_sum;  // sum over all integers up to n
};

struct CutpointCriterionReport {
  WalkKind kind;
  std::vector<CriterionPoint> grid;
  double decay_exponent;    // local exponent of 1/(D log n) on the top of the grid
  double beta_hat;          // (log log n)-correction fit when the exponent is ~1
  bool rho_monotone_ok;
  bool side_condition_ok;   // D(n) <= delta n log n on the sampled range
  std::string predicted;    // "finite" | "infinite" | "inconclusive"
};

// Diagnostic evaluation of the cutpoint-finiteness series; never an oracle
// for the almost-sure statement.
CutpointCriterionReport cutpoint_criterion(const Environment& env, WalkKind kind,
                                           std::int64_t N_max);

// Corner-probability limit constant (re-export of LimitConstants.tau).
double tau(const Environment& env);

}  // namespace cutwalk
