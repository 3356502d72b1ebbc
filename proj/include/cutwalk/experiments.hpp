#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cutwalk/prob.hpp"
#include "cutwalk/sim.hpp"

namespace cutwalk {

struct ConvergencePoint {
  std::int64_t n;
  double value;
  double target;
  double abs_error;
};

struct ConvergenceReport {
  std::string quantity;
  std::vector<ConvergencePoint> grid;
  double target = 0.0;
  double final_error = 0.0;
  bool pass = false;  // final error < tol and error sequence eventually decreasing
};

ConvergenceReport make_convergence_report(std::string quantity, double target,
                                          std::vector<ConvergencePoint> grid, double tol);

// Limits of the hitting-probability analysis: eta_{n,n}(2) -> -sigma,
// h_n(2) -> -sigma/(1-sigma), the exit-split ratio -> -1/sigma for several
// base points, and the corner probability -> tau (cross-checked against its
// continued-fraction representation to cross_tol).
std::vector<ConvergenceReport> verify_prop1_limits(const Environment& env,
                                                   const std::vector<std::int64_t>& n_grid,
                                                   const std::vector<std::int64_t>& k_samples,
                                                   double tol, double cross_tol = 1e-10);

// Corner probability Q_{k+n-1}^{k+n+1}(k, k+n) evaluated through its
// continued-fraction representation (independent of the escape-split path).
double corner_via_contfrac(const Environment& env, std::int64_t k, std::int64_t n);

// Entry-product/zeta-tail ratios and F_X/G ratios, all converging to
// rho/(rho - sigma).
std::vector<ConvergenceReport> verify_ratio_limits(const Environment& env,
                                                   const std::vector<std::int64_t>& n_grid,
                                                   const std::vector<std::int64_t>& m_samples,
                                                   double tol);

struct BoundedRatioReport {
  std::string family;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  bool skipped = false;  // family not applicable (series diverges on this side)
  bool pass = false;     // ratios inside (0,inf) with max/min < 1e3
};

std::vector<BoundedRatioReport> verify_bounded_ratios(const Environment& env,
                                                      const std::vector<std::int64_t>& m_grid);

struct GrowthReport {
  WalkKind kind = WalkKind::X;
  double beta = 0.0;
  std::vector<std::int64_t> n_grid;
  // Exact expectation path: X sums q_k/F_X(k) over sites; for Y the same role
  // is played by the exact layer-cutpoint series (diagnostic).
  std::vector<double> es_exact;
  std::vector<double> normalized;  // es_exact / (log n (log log n)^-beta)
  double norm_max_over_min = 0.0;
  bool exact_pass = false;  // max/min < 3 over the grid
  SnStats mc;               // empty when trials == 0
  // Per-trajectory S_n samples for the almost-sure diagnostic curve
  // S_n/((log n)^{1+eps}(log log n)^{-beta}); plotted, never asserted.
  std::vector<std::vector<std::int64_t>> sn_samples;
};

GrowthReport growth_curve(WalkKind kind, double beta, const std::vector<std::int64_t>& n_grid,
                          std::int64_t trials, std::uint64_t seed, int workers = 1,
                          double eps_conf = 0.35, double b_base = 0.25);

// Randomized tail-inequality sweep (alpha_j >= 1 families included).
struct Lemma24Summary {
  std::int64_t cfs_checked = 0;
  std::int64_t items_checked = 0;
  std::int64_t failures = 0;
  bool pass = false;
};

Lemma24Summary lemma24_suite(std::int64_t n_cfs, std::int64_t max_depth, std::uint64_t seed,
                             double slack_tol = 1e-12);

}  // namespace cutwalk
