#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cutwalk/contfrac.hpp"
#include "cutwalk/environment.hpp"
#include "cutwalk/scaled_real.hpp"

namespace cutwalk {

// Companion matrix A_k = [[a_k, b_k], [1, 0]].
Eigen::Matrix2d companion_matrix(const Environment& env, std::int64_t k);

// Raw entry-product guard: ratio recursions are the canonical path for
// probabilities; entry products serve tests and short ranges only.
inline constexpr std::int64_t kEntryProductGuard = 10'000;

// e_i A_k ... A_n e_j^t with i, j in {1,2}; n = k-1 is the empty product.
ScaledReal entry_product(const Environment& env, std::int64_t k, std::int64_t n, int i, int j);

// zeta_{s,n} = y_{s+1,n}/y_{s,n} with y_{s,n} = e_1 A_s...A_n e_1^t, for all
// s in [k, n]; computed by the backward recursion zeta = 1/(a_s + b_s zeta).
std::vector<double> zeta_profile(const Environment& env, std::int64_t k, std::int64_t n);
double zeta(const Environment& env, std::int64_t k, std::int64_t n);

// theta_{s,n} = z_{s+1,n}/z_{s,n} with z_{s,n} = e_1 A_n...A_s e_1^t;
// backward recursion theta = 1/(a_s + b_{s+1} theta).
std::vector<double> theta_profile(const Environment& env, std::int64_t k, std::int64_t n);
double theta(const Environment& env, std::int64_t k, std::int64_t n);

// Tails zeta_k = lim_n zeta_{k,n} and theta_k = lim_n theta_{k,n}, bracketed
// to tol via the continued-fraction displays.
TailValue zeta_tail(const Environment& env, std::int64_t k, double tol);
TailValue theta_tail(const Environment& env, std::int64_t k, double tol);

// Batched tails for sites [lo, hi] sharing the doubling sweeps.
std::vector<double> zeta_tails_range(const Environment& env, std::int64_t lo, std::int64_t hi,
                                     double tol);
std::vector<double> theta_tails_range(const Environment& env, std::int64_t lo, std::int64_t hi,
                                      double tol);

// f^{(k)}_n and H^{(k)}_n of the hitting-probability analysis:
// f_n = b_{k+n}/(a_{k+n} + f_{n-1}) with f_0 = 0, and
// H_n = -f_n f_{n-1} - f_n H_{n-1} with H_1 = 0.
double f_seq(const Environment& env, std::int64_t k, std::int64_t n);
double H_seq(const Environment& env, std::int64_t k, std::int64_t n);

struct FHPair {
  double f, H;
};
std::vector<FHPair> fH_profile(const Environment& env, std::int64_t k, std::int64_t n);

}  // namespace cutwalk
