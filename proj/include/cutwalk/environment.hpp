#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cutwalk/errors.hpp"

namespace cutwalk {

// Per-site transition law at a site k >= 2.  For the (2,1) chain X the moves
// are +1 w.p. q, -1 w.p. p1, -2 w.p. p2; for the (1,2) chain Y they are
// -1 w.p. q, +1 w.p. p1, +2 w.p. p2.  Sites 0 and 1 have forced moves.
struct SiteLaw {
  double q;
  double p1;
  double p2;
};

struct SiteParams {
  double q, p1, p2;
  double a, b;        // a = (p1+p2)/q, b = p2/q
  double rho, sigma;  // eigenvalues of [[a,b],[1,0]], rho > 0 > sigma
};

struct LimitConstants {
  double a, b;
  double rho, sigma;
  double a_hat;  // a + (1-rho)(rho-sigma)/rho, meaningful only when rho < 1
  double tau;    // -sigma if rho >= 1, else (sqrt(a_hat^2+4b)-a_hat)/2
};

struct EigenPair {
  double rho, sigma;
};

// Roots of x^2 = a x + b for a,b >= 0 (rho the larger).  sigma computed as
// -b/rho to dodge the cancellation in (a - sqrt(a^2+4b))/2.
EigenPair companion_roots(double a, double b);

enum class PerturbSign { X, Y };  // X: rho_k = 1 - 3 r_k, Y: rho_k = 1 + 3 r_k

enum class RhoMonotonicity { Constant, Increasing, Decreasing, Unknown };

// r_n of the near-critical perturbation family: for n >= 4,
// r_n = (1/3)(1/n + 1/(n (log log n)^beta)); r_2 = r_3 = r_4.
double corollary_r(std::int64_t n, double beta);

// Smallest clamp index n0 >= 4 at which the rho-target inversion with the
// given b_base is feasible (rho_n0 > 0 and derived p1 >= 0).
std::int64_t corollary_smallest_feasible_n0(double beta, PerturbSign sign, double b_base);

// Immutable site-law source.  Generator kinds compute on demand and are pure;
// table kinds are materialized to a fixed max site and reject sites past it.
class Environment {
 public:
  enum class Kind { Constant, Corollary, Table, RhoTable };

  static Environment constant(double q, double p1, double p2);
  // Requested clamp index n0 (>= 4); throws FeasibilityError carrying the
  // smallest feasible index when the inversion fails at n0.
  static Environment corollary(double beta, PerturbSign sign, double b_base, std::int64_t n0);
  // Default clamp: smallest feasible index with 3 r_n < 1/2.
  static Environment corollary(double beta, PerturbSign sign, double b_base = 0.25);
  static Environment table(std::vector<SiteLaw> rows, std::int64_t first_site = 2);
  // Inversion used inside the corollary family, exposed for table-driven
  // rho inputs: given target spectral radii, recover the site laws with
  // b_k fixed to b_base.
  static Environment from_rho(std::vector<double> rho, double b_base, std::int64_t first_site = 2);

  Kind kind() const { return kind_; }

  SiteLaw site(std::int64_t k) const;
  SiteParams site_params(std::int64_t k) const;
  double a_k(std::int64_t k) const;
  double b_k(std::int64_t k) const;
  double rho_k(std::int64_t k) const;

  double limit_a() const { return limit_a_; }
  double limit_b() const { return limit_b_; }
  LimitConstants limits() const;

  // a + b = 1 within tolerance, i.e. limit drift zero.
  bool near_critical() const;
  RhoMonotonicity rho_monotonicity() const { return rho_mono_; }
  // Largest addressable site (INT64_MAX for generator kinds).
  std::int64_t max_site() const { return max_site_; }

  // Corollary parameters (throws unless kind is Corollary).
  double beta() const;
  PerturbSign sign() const;
  double b_base() const;
  std::int64_t n0() const;

  nlohmann::json describe() const;

 private:
  Environment() = default;
  double target_rho(std::int64_t k) const;

  Kind kind_ = Kind::Constant;
  double q_ = 0, p1_ = 0, p2_ = 0;                  // constant
  double beta_ = 0, b_base_ = 0;                    // corollary / rho-table
  PerturbSign sign_ = PerturbSign::Y;               // corollary
  std::int64_t n0_ = 4;                             // corollary
  std::vector<SiteLaw> rows_;                       // table
  std::vector<double> rho_rows_;                    // rho-table
  std::int64_t first_site_ = 2;
  std::int64_t max_site_ = 0;
  double limit_a_ = 0, limit_b_ = 0;
  RhoMonotonicity rho_mono_ = RhoMonotonicity::Unknown;
};

// External interface: {"type":"constant",...} | {"type":"corollary",...} |
// {"type":"table","path":"env.csv"}.  Unknown keys rejected.
Environment env_from_json(const nlohmann::json& spec);
Environment env_from_file(const std::filesystem::path& path);

}  // namespace cutwalk
