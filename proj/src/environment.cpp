#include "cutwalk/environment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace cutwalk {

namespace {

constexpr double kProbTol = 1e-12;

void validate_law(double q, double p1, double p2, std::int64_t k) {
  std::ostringstream at;
  if (k >= 0) at << " at site " << k;
  if (!(q > 0.0)) throw ConfigError("environment: q must be > 0" + at.str());
  if (!(p2 > 0.0)) throw ConfigError("environment: p2 must be > 0" + at.str());
  if (p1 < 0.0) throw ConfigError("environment: p1 must be >= 0" + at.str());
  if (std::fabs(q + p1 + p2 - 1.0) > kProbTol)
    throw ConfigError("environment: q + p1 + p2 must equal 1" + at.str());
}

// Inversion of the rho target with b fixed: a = (rho^2 - b)/rho.  Feasible
// iff rho > 0 and a >= b (so that p1 = (a-b) q >= 0).
bool invertible(double rho, double b_base, double* a_out) {
  if (!(rho > 0.0)) return false;
  double a = (rho * rho - b_base) / rho;
  if (a < b_base) return false;
  if (a_out) *a_out = a;
  return true;
}

SiteLaw law_from_ab(double a, double b) {
  double q = 1.0 / (1.0 + a);
  return SiteLaw{q, (a - b) * q, b * q};
}

}  // namespace

EigenPair companion_roots(double a, double b) {
  if (a < 0.0 || b < 0.0) throw ConfigError("companion_roots: a, b must be >= 0");
  if (a == 0.0 && b == 0.0) return {0.0, 0.0};
  double disc = std::sqrt(a * a + 4.0 * b);
  double rho = 0.5 * (a + disc);
  double sigma = (b == 0.0) ? 0.0 : -b / rho;
  return {rho, sigma};
}

double corollary_r(std::int64_t n, double beta) {
  if (n < 2) throw ConfigError("corollary_r: n must be >= 2");
  if (n < 4) n = 4;
  double nn = static_cast<double>(n);
  double loglog = std::log(std::log(nn));
  double correction;
  if (beta == 0.0)
    correction = 1.0;
  else if (beta == 1.0)
    correction = 1.0 / loglog;
  else
    correction = std::pow(loglog, -beta);
  return (1.0 / nn + correction / nn) / 3.0;
}

std::int64_t corollary_smallest_feasible_n0(double beta, PerturbSign sign, double b_base) {
  for (std::int64_t n = 4; n < (std::int64_t{1} << 40); ++n) {
    double r = corollary_r(n, beta);
    double rho = sign == PerturbSign::X ? 1.0 - 3.0 * r : 1.0 + 3.0 * r;
    if (invertible(rho, b_base, nullptr)) return n;
  }
  throw ConfigError("corollary: no feasible clamp index for given b_base");
}

Environment Environment::constant(double q, double p1, double p2) {
  validate_law(q, p1, p2, -1);
  Environment e;
  e.kind_ = Kind::Constant;
  e.q_ = q;
  e.p1_ = p1;
  e.p2_ = p2;
  e.max_site_ = std::numeric_limits<std::int64_t>::max();
  e.limit_a_ = (p1 + p2) / q;
  e.limit_b_ = p2 / q;
  e.rho_mono_ = RhoMonotonicity::Constant;
  return e;
}

Environment Environment::corollary(double beta, PerturbSign sign, double b_base,
                                   std::int64_t n0) {
  if (beta < 0.0) throw ConfigError("corollary: beta must be >= 0");
  if (!(b_base > 0.0)) throw ConfigError("corollary: b_base must be > 0");
  if (n0 < 4) throw ConfigError("corollary: n0 must be >= 4");
  double r = corollary_r(n0, beta);
  double rho0 = sign == PerturbSign::X ? 1.0 - 3.0 * r : 1.0 + 3.0 * r;
  if (!invertible(rho0, b_base, nullptr)) {
    std::int64_t feasible = corollary_smallest_feasible_n0(beta, sign, b_base);
    std::ostringstream msg;
    msg << "corollary: inversion infeasible at n0=" << n0 << " (rho_n0=" << rho0
        << ", b_base=" << b_base << "); smallest feasible n0 is " << feasible;
    throw FeasibilityError(msg.str(), feasible);
  }
  Environment e;
  e.kind_ = Kind::Corollary;
  e.beta_ = beta;
  e.sign_ = sign;
  e.b_base_ = b_base;
  e.n0_ = n0;
  e.max_site_ = std::numeric_limits<std::int64_t>::max();
  e.limit_b_ = b_base;
  e.limit_a_ = 1.0 - b_base;  // limit rho is exactly 1
  e.rho_mono_ =
      sign == PerturbSign::X ? RhoMonotonicity::Increasing : RhoMonotonicity::Decreasing;
  return e;
}

Environment Environment::corollary(double beta, PerturbSign sign, double b_base) {
  std::int64_t n = corollary_smallest_feasible_n0(beta, sign, b_base);
  while (3.0 * corollary_r(n, beta) >= 0.5) ++n;
  return corollary(beta, sign, b_base, n);
}

Environment Environment::table(std::vector<SiteLaw> rows, std::int64_t first_site) {
  if (first_site != 2) throw ConfigError("table: rows must start at site 2");
  if (rows.size() < 2) throw ConfigError("table: need at least two sites");
  for (std::size_t i = 0; i < rows.size(); ++i)
    validate_law(rows[i].q, rows[i].p1, rows[i].p2, first_site + static_cast<std::int64_t>(i));
  Environment e;
  e.kind_ = Kind::Table;
  e.rows_ = std::move(rows);
  e.first_site_ = first_site;
  e.max_site_ = first_site + static_cast<std::int64_t>(e.rows_.size()) - 1;
  const SiteLaw& last = e.rows_.back();
  e.limit_a_ = (last.p1 + last.p2) / last.q;
  e.limit_b_ = last.p2 / last.q;
  e.rho_mono_ = RhoMonotonicity::Unknown;
  return e;
}

Environment Environment::from_rho(std::vector<double> rho, double b_base,
                                  std::int64_t first_site) {
  if (first_site != 2) throw ConfigError("from_rho: rows must start at site 2");
  if (rho.size() < 2) throw ConfigError("from_rho: need at least two sites");
  if (!(b_base > 0.0)) throw ConfigError("from_rho: b_base must be > 0");
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (!invertible(rho[i], b_base, nullptr)) {
      std::ostringstream msg;
      msg << "from_rho: inversion infeasible at site "
          << first_site + static_cast<std::int64_t>(i) << " (rho=" << rho[i] << ")";
      throw ConfigError(msg.str());
    }
  }
  Environment e;
  e.kind_ = Kind::RhoTable;
  e.rho_rows_ = std::move(rho);
  e.b_base_ = b_base;
  e.first_site_ = first_site;
  e.max_site_ = first_site + static_cast<std::int64_t>(e.rho_rows_.size()) - 1;
  double last = e.rho_rows_.back();
  e.limit_b_ = b_base;
  e.limit_a_ = (last * last - b_base) / last;
  e.rho_mono_ = RhoMonotonicity::Unknown;
  return e;
}

double Environment::target_rho(std::int64_t k) const {
  std::int64_t kk = std::max(k, n0_);
  double r = corollary_r(kk, beta_);
  return sign_ == PerturbSign::X ? 1.0 - 3.0 * r : 1.0 + 3.0 * r;
}

SiteLaw Environment::site(std::int64_t k) const {
  if (k < 2) throw ModelError("environment: site index must be >= 2 (sites 0,1 are forced)");
  switch (kind_) {
    case Kind::Constant:
      return SiteLaw{q_, p1_, p2_};
    case Kind::Corollary: {
      double rho = target_rho(k);
      double a = (rho * rho - b_base_) / rho;
      return law_from_ab(a, b_base_);
    }
    case Kind::Table: {
      if (k > max_site_) {
        std::ostringstream msg;
        msg << "table environment: site " << k << " past materialized max " << max_site_;
        throw ModelError(msg.str());
      }
      return rows_[static_cast<std::size_t>(k - first_site_)];
    }
    case Kind::RhoTable: {
      if (k > max_site_) {
        std::ostringstream msg;
        msg << "rho-table environment: site " << k << " past materialized max " << max_site_;
        throw ModelError(msg.str());
      }
      double rho = rho_rows_[static_cast<std::size_t>(k - first_site_)];
      double a = (rho * rho - b_base_) / rho;
      return law_from_ab(a, b_base_);
    }
  }
  throw ModelError("environment: bad kind");
}

SiteParams Environment::site_params(std::int64_t k) const {
  SiteLaw s = site(k);
  double a = (s.p1 + s.p2) / s.q;
  double b = s.p2 / s.q;
  EigenPair ev = companion_roots(a, b);
  return SiteParams{s.q, s.p1, s.p2, a, b, ev.rho, ev.sigma};
}

double Environment::a_k(std::int64_t k) const {
  SiteLaw s = site(k);
  return (s.p1 + s.p2) / s.q;
}

double Environment::b_k(std::int64_t k) const {
  SiteLaw s = site(k);
  return s.p2 / s.q;
}

double Environment::rho_k(std::int64_t k) const {
  // Corollary / rho-table sites carry their target spectral radius exactly.
  if (kind_ == Kind::Corollary) {
    if (k < 2) throw ModelError("environment: site index must be >= 2");
    return target_rho(k);
  }
  if (kind_ == Kind::RhoTable) {
    if (k < 2 || k > max_site_) throw ModelError("rho-table environment: site out of range");
    return rho_rows_[static_cast<std::size_t>(k - first_site_)];
  }
  return site_params(k).rho;
}

LimitConstants Environment::limits() const {
  LimitConstants lc{};
  lc.a = limit_a_;
  lc.b = limit_b_;
  EigenPair ev = companion_roots(limit_a_, limit_b_);
  lc.rho = ev.rho;
  lc.sigma = ev.sigma;
  if (lc.rho >= 1.0) {
    lc.a_hat = lc.a;
    lc.tau = -lc.sigma;
  } else {
    lc.a_hat = lc.a + (1.0 - lc.rho) * (lc.rho - lc.sigma) / lc.rho;
    // (sqrt(a_hat^2+4b) - a_hat)/2 in its cancellation-free form.
    lc.tau = 2.0 * lc.b / (std::sqrt(lc.a_hat * lc.a_hat + 4.0 * lc.b) + lc.a_hat);
  }
  return lc;
}

bool Environment::near_critical() const { return std::fabs(limit_a_ + limit_b_ - 1.0) < 1e-9; }

double Environment::beta() const {
  if (kind_ != Kind::Corollary) throw ModelError("environment: not a corollary family");
  return beta_;
}

PerturbSign Environment::sign() const {
  if (kind_ != Kind::Corollary) throw ModelError("environment: not a corollary family");
  return sign_;
}

double Environment::b_base() const {
  if (kind_ != Kind::Corollary && kind_ != Kind::RhoTable)
    throw ModelError("environment: no b_base for this kind");
  return b_base_;
}

std::int64_t Environment::n0() const {
  if (kind_ != Kind::Corollary) throw ModelError("environment: not a corollary family");
  return n0_;
}

nlohmann::json Environment::describe() const {
  nlohmann::json j;
  switch (kind_) {
    case Kind::Constant:
      j["type"] = "constant";
      j["q"] = q_;
      j["p1"] = p1_;
      j["p2"] = p2_;
      break;
    case Kind::Corollary:
      j["type"] = "corollary";
      j["beta"] = beta_;
      j["sign"] = sign_ == PerturbSign::X ? "X" : "Y";
      j["b_base"] = b_base_;
      j["b_base_is_model_choice"] = true;  // the paper constrains only rho_k
      j["n0"] = n0_;
      break;
    case Kind::Table:
      j["type"] = "table";
      j["sites"] = rows_.size();
      break;
    case Kind::RhoTable:
      j["type"] = "rho_table";
      j["sites"] = rho_rows_.size();
      j["b_base"] = b_base_;
      j["b_base_is_model_choice"] = true;
      break;
  }
  j["limit_a"] = limit_a_;
  j["limit_b"] = limit_b_;
  return j;
}

namespace {

std::vector<SiteLaw> read_env_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open environment table: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty environment table: " + path.string());
  if (line != "k,q,p1,p2")
    throw ConfigError("environment table must have header k,q,p1,p2: " + path.string());
  std::vector<SiteLaw> rows;
  std::int64_t expect = 2;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::int64_t k;
    double q, p1, p2;
    std::getline(ss, field, ',');
    k = std::stoll(field);
    std::getline(ss, field, ',');
    q = std::stod(field);
    std::getline(ss, field, ',');
    p1 = std::stod(field);
    std::getline(ss, field, ',');
    p2 = std::stod(field);
    if (k != expect)
      throw ConfigError("environment table sites must be contiguous from 2: " + path.string());
    ++expect;
    rows.push_back(SiteLaw{q, p1, p2});
  }
  return rows;
}

}  // namespace

Environment env_from_json(const nlohmann::json& spec) {
  if (!spec.is_object()) throw ConfigError("environment config must be a JSON object");
  if (!spec.contains("type")) throw ConfigError("environment config: missing \"type\"");
  std::string type = spec.at("type").get<std::string>();
  auto reject_unknown = [&](std::initializer_list<const char*> allowed) {
    for (auto it = spec.begin(); it != spec.end(); ++it) {
      bool known = false;
      for (const char* a : allowed)
        if (it.key() == a) known = true;
      if (!known) throw ConfigError("environment config: unknown key \"" + it.key() + "\"");
    }
  };
  if (type == "constant") {
    reject_unknown({"type", "q", "p1", "p2"});
    return Environment::constant(spec.at("q").get<double>(), spec.at("p1").get<double>(),
                                 spec.at("p2").get<double>());
  }
  if (type == "corollary") {
    reject_unknown({"type", "beta", "sign", "b_base", "n0"});
    std::string s = spec.at("sign").get<std::string>();
    if (s != "X" && s != "Y") throw ConfigError("environment config: sign must be \"X\" or \"Y\"");
    PerturbSign sign = s == "X" ? PerturbSign::X : PerturbSign::Y;
    double beta = spec.at("beta").get<double>();
    double b_base = spec.contains("b_base") ? spec.at("b_base").get<double>() : 0.25;
    if (spec.contains("n0"))
      return Environment::corollary(beta, sign, b_base, spec.at("n0").get<std::int64_t>());
    return Environment::corollary(beta, sign, b_base);
  }
  if (type == "table") {
    reject_unknown({"type", "path"});
    return Environment::table(read_env_csv(spec.at("path").get<std::string>()));
  }
  throw ConfigError("environment config: unknown type \"" + type + "\"");
}

Environment env_from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open environment config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("environment config parse error: " + std::string(e.what()));
  }
  return env_from_json(j);
}

}  // namespace cutwalk
