#include "cutwalk/cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cutwalk/csv.hpp"
#include "cutwalk/environment.hpp"
#include "cutwalk/experiments.hpp"
#include "cutwalk/prob.hpp"
#include "cutwalk/sim.hpp"

namespace cutwalk::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "cutwalk 0.1.0";

WalkKind parse_kind(const std::string& s) {
  if (s == "X") return WalkKind::X;
  if (s == "Y") return WalkKind::Y;
  throw ConfigError("kind must be \"X\" or \"Y\"");
}

std::vector<std::int64_t> parse_grid(const std::string& csv) {
  std::vector<std::int64_t> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      out.push_back(std::stoll(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::stoll(cur));
  if (out.empty()) throw ConfigError("empty grid");
  return out;
}

std::vector<double> parse_dgrid(const std::string& csv) {
  std::vector<double> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      out.push_back(std::stod(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::stod(cur));
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

void require_keys(const json& obj, std::initializer_list<const char*> allowed,
                  const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) ok = true;
    if (!ok) throw ConfigError(where + ": unknown key \"" + it.key() + "\"");
  }
}

std::int64_t geti(const json& p, const char* key) {
  if (!p.contains(key)) throw ConfigError(std::string("missing parameter \"") + key + "\"");
  return p.at(key).get<std::int64_t>();
}

std::int64_t geti(const json& p, const char* key, std::int64_t dflt) {
  return p.contains(key) ? p.at(key).get<std::int64_t>() : dflt;
}

double getd(const json& p, const char* key, double dflt) {
  return p.contains(key) ? p.at(key).get<double>() : dflt;
}

std::string gets(const json& p, const char* key) {
  if (!p.contains(key)) throw ConfigError(std::string("missing parameter \"") + key + "\"");
  return p.at(key).get<std::string>();
}

std::uint64_t get_seed(const json& p) {
  if (!p.contains("seed")) throw ConfigError("seed is mandatory for stochastic commands");
  return p.at("seed").get<std::uint64_t>();
}

struct RunContext {
  json env_spec;
  Environment env;
  fs::path out;
  int workers;
  std::vector<std::string> outputs;

  void emit(const std::string& name, const std::string& content) {
    write_file_atomic(out / name, content);
    outputs.push_back(name);
  }
};

void probe_row(CsvBuilder& csv, const std::string& quantity, std::int64_t m, std::int64_t k,
               std::int64_t n, double value, double tail_bound, std::int64_t terms,
               bool diverged) {
  csv.field(quantity).field(m).field(k).field(n).field(value).field(tail_bound).field(terms);
  csv.field(std::string(diverged ? "1" : "0")).end_row();
}

void probe_series_row(CsvBuilder& csv, const std::string& quantity, std::int64_t m,
                      std::int64_t k, std::int64_t n, const SeriesResult& r) {
  probe_row(csv, quantity, m, k, n, r.value, r.tail_bound, r.terms_used, r.diverged);
}

json run_probe(RunContext& ctx, const json& p) {
  require_keys(p,
               {"quantity", "m", "k", "n", "j", "upto", "tol", "nmax", "kind"},
               "probe");
  std::string q = gets(p, "quantity");
  double tol = getd(p, "tol", 1e-12);
  SeriesOptions opts;
  opts.tol = tol;
  CsvBuilder csv("quantity,m,k,n,value,tail_bound,terms_used,diverged");
  json summary;

  auto opt_n = [&]() -> std::optional<std::int64_t> {
    if (p.contains("n")) return p.at("n").get<std::int64_t>();
    return std::nullopt;
  };

  if (q == "FX") {
    probe_series_row(csv, q, geti(p, "m"), 0, geti(p, "n", 0),
                     series_F_X(ctx.env, geti(p, "m"), opt_n(), opts));
  } else if (q == "FY") {
    probe_series_row(csv, q, geti(p, "m"), 0, geti(p, "n", 0),
                     series_F_Y(ctx.env, geti(p, "m"), opt_n(), opts));
  } else if (q == "G") {
    probe_series_row(csv, q, geti(p, "m"), 0, geti(p, "n", 0),
                     series_G(ctx.env, geti(p, "m"), opt_n(), opts));
  } else if (q == "DX" || q == "DY") {
    std::optional<std::int64_t> upto;
    if (p.contains("upto")) upto = p.at("upto").get<std::int64_t>();
    probe_series_row(csv, q, 0, 0, geti(p, "n"),
                     series_D(ctx.env, q == "DX" ? WalkKind::X : WalkKind::Y, geti(p, "n"),
                              upto, opts));
  } else if (q == "escY") {
    EscapeSplit es = escape_Y_split(ctx.env, geti(p, "m"), geti(p, "k"), geti(p, "n"));
    probe_row(csv, "QYn", geti(p, "m"), geti(p, "k"), geti(p, "n"), es.q_low, 0, 0, false);
    probe_row(csv, "QYn1", geti(p, "m"), geti(p, "k"), geti(p, "n"), es.q_high, 0, 0, false);
    probe_row(csv, "QYplus", geti(p, "m"), geti(p, "k"), geti(p, "n"), es.q_plus, 0, 0, false);
  } else if (q == "escX") {
    probe_row(csv, "PXdown", geti(p, "m"), geti(p, "k"), geti(p, "n"),
              escape_X_down(ctx.env, geti(p, "m"), geti(p, "k"), geti(p, "n")), 0, 0, false);
  } else if (q == "QYinf") {
    probe_row(csv, q, geti(p, "m"), 0, 0, escape_Y_to_inf(ctx.env, geti(p, "m"), tol), 0, 0,
              false);
  } else if (q == "PXnever") {
    NeverReturnX nr = escape_X_never_return(ctx.env, geti(p, "n"), tol);
    probe_row(csv, "PXdownLimit", 0, 0, geti(p, "n"), nr.p_down_limit, 0, 0, nr.fx.diverged);
    probe_series_row(csv, "PXnever", 0, 0, geti(p, "n"),
                     SeriesResult{nr.never_return, nr.fx.terms_used, nr.fx.tail_bound,
                                  nr.fx.kind, nr.fx.diverged});
  } else if (q == "eta") {
    probe_row(csv, q, 0, geti(p, "k"), 0, eta_diag(ctx.env, geti(p, "k")), 0, 0, false);
  } else if (q == "h") {
    LayerHit h = h_layer(ctx.env, geti(p, "k"));
    probe_row(csv, "h1", 0, geti(p, "k"), 0, h.h1, 0, 0, false);
    probe_row(csv, "h2", 0, geti(p, "k"), 0, h.h2, 0, 0, false);
  } else if (q == "pcutX") {
    probe_row(csv, q, 0, geti(p, "k"), 0, p_cut_X(ctx.env, geti(p, "k"), tol), 0, 0, false);
  } else if (q == "pcutXJoint") {
    probe_row(csv, q, geti(p, "j"), geti(p, "k"), 0,
              p_cut_X_joint(ctx.env, geti(p, "j"), geti(p, "k"), tol), 0, 0, false);
  } else if (q == "pcutY") {
    LayerCutProb pc = p_cut_layer_Y(ctx.env, geti(p, "k"), tol);
    probe_row(csv, "pcutY_asym", 0, geti(p, "k"), 0, pc.asym, 0, 0, false);
    probe_row(csv, "pcutY_exact", 0, geti(p, "k"), 0, pc.exact, 0, 0, false);
    probe_row(csv, "pcutY_lower", 0, geti(p, "k"), 0, pc.lower, 0, 0, false);
    probe_row(csv, "pcutY_upper", 0, geti(p, "k"), 0, pc.upper, 0, 0, false);
  } else if (q == "tau") {
    probe_row(csv, q, 0, 0, 0, tau(ctx.env), 0, 0, false);
  } else if (q == "zeta") {
    if (p.contains("n")) {
      probe_row(csv, q, 0, geti(p, "k"), geti(p, "n"),
                zeta(ctx.env, geti(p, "k"), geti(p, "n")), 0, 0, false);
    } else {
      TailValue t = zeta_tail(ctx.env, geti(p, "k"), tol);
      probe_row(csv, "zeta_tail", 0, geti(p, "k"), 0, t.value, t.bracket_hi - t.bracket_lo,
                t.depth, false);
    }
  } else if (q == "theta") {
    if (p.contains("n")) {
      probe_row(csv, q, 0, geti(p, "k"), geti(p, "n"),
                theta(ctx.env, geti(p, "k"), geti(p, "n")), 0, 0, false);
    } else {
      TailValue t = theta_tail(ctx.env, geti(p, "k"), tol);
      probe_row(csv, "theta_tail", 0, geti(p, "k"), 0, t.value, t.bracket_hi - t.bracket_lo,
                t.depth, false);
    }
  } else if (q == "transient") {
    TransienceReport tr = transient(ctx.env, parse_kind(gets(p, "kind")), tol);
    double v = tr.verdict == Transience::Transient
                   ? 1.0
                   : (tr.verdict == Transience::Recurrent ? 0.0 : -1.0);
    probe_series_row(csv, "transient_" + gets(p, "kind"), 0, 0, 0,
                     SeriesResult{v, tr.series.terms_used, tr.series.tail_bound,
                                  tr.series.kind, tr.series.diverged});
    summary["transient"] = {{"kind", gets(p, "kind")},
                            {"verdict", tr.verdict == Transience::Transient
                                            ? "transient"
                                            : (tr.verdict == Transience::Recurrent
                                                   ? "recurrent"
                                                   : "inconclusive")},
                            {"witness", tr.witness},
                            {"series_value", tr.series.value}};
  } else if (q == "criterion") {
    CutpointCriterionReport rep =
        cutpoint_criterion(ctx.env, parse_kind(gets(p, "kind")), geti(p, "nmax", 100000));
    CsvBuilder grid("n,D,term,partial_sum");
    for (const CriterionPoint& pt : rep.grid)
      grid.field(pt.n).field(pt.D).field(pt.term).field(pt.partial_sum).end_row();
    ctx.emit("criterion.csv", grid.str());
    probe_row(csv, "criterion_partial_sum", 0, 0, rep.grid.back().n,
              rep.grid.back().partial_sum, 0, 0, false);
    summary["criterion"] = {{"predicted", rep.predicted},
                            {"decay_exponent", rep.decay_exponent},
                            {"beta_hat", rep.beta_hat},
                            {"rho_monotone_ok", rep.rho_monotone_ok},
                            {"side_condition_ok", rep.side_condition_ok}};
  } else {
    throw ConfigError("probe: unknown quantity \"" + q + "\"");
  }
  ctx.emit("probe.csv", csv.str());
  return summary;
}

json run_simulate(RunContext& ctx, const json& p) {
  require_keys(p, {"kind", "level", "trials", "seed", "step_cap"}, "simulate");
  WalkKind kind = parse_kind(gets(p, "kind"));
  std::int64_t level = geti(p, "level");
  std::int64_t trials = geti(p, "trials", 1);
  std::uint64_t seed = get_seed(p);
  std::uint64_t cap = static_cast<std::uint64_t>(geti(p, "step_cap", 100'000'000));
  if (level < 3) throw ConfigError("simulate: need level >= 3");

  SiteTable table(ctx.env, level + 2);
  CsvBuilder csv("trajectory,steps,final,max");
  for (std::int64_t t = 0; t < trials; ++t) {
    RngStream rng(seed, static_cast<std::uint64_t>(t));
    std::int64_t pos = 2, maxpos = 2;
    std::uint64_t steps = 0;
    while (pos < level && steps < cap) {
      pos = table.step(kind, pos, pos >= 2 ? rng.next_unit() : 0.0);
      ++steps;
      maxpos = std::max(maxpos, pos);
    }
    csv.field(t).field(static_cast<std::int64_t>(steps)).field(pos).field(maxpos).end_row();
  }
  ctx.emit("simulate.csv", csv.str());
  return json{};
}

json run_census(RunContext& ctx, const json& p) {
  require_keys(p, {"kind", "K", "trials", "seed", "eps_conf", "step_cap", "emit"}, "census");
  WalkKind kind = parse_kind(gets(p, "kind"));
  std::int64_t K = geti(p, "K");
  std::int64_t trials = geti(p, "trials");
  std::uint64_t seed = get_seed(p);
  double eps_conf = getd(p, "eps_conf", 1e-6);
  std::uint64_t cap = static_cast<std::uint64_t>(geti(p, "step_cap", 10'000'000'000));
  std::string emit_mode = p.contains("emit") ? gets(p, "emit") : "cutpoints";
  if (emit_mode != "cutpoints" && emit_mode != "visits")
    throw ConfigError("census: emit must be \"cutpoints\" or \"visits\"");

  CsvBuilder rows("trajectory,k,visits,is_cutpoint");
  auto sink = [&](std::int64_t traj, const CutpointCensus& c) {
    if (emit_mode == "visits") {
      for (std::int64_t k = 2; k <= c.K; ++k) {
        std::uint32_t v = c.visits[static_cast<std::size_t>(k)];
        bool cut = (kind == WalkKind::X) ? v == 1 : v == 0;
        rows.field(traj).field(k).field(static_cast<std::int64_t>(v));
        rows.field(std::string(cut ? "1" : "0")).end_row();
      }
    } else {
      for (std::int64_t k : c.cutpoints) {
        rows.field(traj).field(k);
        rows.field(static_cast<std::int64_t>(c.visits[static_cast<std::size_t>(k)]));
        rows.field(std::string("1")).end_row();
      }
    }
  };
  CensusBatchResult batch =
      census_batch(ctx.env, kind, K, eps_conf, cap, seed, trials, ctx.workers, {}, sink);
  ctx.emit("census.csv", rows.str());

  CsvBuilder freq("k,cut_count,trials");
  for (std::int64_t k = 2; k <= K; ++k)
    freq.field(k).field(batch.cut_count[static_cast<std::size_t>(k)]).field(trials).end_row();
  ctx.emit("census_freq.csv", freq.str());
  if (kind == WalkKind::Y) {
    CsvBuilder lfreq("layer,cut_count,trials");
    for (std::size_t l = 1; l < batch.layer_cut_count.size(); ++l)
      lfreq.field(static_cast<std::int64_t>(l))
          .field(batch.layer_cut_count[l])
          .field(trials)
          .end_row();
    ctx.emit("layer_freq.csv", lfreq.str());
  }
  return json{{"census", {{"W", batch.W},
                          {"eps_cens_max", batch.eps_cens_max},
                          {"total_steps", batch.total_steps}}}};
}

json run_sn(RunContext& ctx, const json& p) {
  require_keys(p, {"kind", "grid", "trials", "seed", "eps_conf", "step_cap"}, "sn");
  WalkKind kind = parse_kind(gets(p, "kind"));
  std::vector<std::int64_t> grid = parse_grid(gets(p, "grid"));
  std::int64_t trials = geti(p, "trials");
  std::uint64_t seed = get_seed(p);
  double eps_conf = getd(p, "eps_conf", 1e-6);
  std::uint64_t cap = static_cast<std::uint64_t>(geti(p, "step_cap", 10'000'000'000));
  SnStats st = s_n_statistics(ctx.env, kind, grid, trials, eps_conf, seed, ctx.workers, cap);
  CsvBuilder csv("n,mean_sn,ci,trials");
  for (std::size_t i = 0; i < st.n_grid.size(); ++i)
    csv.field(st.n_grid[i]).field(st.mean[i]).field(st.ci[i]).field(st.trials).end_row();
  ctx.emit("sn.csv", csv.str());
  return json{};
}

json run_hits(RunContext& ctx, const json& p) {
  require_keys(p, {"k", "trials", "seed"}, "hits");
  std::int64_t k = geti(p, "k");
  std::int64_t trials = geti(p, "trials");
  std::uint64_t seed = get_seed(p);
  LayerHitEstimate h = layer_hit_estimate(ctx.env, k, trials, seed, ctx.workers);
  CsvBuilder csv("k,h1,h2,trials");
  csv.field(k).field(h.h1).field(h.h2).field(h.trials).end_row();
  ctx.emit("hits.csv", csv.str());
  return json{};
}

json run_verify(RunContext& ctx, const json& p) {
  require_keys(p, {"suite", "n", "tol", "count", "depth", "seed", "k_samples", "m_samples"},
               "verify");
  std::string suite = gets(p, "suite");
  std::int64_t n = geti(p, "n", 1000);
  json summary = json::array();

  auto emit_reports = [&](const std::vector<ConvergenceReport>& reps) {
    for (const ConvergenceReport& r : reps) {
      CsvBuilder csv("n,value,target,abs_error");
      for (const ConvergencePoint& pt : r.grid)
        csv.field(pt.n).field(pt.value).field(pt.target).field(pt.abs_error).end_row();
      ctx.emit("verify_" + r.quantity + ".csv", csv.str());
      summary.push_back(json{{"quantity", r.quantity},
                             {"verdict", r.pass ? "pass" : "fail"},
                             {"final_error", r.final_error}});
    }
  };

  std::vector<std::int64_t> n_grid;
  for (std::int64_t g = 25; g < n; g = g * 2) n_grid.push_back(g);
  n_grid.push_back(n);

  if (suite == "prop1") {
    double tol = getd(p, "tol", n >= 1000 ? 1e-4 : 1e-2);
    std::vector<std::int64_t> ks =
        p.contains("k_samples") ? parse_grid(gets(p, "k_samples"))
                                : std::vector<std::int64_t>{1, 10, 100};
    emit_reports(verify_prop1_limits(ctx.env, n_grid, ks, tol));
  } else if (suite == "ratio") {
    double tol = getd(p, "tol", n >= 500 ? 1e-6 : 1e-2);
    std::vector<std::int64_t> ms = p.contains("m_samples")
                                       ? parse_grid(gets(p, "m_samples"))
                                       : std::vector<std::int64_t>{10, 20};
    emit_reports(verify_ratio_limits(ctx.env, n_grid, ms, tol));
  } else if (suite == "bounded") {
    std::vector<std::int64_t> m_grid;
    for (std::int64_t m = 10; m <= n; m = std::max(m + 1, m * 3 / 2)) m_grid.push_back(m);
    std::vector<BoundedRatioReport> reps = verify_bounded_ratios(ctx.env, m_grid);
    CsvBuilder csv("family,min_ratio,max_ratio,skipped,pass");
    for (const BoundedRatioReport& r : reps) {
      csv.field(r.family).field(r.min_ratio).field(r.max_ratio);
      csv.field(std::string(r.skipped ? "1" : "0"));
      csv.field(std::string(r.pass ? "1" : "0")).end_row();
      summary.push_back(json{{"quantity", r.family},
                             {"verdict", r.pass ? "pass" : "fail"},
                             {"final_error", 0.0}});
    }
    ctx.emit("verify_bounded.csv", csv.str());
  } else if (suite == "lemma24") {
    std::int64_t count = geti(p, "count", 1000);
    std::int64_t depth = geti(p, "depth", 50);
    std::uint64_t seed = static_cast<std::uint64_t>(geti(p, "seed", 20240901));
    Lemma24Summary s = lemma24_suite(count, depth, seed);
    CsvBuilder csv("name,k,n,lhs,rhs,pass");
    csv.field(std::string("suite_total")).field(s.cfs_checked).field(s.items_checked);
    csv.field(static_cast<double>(s.failures)).field(0.0);
    csv.field(std::string(s.pass ? "1" : "0")).end_row();
    ctx.emit("verify_lemma24.csv", csv.str());
    summary.push_back(json{{"quantity", "lemma24"},
                           {"verdict", s.pass ? "pass" : "fail"},
                           {"final_error", static_cast<double>(s.failures)}});
  } else {
    throw ConfigError("verify: unknown suite \"" + suite + "\"");
  }
  ctx.emit("verify_summary.json", json{{"reports", summary}}.dump(2) + "\n");
  return json{{"verify", summary}};
}

json run_growth(RunContext& ctx, const json& p) {
  require_keys(p, {"kind", "betas", "grid", "trials", "seed", "eps_conf", "as_eps"}, "growth");
  WalkKind kind = parse_kind(gets(p, "kind"));
  std::vector<double> betas = parse_dgrid(gets(p, "betas"));
  std::vector<std::int64_t> grid = parse_grid(gets(p, "grid"));
  std::int64_t trials = geti(p, "trials", 0);
  std::uint64_t seed = trials > 0 ? get_seed(p) : 0;
  double eps_conf = getd(p, "eps_conf", 0.35);
  double as_eps = getd(p, "as_eps", 0.1);

  CsvBuilder csv("beta,n,es_exact,normalized,mc_mean,mc_ci");
  CsvBuilder diag("beta,trajectory,n,sn,as_normalized");
  json summary = json::array();
  for (double beta : betas) {
    GrowthReport rep = growth_curve(kind, beta, grid, trials, seed, ctx.workers, eps_conf);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      csv.field(beta).field(grid[i]).field(rep.es_exact[i]).field(rep.normalized[i]);
      if (trials > 0)
        csv.field(rep.mc.mean[i]).field(rep.mc.ci[i]);
      else
        csv.field(std::string("")).field(std::string(""));
      csv.end_row();
    }
    for (std::size_t g = 0; g < rep.sn_samples.size(); ++g) {
      double n = static_cast<double>(grid[g]);
      double denom = std::pow(std::log(n), 1.0 + as_eps) *
                     std::pow(std::log(std::log(n)), -beta);
      for (std::size_t t = 0; t < rep.sn_samples[g].size(); ++t) {
        diag.field(beta).field(static_cast<std::int64_t>(t)).field(grid[g]);
        diag.field(static_cast<std::int64_t>(rep.sn_samples[g][t]));
        diag.field(static_cast<double>(rep.sn_samples[g][t]) / denom).end_row();
      }
    }
    // Fitted exponent of E S_n against log n (should be ~1 when beta = 0).
    double sx = 0, sy = 0, sxy = 0, sxx = 0;
    double cnt = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (rep.es_exact[i] <= 0) continue;
      double x = std::log(std::log(static_cast<double>(grid[i])));
      double y = std::log(rep.es_exact[i]);
      sx += x;
      sy += y;
      sxy += x * y;
      sxx += x * x;
      cnt += 1;
    }
    double slope = cnt >= 2 ? (sxy - sx * sy / cnt) / (sxx - sx * sx / cnt) : 0.0;
    summary.push_back(json{{"beta", beta},
                           {"norm_max_over_min", rep.norm_max_over_min},
                           {"exact_pass", rep.exact_pass},
                           {"fitted_exponent", slope}});
  }
  ctx.emit("growth.csv", csv.str());
  if (trials > 0) ctx.emit("growth_as_diag.csv", diag.str());
  ctx.emit("growth_summary.json", json{{"curves", summary}}.dump(2) + "\n");
  return json{{"growth", summary}};
}

int execute(const std::string& command, const json& env_spec, const json& params,
            const fs::path& out, int workers) {
  auto t0 = std::chrono::steady_clock::now();
  RunContext ctx{env_spec, env_from_json(env_spec), out, workers, {}};
  fs::create_directories(out);

  json extra;
  if (command == "probe")
    extra = run_probe(ctx, params);
  else if (command == "simulate")
    extra = run_simulate(ctx, params);
  else if (command == "census")
    extra = run_census(ctx, params);
  else if (command == "sn")
    extra = run_sn(ctx, params);
  else if (command == "hits")
    extra = run_hits(ctx, params);
  else if (command == "verify")
    extra = run_verify(ctx, params);
  else if (command == "growth")
    extra = run_growth(ctx, params);
  else
    throw ConfigError("unknown command \"" + command + "\"");

  auto wall =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0)
          .count();
  json manifest{{"tool", "cutwalk"},
                {"version", kVersion},
                {"command", command},
                {"resolved",
                 {{"command", command},
                  {"env", env_spec},
                  {"params", params},
                  {"out", out.string()},
                  {"workers", workers}}},
                {"env_effective", ctx.env.describe()},
                {"outputs", ctx.outputs},
                {"summary", extra},
                {"wall_ms", wall}};
  write_file_atomic(out / "manifest.json", manifest.dump(2) + "\n");
  return 0;
}

int rerun_from_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError("cannot open manifest: " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const std::exception& e) {
    throw ConfigError("manifest parse error: " + std::string(e.what()));
  }
  const json& r = manifest.at("resolved");
  return execute(r.at("command").get<std::string>(), r.at("env"), r.at("params"),
                 r.at("out").get<std::string>(), r.at("workers").get<int>());
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{std::string(kVersion) +
               " - escape probabilities, cutpoint censuses and limit-law checks for (1,2)/(2,1) "
               "walks in varying environments"};
  app.require_subcommand(1);

  std::string env_path, out_dir = ".", config_path, manifest_path;
  int workers = static_cast<int>(std::min(8u, std::max(1u, std::thread::hardware_concurrency())));
  app.add_option("--config", config_path, "JSON run config (flags override)");
  app.add_option("--env", env_path, "environment config JSON");
  CLI::Option* out_opt = app.add_option("--out", out_dir, "output directory");
  CLI::Option* workers_opt =
      app.add_option("--workers", workers, "worker threads (results are worker-count independent)");

  // Per-subcommand raw parameter capture; merged into a params json object.
  json flags;
  auto add_i64 = [&flags](CLI::App* sub, const char* name, const char* key, const char* desc) {
    sub->add_option_function<std::int64_t>(
        name, [&flags, key](const std::int64_t& v) { flags[key] = v; }, desc);
  };
  auto add_f64 = [&flags](CLI::App* sub, const char* name, const char* key, const char* desc) {
    sub->add_option_function<double>(
        name, [&flags, key](const double& v) { flags[key] = v; }, desc);
  };
  auto add_str = [&flags](CLI::App* sub, const char* name, const char* key, const char* desc) {
    sub->add_option_function<std::string>(
        name, [&flags, key](const std::string& v) { flags[key] = v; }, desc);
  };

  CLI::App* probe = app.add_subcommand("probe", "evaluate closed-form quantities");
  add_str(probe, "--quantity", "quantity", "FX|FY|DX|DY|G|escY|escX|QYinf|PXnever|eta|h|pcutX|"
                                           "pcutXJoint|pcutY|tau|zeta|theta|transient|criterion");
  add_i64(probe, "--m", "m", "lower index");
  add_i64(probe, "--k", "k", "site / start index");
  add_i64(probe, "--n", "n", "upper index (omit for limits)");
  add_i64(probe, "--j", "j", "first site (joint cutpoint)");
  add_i64(probe, "--upto", "upto", "finite upper bound for DX/DY");
  add_i64(probe, "--nmax", "nmax", "criterion grid maximum");
  add_f64(probe, "--tol", "tol", "series tolerance");
  add_str(probe, "--kind", "kind", "X or Y (transient/criterion)");

  CLI::App* simulate = app.add_subcommand("simulate", "raw first-passage trajectories");
  add_str(simulate, "--kind", "kind", "X or Y");
  add_i64(simulate, "--level", "level", "stop level");
  add_i64(simulate, "--trials", "trials", "trajectories");
  add_i64(simulate, "--seed", "seed", "RNG seed (mandatory)");
  add_i64(simulate, "--step-cap", "step_cap", "per-trajectory step cap");

  CLI::App* census = app.add_subcommand("census", "cutpoint census over trajectories");
  add_str(census, "--kind", "kind", "X or Y");
  add_i64(census, "--K", "K", "census ceiling");
  add_i64(census, "--trials", "trials", "trajectories");
  add_i64(census, "--seed", "seed", "RNG seed (mandatory)");
  add_f64(census, "--eps-conf", "eps_conf", "confirmation bound (default 1e-6)");
  add_i64(census, "--step-cap", "step_cap", "aggregate step cap");
  add_str(census, "--emit", "emit", "cutpoints (default) or visits");

  CLI::App* sn = app.add_subcommand("sn", "S_n statistics over a grid");
  add_str(sn, "--kind", "kind", "X or Y");
  add_str(sn, "--grid", "grid", "comma-separated n values");
  add_i64(sn, "--trials", "trials", "trajectories");
  add_i64(sn, "--seed", "seed", "RNG seed (mandatory)");
  add_f64(sn, "--eps-conf", "eps_conf", "confirmation bound");
  add_i64(sn, "--step-cap", "step_cap", "aggregate step cap");

  CLI::App* hits = app.add_subcommand("hits", "layer entry split estimate");
  add_i64(hits, "--k", "k", "layer index");
  add_i64(hits, "--trials", "trials", "trajectories");
  add_i64(hits, "--seed", "seed", "RNG seed (mandatory)");

  CLI::App* verify = app.add_subcommand("verify", "limit/ratio/inequality suites");
  add_str(verify, "--suite", "suite", "prop1|ratio|bounded|lemma24");
  add_i64(verify, "--n", "n", "grid maximum");
  add_f64(verify, "--tol", "tol", "pass tolerance at the final grid point");
  add_i64(verify, "--count", "count", "lemma24: number of random fractions");
  add_i64(verify, "--depth", "depth", "lemma24: maximum depth");
  add_i64(verify, "--seed", "seed", "lemma24: hash seed");
  add_str(verify, "--k-samples", "k_samples", "prop1: base points (comma list)");
  add_str(verify, "--m-samples", "m_samples", "ratio: base points (comma list)");

  CLI::App* growth = app.add_subcommand("growth", "E S_n growth curves");
  add_str(growth, "--kind", "kind", "X or Y");
  add_str(growth, "--betas", "betas", "comma-separated beta values");
  add_str(growth, "--grid", "grid", "comma-separated n values");
  add_i64(growth, "--trials", "trials", "MC trajectories (0 = exact only)");
  add_i64(growth, "--seed", "seed", "RNG seed (mandatory when trials > 0)");
  add_f64(growth, "--eps-conf", "eps_conf", "census confirmation bound");
  add_f64(growth, "--as-eps", "as_eps", "epsilon of the a.s. diagnostic curve");

  CLI::App* rerun = app.add_subcommand("rerun", "re-execute a run from its manifest");
  rerun->add_option("manifest", manifest_path, "manifest.json path")->required();

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help() << std::endl;
      return 0;
    }
    std::cerr << nlohmann::json{{"error", "config"}, {"message", e.what()}}.dump() << std::endl;
    return 2;
  }

  try {
    if (rerun->parsed()) return rerun_from_manifest(manifest_path);

    std::string command;
    for (CLI::App* sub : {probe, simulate, census, sn, hits, verify, growth})
      if (sub->parsed()) command = sub->get_name();

    json env_spec, params = json::object();
    std::string cfg_out;
    int cfg_workers = 0;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot open config: " + config_path);
      json cfg;
      try {
        in >> cfg;
      } catch (const std::exception& e) {
        throw ConfigError("config parse error: " + std::string(e.what()));
      }
      require_keys(cfg, {"command", "env", "params", "out", "workers"}, "config");
      if (cfg.contains("command") && cfg.at("command").get<std::string>() != command)
        throw ConfigError("config command does not match the invoked subcommand");
      if (cfg.contains("env")) env_spec = cfg.at("env");
      if (cfg.contains("params")) params = cfg.at("params");
      if (cfg.contains("out")) cfg_out = cfg.at("out").get<std::string>();
      if (cfg.contains("workers")) cfg_workers = cfg.at("workers").get<int>();
    }
    // Flags override config-file values.
    if (!env_path.empty()) {
      std::ifstream in(env_path);
      if (!in) throw ConfigError("cannot open environment config: " + env_path);
      try {
        in >> env_spec;
      } catch (const std::exception& e) {
        throw ConfigError("environment config parse error: " + std::string(e.what()));
      }
    }
    if (env_spec.is_null()) throw ConfigError("no environment given (--env or config)");
    for (auto it = flags.begin(); it != flags.end(); ++it) params[it.key()] = it.value();
    fs::path out = out_opt->count() > 0 || cfg_out.empty() ? fs::path(out_dir)
                                                           : fs::path(cfg_out);
    int wk = (workers_opt->count() == 0 && cfg_workers > 0) ? cfg_workers : workers;
    return execute(command, env_spec, params, out, std::max(1, wk));
  } catch (const ConfigError& e) {
    std::cerr << nlohmann::json{{"error", "config"}, {"message", e.what()}}.dump() << std::endl;
    return 2;
  } catch (const ModelError& e) {
    std::cerr << nlohmann::json{{"error", "model"}, {"message", e.what()}}.dump() << std::endl;
    return 3;
  } catch (const CapError& e) {
    std::cerr << nlohmann::json{{"error", "cap"}, {"message", e.what()}}.dump() << std::endl;
    return 4;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump()
              << std::endl;
    return 10;
  }
}

}  // namespace cutwalk::cli
