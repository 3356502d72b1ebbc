#include "cutwalk/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "cutwalk/prob.hpp"

namespace cutwalk {

std::int64_t step(const Environment& env, WalkState& state, RngStream& rng) {
  std::int64_t pos = state.position;
  if (pos < 0) throw ModelError("step: negative position");
  std::int64_t next;
  if (state.kind == WalkKind::X) {
    if (pos == 0)
      next = 1;
    else if (pos == 1)
      next = 2;
    else {
      SiteLaw s = env.site(pos);
      double u = rng.next_unit();
      next = u < s.q ? pos + 1 : (u < s.q + s.p1 ? pos - 1 : pos - 2);
    }
  } else {
    if (pos == 1)
      next = 0;
    else if (pos == 0)
      next = 2;
    else {
      SiteLaw s = env.site(pos);
      double u = rng.next_unit();
      next = u < s.q ? pos - 1 : (u < s.q + s.p1 ? pos + 1 : pos + 2);
    }
  }
  state.position = next;
  ++state.steps;
  return next;
}

SiteTable::SiteTable(const Environment& env, std::int64_t k_max) : k_max_(k_max) {
  if (k_max < 2) throw ConfigError("SiteTable: need k_max >= 2");
  t1_.resize(static_cast<std::size_t>(k_max + 1), 0.0);
  t2_.resize(static_cast<std::size_t>(k_max + 1), 0.0);
  for (std::int64_t k = 2; k <= k_max; ++k) {
    SiteLaw s = env.site(k);
    t1_[static_cast<std::size_t>(k)] = s.q;
    t2_[static_cast<std::size_t>(k)] = s.q + s.p1;
  }
}

std::int64_t SiteTable::step(WalkKind kind, std::int64_t pos, double u) const {
  if (kind == WalkKind::X) {
    if (pos == 0) return 1;
    if (pos == 1) return 2;
    std::size_t i = static_cast<std::size_t>(pos);
    return u < t1_[i] ? pos + 1 : (u < t2_[i] ? pos - 1 : pos - 2);
  }
  if (pos == 1) return 0;
  if (pos == 0) return 2;
  std::size_t i = static_cast<std::size_t>(pos);
  return u < t1_[i] ? pos - 1 : (u < t2_[i] ? pos + 1 : pos + 2);
}

ConfirmMargin confirmation_margin(const Environment& env, WalkKind kind, std::int64_t K,
                                  double eps_conf, std::int64_t w_cap) {
  if (K < 4) throw ConfigError("confirmation_margin: need K >= 4");
  if (!(eps_conf > 0.0 && eps_conf < 1.0))
    throw ConfigError("confirmation_margin: eps_conf must be in (0,1)");

  if (kind == WalkKind::X) {
    // ret(x) = 1 - F_X(K,x)/F_X(K); extend the finite sum until it clears.
    SeriesOptions opts;
    opts.tol = std::min(1e-12, eps_conf * 1e-3);
    SeriesResult fx = series_F_X(env, K, std::nullopt, opts);
    if (fx.diverged) throw ModelError("confirmation_margin: X is recurrent here");
    double fx_upper = fx.value + (fx.kind == TailKind::Rigorous ? fx.tail_bound
                                                                : fx.value * 1e-6);
    double partial = 1.0, r = 0.0, term = 1.0;
    for (std::int64_t s = K + 1; s - K <= w_cap; ++s) {
      r = (s == K + 1) ? env.a_k(s) : env.a_k(s) + env.b_k(s) / r;
      term *= r;
      partial += term;  // partial == F_X(K, s+1)
      double ret_here = std::max(0.0, 1.0 - partial / fx_upper);
      if (ret_here < eps_conf) {
        std::int64_t W = s + 1 - K;  // stop level x = K + W = s + 1
        double r_next = env.a_k(s + 1) + env.b_k(s + 1) / r;
        double eps1 = std::max(0.0, 1.0 - (partial + term * r_next) / fx_upper);
        return ConfirmMargin{W, ret_here, eps1};
      }
    }
    throw CapError("confirmation_margin: W cap exceeded (X)");
  }

  // Y: absorption oracle with receding guard; exponential then binary search
  // for the minimal W.
  double tol = std::max(1e-12, eps_conf * 1e-2);
  auto ret_at = [&](std::int64_t W) {
    return oracle_Y_return_prob(env, K, K + W, tol);
  };
  std::int64_t lo = 1, hi = 1;
  double r_hi = ret_at(hi);
  while (r_hi >= eps_conf) {
    lo = hi;
    hi *= 2;
    if (hi > w_cap) throw CapError("confirmation_margin: W cap exceeded (Y)");
    r_hi = ret_at(hi);
  }
  while (lo + 1 < hi) {
    std::int64_t mid = lo + (hi - lo) / 2;
    if (ret_at(mid) < eps_conf)
      hi = mid;
    else
      lo = mid;
  }
  double eps = ret_at(hi);
  double eps1 = ret_at(hi + 1);
  return ConfirmMargin{hi, eps, std::min(eps, eps1)};
}

namespace {

CutpointCensus census_one(const Environment& env, const SiteTable& table, WalkKind kind,
                          std::int64_t K, const ConfirmMargin& margin, double eps_conf,
                          std::uint64_t step_cap, std::uint64_t seed,
                          std::uint64_t trajectory) {
  CutpointCensus c;
  c.K = K;
  c.W = margin.W;
  c.eps_conf = eps_conf;
  c.visits.assign(static_cast<std::size_t>(K + 1), 0);

  RngStream rng(seed, trajectory);
  const std::int64_t stop_level = K + margin.W;
  std::int64_t pos = 2;
  c.visits[2] = 1;  // time 0 counts
  std::uint64_t steps = 0;
  // During the loop pos <= stop_level - 1 <= table.k_max() - 3, so every
  // non-forced step samples from the table.
  while (pos < stop_level) {
    if (steps >= step_cap) {
      std::ostringstream msg;
      msg << "census: step cap " << step_cap << " exhausted at position " << pos
          << " (trajectory " << trajectory << ")";
      throw CapError(msg.str());
    }
    pos = table.step(kind, pos, pos >= 2 ? rng.next_unit() : 0.0);
    ++steps;
    if (pos <= K) ++c.visits[static_cast<std::size_t>(pos)];
  }
  c.steps_used = steps;
  c.stop_position = pos;
  c.eps_cens = pos == stop_level ? margin.eps_cens : margin.eps_cens_plus1;

  for (std::int64_t k = 2; k <= K; ++k) {
    std::uint32_t v = c.visits[static_cast<std::size_t>(k)];
    if ((kind == WalkKind::X && v == 1) || (kind == WalkKind::Y && v == 0))
      c.cutpoints.push_back(k);
  }
  if (kind == WalkKind::Y) {
    for (std::int64_t layer = 1; 2 * layer + 1 <= K; ++layer) {
      bool lo0 = c.visits[static_cast<std::size_t>(2 * layer)] == 0;
      bool hi0 = c.visits[static_cast<std::size_t>(2 * layer + 1)] == 0;
      if (lo0 && hi0)
        throw ModelError("census: layer with both sites skipped (cannot happen for jumps <= 2)");
      if (lo0 || hi0) c.layer_cutpoints.push_back(layer);
    }
  }
  return c;
}

}  // namespace

CutpointCensus cutpoint_census(const Environment& env, WalkKind kind, std::int64_t K,
                               double eps_conf, std::uint64_t step_cap, std::uint64_t seed,
                               std::uint64_t trajectory) {
  if (K < 4) throw ConfigError("cutpoint_census: need K >= 4");
  TransienceReport tr = transient(env, kind);
  if (tr.verdict == Transience::Recurrent)
    throw ModelError("recurrent: cutpoint census undefined");
  if (tr.verdict == Transience::Inconclusive)
    throw ModelError("cutpoint census: transience inconclusive for this environment");
  ConfirmMargin margin = confirmation_margin(env, kind, K, eps_conf);
  SiteTable table(env, K + margin.W + 2);
  return census_one(env, table, kind, K, margin, eps_conf, step_cap, seed, trajectory);
}

CensusBatchResult census_batch(const Environment& env, WalkKind kind, std::int64_t K,
                               double eps_conf, std::uint64_t step_cap, std::uint64_t seed,
                               std::int64_t trials, int workers,
                               const std::vector<std::int64_t>& n_grid,
                               const CensusSink& sink) {
  if (K < 4) throw ConfigError("census_batch: need K >= 4");
  if (trials < 1) throw ConfigError("census_batch: need trials >= 1");
  TransienceReport tr = transient(env, kind);
  if (tr.verdict == Transience::Recurrent)
    throw ModelError("recurrent: cutpoint census undefined");
  if (tr.verdict == Transience::Inconclusive)
    throw ModelError("census: transience inconclusive for this environment");
  for (std::int64_t n : n_grid)
    if (n < 2 || n > K) throw ConfigError("census_batch: S_n grid entries must lie in [2,K]");

  ConfirmMargin margin = confirmation_margin(env, kind, K, eps_conf);
  SiteTable table(env, K + margin.W + 2);
  std::uint64_t per_traj_cap = std::max<std::uint64_t>(step_cap / static_cast<std::uint64_t>(trials), 1);

  CensusBatchResult out;
  out.trials = trials;
  out.K = K;
  out.W = margin.W;
  out.eps_conf = eps_conf;
  out.cut_count.assign(static_cast<std::size_t>(K + 1), 0);
  if (kind == WalkKind::Y)
    out.layer_cut_count.assign(static_cast<std::size_t>((K - 1) / 2 + 1), 0);
  out.n_grid = n_grid;
  out.sn_samples.assign(n_grid.size(), std::vector<std::int64_t>(
                                           static_cast<std::size_t>(trials), 0));

  int nw = std::max(1, workers);
  const std::int64_t chunk = std::max<std::int64_t>(nw * 4, 8);
  std::vector<CutpointCensus> slots(static_cast<std::size_t>(chunk));
  std::vector<std::string> errors(static_cast<std::size_t>(chunk));

  for (std::int64_t base = 0; base < trials; base += chunk) {
    std::int64_t count = std::min<std::int64_t>(chunk, trials - base);
    std::atomic<std::int64_t> next{0};
    auto work = [&]() {
      while (true) {
        std::int64_t i = next.fetch_add(1);
        if (i >= count) break;
        try {
          slots[static_cast<std::size_t>(i)] =
              census_one(env, table, kind, K, margin, eps_conf, per_traj_cap, seed,
                         static_cast<std::uint64_t>(base + i));
        } catch (const std::exception& e) {
          errors[static_cast<std::size_t>(i)] = e.what();
        }
      }
    };
    if (nw == 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < nw; ++w) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }
    // Deterministic fold in trajectory-index order.
    for (std::int64_t i = 0; i < count; ++i) {
      if (!errors[static_cast<std::size_t>(i)].empty())
        throw CapError(errors[static_cast<std::size_t>(i)]);
      const CutpointCensus& c = slots[static_cast<std::size_t>(i)];
      out.eps_cens_max = std::max(out.eps_cens_max, c.eps_cens);
      out.total_steps += c.steps_used;
      for (std::int64_t k : c.cutpoints) ++out.cut_count[static_cast<std::size_t>(k)];
      for (std::int64_t l : c.layer_cutpoints)
        ++out.layer_cut_count[static_cast<std::size_t>(l)];
      for (std::size_t g = 0; g < n_grid.size(); ++g) {
        std::int64_t n = n_grid[g];
        auto it = std::upper_bound(c.cutpoints.begin(), c.cutpoints.end(), n);
        out.sn_samples[g][static_cast<std::size_t>(base + i)] =
            static_cast<std::int64_t>(it - c.cutpoints.begin());
      }
      if (sink) sink(base + i, c);
    }
  }
  return out;
}

SnStats s_n_statistics(const Environment& env, WalkKind kind,
                       const std::vector<std::int64_t>& n_grid, std::int64_t trials,
                       double eps_conf, std::uint64_t seed, int workers,
                       std::uint64_t step_cap) {
  if (n_grid.empty()) throw ConfigError("s_n_statistics: empty grid");
  std::int64_t K = *std::max_element(n_grid.begin(), n_grid.end());
  CensusBatchResult batch =
      census_batch(env, kind, K, eps_conf, step_cap, seed, trials, workers, n_grid);
  SnStats st;
  st.n_grid = n_grid;
  st.trials = trials;
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    double sum = 0, sumsq = 0;
    for (std::int64_t v : batch.sn_samples[g]) {
      sum += static_cast<double>(v);
      sumsq += static_cast<double>(v) * static_cast<double>(v);
    }
    double mean = sum / static_cast<double>(trials);
    double var = std::max(0.0, sumsq / static_cast<double>(trials) - mean * mean);
    st.mean.push_back(mean);
    st.ci.push_back(3.0 * std::sqrt(var / static_cast<double>(trials)));
  }
  return st;
}

LayerHitEstimate layer_hit_estimate(const Environment& env, std::int64_t k,
                                    std::int64_t trials, std::uint64_t seed, int workers,
                                    std::uint64_t step_cap) {
  if (k < 1) throw ConfigError("layer_hit_estimate: need k >= 1");
  if (trials < 1) throw ConfigError("layer_hit_estimate: need trials >= 1");
  if (k == 1) return LayerHitEstimate{1.0, 0.0, trials};  // start 2 = left end of L_1

  SiteTable table(env, 2 * k + 2);
  std::uint64_t per_traj_cap =
      std::max<std::uint64_t>(step_cap / static_cast<std::uint64_t>(trials), 1);
  const std::int64_t lo_site = 2 * k;

  std::atomic<std::int64_t> next{0};
  std::atomic<std::int64_t> hits_lo{0};
  std::atomic<int> failed{0};  // 1 = cap, 2 = missed layer (impossible for jumps <= 2)
  auto work = [&]() {
    while (true) {
      std::int64_t t = next.fetch_add(1);
      if (t >= trials || failed.load()) break;
      RngStream rng(seed, static_cast<std::uint64_t>(t));
      std::int64_t pos = 2;
      std::uint64_t steps = 0;
      while (pos < lo_site) {
        if (steps++ >= per_traj_cap) {
          failed.store(1);
          return;
        }
        pos = table.step(WalkKind::Y, pos, pos >= 2 ? rng.next_unit() : 0.0);
      }
      if (pos != lo_site && pos != lo_site + 1) {
        failed.store(2);
        return;
      }
      if (pos == lo_site) hits_lo.fetch_add(1);
    }
  };
  int nw = std::max(1, workers);
  if (nw == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < nw; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failed.load() == 1) throw CapError("layer_hit_estimate: step cap exhausted");
  if (failed.load() == 2) throw ModelError("layer_hit_estimate: first entry missed the layer");
  double h1 = static_cast<double>(hits_lo.load()) / static_cast<double>(trials);
  return LayerHitEstimate{h1, 1.0 - h1, trials};
}

}  // namespace cutwalk
