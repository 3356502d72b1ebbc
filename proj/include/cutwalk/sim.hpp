#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cutwalk/environment.hpp"
#include "cutwalk/oracle.hpp"
#include "cutwalk/rng.hpp"

namespace cutwalk {

struct WalkState {
  WalkKind kind;
  std::int64_t position = 2;
  std::uint64_t steps = 0;
};

// One transition.  Boundary moves are forced: X: 0->1, 1->2; Y: 1->0, 0->2.
std::int64_t step(const Environment& env, WalkState& state, RngStream& rng);

// Materialized sampling thresholds for sites [2, k_max]; stepping through a
// table is a pure function of the environment, kept per run (not inside the
// environment) so generator envs stay cache-free.
class SiteTable {
 public:
  SiteTable(const Environment& env, std::int64_t k_max);
  std::int64_t k_max() const { return k_max_; }
  std::int64_t step(WalkKind kind, std::int64_t pos, double u) const;

 private:
  std::int64_t k_max_;
  std::vector<double> t1_, t2_;  // q and q+p1 per site
};

struct ConfirmMargin {
  std::int64_t W;
  double eps_cens;          // certified return bound from K+W
  double eps_cens_plus1;    // ... from K+W+1 (stop may overshoot by one)
};

// Minimal W such that the certified probability of returning below K from
// K+W is < eps_conf.  X uses the exact F_X tail quotient; Y uses the
// absorption oracle with a receding upper guard.
ConfirmMargin confirmation_margin(const Environment& env, WalkKind kind, std::int64_t K,
                                  double eps_conf, std::int64_t w_cap = 100'000'000);

struct CutpointCensus {
  std::int64_t K = 0;
  std::int64_t W = 0;
  double eps_conf = 0.0;
  double eps_cens = 0.0;               // certified bound at this trajectory's stop
  std::vector<std::uint32_t> visits;   // sites 0..K, includes time 0
  std::vector<std::int64_t> cutpoints; // X: visits == 1; Y: visits == 0; k in [2,K]
  std::vector<std::int64_t> layer_cutpoints;  // Y only: layers with a skipped site
  std::uint64_t steps_used = 0;
  std::int64_t stop_position = 0;
};

// Single-trajectory census: simulate from 2 until the first position
// >= K + W, then classify sites <= K by visit count.
CutpointCensus cutpoint_census(const Environment& env, WalkKind kind, std::int64_t K,
                               double eps_conf, std::uint64_t step_cap, std::uint64_t seed,
                               std::uint64_t trajectory = 0);

struct CensusBatchResult {
  std::int64_t trials = 0;
  std::int64_t K = 0, W = 0;
  double eps_conf = 0.0, eps_cens_max = 0.0;
  std::vector<std::int64_t> cut_count;        // per site 0..K
  std::vector<std::int64_t> layer_cut_count;  // per layer (Y), size (K-1)/2 + 1
  // sn_samples[g][t] = S_{n_grid[g]} of trajectory t.
  std::vector<std::int64_t> n_grid;
  std::vector<std::vector<std::int64_t>> sn_samples;
  std::uint64_t total_steps = 0;
};

// Ordered per-trajectory consumer (called in trajectory-index order).
using CensusSink = std::function<void(std::int64_t trajectory, const CutpointCensus&)>;

// Parallel batch with deterministic index-order aggregation; step_cap is the
// aggregate budget, split evenly across trajectories.
CensusBatchResult census_batch(const Environment& env, WalkKind kind, std::int64_t K,
                               double eps_conf, std::uint64_t step_cap, std::uint64_t seed,
                               std::int64_t trials, int workers,
                               const std::vector<std::int64_t>& n_grid = {},
                               const CensusSink& sink = nullptr);

struct SnStats {
  std::vector<std::int64_t> n_grid;
  std::vector<double> mean;
  std::vector<double> ci;  // 3 sigma of the mean
  std::int64_t trials = 0;
};

SnStats s_n_statistics(const Environment& env, WalkKind kind,
                       const std::vector<std::int64_t>& n_grid, std::int64_t trials,
                       double eps_conf, std::uint64_t seed, int workers = 1,
                       std::uint64_t step_cap = 10'000'000'000ull);

struct LayerHitEstimate {
  double h1, h2;
  std::int64_t trials;
};

// Frequencies of entering layer L_k at 2k vs 2k+1 (Y from 2); h1 + h2 = 1
// exactly.  Asserts that every first entry into [2k,inf) lands in the layer.
LayerHitEstimate layer_hit_estimate(const Environment& env, std::int64_t k,
                                    std::int64_t trials, std::uint64_t seed, int workers = 1,
                                    std::uint64_t step_cap = 10'000'000'000ull);

}  // namespace cutwalk
