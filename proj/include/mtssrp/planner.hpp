#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mtssrp/model.hpp"
#include "mtssrp/monitor.hpp"
#include "mtssrp/plan.hpp"
#include "mtssrp/rng.hpp"

namespace mtssrp {

struct PlannerConfig {
  std::size_t q = 1;          ///< sensing budget
  std::size_t top_modes = 1;  ///< Ks, modes entering the sampled reward
  SolverKind solver = SolverKind::sort;
  std::uint64_t seed = 0;

  void validate(std::size_t p, std::size_t num_modes) const;
};

/// A hypothetical next observation drawn from one failure mode.
///
/// For diagonal banks only the coordinates in the mode's support are random;
/// the remaining entries hold the mode mean and are never read, because the
/// per-coordinate log-likelihood ratio there is identically zero.
struct ThompsonDraw {
  std::size_t mode = 0;
  Eigen::VectorXd x;
};

using ThompsonDraws = std::vector<ThompsonDraw>;

/// The `count` modes with the largest current statistic, ties by lowest index.
std::vector<std::size_t> top_modes(std::span<const LogSR> stats, std::size_t count);

/// One draw per top mode, made once per tick and shared by every candidate set.
ThompsonDraws draw_thompson(const MonitorState& state, const ModeBank& bank, std::size_t count, Rng& rng);

/// Per-sensor scores s_j = sum over drawn modes of log f_{j,k}(x_j) / f_{j,0}(x_j). Diagonal banks only.
std::vector<double> scores_from_draws(const ModeBank& bank, const ThompsonDraws& draws);

struct ThompsonScores {
  std::vector<double> scores;
  std::vector<std::size_t> modes;
};

/// Draws and scores in one step. Throws for non-diagonal banks.
ThompsonScores thompson_scores(const MonitorState& state, const ModeBank& bank, const PlannerConfig& cfg, Rng& rng);
ThompsonScores thompson_scores(const MonitorState& state, const ModeBank& bank, const PlannerConfig& cfg);

/// Sampled statistics r~_k = log(exp(r_k) + 1) + LLR_k(x~^k on indices), one per draw.
std::vector<double> sampled_statistics(const MonitorState& state, const ModeBank& bank, const ThompsonDraws& draws,
                                       std::span<const std::size_t> indices);
/// The sampled reward S~: sum of sampled_statistics.
double sampled_reward(const MonitorState& state, const ModeBank& bank, const ThompsonDraws& draws,
                      std::span<const std::size_t> indices);

/// Indices of the q largest scores, lowest index on ties.
SamplingPlan plan_sort(std::span<const double> scores, std::size_t q);

/// Forward selection: q rounds, each adding the coordinate with the largest sampled-reward gain.
SamplingPlan plan_greedy(const MonitorState& state, const ModeBank& bank, const ThompsonDraws& draws, std::size_t q);
SamplingPlan plan_greedy(const MonitorState& state, const ModeBank& bank, const PlannerConfig& cfg);

inline constexpr double kMaxExhaustiveCombinations = 1e6;

/// Global optimum of the sampled reward over all C(p, q) sets. Lexicographically first maximiser.
SamplingPlan plan_exhaustive(const MonitorState& state, const ModeBank& bank, const ThompsonDraws& draws,
                             std::size_t q);
SamplingPlan plan_exhaustive(const MonitorState& state, const ModeBank& bank, const PlannerConfig& cfg);

/// Uniform q-subset of {0..p-1}.
SamplingPlan plan_random(std::size_t p, std::size_t q, Rng& rng);
SamplingPlan plan_random(std::size_t p, std::size_t q, std::uint64_t seed);

/// One planning step with the configured solver, drawing from `rng`.
SamplingPlan plan_next(const MonitorState& state, const ModeBank& bank, const PlannerConfig& cfg, Rng& rng);

double binomial(std::size_t n, std::size_t k) noexcept;

}  // namespace mtssrp
