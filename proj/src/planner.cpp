#include "mtssrp/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include <fmt/format.h>

namespace mtssrp {

SolverKind parse_solver(std::string_view name) {
  if (name == "sort") return SolverKind::sort;
  if (name == "greedy") return SolverKind::greedy;
  if (name == "exhaustive") return SolverKind::exhaustive;
  if (name == "random") return SolverKind::random;
  if (name == "fixed") return SolverKind::fixed;
  throw std::invalid_argument(fmt::format("unknown solver '{}'", name));
}

std::string_view to_string(SolverKind solver) noexcept {
  switch (solver) {
    case SolverKind::sort: return "sort";
    case SolverKind::greedy: return "greedy";
    case SolverKind::exhaustive: return "exhaustive";
    case SolverKind::random: return "random";
    case SolverKind::fixed: return "fixed";
  }
  return "fixed";
}

void SamplingPlan::validate(std::size_t p, std::size_t q) const {
  if (indices.size() != q) {
    throw std::invalid_argument(fmt::format("plan has {} indices, budget is {}", indices.size(), q));
  }
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= p) throw std::invalid_argument(fmt::format("plan index {} out of range", indices[i]));
    if (i > 0 && indices[i] <= indices[i - 1]) throw std::invalid_argument("plan indices must be strictly increasing");
  }
}

SamplingPlan full_plan(std::size_t p) {
  SamplingPlan plan;
  plan.indices.resize(p);
  std::iota(plan.indices.begin(), plan.indices.end(), 0);
  plan.solver = SolverKind::fixed;
  return plan;
}

void PlannerConfig::validate(std::size_t p, std::size_t num_modes) const {
  if (q < 1 || q > p) throw std::invalid_argument(fmt::format("budget q = {} must lie in [1, {}]", q, p));
  if (top_modes < 1 || top_modes > num_modes) {
    throw std::invalid_argument(fmt::format("Ks = {} must lie in [1, {}]", top_modes, num_modes));
  }
}

double binomial(std::size_t n, std::size_t k) noexcept {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double out = 1.0;
  for (std::size_t i = 1; i <= k; ++i) out = out * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(out);
}

std::vector<std::size_t> top_modes(std::span<const LogSR> stats, std::size_t count) {
  count = std::min(count, stats.size());
  std::vector<std::size_t> order(stats.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double ka = stats[a].rank_key();
                      const double kb = stats[b].rank_key();
                      return ka > kb || (ka == kb && a < b);
                    });
  order.resize(count);
  return order;
}

ThompsonDraws draw_thompson(const MonitorState& state, const ModeBank& bank, std::size_t count, Rng& rng) {
  ThompsonDraws draws;
  std::normal_distribution<double> normal;
  for (const std::size_t k : top_modes(state.logstats, count)) {
    ThompsonDraw draw;
    draw.mode = k;
    const auto& model = bank.mode(k);
    if (bank.is_diagonal()) {
      draw.x = model.mean();
      for (const std::size_t j : bank.support(k)) {
        const auto jj = static_cast<Eigen::Index>(j);
        draw.x[jj] = model.mean()[jj] + std::sqrt(model.variances()[jj]) * normal(rng);
      }
    } else {
      draw.x = model.sample(rng);
    }
    draws.push_back(std::move(draw));
  }
  return draws;
}

std::vector<double> scores_from_draws(const ModeBank& bank, const ThompsonDraws& draws) {
  if (!bank.is_diagonal()) {
    throw std::invalid_argument("closed-form sensor scores need independent coordinates; use the greedy solver");
  }
  std::vector<double> scores(bank.dim(), 0.0);
  for (const auto& draw : draws) {
    const auto& mode = bank.mode(draw.mode);
    for (const std::size_t j : bank.support(draw.mode)) {
      scores[j] += coordinate_llr(mode.coordinate(j), bank.base().coordinate(j), draw.x[static_cast<Eigen::Index>(j)]);
    }
  }
  return scores;
}

ThompsonScores thompson_scores(const MonitorState& state, const ModeBank& bank, const PlannerConfig& cfg, Rng& rng) {
  if (!bank.is_diagonal()) {
    throw std::invalid_argument("closed-form sensor scores need independent coordinates; use the greedy solver");
  }
  cfg.validate(bank.dim(), bank.size());
  auto draws = draw_thompson(state, bank, cfg.top_modes, rng);
  ThompsonScores out;
  out.scores = scores_from_draws(bank, draws);
  for (const auto& d : draws) out.modes.push_back(d.mode);
  return out;
}

ThompsonScores thompson_scores(const MonitorState& state, const ModeBank& bank, const PlannerConfig& cfg) {
  Rng rng(cfg.seed);
  return thompson_scores(state, bank, cfg, rng);
}

std::vector<double> sampled_statistics(const MonitorState& state, const ModeBank& bank, const ThompsonDraws& draws,
                                       std::span<const std::size_t> indices) {
  std::vector<double> out;
  out.reserve(draws.size());
  Observation obs;
  obs.indices.assign(indices.begin(), indices.end());
  obs.values.resize(indices.size());
  for (const auto& draw : draws) {
    for (std::size_t i = 0; i < indices.size(); ++i) obs.values[i] = draw.x[static_cast<Eigen::Index>(indices[i])];
    out.push_back(state.logstats[draw.mode].log_one_plus() + log_likelihood_ratio(bank, draw.mode, obs));
  }
  return out;
}

double sampled_reward(const MonitorState& state, const ModeBank& bank, const ThompsonDraws& draws,
                      std::span<const std::size_t> indices) {
  const auto stats = sampled_statistics(state, bank, draws, indices);
  return std::accumulate(stats.begin(), stats.end(), 0.0);
}

SamplingPlan plan_sort(std::span<const double> scores, std::size_t q) {
  if (q > scores.size()) throw std::invalid_argument(fmt::format("budget {} exceeds {} sensors", q, scores.size()));
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(q), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  order.resize(q);
  std::sort(order.begin(), order.end());
  return {std::move(order), SolverKind::sort};
}

namespace {

// Growing Cholesky factor of one model's covariance restricted to the
// selected set, with a whitened residual per draw evaluated under it.
struct IncrementalFactor {
  const GaussianModel* model = nullptr;
  Eigen::MatrixXd lower;                 // rows/cols [0, n) are valid
  std::vector<Eigen::VectorXd> whitened;  // one per draw that uses this model
};

double normal_log_pdf(double x, double mean, double var) {
  return UnivariateGaussian{mean, var}.log_pdf(x);
}

SamplingPlan greedy_general(const ModeBank& bank, const ThompsonDraws& draws, std::size_t q) {
  const std::size_t p = bank.dim();
  const auto cap = static_cast<Eigen::Index>(q);

  // factors[0] is the base model; factors[d + 1] is draw d's mode model.
  std::vector<IncrementalFactor> factors(draws.size() + 1);
  factors[0].model = &bank.base();
  factors[0].lower = Eigen::MatrixXd::Zero(cap, cap);
  factors[0].whitened.assign(draws.size(), Eigen::VectorXd::Zero(cap));
  for (std::size_t d = 0; d < draws.size(); ++d) {
    auto& f = factors[d + 1];
    f.model = &bank.mode(draws[d].mode);
    f.lower = Eigen::MatrixXd::Zero(cap, cap);
    f.whitened.assign(1, Eigen::VectorXd::Zero(cap));
  }

  std::vector<std::size_t> chosen;
  std::vector<bool> taken(p, false);
  std::vector<Eigen::VectorXd> v(factors.size());
  std::vector<double> cond_var(factors.size());

  for (std::size_t round = 0; round < q; ++round) {
    const auto n = static_cast<Eigen::Index>(chosen.size());
    double best_gain = -std::numeric_limits<double>::infinity();
    std::size_t best = p;
    for (std::size_t j = 0; j < p; ++j) {
      if (taken[j]) continue;
      for (std::size_t f = 0; f < factors.size(); ++f) {
        const auto& fac = factors[f];
        Eigen::VectorXd cross(n);
        for (Eigen::Index a = 0; a < n; ++a) cross[a] = fac.model->covariance_at(chosen[static_cast<std::size_t>(a)], j);
        fac.lower.topLeftCorner(n, n).triangularView<Eigen::Lower>().solveInPlace(cross);
        v[f] = std::move(cross);
        cond_var[f] = fac.model->covariance_at(j, j) - v[f].squaredNorm();
      }
      const auto jj = static_cast<Eigen::Index>(j);
      double gain = 0.0;
      for (std::size_t d = 0; d < draws.size(); ++d) {
        const double x = draws[d].x[jj];
        const auto& mode_f = factors[d + 1];
        const auto& base_f = factors[0];
        const double mean_mode = mode_f.model->mean()[jj] + v[d + 1].dot(mode_f.whitened[0].head(n));
        const double mean_base = base_f.model->mean()[jj] + v[0].dot(base_f.whitened[d].head(n));
        gain += normal_log_pdf(x, mean_mode, cond_var[d + 1]) - normal_log_pdf(x, mean_base, cond_var[0]);
      }
      if (gain > best_gain) {
        best_gain = gain;
        best = j;
      }
    }

    // Recompute the winner's cross terms and extend every factor by one row.
    const std::size_t j = best;
    const auto jj = static_cast<Eigen::Index>(j);
    for (std::size_t f = 0; f < factors.size(); ++f) {
      auto& fac = factors[f];
      Eigen::VectorXd cross(n);
      for (Eigen::Index a = 0; a < n; ++a) cross[a] = fac.model->covariance_at(chosen[static_cast<std::size_t>(a)], j);
      fac.lower.topLeftCorner(n, n).triangularView<Eigen::Lower>().solveInPlace(cross);
      const double diag = std::sqrt(fac.model->covariance_at(j, j) - cross.squaredNorm());
      fac.lower.row(n).head(n) = cross.transpose();
      fac.lower(n, n) = diag;
      if (f == 0) {
        for (std::size_t d = 0; d < draws.size(); ++d) {
          const double mean = fac.model->mean()[jj] + cross.dot(fac.whitened[d].head(n));
          fac.whitened[d][n] = (draws[d].x[jj] - mean) / diag;
        }
      } else {
        const auto& draw = draws[f - 1];
        const double mean = fac.model->mean()[jj] + cross.dot(fac.whitened[0].head(n));
        fac.whitened[0][n] = (draw.x[jj] - mean) / diag;
      }
    }
    chosen.push_back(j);
    taken[j] = true;
  }
  std::sort(chosen.begin(), chosen.end());
  return {std::move(chosen), SolverKind::greedy};
}

}  // namespace

SamplingPlan plan_greedy(const MonitorState& state, const ModeBank& bank, const ThompsonDraws& draws, std::size_t q) {
  (void)state;  // the log(exp(r) + 1) terms are common to every candidate
  if (q > bank.dim()) throw std::invalid_argument("budget exceeds dimension");
  if (!bank.is_diagonal()) return greedy_general(bank, draws, q);

  // Independent coordinates: each round's gain is the coordinate's own score.
  const auto scores = scores_from_draws(bank, draws);
  std::vector<bool> taken(bank.dim(), false);
  std::vector<std::size_t> chosen;
  for (std::size_t round = 0; round < q; ++round) {
    std::size_t best = bank.dim();
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (!taken[j] && (best == bank.dim() || scores[j] > scores[best])) best = j;
    }
    taken[best] = true;
    chosen.push_back(best);
  }
  std::sort(chosen.begin(), chosen.end());
  return {std::move(chosen), SolverKind::greedy};
}

SamplingPlan plan_greedy(const MonitorState& state, const ModeBank& bank, const PlannerConfig& cfg) {
  cfg.validate(bank.dim(), bank.size());
  Rng rng(cfg.seed);
  return plan_greedy(state, bank, draw_thompson(state, bank, cfg.top_modes, rng), cfg.q);
}

SamplingPlan plan_exhaustive(const MonitorState& state, const ModeBank& bank, const ThompsonDraws& draws,
                             std::size_t q) {
  const std::size_t p = bank.dim();
  if (q > p) throw std::invalid_argument("budget exceeds dimension");
  if (binomial(p, q) > kMaxExhaustiveCombinations) {
    throw std::invalid_argument(
        fmt::format("exhaustive search over C({}, {}) = {} sets exceeds the limit of {}", p, q, binomial(p, q),
                    kMaxExhaustiveCombinations));
  }
  std::vector<std::size_t> current(q);
  std::iota(current.begin(), current.end(), 0);
  std::vector<std::size_t> best = current;
  double best_value = -std::numeric_limits<double>::infinity();
  while (true) {
    const double value = sampled_reward(state, bank, draws, current);
    if (value > best_value) {
      best_value = value;
      best = current;
    }
    // Next combination in lexicographic order.
    std::size_t i = q;
    while (i > 0 && current[i - 1] == p - q + (i - 1)) --i;
    if (i == 0) break;
    ++current[i - 1];
    for (std::size_t m = i; m < q; ++m) current[m] = current[m - 1] + 1;
  }
  return {std::move(best), SolverKind::exhaustive};
}

SamplingPlan plan_exhaustive(const MonitorState& state, const ModeBank& bank, const PlannerConfig& cfg) {
  cfg.validate(bank.dim(), bank.size());
  Rng rng(cfg.seed);
  return plan_exhaustive(state, bank, draw_thompson(state, bank, cfg.top_modes, rng), cfg.q);
}

SamplingPlan plan_random(std::size_t p, std::size_t q, Rng& rng) {
  if (q > p) throw std::invalid_argument(fmt::format("budget {} exceeds {} sensors", q, p));
  // Floyd's algorithm: q draws instead of a pass over all p sensors.
  std::vector<std::size_t> picked;
  picked.reserve(q);
  std::unordered_set<std::size_t> seen;
  for (std::size_t j = p - q; j < p; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    const std::size_t c = pick(rng);
    if (seen.insert(c).second) {
      picked.push_back(c);
    } else {
      seen.insert(j);
      picked.push_back(j);
    }
  }
  std::sort(picked.begin(), picked.end());
  return {std::move(picked), SolverKind::random};
}

SamplingPlan plan_random(std::size_t p, std::size_t q, std::uint64_t seed) {
  Rng rng(seed);
  return plan_random(p, q, rng);
}

SamplingPlan plan_next(const MonitorState& state, const ModeBank& bank, const PlannerConfig& cfg, Rng& rng) {
  switch (cfg.solver) {
    case SolverKind::sort: {
      auto draws = draw_thompson(state, bank, cfg.top_modes, rng);
      return plan_sort(scores_from_draws(bank, draws), cfg.q);
    }
    case SolverKind::greedy:
      return plan_greedy(state, bank, draw_thompson(state, bank, cfg.top_modes, rng), cfg.q);
    case SolverKind::exhaustive:
      return plan_exhaustive(state, bank, draw_thompson(state, bank, cfg.top_modes, rng), cfg.q);
    case SolverKind::random:
      return plan_random(bank.dim(), cfg.q, rng);
    case SolverKind::fixed:
      break;
  }
  throw std::invalid_argument("the fixed solver has no planning step");
}

}  // namespace mtssrp
