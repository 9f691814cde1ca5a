#include "mtssrp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace mtssrp {

PolicyKind parse_policy_kind(std::string_view name) {
  if (name == "mtssrp") return PolicyKind::mtssrp;
  if (name == "tssrp") return PolicyKind::tssrp;
  if (name == "tras") return PolicyKind::tras;
  if (name == "random") return PolicyKind::random;
  if (name == "mrandom") return PolicyKind::mrandom;
  if (name == "oracle") return PolicyKind::oracle;
  throw std::invalid_argument(fmt::format("unknown policy kind '{}'", name));
}

std::string_view to_string(PolicyKind kind) noexcept {
  switch (kind) {
    case PolicyKind::mtssrp: return "mtssrp";
    case PolicyKind::tssrp: return "tssrp";
    case PolicyKind::tras: return "tras";
    case PolicyKind::random: return "random";
    case PolicyKind::mrandom: return "mrandom";
    case PolicyKind::oracle: return "oracle";
  }
  return "mtssrp";
}

bool PolicySpec::uses_mode_statistics() const noexcept {
  return kind == PolicyKind::mtssrp || kind == PolicyKind::mrandom || kind == PolicyKind::oracle;
}

std::size_t PolicySpec::statistic_count(const ModeBank& bank) const {
  return uses_mode_statistics() ? bank.size() : bank.dim();
}

std::size_t PolicySpec::summed_count() const noexcept {
  if (uses_mode_statistics()) return rule == DetectionRule::max ? 1 : top_modes;
  return top_r;
}

PolicySpec PolicySpec::resolve(const ModeBank& bank) const {
  PolicySpec out = *this;
  if (out.id.empty()) out.id = std::string(to_string(kind));
  const std::size_t p = bank.dim();
  if (kind == PolicyKind::oracle) out.q = p;
  if (out.q < 1 || out.q > p) throw std::invalid_argument(fmt::format("policy '{}': q = {} outside [1, {}]", out.id, out.q, p));

  if (out.uses_mode_statistics()) {
    if (out.top_modes < 1 || out.top_modes > bank.size()) {
      throw std::invalid_argument(fmt::format("policy '{}': Ks = {} outside [1, {}]", out.id, out.top_modes, bank.size()));
    }
    if (kind == PolicyKind::mtssrp) {
      if (out.solver == SolverKind::random || out.solver == SolverKind::fixed) {
        throw std::invalid_argument(fmt::format("policy '{}': mtssrp needs sort, greedy or exhaustive", out.id));
      }
      if (out.solver == SolverKind::sort && !bank.is_diagonal()) {
        throw std::invalid_argument(fmt::format("policy '{}': the sort solver needs a diagonal bank", out.id));
      }
    }
    return out;
  }

  if (out.shift == 0.0) {
    double largest = 0.0;
    for (std::size_t k = 0; k < bank.size(); ++k) {
      const auto diff = (bank.mode(k).mean() - bank.base().mean()).array().abs()
                        / bank.base().variances().array().sqrt();
      largest = std::max(largest, diff.maxCoeff());
    }
    out.shift = largest;
  }
  if (!(out.shift > 0.0)) throw std::invalid_argument(fmt::format("policy '{}': shift must be positive", out.id));
  if (out.top_r == 0) out.top_r = out.q;
  if (out.top_r > p) throw std::invalid_argument(fmt::format("policy '{}': top_r exceeds p", out.id));
  if (kind == PolicyKind::tras) {
    if (out.allowance == 0.0) out.allowance = out.shift / 2.0;
    if (out.compensation == 0.0) out.compensation = out.allowance * static_cast<double>(out.q) / static_cast<double>(p);
    if (out.allowance < 0.0 || out.compensation < 0.0) {
      throw std::invalid_argument(fmt::format("policy '{}': allowance and compensation must be non-negative", out.id));
    }
    if (out.exploration < 0.0 || out.exploration > 1.0) {
      throw std::invalid_argument(fmt::format("policy '{}': exploration must lie in [0, 1]", out.id));
    }
  }
  return out;
}

SensorModels SensorModels::iid(std::size_t p, UnivariateGaussian base, UnivariateGaussian alt) {
  return {std::vector<UnivariateGaussian>(p, base), std::vector<UnivariateGaussian>(p, alt)};
}

SensorModels SensorModels::shifted(const ModeBank& bank, double shift) {
  SensorModels out;
  for (std::size_t j = 0; j < bank.dim(); ++j) {
    const auto b = bank.base().coordinate(j);
    out.base.push_back(b);
    out.alt.push_back({b.mean + shift * std::sqrt(b.variance), b.variance});
  }
  return out;
}

void tssrp_update(std::span<LogSR> stats, const Observation& obs, const SensorModels& models) {
  if (stats.size() != models.size()) throw std::invalid_argument("one statistic per sensor model is required");
  obs.validate(stats.size());
  std::size_t next = 0;
  for (std::size_t j = 0; j < stats.size(); ++j) {
    double llr = 0.0;
    if (next < obs.indices.size() && obs.indices[next] == j) {
      llr = coordinate_llr(models.alt[j], models.base[j], obs.values[next]);
      ++next;
    }
    stats[j] = stats[j].advance(llr);
  }
}

std::vector<double> tssrp_sampled(std::span<const LogSR> stats, const SensorModels& models,
                                  std::span<const double> draws) {
  std::vector<double> out(stats.size());
  for (std::size_t j = 0; j < stats.size(); ++j) {
    out[j] = stats[j].log_one_plus() + coordinate_llr(models.alt[j], models.base[j], draws[j]);
  }
  return out;
}

SamplingPlan tssrp_plan(std::span<const LogSR> stats, const SensorModels& models, std::size_t q, Rng& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> draws(stats.size());
  for (std::size_t j = 0; j < stats.size(); ++j) {
    draws[j] = models.alt[j].mean + std::sqrt(models.alt[j].variance) * normal(rng);
  }
  auto plan = plan_sort(tssrp_sampled(stats, models, draws), q);
  plan.solver = SolverKind::sort;
  return plan;
}

std::vector<double> shift_directions(const ModeBank& bank) {
  std::vector<double> out(bank.dim(), 1.0);
  const Eigen::VectorXd& mu0 = bank.base().mean();
  for (std::size_t j = 0; j < bank.dim(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (bank.mode(bank.dominant_mode(j)).mean()[jj] < mu0[jj]) out[j] = -1.0;
  }
  return out;
}

void tras_update(TrasState& state, const Observation& obs, std::span<const UnivariateGaussian> base,
                 const TrasParams& params) {
  const std::size_t p = state.cusum.size();
  if (base.size() != p || state.direction.size() != p) throw std::invalid_argument("TRAS state and base models disagree");
  obs.validate(p);
  std::size_t next = 0;
  for (std::size_t j = 0; j < p; ++j) {
    if (next < obs.indices.size() && obs.indices[next] == j) {
      const double z = (obs.values[next] - base[j].mean) / std::sqrt(base[j].variance);
      state.cusum[j] = std::max(0.0, state.cusum[j] + state.direction[j] * z - params.allowance);
      ++next;
    } else {
      state.cusum[j] += params.compensation;
    }
  }
}

SamplingPlan tras_plan(const TrasState& state, std::size_t q, const TrasParams& params, Rng& rng) {
  const std::vector<double>& stats = state.cusum;
  const std::size_t p = stats.size();
  if (q < 1 || q > p) throw std::invalid_argument(fmt::format("q = {} outside [1, {}]", q, p));
  std::vector<std::uint64_t> tiebreak(p);
  for (auto& k : tiebreak) k = rng();
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(q), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (stats[a] != stats[b]) return stats[a] > stats[b];
                      return tiebreak[a] < tiebreak[b] || (tiebreak[a] == tiebreak[b] && a < b);
                    });
  order.resize(q);
  if (params.exploration > 0.0 && q < p) {
    std::bernoulli_distribution explore(params.exploration);
    std::uniform_int_distribution<std::size_t> pick(0, p - 1);
    std::vector<bool> used(p, false);
    for (auto j : order) used[j] = true;
    for (auto& j : order) {
      if (!explore(rng)) continue;
      std::size_t c = pick(rng);
      while (used[c]) c = pick(rng);
      used[j] = false;
      used[c] = true;
      j = c;
    }
  }
  std::sort(order.begin(), order.end());
  return SamplingPlan{std::move(order), SolverKind::sort};
}

double top_sum(std::span<const double> values, std::size_t count) {
  if (count == 0 || count > values.size()) {
    throw std::invalid_argument(fmt::format("cannot sum the top {} of {} values", count, values.size()));
  }
  if (count == 1) return *std::max_element(values.begin(), values.end());
  std::vector<double> copy(values.begin(), values.end());
  std::partial_sort(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(count), copy.end(), std::greater<>());
  return std::accumulate(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(count), 0.0);
}

void oracle_step(MonitorState& state, const ModeBank& bank, std::span<const double> full_x) {
  if (full_x.size() != bank.dim()) throw std::invalid_argument("oracle step needs the full vector");
  Observation obs;
  obs.time = state.t + 1;
  obs.indices = full_plan(bank.dim()).indices;
  obs.values.assign(full_x.begin(), full_x.end());
  std::vector<double> scratch(bank.size());
  update_in_place(state, bank, obs, scratch);
  state.last_plan = full_plan(bank.dim());
}

SamplingPlan mrandom_plan(const ModeBank& bank, std::size_t q, Rng& rng) { return plan_random(bank.dim(), q, rng); }

namespace {

class MonitorDetector final : public Detector {
 public:
  MonitorDetector(const PolicySpec& spec, std::shared_ptr<const ModeBank> bank, std::uint64_t seed)
      : spec_(spec), bank_(std::move(bank)), rng_(seed), state_(MonitorState::initial(bank_->size())),
        scratch_(bank_->size()) {
    planner_.q = spec_.q;
    planner_.top_modes = spec_.top_modes;
    planner_.solver = spec_.solver;
    planner_.seed = seed;
  }

  SamplingPlan plan() override {
    switch (spec_.kind) {
      case PolicyKind::oracle: return full_plan(bank_->dim());
      case PolicyKind::mrandom: return mrandom_plan(*bank_, spec_.q, rng_);
      default: return plan_next(state_, *bank_, planner_, rng_);
    }
  }

  void observe(const Observation& obs) override {
    update_in_place(state_, *bank_, obs, scratch_);
    state_.last_plan = SamplingPlan{obs.indices, spec_.solver};
  }

  double statistic() const override { return top_sum(state_.logstats, spec_.summed_count()); }
  std::size_t isolate() const override { return argmax_mode(state_.logstats); }
  std::vector<double> values() const override {
    std::vector<double> out;
    for (const auto& r : state_.logstats) out.push_back(r.rank_key());
    return out;
  }
  std::size_t time() const override { return state_.t; }

 private:
  PolicySpec spec_;
  std::shared_ptr<const ModeBank> bank_;
  PlannerConfig planner_;
  Rng rng_;
  MonitorState state_;
  std::vector<double> scratch_;
};

class SensorSRDetector final : public Detector {
 public:
  SensorSRDetector(const PolicySpec& spec, std::shared_ptr<const ModeBank> bank, std::uint64_t seed)
      : spec_(spec), bank_(std::move(bank)), models_(SensorModels::shifted(*bank_, spec_.shift)), rng_(seed),
        stats_(bank_->dim(), LogSR::zero()) {}

  SamplingPlan plan() override {
    if (spec_.kind == PolicyKind::random) return plan_random(bank_->dim(), spec_.q, rng_);
    return tssrp_plan(stats_, models_, spec_.q, rng_);
  }

  void observe(const Observation& obs) override {
    if (obs.time != t_ + 1) throw std::invalid_argument("observation out of sequence");
    tssrp_update(stats_, obs, models_);
    t_ = obs.time;
  }

  double statistic() const override { return top_sum(std::span<const LogSR>(stats_), spec_.top_r); }
  std::size_t isolate() const override { return bank_->dominant_mode(argmax_mode(stats_)); }
  std::vector<double> values() const override {
    std::vector<double> out;
    for (const auto& r : stats_) out.push_back(r.rank_key());
    return out;
  }
  std::size_t time() const override { return t_; }

 private:
  PolicySpec spec_;
  std::shared_ptr<const ModeBank> bank_;
  SensorModels models_;
  Rng rng_;
  std::vector<LogSR> stats_;
  std::size_t t_ = 0;
};

class TrasDetector final : public Detector {
 public:
  TrasDetector(const PolicySpec& spec, std::shared_ptr<const ModeBank> bank, std::uint64_t seed)
      : spec_(spec), bank_(std::move(bank)), rng_(seed), state_(bank_->dim(), shift_directions(*bank_)) {
    params_ = {spec_.allowance, spec_.compensation, spec_.exploration};
    for (std::size_t j = 0; j < bank_->dim(); ++j) base_.push_back(bank_->base().coordinate(j));
  }

  SamplingPlan plan() override { return tras_plan(state_, spec_.q, params_, rng_); }

  void observe(const Observation& obs) override {
    if (obs.time != t_ + 1) throw std::invalid_argument("observation out of sequence");
    tras_update(state_, obs, base_, params_);
    t_ = obs.time;
  }

  double statistic() const override { return top_sum(std::span<const double>(state_.cusum), spec_.top_r); }
  std::size_t isolate() const override {
    const auto& stats = state_.cusum;
    const auto best = static_cast<std::size_t>(std::max_element(stats.begin(), stats.end()) - stats.begin());
    return bank_->dominant_mode(best);
  }
  std::vector<double> values() const override { return state_.statistics(); }
  std::size_t time() const override { return t_; }

 private:
  PolicySpec spec_;
  std::shared_ptr<const ModeBank> bank_;
  Rng rng_;
  TrasParams params_;
  TrasState state_;
  std::vector<UnivariateGaussian> base_;
  std::size_t t_ = 0;
};

}  // namespace

std::unique_ptr<Detector> make_detector(const PolicySpec& spec, std::shared_ptr<const ModeBank> bank,
                                        std::uint64_t seed) {
  const PolicySpec resolved = spec.resolve(*bank);
  switch (resolved.kind) {
    case PolicyKind::mtssrp:
    case PolicyKind::mrandom:
    case PolicyKind::oracle:
      return std::make_unique<MonitorDetector>(resolved, std::move(bank), seed);
    case PolicyKind::tssrp:
    case PolicyKind::random:
      return std::make_unique<SensorSRDetector>(resolved, std::move(bank), seed);
    case PolicyKind::tras:
      return std::make_unique<TrasDetector>(resolved, std::move(bank), seed);
  }
  throw std::invalid_argument("unknown policy kind");
}

}  // namespace mtssrp
