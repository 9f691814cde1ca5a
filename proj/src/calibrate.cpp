#include "mtssrp/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "mtssrp/scenarios.hpp"
#include "mtssrp/simulation.hpp"

namespace mtssrp {

void RunningStats::add(double x) noexcept {
  ++n;
  const double d = x - mean;
  mean += d / static_cast<double>(n);
  m2 += d * (x - mean);
}

void RunningStats::merge(const RunningStats& other) noexcept {
  if (other.n == 0) return;
  if (n == 0) {
    *this = other;
    return;
  }
  const double total = static_cast<double>(n + other.n);
  const double d = other.mean - mean;
  mean += d * static_cast<double>(other.n) / total;
  m2 += other.m2 + d * d * static_cast<double>(n) * static_cast<double>(other.n) / total;
  n += other.n;
}

double RunningStats::variance() const noexcept { return n < 2 ? 0.0 : m2 / static_cast<double>(n - 1); }
double RunningStats::sd() const noexcept { return std::sqrt(variance()); }
double RunningStats::se() const noexcept { return n == 0 ? 0.0 : sd() / std::sqrt(static_cast<double>(n)); }

std::size_t CalibrationSpec::horizon() const noexcept {
  if (max_horizon != 0) return max_horizon;
  return static_cast<std::size_t>(std::ceil(20.0 * target_arl0));
}

void CalibrationSpec::validate() const {
  if (!(target_arl0 > 1.0) || !std::isfinite(target_arl0)) throw std::invalid_argument("target_arl0 must exceed 1");
  if (replications < 1) throw std::invalid_argument("calibration needs at least one replication");
  if (!(tolerance > 0.0 && tolerance < 0.5)) throw std::invalid_argument("tolerance must lie in (0, 0.5)");
  if (static_cast<double>(horizon()) < 10.0 * target_arl0)
    throw std::invalid_argument("max_horizon must be at least 10 * target_arl0");
  if (bracket && !(bracket->first < bracket->second)) throw std::invalid_argument("bracket must be ordered");
}

std::pair<double, double> arl_bracket(std::size_t num_modes, double target_arl0, double c) {
  if (num_modes < 1 || !(target_arl0 > 1.0)) throw std::invalid_argument("arl_bracket needs K >= 1 and target > 1");
  return {std::log(std::max(1.0, target_arl0 / c)), std::log(static_cast<double>(num_modes) * target_arl0)};
}

double arl_lower_bound(double threshold, std::size_t num_modes, std::size_t summed) {
  return std::exp(threshold / static_cast<double>(std::max<std::size_t>(summed, 1))) / static_cast<double>(num_modes);
}

bool arl_bound_applies(const PolicySpec& spec) noexcept { return spec.kind != PolicyKind::tras; }

namespace {

StreamGenerator null_generator(std::shared_ptr<const ModeBank> bank, std::uint64_t rep_seed) {
  return StreamGenerator::in_control(std::move(bank), derive_seed(rep_seed, kDataStream));
}

ArlEstimate summarize(const std::vector<std::optional<std::size_t>>& times, std::size_t horizon) {
  RunningStats acc;
  ArlEstimate out;
  for (const auto& t : times) {
    acc.add(static_cast<double>(t.value_or(horizon)));
    if (!t) ++out.censored;
  }
  out.mean = acc.mean;
  out.sd = acc.sd();
  out.se = acc.se();
  out.n = acc.n;
  return out;
}

}  // namespace

ArlEstimate estimate_arl0(const PolicySpec& policy, std::shared_ptr<const ModeBank> bank, double threshold,
                          std::size_t replications, std::uint64_t seed, std::size_t horizon, std::size_t workers) {
  if (replications < 1) throw std::invalid_argument("estimate_arl0 needs at least one replication");
  const PolicySpec resolved = policy.resolve(*bank);
  std::vector<std::optional<std::size_t>> times(replications);
  parallel_for(replications, workers, [&](std::size_t r) {
    const std::uint64_t rep_seed = derive_seed(seed, r);
    RecordPath path(make_detector(resolved, bank, derive_seed(rep_seed, kPolicyStream)), null_generator(bank, rep_seed));
    times[r] = path.alarm_time(threshold, horizon);
  });
  ArlEstimate est = summarize(times, horizon);
  if (est.censored == est.n) throw CalibrationError(fmt::format("all {} runs censored at horizon {}", est.n, horizon));
  return est;
}

CalibrationResult bisect_threshold(const CalibrationSpec& spec, const PolicySpec& policy,
                                   std::shared_ptr<const ModeBank> bank) {
  spec.validate();
  const PolicySpec resolved = policy.resolve(*bank);
  const std::size_t horizon = spec.horizon();
  const std::size_t n = spec.replications;

  std::vector<RecordPath> paths;
  paths.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::uint64_t rep_seed = derive_seed(spec.seed, r);
    paths.emplace_back(make_detector(resolved, bank, derive_seed(rep_seed, kPolicyStream)), null_generator(bank, rep_seed));
  }

  CalibrationResult result;
  std::vector<std::optional<std::size_t>> times(n);
  const double target = spec.target_arl0;
  const double ceiling = (1.0 + spec.tolerance) * target;
  // Paths are simulated in stages. Once the mean of min(T, stage) already exceeds the tolerance band
  // the candidate is known to be too high and the rest of the horizon is skipped; `exact` turns that off.
  auto evaluate = [&](double a, bool exact) {
    std::size_t stage = exact ? horizon : std::min(horizon, static_cast<std::size_t>(std::ceil(2.0 * target)));
    ArlEstimate est;
    for (;;) {
      parallel_for(n, spec.workers, [&](std::size_t r) { times[r] = paths[r].alarm_time(a, stage); });
      est = summarize(times, stage);
      if (stage == horizon || est.mean > ceiling) break;
      stage = std::min(horizon, 2 * stage);
    }
    result.history.emplace_back(a, est.mean);
    return est;
  };

  auto [lo, hi] = spec.bracket.value_or(arl_bracket(resolved.statistic_count(*bank), spec.target_arl0));

  ArlEstimate est_hi = evaluate(hi, false);
  for (std::size_t e = 0; est_hi.mean < target; ++e) {
    if (e == spec.max_expansions)
      throw CalibrationError(fmt::format("could not bracket ARL0 = {} from above (A = {}, ARL0 = {})", target, hi, est_hi.mean));
    const double width = hi - lo;
    lo = hi;
    hi += 2.0 * width;
    est_hi = evaluate(hi, false);
  }
  ArlEstimate est_lo = evaluate(lo, false);
  for (std::size_t e = 0; est_lo.mean > target; ++e) {
    if (e == spec.max_expansions)
      throw CalibrationError(fmt::format("could not bracket ARL0 = {} from below (A = {}, ARL0 = {})", target, lo, est_lo.mean));
    const double width = hi - lo;
    hi = lo;
    est_hi = est_lo;
    lo -= 2.0 * width;
    est_lo = evaluate(lo, false);
  }

  // best candidate so far; bisection may stall on a plateau of the empirical ARL
  const bool lo_closer = std::abs(est_lo.mean - target) < std::abs(est_hi.mean - target);
  result.threshold = lo_closer ? lo : hi;
  result.achieved = lo_closer ? est_lo : est_hi;

  for (std::size_t it = 0; it < spec.max_iterations; ++it) {
    if (std::abs(result.achieved.mean - target) <= spec.tolerance * target) {
      result.converged = true;
      break;
    }
    const double mid = 0.5 * (lo + hi);
    const ArlEstimate est = evaluate(mid, false);
    ++result.iterations;
    if (std::abs(est.mean - target) < std::abs(result.achieved.mean - target)) {
      result.threshold = mid;
      result.achieved = est;
    }
    if (est.mean < target)
      lo = mid;
    else
      hi = mid;
  }
  if (!result.converged && std::abs(result.achieved.mean - target) <= spec.tolerance * target) result.converged = true;
  if (!result.converged) result.achieved = evaluate(result.threshold, true);
  result.bracket = {lo, hi};
  if (result.achieved.censored == result.achieved.n) throw CalibrationError("all calibration runs censored");
  return result;
}

namespace {

nlohmann::json to_json(const CalibrationResult& r) {
  return {{"threshold", r.threshold},
          {"arl0", r.achieved.mean},
          {"se", r.achieved.se},
          {"sd", r.achieved.sd},
          {"n", r.achieved.n},
          {"censored", r.achieved.censored},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"bracket", {r.bracket.first, r.bracket.second}}};
}

CalibrationResult from_json(const nlohmann::json& j) {
  CalibrationResult r;
  r.threshold = j.at("threshold").get<double>();
  r.achieved.mean = j.at("arl0").get<double>();
  r.achieved.se = j.at("se").get<double>();
  r.achieved.sd = j.value("sd", 0.0);
  r.achieved.n = j.at("n").get<std::size_t>();
  r.achieved.censored = j.at("censored").get<std::size_t>();
  r.iterations = j.at("iterations").get<std::size_t>();
  r.converged = j.at("converged").get<bool>();
  const auto b = j.at("bracket").get<std::vector<double>>();
  if (b.size() == 2) r.bracket = {b[0], b[1]};
  return r;
}

}  // namespace

CalibrationCache::CalibrationCache(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::ifstream in(path_);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(fmt::format("corrupt calibration cache {}: {}", path_.string(), e.what()));
  }
  for (const auto& [k, v] : doc.items()) entries_.emplace_back(k, from_json(v));
}

std::string CalibrationCache::key(const std::string& scenario_hash, const std::string& policy_key, double target_arl0) {
  return fmt::format("{}|{}|{}", scenario_hash, policy_key, target_arl0);
}

std::optional<CalibrationResult> CalibrationCache::find(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  return std::nullopt;
}

void CalibrationCache::store(const std::string& key, const CalibrationResult& result) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = result;
      return;
    }
  }
  entries_.emplace_back(key, result);
}

void CalibrationCache::save() const {
  if (path_.empty()) return;
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [k, v] : entries_) doc[k] = to_json(v);
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_);
  if (!out) throw std::runtime_error(fmt::format("cannot write calibration cache {}", path_.string()));
  out << doc.dump(1) << '\n';
}

}  // namespace mtssrp
