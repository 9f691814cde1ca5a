#include "mtssrp/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

namespace mtssrp {

double log1p_exp(double r) noexcept {
  if (r > 0.0) return r + std::log1p(std::exp(-r));
  return std::log1p(std::exp(r));
}

double LogSR::rank_key() const noexcept {
  return zero_ ? -std::numeric_limits<double>::infinity() : value_;
}

double LogSR::log_one_plus() const noexcept { return zero_ ? 0.0 : log1p_exp(value_); }

DetectionRule parse_detection_rule(std::string_view name) {
  if (name == "max") return DetectionRule::max;
  if (name == "top_sum") return DetectionRule::top_sum;
  throw std::invalid_argument(fmt::format("unknown detection rule '{}'", name));
}

std::string_view to_string(DetectionRule rule) noexcept {
  return rule == DetectionRule::max ? "max" : "top_sum";
}

void DetectionConfig::validate(std::size_t num_modes) const {
  if (rule == DetectionRule::top_sum && (top_modes < 1 || top_modes > num_modes)) {
    throw std::invalid_argument(fmt::format("Ks = {} must lie in [1, {}]", top_modes, num_modes));
  }
  if (std::isnan(threshold) || threshold == std::numeric_limits<double>::infinity()) {
    throw std::invalid_argument("threshold must be finite (or -inf for an immediate alarm)");
  }
}

MonitorState MonitorState::initial(std::size_t num_modes) {
  MonitorState s;
  s.logstats.assign(num_modes, LogSR::zero());
  return s;
}

std::vector<double> MonitorState::linear() const {
  std::vector<double> out(logstats.size());
  std::transform(logstats.begin(), logstats.end(), out.begin(),
                 [](const LogSR& r) { return r.is_zero() ? 0.0 : std::exp(r.log()); });
  return out;
}

void update_in_place(MonitorState& state, const ModeBank& bank, const Observation& obs, std::span<double> scratch) {
  if (state.logstats.size() != bank.size()) {
    throw std::invalid_argument(
        fmt::format("monitor tracks {} modes but the bank has {}", state.logstats.size(), bank.size()));
  }
  if (obs.time != state.t + 1) {
    throw std::invalid_argument(fmt::format("observation time {} does not follow monitor time {}", obs.time, state.t));
  }
  obs.validate(bank.dim());
  log_likelihood_ratios(bank, obs, scratch);
  for (std::size_t k = 0; k < state.logstats.size(); ++k) state.logstats[k] = state.logstats[k].advance(scratch[k]);
  state.t = obs.time;
}

MonitorState update(const MonitorState& state, const ModeBank& bank, const Observation& obs) {
  MonitorState next = state;
  std::vector<double> scratch(bank.size());
  update_in_place(next, bank, obs, scratch);
  return next;
}

double top_sum(std::span<const LogSR> stats, std::size_t count) {
  if (count == 0 || count > stats.size()) {
    throw std::invalid_argument(fmt::format("cannot sum the top {} of {} statistics", count, stats.size()));
  }
  std::vector<double> values(stats.size());
  std::transform(stats.begin(), stats.end(), values.begin(), [](const LogSR& r) { return r.rank_key(); });
  if (count == 1) return *std::max_element(values.begin(), values.end());
  std::partial_sort(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(count), values.end(),
                    std::greater<>());
  return std::accumulate(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(count), 0.0);
}

double rule_statistic(const MonitorState& state, const DetectionConfig& cfg) {
  if (state.t == 0) throw std::invalid_argument("the rule statistic is defined from t = 1 on");
  return top_sum(state.logstats, cfg.rule == DetectionRule::max ? 1 : cfg.top_modes);
}

std::size_t argmax_mode(std::span<const LogSR> stats) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < stats.size(); ++k) {
    if (stats[k].rank_key() > stats[best].rank_key()) best = k;
  }
  return best;
}

AlarmReport check_alarm(const MonitorState& state, const DetectionConfig& cfg) {
  AlarmReport report;
  report.statistic = rule_statistic(state, cfg);
  report.fired = report.statistic >= cfg.threshold;
  if (report.fired) {
    report.time = state.t;
    report.isolated_mode = argmax_mode(state.logstats);
  }
  return report;
}

std::vector<std::size_t> rank_modes(std::span<const LogSR> stats) {
  std::vector<std::size_t> order(stats.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return stats[a].rank_key() > stats[b].rank_key(); });
  return order;
}

}  // namespace mtssrp
