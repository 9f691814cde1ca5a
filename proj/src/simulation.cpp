#include "mtssrp/simulation.hpp"

#include <algorithm>
#include <numeric>

namespace mtssrp {

namespace {

std::vector<std::size_t> ranking(const std::vector<double>& values, std::size_t depth) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  depth = std::min(depth, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(depth), order.end(),
                    [&](std::size_t a, std::size_t b) { return values[a] > values[b] || (values[a] == values[b] && a < b); });
  order.resize(depth);
  return order;
}

}  // namespace

RunOutcome run_policy(Detector& detector, StreamGenerator& generator, const RunOptions& options) {
  RunOutcome out;
  generator.enable_access_log(options.log_access);
  for (std::size_t t = detector.time() + 1; t <= options.horizon; ++t) {
    const SamplingPlan plan = detector.plan();
    const Observation obs = generator.observe(t, plan);
    detector.observe(obs);
    const double stat = detector.statistic();
    if (options.trace) out.trace.push_back({t, stat, plan.indices, ranking(detector.values(), options.rank_depth)});
    if (stat >= options.threshold) {
      out.stopping_time = t;
      out.fired = true;
      out.isolated_mode = detector.isolate();
      break;
    }
  }
  if (!out.fired) {
    out.stopping_time = options.horizon;
    out.censored = true;
  }
  if (options.log_access) out.access = generator.access_log();
  return out;
}

RecordPath::RecordPath(std::unique_ptr<Detector> detector, StreamGenerator generator)
    : detector_(std::move(detector)), generator_(std::move(generator)) {}

std::optional<std::size_t> RecordPath::alarm_time(double a, std::size_t horizon) {
  auto hit = std::lower_bound(maxima_.begin(), maxima_.end(), a);
  if (hit != maxima_.end()) return times_[static_cast<std::size_t>(hit - maxima_.begin())];
  while (t_ < horizon) {
    ++t_;
    const SamplingPlan plan = detector_->plan();
    detector_->observe(generator_.observe(t_, plan));
    const double stat = detector_->statistic();
    if (stat > running_max_) {
      running_max_ = stat;
      times_.push_back(t_);
      maxima_.push_back(stat);
      if (stat >= a) return t_;
    }
  }
  return std::nullopt;
}

}  // namespace mtssrp
