#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mtssrp/model.hpp"
#include "mtssrp/plan.hpp"

namespace mtssrp {

/// log R for a Shiryaev-Roberts statistic, with an exact representation of
/// R = 0 (the initial value) instead of a floating-point -inf.
class LogSR {
 public:
  constexpr LogSR() noexcept = default;

  static constexpr LogSR zero() noexcept { return LogSR(); }
  static constexpr LogSR from_log(double r) noexcept { return LogSR(r); }

  constexpr bool is_zero() const noexcept { return zero_; }
  /// log R. Must not be called on the zero sentinel.
  constexpr double log() const noexcept { return value_; }
  /// log R for ordering; the sentinel sorts below every finite value.
  double rank_key() const noexcept;

  /// log(R + 1), computed stably; exactly 0 for the sentinel.
  double log_one_plus() const noexcept;
  /// The SR recursion in log space: log((R + 1) * exp(llr)).
  LogSR advance(double llr) const noexcept { return from_log(log_one_plus() + llr); }

  constexpr bool operator==(const LogSR&) const = default;

 private:
  constexpr explicit LogSR(double r) noexcept : value_(r), zero_(false) {}

  double value_ = 0.0;
  bool zero_ = true;
};

/// log(exp(r) + 1) without overflow.
double log1p_exp(double r) noexcept;

enum class DetectionRule { max, top_sum };

DetectionRule parse_detection_rule(std::string_view name);
std::string_view to_string(DetectionRule rule) noexcept;

struct DetectionConfig {
  DetectionRule rule = DetectionRule::max;
  std::size_t top_modes = 1;  ///< Ks, only used by top_sum
  double threshold = 0.0;     ///< A, on the log scale

  void validate(std::size_t num_modes) const;
};

struct MonitorState {
  std::size_t t = 0;
  std::vector<LogSR> logstats;
  std::optional<SamplingPlan> last_plan;

  static MonitorState initial(std::size_t num_modes);
  /// exp(logstats), with the sentinel mapped to 0.
  std::vector<double> linear() const;
};

struct AlarmReport {
  bool fired = false;
  std::size_t time = 0;
  std::optional<std::size_t> isolated_mode;
  double statistic = 0.0;
};

/// One SR step for every mode. Pure: the input state is left untouched.
MonitorState update(const MonitorState& state, const ModeBank& bank, const Observation& obs);
/// In-place variant used by simulation loops. `scratch` must hold K doubles.
void update_in_place(MonitorState& state, const ModeBank& bank, const Observation& obs, std::span<double> scratch);

/// Sum of the `count` largest values (count <= size). Sentinels must not be present.
double top_sum(std::span<const LogSR> stats, std::size_t count);
double rule_statistic(const MonitorState& state, const DetectionConfig& cfg);
/// Index of the largest statistic, lowest index on ties.
std::size_t argmax_mode(std::span<const LogSR> stats);
AlarmReport check_alarm(const MonitorState& state, const DetectionConfig& cfg);

/// Mode indices ordered by decreasing statistic, ties by index.
std::vector<std::size_t> rank_modes(std::span<const LogSR> stats);

}  // namespace mtssrp
