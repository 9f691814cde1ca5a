#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtssrp/model.hpp"
#include "mtssrp/monitor.hpp"
#include "mtssrp/plan.hpp"
#include "mtssrp/planner.hpp"
#include "mtssrp/rng.hpp"

namespace mtssrp {

enum class PolicyKind { mtssrp, tssrp, tras, random, mrandom, oracle };

PolicyKind parse_policy_kind(std::string_view name);
std::string_view to_string(PolicyKind kind) noexcept;

/// A detection policy and its parameters.
///
/// Zero-valued optional parameters are filled in by `resolve` from the bank:
/// `shift` defaults to the largest mean shift in the bank, `top_r` to q,
/// `allowance` to shift / 2 and `compensation` to allowance * q / p, i.e. an
/// unobserved stream gains one allowance per full sweep over the sensors.
struct PolicySpec {
  std::string id;
  PolicyKind kind = PolicyKind::mtssrp;
  std::size_t q = 10;
  std::size_t top_modes = 1;  ///< Ks for monitor-based policies
  DetectionRule rule = DetectionRule::max;
  SolverKind solver = SolverKind::sort;
  std::size_t top_r = 0;      ///< per-sensor policies: statistics summed by the alarm rule
  double shift = 0.0;         ///< per-sensor policies: alternative mean shift (in base standard deviations)
  double allowance = 0.0;     ///< TRAS CUSUM reference value
  double compensation = 0.0;  ///< TRAS increment for unobserved streams
  double exploration = 0.0;   ///< TRAS probability of a uniformly random slot

  /// Copy with defaults filled in; throws std::invalid_argument if the spec is unusable with `bank`.
  PolicySpec resolve(const ModeBank& bank) const;
  bool uses_mode_statistics() const noexcept;
  /// Number of statistics behind the alarm rule (K, or p for per-sensor policies).
  std::size_t statistic_count(const ModeBank& bank) const;
  /// Number of statistics summed by the alarm rule.
  std::size_t summed_count() const noexcept;
};

/// Per-sensor pre/post-change models for the per-sensor baselines.
struct SensorModels {
  std::vector<UnivariateGaussian> base;
  std::vector<UnivariateGaussian> alt;

  static SensorModels iid(std::size_t p, UnivariateGaussian base, UnivariateGaussian alt);
  /// base from the bank; alt = base shifted by `shift` standard deviations.
  static SensorModels shifted(const ModeBank& bank, double shift);
  std::size_t size() const noexcept { return base.size(); }
};

/// Per-sensor SR step: observed j gets (R + 1) * g/f(x), unobserved j gets R + 1.
void tssrp_update(std::span<LogSR> stats, const Observation& obs, const SensorModels& models);
/// Thompson step of the per-sensor procedure: one draw x~_j from the alternative per sensor,
/// then the q largest sampled statistics log(R_j + 1) + log g/f(x~_j).
SamplingPlan tssrp_plan(std::span<const LogSR> stats, const SensorModels& models, std::size_t q, Rng& rng);
/// Sampled statistics for explicit draws (one per sensor).
std::vector<double> tssrp_sampled(std::span<const LogSR> stats, const SensorModels& models,
                                  std::span<const double> draws);

struct TrasParams {
  double allowance = 0.4;
  double compensation = 0.004;
  double exploration = 0.0;
};

/// One-sided local CUSUM per stream, oriented along each stream's expected shift.
struct TrasState {
  std::vector<double> cusum;
  std::vector<double> direction;  ///< +1 or -1 per stream

  explicit TrasState(std::size_t p = 0) : cusum(p, 0.0), direction(p, 1.0) {}
  TrasState(std::size_t p, std::vector<double> dir) : cusum(p, 0.0), direction(std::move(dir)) {}
  const std::vector<double>& statistics() const noexcept { return cusum; }
};

/// Shift direction of each stream: the sign of the dominant mode's mean shift (+1 where none).
std::vector<double> shift_directions(const ModeBank& bank);

/// Observed j: W = max(0, W + d_j z - allowance), z standardised by the base.
/// Unobserved j: W grows by the compensation.
void tras_update(TrasState& state, const Observation& obs, std::span<const UnivariateGaussian> base,
                 const TrasParams& params);
/// The q largest statistics with ties in random order; each slot is then swapped for a random unused
/// stream with probability `exploration`.
SamplingPlan tras_plan(const TrasState& state, std::size_t q, const TrasParams& params, Rng& rng);

/// Sum of the `count` largest entries.
double top_sum(std::span<const double> values, std::size_t count);

/// A running policy: plan, observe, and expose its alarm statistic.
class Detector {
 public:
  virtual ~Detector() = default;

  virtual SamplingPlan plan() = 0;
  virtual void observe(const Observation& obs) = 0;
  /// Statistic compared against the threshold; valid after the first observation.
  virtual double statistic() const = 0;
  /// Isolated failure mode if an alarm were raised now.
  virtual std::size_t isolate() const = 0;
  /// Underlying statistics (K mode statistics or p sensor statistics).
  virtual std::vector<double> values() const = 0;
  virtual std::size_t time() const = 0;
};

std::unique_ptr<Detector> make_detector(const PolicySpec& spec, std::shared_ptr<const ModeBank> bank,
                                        std::uint64_t seed);

/// The oracle step: full observation of x_t fed to the monitor.
void oracle_step(MonitorState& state, const ModeBank& bank, std::span<const double> full_x);

/// One MRandom step: a uniformly random plan, then the monitor update on the requested values.
SamplingPlan mrandom_plan(const ModeBank& bank, std::size_t q, Rng& rng);

}  // namespace mtssrp
