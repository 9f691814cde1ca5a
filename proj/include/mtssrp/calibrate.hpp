#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mtssrp/baselines.hpp"
#include "mtssrp/model.hpp"

namespace mtssrp {

/// Streaming mean and variance; merge() combines two accumulators exactly as if the samples
/// had been added to one.
struct RunningStats {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) noexcept;
  void merge(const RunningStats& other) noexcept;
  double variance() const noexcept;  ///< sample variance (n - 1), 0 for n < 2
  double sd() const noexcept;
  double se() const noexcept;
};

struct ArlEstimate {
  double mean = 0.0;
  double se = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
  std::size_t censored = 0;

  double censoring_rate() const noexcept { return n == 0 ? 0.0 : static_cast<double>(censored) / static_cast<double>(n); }
};

struct CalibrationSpec {
  double target_arl0 = 200.0;
  std::size_t replications = 1000;
  std::size_t max_horizon = 0;  ///< 0 = 20 * target
  double tolerance = 0.05;
  std::optional<std::pair<double, double>> bracket;  ///< default: arl_bracket, expanded as needed
  std::size_t max_iterations = 20;
  std::size_t max_expansions = 5;
  std::size_t workers = 1;
  std::uint64_t seed = 0;

  std::size_t horizon() const noexcept;
  void validate() const;
};

struct CalibrationResult {
  double threshold = 0.0;
  ArlEstimate achieved;
  std::size_t iterations = 0;
  bool converged = false;
  std::pair<double, double> bracket{0.0, 0.0};        ///< final bracket
  std::vector<std::pair<double, double>> history;    ///< (A, ARL0) per evaluation, in order
};

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// (log(max(1, target / c)), log(K * target)).
std::pair<double, double> arl_bracket(std::size_t num_modes, double target_arl0, double c = 10.0);

/// e^{A / summed} / K: lower bound on the in-control E[T] of an SR-type rule over K statistics
/// whose alarm sums the `summed` largest log statistics (summed = 1 is the max rule).
double arl_lower_bound(double threshold, std::size_t num_modes, std::size_t summed = 1);

/// Whether the lower bound above applies to the policy (SR-type statistics only).
bool arl_bound_applies(const PolicySpec& spec) noexcept;

/// Mean in-control run length at threshold A over `replications` independent paths.
ArlEstimate estimate_arl0(const PolicySpec& policy, std::shared_ptr<const ModeBank> bank, double threshold,
                          std::size_t replications, std::uint64_t seed, std::size_t horizon, std::size_t workers = 1);

/// Bisection on A with common random numbers: every candidate A is scored on the same paths.
CalibrationResult bisect_threshold(const CalibrationSpec& spec, const PolicySpec& policy,
                                   std::shared_ptr<const ModeBank> bank);

/// Persistent results file keyed by (scenario hash, policy, target ARL0).
class CalibrationCache {
 public:
  CalibrationCache() = default;
  explicit CalibrationCache(std::filesystem::path path);

  static std::string key(const std::string& scenario_hash, const std::string& policy_key, double target_arl0);

  std::optional<CalibrationResult> find(const std::string& key) const;
  void store(const std::string& key, const CalibrationResult& result);
  void save() const;
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::filesystem::path path_;
  std::vector<std::pair<std::string, CalibrationResult>> entries_;
};

}  // namespace mtssrp
