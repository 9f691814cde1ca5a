#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "mtssrp/baselines.hpp"
#include "mtssrp/scenarios.hpp"

namespace mtssrp {

/// Seed layout. Replication r of a run uses derive_seed(master, kRunStream, r); within it the data
/// generator, the policy and the true-mode draw get derive_seed(rep, kDataStream / kPolicyStream /
/// kTruthStream). Calibration replications use kCalibrationStream instead of kRunStream.
inline constexpr std::uint64_t kRunStream = 1;
inline constexpr std::uint64_t kCalibrationStream = 2;
inline constexpr std::uint64_t kConfirmationStream = 3;
inline constexpr std::uint64_t kDataStream = 11;
inline constexpr std::uint64_t kPolicyStream = 12;
inline constexpr std::uint64_t kTruthStream = 13;

struct TraceRow {
  std::size_t t = 0;
  double statistic = 0.0;
  std::vector<std::size_t> plan;
  std::vector<std::size_t> ranking;  ///< statistic indices, largest first (at most `rank_depth`)
};

struct RunOutcome {
  std::size_t stopping_time = 0;  ///< alarm time, or the horizon when censored
  bool fired = false;
  bool censored = false;
  std::optional<std::size_t> isolated_mode;
  std::vector<TraceRow> trace;
  AccessLog access;
};

struct RunOptions {
  double threshold = 0.0;
  std::size_t horizon = 2000;
  bool trace = false;
  bool log_access = false;
  std::size_t rank_depth = 5;
};

/// Plan, observe, update, check, until the statistic reaches the threshold or the horizon.
RunOutcome run_policy(Detector& detector, StreamGenerator& generator, const RunOptions& options);

/// A single path whose running maximum of the alarm statistic is extended lazily. Data and policy
/// randomness do not depend on the threshold, so the alarm time for any A is the first time the
/// running maximum reaches A; one path serves every threshold the bisection tries.
class RecordPath {
 public:
  RecordPath(std::unique_ptr<Detector> detector, StreamGenerator generator);

  /// First alarm time for threshold a, simulating up to `horizon` ticks if needed; empty if censored.
  std::optional<std::size_t> alarm_time(double a, std::size_t horizon);
  std::size_t simulated() const noexcept { return t_; }

 private:
  std::unique_ptr<Detector> detector_;
  StreamGenerator generator_;
  std::size_t t_ = 0;
  double running_max_ = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> times_;
  std::vector<double> maxima_;
};

/// Calls fn(i) for i in [0, n) on `workers` threads. Each index runs exactly once; results must be
/// written to per-index slots, which keeps outputs independent of scheduling.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t count = std::min(workers, n);
  pool.reserve(count);
  for (std::size_t w = 0; w < count; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace mtssrp
