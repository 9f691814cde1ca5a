#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mtssrp/model.hpp"
#include "mtssrp/plan.hpp"

namespace mtssrp {

/// Change time meaning "no change ever happens".
inline constexpr std::size_t kNoChange = std::numeric_limits<std::size_t>::max();

enum class ScenarioKind { nonoverlap, overlap, custom };

/// How post-change data is generated when several true modes are active.
///   single: always the first true mode.
///   per_tick_uniform: each tick draws from one true mode picked uniformly.
///   simultaneous: every tick carries the sum of all true modes' mean shifts.
enum class Mixing { single, per_tick_uniform, simultaneous };

ScenarioKind parse_scenario_kind(std::string_view name);
std::string_view to_string(ScenarioKind kind) noexcept;
Mixing parse_mixing(std::string_view name);
std::string_view to_string(Mixing mixing) noexcept;

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::nonoverlap;
  // nonoverlap
  std::size_t p = 1000;
  std::size_t num_modes = 50;
  // overlap
  std::size_t rows = 30;
  std::size_t cols = 30;
  std::size_t knots = 7;
  // custom
  std::string bank_file;

  double delta = 0.8;                ///< post-change mean-shift magnitude of the data
  std::optional<double> bank_delta;  ///< magnitude the mode bank is built with (defaults to delta)
  std::size_t change_time = 0;       ///< nu; data is post-change for t > nu
  std::vector<std::size_t> true_modes;  ///< fixed true modes; empty = draw per replication
  std::size_t num_true_modes = 1;       ///< how many to draw when true_modes is empty
  Mixing mixing = Mixing::single;

  void validate() const;
  double design_delta() const;
  /// Factor applied to the bank's mean shifts when generating data (delta / bank_delta).
  double data_scale() const;
};

/// Contiguous blocks: mode k shifts indices [k * p/K, (k+1) * p/K) by delta.
ModeBank build_nonoverlap(std::size_t p = 1000, std::size_t num_modes = 50, double delta = 0.8);

/// Values of the `count` quadratic B-spline basis functions (open uniform knots) at the
/// centres of `cells` equal cells spanning the parameter range. Row = cell, column = basis.
Eigen::MatrixXd bspline_basis_on_grid(std::size_t count, std::size_t cells, std::size_t degree = 2);

/// Tensor-product bumps on a rows x cols image, one mode per knot pair, peak-normalised so
/// the largest mean shift of every mode is exactly delta. Pixel (r, c) is coordinate r * cols + c;
/// mode (a, b) is index a * knots + b.
ModeBank build_overlap(std::size_t rows = 30, std::size_t cols = 30, std::size_t knots = 7, double delta = 0.8);

/// Per-coordinate sample mean and variance (floored at `variance_floor`) for the base and each mode.
/// Each matrix holds one sample per row.
ModeBank bank_from_samples(const Eigen::MatrixXd& in_control, const std::vector<Eigen::MatrixXd>& mode_samples,
                           std::vector<std::string> labels = {}, double variance_floor = 1e-6);

/// JSON bank file: {"base": {"mean": [...], "variance": [...]}, "modes": [{"label", "mean", "variance"}]}.
/// "covariance" (a list of rows) may replace "variance" for a full-covariance model.
ModeBank load_bank_file(const std::filesystem::path& path);
void save_bank_file(const ModeBank& bank, const std::filesystem::path& path);

ModeBank build_bank(const ScenarioSpec& spec);

/// True modes for one replication: the fixed list, or `num_true_modes` distinct modes drawn uniformly.
std::vector<std::size_t> draw_true_modes(const ScenarioSpec& spec, std::size_t num_modes, std::uint64_t seed);

struct StreamTick {
  std::size_t t = 0;
  Eigen::VectorXd full_x;
  std::optional<std::size_t> active_mode;  ///< empty before the change (and for simultaneous mixing)
};

/// Coordinates handed to a policy, one entry per (tick, index).
struct AccessLog {
  std::vector<std::pair<std::size_t, std::size_t>> reads;
};

/// Hidden-truth data source. Every value is a pure function of (seed, t, j), so two
/// generators with the same seed agree on every coordinate regardless of what was requested.
class StreamGenerator {
 public:
  StreamGenerator(std::shared_ptr<const ModeBank> bank, std::size_t change_time, std::vector<std::size_t> true_modes,
                  Mixing mixing, double data_scale, std::uint64_t seed);

  static StreamGenerator in_control(std::shared_ptr<const ModeBank> bank, std::uint64_t seed);

  std::size_t dim() const noexcept { return bank_->dim(); }
  std::size_t change_time() const noexcept { return change_time_; }
  const std::vector<std::size_t>& true_modes() const noexcept { return true_modes_; }

  /// Mode generating tick t, or empty when in control or under simultaneous mixing.
  std::optional<std::size_t> active_mode(std::size_t t) const;
  bool post_change(std::size_t t) const noexcept { return change_time_ != kNoChange && t > change_time_; }

  /// The full hidden vector. For tests and the oracle; policies go through observe().
  StreamTick tick(std::size_t t) const;
  /// Reveal only the planned coordinates at tick t.
  Observation observe(std::size_t t, const SamplingPlan& plan);

  void enable_access_log(bool on = true) { log_enabled_ = on; }
  const AccessLog& access_log() const noexcept { return log_; }

 private:
  Eigen::VectorXd mean_at(std::size_t t) const;
  double value(std::size_t t, std::size_t j) const;

  std::shared_ptr<const ModeBank> bank_;
  std::size_t change_time_;
  std::vector<std::size_t> true_modes_;
  Mixing mixing_;
  double data_scale_;
  std::uint64_t seed_;
  bool full_cov_ = false;
  bool log_enabled_ = false;
  AccessLog log_;
  // full-covariance cache of the last generated tick
  mutable std::size_t cached_t_ = 0;
  mutable Eigen::VectorXd cached_x_;
};

StreamTick generate_tick(const ScenarioSpec& spec, std::shared_ptr<const ModeBank> bank, std::size_t t,
                         std::uint64_t seed);

}  // namespace mtssrp
