#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtssrp/baselines.hpp"
#include "mtssrp/calibrate.hpp"
#include "mtssrp/scenarios.hpp"
#include "mtssrp/simulation.hpp"

namespace mtssrp {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CalibrationSettings {
  std::size_t replications = 1000;
  double tolerance = 0.05;
  std::size_t max_horizon = 0;  ///< 0 = 20 * target_arl0
  std::optional<std::pair<double, double>> bracket;
  std::filesystem::path cache;              ///< empty = no cache file
  std::map<std::string, double> thresholds;  ///< fixed thresholds by policy id; skips calibration
};

struct OutputSettings {
  std::filesystem::path dir = "results";
  std::vector<std::size_t> trajectories;  ///< replication ids to write trajectory_<rep>.csv for
};

struct BenchmarkConfig {
  ScenarioSpec scenario;
  std::vector<PolicySpec> policies;
  double target_arl0 = 200.0;
  std::size_t replications = 200;
  std::vector<double> delta_grid;  ///< empty = scenario.delta only
  std::size_t horizon = 0;         ///< per-run tick cap; 0 = 10 * target_arl0
  CalibrationSettings calibration;
  OutputSettings output;
  std::size_t workers = 1;
  std::uint64_t master_seed = 0;

  void validate() const;
  std::vector<double> deltas() const;
  std::size_t run_horizon() const;
  ScenarioSpec scenario_at(double delta) const;
  const PolicySpec& policy(const std::string& id) const;
};

/// Parses the config document. Policies may omit q and Ks; the top-level "q" and "Ks" fill them in.
BenchmarkConfig parse_config(const nlohmann::json& doc);
BenchmarkConfig load_config(const std::filesystem::path& path);
/// Canonical form: every field explicit, fixed key order. parse_config(config_to_json(c)) reproduces c.
nlohmann::json config_to_json(const BenchmarkConfig& cfg);

/// FNV-1a 64 of a string, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view text);
/// Hash of every field that can change a result (outputs, workers and the cache path excluded).
std::string config_hash(const BenchmarkConfig& cfg);
/// Hash of the fields that determine the mode bank and in-control data.
std::string scenario_hash(const ScenarioSpec& spec);
/// Calibration-relevant policy parameters after defaults are resolved.
std::string policy_key(const PolicySpec& resolved);

struct RunRecord {
  std::string policy;
  double delta = 0.0;
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> true_modes;
  std::size_t stopping_time = 0;
  std::size_t delay = 0;
  bool fired = false;
  bool censored = false;
  std::optional<std::size_t> isolated_mode;
  bool correct = false;

  bool operator==(const RunRecord&) const = default;
};

struct ThresholdInfo {
  std::string policy;
  double delta = 0.0;
  double threshold = 0.0;
  double arl0 = 0.0;
  double arl0_se = 0.0;
  bool converged = true;
  std::string source;  ///< "fixed", "cache" or "calibrated"

  bool operator==(const ThresholdInfo&) const = default;
};

struct SummaryRow {
  std::string policy;
  double delta = 0.0;
  std::size_t replications = 0;
  std::size_t fired = 0;
  double censoring_rate = 0.0;
  double mean_delay = 0.0;
  double sd_delay = 0.0;
  double se_delay = 0.0;
  double accuracy = 0.0;
  double sd_accuracy = 0.0;
  double se_accuracy = 0.0;
  double threshold = 0.0;

  bool operator==(const SummaryRow&) const = default;
};

struct SummaryTable {
  std::vector<SummaryRow> rows;

  const SummaryRow& at(const std::string& policy, double delta) const;
  bool operator==(const SummaryTable&) const = default;
};

struct BenchmarkResult {
  std::vector<ThresholdInfo> thresholds;
  std::vector<RunRecord> records;
  SummaryTable table;
  std::map<std::size_t, std::vector<std::pair<RunRecord, std::vector<TraceRow>>>> trajectories;
};

/// Aggregates records per (policy, delta) in order of first appearance.
SummaryTable summarize(const std::vector<RunRecord>& records, const std::vector<ThresholdInfo>& thresholds);

/// Thresholds for every (policy, delta): fixed, cached, or calibrated (and then cached).
std::vector<ThresholdInfo> resolve_thresholds(const BenchmarkConfig& cfg, std::ostream* log = nullptr);

/// One replication of one policy at one delta. Deterministic in (master_seed, replication).
RunRecord run_replication(const BenchmarkConfig& cfg, const PolicySpec& policy, double delta, double threshold,
                          std::size_t replication, std::vector<TraceRow>* trace = nullptr, AccessLog* access = nullptr);

BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, std::ostream* log = nullptr);
/// run_benchmark with thresholds already known.
BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, const std::vector<ThresholdInfo>& thresholds,
                              std::ostream* log = nullptr);

/// records.csv columns:
///   policy,delta,replication,seed,true_modes,stopping_time,delay,fired,censored,isolated_mode,correct
/// true_modes is ';'-separated; isolated_mode is empty when no alarm fired; flags are 0/1.
std::string records_csv(const std::vector<RunRecord>& records);
std::vector<RunRecord> parse_records_csv(const std::string& text);

/// summary.csv columns:
///   policy,delta,replications,fired,censoring_rate,mean_delay,sd_delay,se_delay,
///   accuracy,sd_accuracy,se_accuracy,threshold
std::string summary_csv(const SummaryTable& table);

/// trajectory_<rep>.csv columns: policy,delta,t,statistic,plan,ranking (plan and ranking ';'-separated).
std::string trajectory_csv(const std::vector<std::pair<RunRecord, std::vector<TraceRow>>>& runs);

/// {"config", "config_hash", "thresholds", "summary"}.
nlohmann::json summary_json(const BenchmarkConfig& cfg, const BenchmarkResult& result);
SummaryTable summary_from_json(const nlohmann::json& doc);
std::vector<ThresholdInfo> thresholds_from_json(const nlohmann::json& doc);

/// Writes summary.csv, records.csv, summary.json and the requested trajectory files into `dir`.
void export_results(const BenchmarkConfig& cfg, const BenchmarkResult& result, const std::filesystem::path& dir);

struct ReplayResult {
  RunRecord record;
  std::vector<TraceRow> trace;
  AccessLog access;
};

/// Re-executes one replication with tracing and the access log switched on.
ReplayResult replay(const BenchmarkConfig& cfg, const std::vector<ThresholdInfo>& thresholds, const std::string& policy,
                    double delta, std::size_t replication);

/// Replays from an exported directory. If `expected` is given its config hash must match the archive's.
/// The re-executed record must equal the archived one.
ReplayResult replay_archive(const std::filesystem::path& dir, const std::string& policy, double delta,
                            std::size_t replication, const BenchmarkConfig* expected = nullptr);

/// Fraction of post-change reads (t > change_time) landing on the support of any true mode.
double true_support_fraction(const ModeBank& bank, const AccessLog& access, std::span<const std::size_t> true_modes,
                             std::size_t change_time, std::size_t until = kNoChange);

}  // namespace mtssrp
