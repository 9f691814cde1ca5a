#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "mtssrp/harness.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<std::size_t> workers;
  std::string out;
};

void add_common(CLI::App* cmd, Overrides& o, bool config_required = true) {
  auto* opt = cmd->add_option("--config", o.config, "JSON config file");
  if (config_required) opt->required();
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--reps", o.reps, "replications (calibration replications for `calibrate`)");
  cmd->add_option("--workers", o.workers, "worker threads");
  cmd->add_option("--out", o.out, "output directory");
}

mtssrp::BenchmarkConfig load(const Overrides& o, bool reps_are_calibration) {
  auto cfg = mtssrp::load_config(o.config);
  if (o.seed) cfg.master_seed = *o.seed;
  if (o.reps) (reps_are_calibration ? cfg.calibration.replications : cfg.replications) = *o.reps;
  if (o.workers) cfg.workers = *o.workers;
  if (!o.out.empty()) cfg.output.dir = o.out;
  cfg.validate();
  return cfg;
}

void print_table(const mtssrp::SummaryTable& table) {
  fmt::print("{:<12} {:>6} {:>10} {:>9} {:>9} {:>9} {:>9}\n", "policy", "delta", "delay", "sd", "accuracy", "sd",
             "censored");
  for (const auto& r : table.rows) {
    fmt::print("{:<12} {:>6} {:>10.2f} {:>9.2f} {:>9.3f} {:>9.3f} {:>9.3f}\n", r.policy, r.delta, r.mean_delay,
               r.sd_delay, r.accuracy, r.sd_accuracy, r.censoring_rate);
  }
}

int cmd_calibrate(const Overrides& o) {
  const auto cfg = load(o, true);
  const auto thresholds = mtssrp::resolve_thresholds(cfg, &std::cerr);
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& t : thresholds) {
    doc.push_back({{"policy", t.policy},
                   {"delta", t.delta},
                   {"threshold", t.threshold},
                   {"arl0", t.arl0},
                   {"arl0_se", t.arl0_se},
                   {"converged", t.converged},
                   {"source", t.source}});
    fmt::print("{:<12} delta={:<5} A={:<10.6g} ARL0={:.2f} (se {:.2f}){}\n", t.policy, t.delta, t.threshold, t.arl0,
               t.arl0_se, t.converged ? "" : "  NOT CONVERGED");
  }
  std::filesystem::create_directories(cfg.output.dir);
  std::ofstream(cfg.output.dir / "thresholds.json") << doc.dump(2) << '\n';
  return 0;
}

int cmd_run(const Overrides& o, const std::vector<double>& deltas) {
  auto cfg = load(o, false);
  if (!deltas.empty()) cfg.delta_grid = deltas;
  cfg.validate();
  const auto result = mtssrp::run_benchmark(cfg, &std::cerr);
  mtssrp::export_results(cfg, result, cfg.output.dir);
  print_table(result.table);
  std::cerr << fmt::format("wrote {} (config {})\n", cfg.output.dir.string(), mtssrp::config_hash(cfg));
  return 0;
}

int cmd_replay(const Overrides& o, const std::string& archive, const std::string& policy, double delta,
               std::size_t rep) {
  std::optional<mtssrp::BenchmarkConfig> expected;
  if (!o.config.empty()) expected = load(o, false);
  const auto r = mtssrp::replay_archive(archive, policy, delta, rep, expected ? &*expected : nullptr);
  const std::filesystem::path out = o.out.empty() ? std::filesystem::path(archive) : std::filesystem::path(o.out);
  std::filesystem::create_directories(out);
  const std::vector<std::pair<mtssrp::RunRecord, std::vector<mtssrp::TraceRow>>> runs{{r.record, r.trace}};
  const auto path = out / fmt::format("trajectory_{}.csv", rep);
  std::ofstream(path, std::ios::binary) << mtssrp::trajectory_csv(runs);
  fmt::print("replayed {} delta={} rep={}: T={} fired={} isolated={} correct={} ({} ticks, {} reads)\n", policy, delta,
             rep, r.record.stopping_time, r.record.fired,
             r.record.isolated_mode ? std::to_string(*r.record.isolated_mode) : "-", r.record.correct, r.trace.size(),
             r.access.reads.size());
  fmt::print("trajectory written to {}\n", path.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-mode Thompson-sampled SR monitoring: calibration and benchmarks"};
  app.require_subcommand(1);

  Overrides cal_o, run_o, sweep_o, replay_o;
  auto* cal = app.add_subcommand("calibrate", "calibrate thresholds to the target ARL0");
  add_common(cal, cal_o);

  auto* run = app.add_subcommand("run", "calibrate if needed, then run the benchmark");
  add_common(run, run_o);

  std::vector<double> deltas;
  auto* sweep = app.add_subcommand("sweep", "run the benchmark over a delta grid");
  add_common(sweep, sweep_o);
  sweep->add_option("--deltas", deltas, "delta grid (overrides delta_grid)")->delimiter(',');

  std::string archive, policy;
  double delta = 0.0;
  std::size_t rep = 0;
  auto* replay = app.add_subcommand("replay", "re-execute one replication from an output directory");
  add_common(replay, replay_o, false);
  replay->add_option("--archive", archive, "directory written by run or sweep")->required()->check(CLI::ExistingDirectory);
  replay->add_option("--policy", policy, "policy id")->required();
  replay->add_option("--delta", delta, "delta value")->required();
  replay->add_option("--rep", rep, "replication id")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cal) return cmd_calibrate(cal_o);
    if (*run) return cmd_run(run_o, {});
    if (*sweep) {
      auto cfg_check = mtssrp::load_config(sweep_o.config);
      if (deltas.empty() && cfg_check.delta_grid.empty()) {
        std::cerr << "sweep needs a delta_grid in the config or --deltas\n";
        return 2;
      }
      return cmd_run(sweep_o, deltas);
    }
    if (*replay) return cmd_replay(replay_o, archive, policy, delta, rep);
  } catch (const mtssrp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const mtssrp::ReplayError& e) {
    std::cerr << "replay error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
