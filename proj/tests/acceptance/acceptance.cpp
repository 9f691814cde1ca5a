// Acceptance run: one PASS/FAIL line per numbered criterion, then the property lines.
// Exit status is 0 when every line passes except those named with --known-red, and each
// known-red line really is red (so a fixed criterion forces the list to be updated).

#include <CLI11.hpp>
#include <fmt/core.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mtssrp/harness.hpp"
#include "mtssrp/planner.hpp"

using namespace mtssrp;
using nlohmann::json;

namespace {

struct Line {
  std::string id;
  bool pass = false;
  std::string text;
};

struct Options {
  std::size_t workers = 1;
  std::uint64_t seed = 20240229;
  std::filesystem::path cache = "acceptance_cache.json";
  std::filesystem::path out = "acceptance_out";
  std::vector<std::string> only;
  std::vector<std::string> known_red;
};

std::vector<Line> lines;

void report(const std::string& id, bool pass, const std::string& text) {
  lines.push_back({id, pass, text});
  fmt::print("{} {}: {}\n", pass ? "PASS" : "FAIL", id, text);
  std::fflush(stdout);
}

void note(const std::string& text) {
  fmt::print("     {}\n", text);
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json policy_json(const std::string& id, const std::string& kind, int ks = 0) {
  json p{{"id", id}, {"kind", kind}};
  if (ks > 0) {
    p["Ks"] = ks;
    p["rule"] = "top_sum";
  }
  return p;
}

json benchmark_policies() {
  return json::array({policy_json("oracle", "oracle"), policy_json("mtssrp", "mtssrp", 3), policy_json("tssrp", "tssrp"),
                      policy_json("tras", "tras"), policy_json("mrandom", "mrandom", 3),
                      policy_json("random", "random")});
}

json scenario_json(const std::string& kind) {
  if (kind == "overlap") return json{{"kind", "overlap"}, {"grid", {30, 30}}, {"knots", 7}, {"delta", 0.8}};
  return json{{"kind", "nonoverlap"}, {"p", 1000}, {"K", 50}, {"delta", 0.8}};
}

BenchmarkConfig make_config(const Options& o, json scenario, json policies, std::vector<double> deltas,
                            bool use_cache = true) {
  json doc{{"scenario", std::move(scenario)},
           {"policies", std::move(policies)},
           {"q", 10},
           {"target_arl0", 200},
           {"replications", 200},
           {"delta_grid", std::move(deltas)},
           {"master_seed", o.seed},
           {"workers", o.workers},
           {"calibration", {{"replications", 1000}, {"tolerance", 0.05}}}};
  if (use_cache) doc["calibration"]["cache"] = o.cache.string();
  return parse_config(doc);
}

struct Sweep {
  BenchmarkConfig cfg;
  BenchmarkResult res;
  double seconds = 0;
};

Sweep run_sweep(const BenchmarkConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Sweep s{cfg, {}, 0};
  s.res = run_benchmark(cfg, resolve_thresholds(cfg, &std::cerr));
  s.seconds = seconds_since(t0);
  return s;
}

const ThresholdInfo& threshold_of(const BenchmarkResult& r, const std::string& policy, double delta) {
  for (const auto& t : r.thresholds)
    if (t.policy == policy && t.delta == delta) return t;
  throw std::out_of_range(policy);
}

std::string describe(const SummaryRow& r) {
  return fmt::format("{} d={}: delay {:.2f} (sd {:.2f}, se {:.2f}), acc {:.3f}, fired {}/{}, A {:.3f}", r.policy,
                     r.delta, r.mean_delay, r.sd_delay, r.se_delay, r.accuracy, r.fired, r.replications, r.threshold);
}

bool in_arl_band(const ThresholdInfo& t) { return std::abs(t.arl0 - 200.0) <= 0.05 * 200.0; }

// ---------------------------------------------------------------------------
// Criteria 1-5 share the benchmark sweeps.

void benchmark_criteria(const Options& o, std::vector<Sweep>& calibrated) {
  // 1: standalone, uncached, timed
  {
    auto cfg = make_config(o, scenario_json("nonoverlap"), json::array({policy_json("mtssrp", "mtssrp", 3)}), {0.8},
                           false);
    auto s = run_sweep(cfg);
    const auto& row = s.res.table.at("mtssrp", 0.8);
    const auto& th = threshold_of(s.res, "mtssrp", 0.8);
    const double lo = 26.49 * 0.8, hi = 26.49 * 1.2;
    const bool ok = row.mean_delay >= lo && row.mean_delay <= hi && row.accuracy >= 0.95 && in_arl_band(th) &&
                    row.replications == 200 && s.seconds <= 900.0;
    report("1", ok,
           fmt::format("MTSSRP non-overlap d=0.8: delay {:.2f} in [{:.2f}, {:.2f}], acc {:.3f} >= 0.95, ARL0 {:.1f} "
                       "(se {:.1f}) in 200 +- 5%, {:.0f} s <= 900 s",
                       row.mean_delay, lo, hi, row.accuracy, th.arl0, th.arl0_se, s.seconds));
    note(describe(row));
    auto bank = std::make_shared<const ModeBank>(build_bank(cfg.scenario_at(0.8)));
    const auto confirm = estimate_arl0(cfg.policies[0], bank, th.threshold, 1000,
                                       derive_seed(o.seed, kConfirmationStream), cfg.calibration.max_horizon
                                           ? cfg.calibration.max_horizon
                                           : static_cast<std::size_t>(20 * cfg.target_arl0),
                                       o.workers);
    note(fmt::format("fresh-seed ARL0 confirmation at A={:.3f}: {:.1f} (se {:.1f}), censored {}", th.threshold,
                     confirm.mean, confirm.se, confirm.censored));
    calibrated.push_back(std::move(s));
  }

  std::map<std::string, Sweep> t1;
  for (const std::string kind : {"nonoverlap", "overlap"}) {
    t1[kind] = run_sweep(make_config(o, scenario_json(kind), benchmark_policies(), {0.5, 0.8}));
    note(fmt::format("{} sweep: {:.0f} s", kind, t1[kind].seconds));
    for (const auto& row : t1[kind].res.table.rows) note(kind + " " + describe(row));
  }

  // 2
  {
    const auto& res = t1["nonoverlap"].res;
    const auto& row = res.table.at("oracle", 0.8);
    const auto& th = threshold_of(res, "oracle", 0.8);
    report("2", row.mean_delay <= 4.0 && in_arl_band(th),
           fmt::format("Oracle non-overlap d=0.8: delay {:.2f} <= 4, ARL0 {:.1f} in 200 +- 5%", row.mean_delay, th.arl0));
  }

  // 3
  {
    bool all = true;
    std::vector<std::string> broken;
    auto gap = [&](const std::string& where, const SummaryRow& a, const SummaryRow& b) {
      const double se = std::hypot(a.se_delay, b.se_delay);
      const bool ok = b.mean_delay - a.mean_delay >= 3.0 * se;
      note(fmt::format("{} {} {:.2f} < {} {:.2f}: gap {:.2f} vs 3 se {:.2f} {}", where, a.policy, a.mean_delay, b.policy,
                       b.mean_delay, b.mean_delay - a.mean_delay, 3.0 * se, ok ? "ok" : "VIOLATED"));
      if (!ok) broken.push_back(fmt::format("{} {}<{}", where, a.policy, b.policy));
      all = all && ok;
    };
    for (const std::string kind : {"nonoverlap", "overlap"}) {
      for (double d : {0.5, 0.8}) {
        const auto& tab = t1[kind].res.table;
        const auto where = fmt::format("{} d={}", kind, d);
        gap(where, tab.at("oracle", d), tab.at("mtssrp", d));
        for (const std::string mid : {"tssrp", "tras"}) {
          gap(where, tab.at("mtssrp", d), tab.at(mid, d));
          gap(where, tab.at(mid, d), tab.at("mrandom", d));
        }
        gap(where, tab.at("mrandom", d), tab.at("random", d));
      }
    }
    std::string detail = "Oracle < MTSSRP < {TSSRP, TRAS} < MRandom < Random, 3 se gaps, both scenarios, d in {0.5, 0.8}";
    if (!broken.empty()) {
      detail += "; violated:";
      for (const auto& b : broken) detail += " [" + b + "]";
    }
    report("3", all, detail);
  }

  // invariant: Random detects essentially nothing
  {
    bool ok = true;
    std::string detail;
    for (const std::string kind : {"nonoverlap", "overlap"}) {
      for (double d : {0.5, 0.8}) {
        const auto& row = t1[kind].res.table.at("random", d);
        ok = ok && row.mean_delay >= 0.95 * 200;
        detail += fmt::format(" {} d={}: {:.1f};", kind, d, row.mean_delay);
      }
    }
    report("I1", ok, "Random mean delay >= 0.95 ARL0 = 190:" + detail);
  }

  calibrated.push_back(std::move(t1["nonoverlap"]));
  calibrated.push_back(std::move(t1["overlap"]));

  // 4: three true modes, per-tick mixing as stated; simultaneous shift reported alongside
  for (const std::string mixing : {"per_tick_uniform", "simultaneous"}) {
    auto scen = scenario_json("nonoverlap");
    scen["num_true_modes"] = 3;
    scen["mixing"] = mixing;
    auto s = run_sweep(make_config(o, scen, json::array({policy_json("mtssrp", "mtssrp", 3)}), {0.8}));
    const auto& row = s.res.table.at("mtssrp", 0.8);
    const double lo = 14.27 * 0.75, hi = 14.27 * 1.25;
    const bool ok = row.mean_delay >= lo && row.mean_delay <= hi && row.accuracy >= 0.88;
    const auto text = fmt::format("MTSSRP 3 true modes, {} mixing: delay {:.2f} in [{:.2f}, {:.2f}], acc {:.3f} >= 0.88",
                                  mixing, row.mean_delay, lo, hi, row.accuracy);
    if (mixing == "per_tick_uniform")
      report("4", ok, text);
    else
      report("I2", ok, text + " (alternative mixing law)");
    note(describe(row));
    calibrated.push_back(std::move(s));
  }

  // 5
  {
    bool ok = true;
    std::size_t checked = 0;
    for (const auto& s : calibrated) {
      for (const auto& th : s.res.thresholds) {
        if (th.source == "fixed") continue;
        const auto& spec = s.cfg.policy(th.policy);
        if (!arl_bound_applies(spec)) continue;
        const auto bank = build_bank(s.cfg.scenario_at(th.delta));
        const auto resolved = spec.resolve(bank);
        const double bound = arl_lower_bound(th.threshold, resolved.statistic_count(bank), resolved.summed_count());
        const bool holds = th.arl0 >= bound - 3.0 * th.arl0_se && s.cfg.calibration.replications >= 500;
        ok = ok && holds;
        ++checked;
        if (!holds)
          note(fmt::format("bound violated: {} {} d={} A={:.3f} ARL0 {:.1f} bound {:.1f}", to_string(s.cfg.scenario.kind),
                           th.policy, th.delta, th.threshold, th.arl0, bound));
      }
    }
    report("5", ok && checked > 0,
           fmt::format("in-control E[T] >= exp(A/m)/N - 3 se for all {} calibrated SR-type configurations "
                       "(1000 null replications each)",
                       checked));
  }
}

// ---------------------------------------------------------------------------

void two_mode_toy(const Options& o) {
  const Eigen::Index p = 4;
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(p), one = Eigen::VectorXd::Ones(p), a(p), b(p);
  a << 0.4, 0.4, 0.0, 0.0;
  b << 0.0, 0.4, 0.4, 0.0;
  auto bank = std::make_shared<const ModeBank>(GaussianModel::diagonal(zero, one),
                                               std::vector{GaussianModel::diagonal(a, one), GaussianModel::diagonal(b, one)});
  const std::vector<std::size_t> all{0, 1, 2, 3};
  int wins = 0;
  const int reps = 500;
  for (int r = 0; r < reps; ++r) {
    const std::size_t truth = static_cast<std::size_t>(r % 2);
    StreamGenerator gen(bank, 0, {truth}, Mixing::single, 1.0, derive_seed(o.seed, 6, r));
    MonitorState mon = MonitorState::initial(2);
    for (std::size_t t = 1; t <= 200; ++t) mon = update(mon, *bank, gen.observe(t, SamplingPlan{all, SolverKind::fixed}));
    wins += mon.logstats[truth].log() > mon.logstats[1 - truth].log();
  }
  const double freq = double(wins) / reps;
  report("6", freq > 0.99,
         fmt::format("two-mode p=4 toy, fully observed: P(r_true > r_other at t=200) = {:.3f} > 0.99 over {} reps", freq,
                     reps));
}

// ---------------------------------------------------------------------------

ModeBank random_diagonal_bank(std::size_t p, std::size_t k, std::mt19937_64& gen) {
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.5, 2.0);
  std::bernoulli_distribution on(0.4);
  const auto P = static_cast<Eigen::Index>(p);
  Eigen::VectorXd base_var(P);
  for (auto& v : base_var) v = u(gen);
  std::vector<GaussianModel> modes;
  for (std::size_t m = 0; m < k; ++m) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(P), var = base_var;
    bool any = false;
    for (Eigen::Index j = 0; j < P; ++j) {
      if (on(gen)) {
        mu[j] = z(gen);
        if (on(gen)) var[j] *= u(gen);
        any = true;
      }
    }
    if (!any) mu[static_cast<Eigen::Index>(m % p)] = 1.0;
    modes.push_back(GaussianModel::diagonal(mu, var));
  }
  return ModeBank(GaussianModel::diagonal(Eigen::VectorXd::Zero(P), base_var), std::move(modes));
}

void plan_sort_optimality(const Options& o) {
  std::mt19937_64 gen(derive_seed(o.seed, 7));
  int exact = 0;
  const int instances = 100;
  for (int inst = 0; inst < instances; ++inst) {
    const std::size_t p = 2 + gen() % 11;
    const std::size_t q = 1 + gen() % std::min<std::size_t>(4, p);
    const std::size_t k = 2 + gen() % 5;
    auto bank = random_diagonal_bank(p, k, gen);
    MonitorState state = MonitorState::initial(k);
    state.t = 1 + gen() % 20;
    std::normal_distribution<double> z(1.0, 2.0);
    for (auto& r : state.logstats) r = LogSR::from_log(z(gen));
    Rng rng(gen());
    const auto draws = draw_thompson(state, bank, 1 + gen() % k, rng);
    const auto chosen = plan_sort(scores_from_draws(bank, draws), q);

    // enumerate every q-subset by bitmask
    double best = -INFINITY;
    for (std::uint32_t mask = 0; mask < (1u << p); ++mask) {
      if (static_cast<std::size_t>(__builtin_popcount(mask)) != q) continue;
      std::vector<std::size_t> s;
      for (std::size_t j = 0; j < p; ++j)
        if (mask >> j & 1u) s.push_back(j);
      best = std::max(best, sampled_reward(state, bank, draws, s));
    }
    exact += sampled_reward(state, bank, draws, chosen.indices) == best;
  }
  report("7", exact == instances,
         fmt::format("plan_sort attains the exhaustive optimum exactly in {}/{} diagonal instances (p <= 12, q <= 4)",
                     exact, instances));
}

// ---------------------------------------------------------------------------

void per_sensor_reduction(const Options& o) {
  const std::size_t p = 12;
  const auto P = static_cast<Eigen::Index>(p);
  std::vector<GaussianModel> modes;
  for (Eigen::Index j = 0; j < P; ++j) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(P);
    mu[j] = 0.8;
    modes.push_back(GaussianModel::diagonal(mu, Eigen::VectorXd::Ones(P)));
  }
  ModeBank bank(GaussianModel::diagonal(Eigen::VectorXd::Zero(P), Eigen::VectorXd::Ones(P)), std::move(modes));
  const auto models = SensorModels::iid(p, {0, 1}, {0.8, 1});
  std::mt19937_64 gen(derive_seed(o.seed, 8));
  std::normal_distribution<double> z;
  std::size_t mismatches = 0, comparisons = 0;
  for (int traj = 0; traj < 50; ++traj) {
    MonitorState mon = MonitorState::initial(p);
    std::vector<LogSR> sensor(p, LogSR::zero());
    const double shift = traj % 2 ? 0.8 : 0.0;
    for (std::size_t t = 1; t <= 100; ++t) {
      ThompsonDraws draws;
      std::vector<double> xs(p);
      for (std::size_t j = 0; j < p; ++j) {
        xs[j] = 0.8 + z(gen);
        Eigen::VectorXd x = Eigen::VectorXd::Constant(P, 0.8);
        x[static_cast<Eigen::Index>(j)] = xs[j];
        draws.push_back({j, std::move(x)});
      }
      const auto plan = plan_random(p, 4, gen());
      const auto mts = sampled_statistics(mon, bank, draws, plan.indices);
      const auto per = tssrp_sampled(sensor, models, xs);
      for (std::size_t j = 0; j < p; ++j) {
        const bool seen = std::find(plan.indices.begin(), plan.indices.end(), j) != plan.indices.end();
        mismatches += mts[j] != (seen ? per[j] : sensor[j].log_one_plus());
        ++comparisons;
      }
      Observation obs{t, plan.indices, {}};
      for (std::size_t i = 0; i < plan.indices.size(); ++i) obs.values.push_back(shift + z(gen));
      mon = update(mon, bank, obs);
      tssrp_update(sensor, obs, models);
      for (std::size_t j = 0; j < p; ++j) {
        mismatches += mon.logstats[j].log() != sensor[j].log();
        ++comparisons;
      }
    }
  }
  report("8", mismatches == 0,
         fmt::format("per-sensor modes reproduce the per-sensor recursion bit-exactly: {} mismatches in {} comparisons "
                     "(50 trajectories x 100 ticks)",
                     mismatches, comparisons));
}

// ---------------------------------------------------------------------------

void null_martingale(const Options& o) {
  auto bank = std::make_shared<const ModeBank>(build_nonoverlap(1000, 50, 0.8));
  const double k = static_cast<double>(bank->size());
  bool ok = true;
  std::string detail;
  for (const std::string kind : {"mtssrp", "mrandom"}) {
    PolicySpec spec;
    spec.kind = parse_policy_kind(kind);
    spec.q = 10;
    spec.top_modes = 3;
    spec.rule = DetectionRule::top_sum;
    const int reps = 10000;
    std::map<std::size_t, RunningStats> at;
    for (int r = 0; r < reps; ++r) {
      const auto seed = derive_seed(o.seed, 9, r);
      auto det = make_detector(spec, bank, derive_seed(seed, kPolicyStream));
      auto gen = StreamGenerator::in_control(bank, derive_seed(seed, kDataStream));
      for (std::size_t t = 1; t <= 10; ++t) {
        det->observe(gen.observe(t, det->plan()));
        if (t == 1 || t == 5 || t == 10) {
          double sum = 0;
          for (double v : det->values()) sum += std::exp(v);
          at[t].add(sum - k * static_cast<double>(t));
        }
      }
    }
    for (auto& [t, s] : at) {
      const bool hit = std::abs(s.mean) <= 3.0 * s.se();
      ok = ok && hit;
      detail += fmt::format(" {} t={}: {:+.3f} (se {:.3f});", kind, t, s.mean, s.se());
    }
  }
  report("9", ok, "mean of sum_k R_k,t - K t within 3 se of 0 over 1e4 null reps:" + detail);
}

// ---------------------------------------------------------------------------

void determinism(const Options& o) {
  auto cfg = make_config(o, scenario_json("nonoverlap"), benchmark_policies(), {0.8});
  cfg.replications = 60;
  const auto thresholds = resolve_thresholds(cfg, &std::cerr);
  std::vector<std::string> texts;
  for (std::size_t w : {1u, 4u, 8u}) {
    cfg.workers = w;
    cfg.output.trajectories = {0, 7};
    const auto res = run_benchmark(cfg, thresholds);
    const auto dir = o.out / fmt::format("workers_{}", w);
    export_results(cfg, res, dir);
    std::ifstream in(dir / "records.csv", std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    texts.push_back(ss.str());
  }
  const bool same = texts[0] == texts[1] && texts[0] == texts[2] && !texts[0].empty();
  report("10", same,
         fmt::format("records.csv byte-identical for workers 1, 4, 8 ({} bytes, {} policies x {} reps)", texts[0].size(),
                     cfg.policies.size(), cfg.replications));

  // hidden-truth discipline, on the exported archive
  bool honest = true;
  std::size_t replayed = 0;
  for (const auto& pol : cfg.policies) {
    if (pol.kind == PolicyKind::oracle) continue;
    for (std::size_t rep : {0u, 13u, 42u}) {
      const auto rr = replay_archive(o.out / "workers_1", pol.id, 0.8, rep, &cfg);
      std::set<std::pair<std::size_t, std::size_t>> planned;
      for (const auto& row : rr.trace)
        for (auto j : row.plan) planned.insert({row.t, j});
      for (const auto& read : rr.access.reads) honest = honest && planned.count(read);
      honest = honest && rr.access.reads.size() == planned.size();
      ++replayed;
    }
  }
  report("I3", honest,
         fmt::format("replayed {} archived runs: every generator read is in the declared plan of its tick", replayed));
}

// ---------------------------------------------------------------------------

void planner_behaviour(const Options& o) {
  auto bank = std::make_shared<const ModeBank>(build_nonoverlap(1000, 50, 0.8));
  PolicySpec spec;
  spec.q = 10;
  spec.top_modes = 3;
  spec.rule = DetectionRule::top_sum;
  const int reps = 200;

  // per-mode separation by t = 300, and read concentration by t = 50
  for (const auto mixing : {Mixing::per_tick_uniform, Mixing::simultaneous}) {
    int separated = 0;
    double support = 0, cumulative = 0;
    for (int r = 0; r < reps; ++r) {
      const auto seed = derive_seed(o.seed, 10, r);
      ScenarioSpec scen;
      scen.num_true_modes = 3;
      scen.mixing = mixing;
      const auto truth = draw_true_modes(scen, bank->size(), derive_seed(seed, kTruthStream));
      StreamGenerator gen(bank, 0, truth, mixing, 1.0, derive_seed(seed, kDataStream));
      gen.enable_access_log();
      auto det = make_detector(spec, bank, derive_seed(seed, kPolicyStream));
      for (std::size_t t = 1; t <= 300; ++t) {
        det->observe(gen.observe(t, det->plan()));
        if (t == 50) {
          support += true_support_fraction(*bank, gen.access_log(), truth, 49, 50);
          cumulative += true_support_fraction(*bank, gen.access_log(), truth, 0, 50);
        }
      }
      const auto v = det->values();
      double lowest_true = INFINITY, highest_other = -INFINITY;
      for (std::size_t k = 0; k < v.size(); ++k) {
        if (std::find(truth.begin(), truth.end(), k) != truth.end())
          lowest_true = std::min(lowest_true, v[k]);
        else
          highest_other = std::max(highest_other, v[k]);
      }
      separated += lowest_true > highest_other;
    }
    const double frac = double(separated) / reps;
    const bool stated = mixing == Mixing::per_tick_uniform;
    report(stated ? "I4" : "I5", frac >= 0.95,
           fmt::format("3 true modes, {} mixing: every true r above every other r at t=300 in {:.3f} >= 0.95 of {} reps",
                       to_string(mixing), frac, reps));
    report(stated ? "I6" : "I7", support / reps >= 0.70,
           fmt::format("3 true modes, {} mixing: {:.3f} >= 0.70 of the reads at t=50 on true-mode support "
                       "(cumulative over (0, 50]: {:.3f})",
                       to_string(mixing), support / reps, cumulative / reps));
  }

  // null read histogram
  std::size_t worst = 0;
  for (int r = 0; r < 5; ++r) {
    const auto seed = derive_seed(o.seed, 11, r);
    auto gen = StreamGenerator::in_control(bank, derive_seed(seed, kDataStream));
    gen.enable_access_log();
    auto det = make_detector(spec, bank, derive_seed(seed, kPolicyStream));
    for (std::size_t t = 1; t <= 2000; ++t) det->observe(gen.observe(t, det->plan()));
    std::vector<std::size_t> hits(bank->dim(), 0);
    for (const auto& [t, j] : gen.access_log().reads) ++hits[j];
    worst = std::max(worst, *std::max_element(hits.begin(), hits.end()));
  }
  const double uniform = 2000.0 * 10 / 1000;
  report("I8", double(worst) <= 3 * uniform,
         fmt::format("null 2000-tick runs: max reads of one coordinate {} <= 3 x uniform {:.0f} (worst of 5 runs)", worst,
                     3 * uniform));
}

bool wanted(const Options& o, const std::string& group) {
  return o.only.empty() || std::find(o.only.begin(), o.only.end(), group) != o.only.end();
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"acceptance criteria"};
  app.add_option("--workers", o.workers);
  app.add_option("--seed", o.seed);
  app.add_option("--cache", o.cache, "calibration cache file");
  app.add_option("--out", o.out, "directory for the determinism archives");
  app.add_option("--only", o.only, "groups to run: benchmark, toy, sort, reduction, martingale, determinism, planner");
  app.add_option("--known-red", o.known_red, "line ids expected to fail");
  CLI11_PARSE(app, argc, argv);

  const auto t0 = std::chrono::steady_clock::now();
  try {
    std::vector<Sweep> calibrated;
    if (wanted(o, "toy")) two_mode_toy(o);
    if (wanted(o, "sort")) plan_sort_optimality(o);
    if (wanted(o, "reduction")) per_sensor_reduction(o);
    if (wanted(o, "martingale")) null_martingale(o);
    if (wanted(o, "planner")) planner_behaviour(o);
    if (wanted(o, "benchmark")) benchmark_criteria(o, calibrated);
    if (wanted(o, "determinism")) determinism(o);
  } catch (const std::exception& e) {
    fmt::print("FAIL run: {}\n", e.what());
    return 1;
  }

  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
    auto key = [](const std::string& id) { return id[0] == 'I' ? 100 + std::stoi(id.substr(1)) : std::stoi(id); };
    return key(a.id) < key(b.id);
  });
  fmt::print("\nsummary ({:.0f} s):\n", seconds_since(t0));
  int unexpected = 0;
  for (const auto& l : lines) {
    const bool red_expected = std::find(o.known_red.begin(), o.known_red.end(), l.id) != o.known_red.end();
    std::string tag;
    if (!l.pass && red_expected) tag = "  (known red)";
    if (!l.pass && !red_expected) tag = "  (unexpected)", ++unexpected;
    if (l.pass && red_expected) tag = "  (listed as known red but passed; update the list)", ++unexpected;
    fmt::print("{} {}{}\n", l.pass ? "PASS" : "FAIL", l.id, tag);
  }
  return unexpected == 0 ? 0 : 1;
}
