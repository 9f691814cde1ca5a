#include "mtssrp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace mtssrp {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!obj.is_object()) throw ConfigError(fmt::format("{}: expected an object", where));
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(fmt::format("{}: unknown key '{}'", where, key));
  }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("bad value for '{}': {}", key, e.what()));
  }
}

ScenarioSpec parse_scenario(const json& j) {
  check_keys(j, {"kind", "p", "K", "grid", "knots", "bank_file", "delta", "bank_delta", "change_time", "true_modes",
                 "num_true_modes", "mixing"},
             "scenario");
  ScenarioSpec s;
  s.kind = parse_scenario_kind(get_or<std::string>(j, "kind", "nonoverlap"));
  s.p = get_or<std::size_t>(j, "p", s.p);
  s.num_modes = get_or<std::size_t>(j, "K", s.num_modes);
  if (auto g = j.find("grid"); g != j.end() && !g->is_null()) {
    const auto dims = g->get<std::vector<std::size_t>>();
    if (dims.size() != 2) throw ConfigError("scenario.grid must be [rows, cols]");
    s.rows = dims[0];
    s.cols = dims[1];
  }
  s.knots = get_or<std::size_t>(j, "knots", s.knots);
  s.bank_file = get_or<std::string>(j, "bank_file", "");
  s.delta = get_or<double>(j, "delta", s.delta);
  if (auto b = j.find("bank_delta"); b != j.end() && !b->is_null()) s.bank_delta = b->get<double>();
  if (auto c = j.find("change_time"); c != j.end()) {
    if (c->is_string()) {
      if (c->get<std::string>() != "never") throw ConfigError("scenario.change_time must be a count or \"never\"");
      s.change_time = kNoChange;
    } else {
      s.change_time = c->get<std::size_t>();
    }
  }
  s.true_modes = get_or<std::vector<std::size_t>>(j, "true_modes", {});
  s.num_true_modes = get_or<std::size_t>(j, "num_true_modes", s.num_true_modes);
  const bool several = s.true_modes.size() > 1 || (s.true_modes.empty() && s.num_true_modes > 1);
  s.mixing = parse_mixing(get_or<std::string>(j, "mixing", several ? "per_tick_uniform" : "single"));
  return s;
}

json scenario_to_json(const ScenarioSpec& s) {
  json j;
  j["kind"] = to_string(s.kind);
  j["p"] = s.p;
  j["K"] = s.num_modes;
  j["grid"] = {s.rows, s.cols};
  j["knots"] = s.knots;
  j["bank_file"] = s.bank_file;
  j["delta"] = s.delta;
  j["bank_delta"] = s.bank_delta ? json(*s.bank_delta) : json(nullptr);
  j["change_time"] = s.change_time == kNoChange ? json("never") : json(s.change_time);
  j["true_modes"] = s.true_modes;
  j["num_true_modes"] = s.num_true_modes;
  j["mixing"] = to_string(s.mixing);
  return j;
}

PolicySpec parse_policy(const json& j, std::size_t default_q, std::size_t default_ks) {
  check_keys(j, {"id", "kind", "q", "Ks", "rule", "solver", "top_r", "shift", "allowance", "compensation",
                 "exploration"},
             "policy");
  PolicySpec p;
  p.kind = parse_policy_kind(get_or<std::string>(j, "kind", "mtssrp"));
  p.id = get_or<std::string>(j, "id", std::string(to_string(p.kind)));
  p.q = get_or<std::size_t>(j, "q", default_q);
  p.top_modes = get_or<std::size_t>(j, "Ks", default_ks);
  p.rule = parse_detection_rule(get_or<std::string>(j, "rule", "max"));
  p.solver = parse_solver(get_or<std::string>(j, "solver", "sort"));
  p.top_r = get_or<std::size_t>(j, "top_r", 0);
  p.shift = get_or<double>(j, "shift", 0.0);
  p.allowance = get_or<double>(j, "allowance", 0.0);
  p.compensation = get_or<double>(j, "compensation", 0.0);
  p.exploration = get_or<double>(j, "exploration", 0.0);
  return p;
}

json policy_to_json(const PolicySpec& p) {
  return {{"id", p.id},
          {"kind", to_string(p.kind)},
          {"q", p.q},
          {"Ks", p.top_modes},
          {"rule", to_string(p.rule)},
          {"solver", to_string(p.solver)},
          {"top_r", p.top_r},
          {"shift", p.shift},
          {"allowance", p.allowance},
          {"compensation", p.compensation},
          {"exploration", p.exploration}};
}

std::string format_double(double x) { return fmt::format("{}", x); }

std::string join(const std::vector<std::size_t>& v) { return fmt::format("{}", fmt::join(v, ";")); }

std::vector<std::size_t> split_indices(const std::string& text) {
  std::vector<std::size_t> out;
  if (text.empty()) return out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(';', start);
    out.push_back(std::stoull(text.substr(start, end - start)));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto end = line.find(',', start);
    out.push_back(line.substr(start, end - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw std::runtime_error(fmt::format("write failed for {}", path.string()));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

constexpr const char* kRecordsHeader =
    "policy,delta,replication,seed,true_modes,stopping_time,delay,fired,censored,isolated_mode,correct";
constexpr const char* kSummaryHeader =
    "policy,delta,replications,fired,censoring_rate,mean_delay,sd_delay,se_delay,accuracy,sd_accuracy,se_accuracy,"
    "threshold";

}  // namespace

void BenchmarkConfig::validate() const {
  scenario.validate();
  if (policies.empty()) throw ConfigError("at least one policy is required");
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (!(target_arl0 > 1.0)) throw ConfigError("target_arl0 must exceed 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  std::set<std::string> ids;
  for (const auto& p : policies) {
    if (!ids.insert(p.id).second) throw ConfigError(fmt::format("duplicate policy id '{}'", p.id));
    if (p.id.find_first_of(",;\n\"") != std::string::npos)
      throw ConfigError(fmt::format("policy id '{}' contains a reserved character", p.id));
  }
  for (double d : deltas()) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw ConfigError("delta values must be finite and >= 0");
    scenario_at(d).validate();
  }
  for (const auto& [id, a] : calibration.thresholds) {
    if (!ids.count(id)) throw ConfigError(fmt::format("fixed threshold for unknown policy '{}'", id));
  }
  if (!(calibration.tolerance > 0.0 && calibration.tolerance < 0.5)) throw ConfigError("calibration.tolerance must lie in (0, 0.5)");
  if (calibration.replications < 1) throw ConfigError("calibration.replications must be >= 1");
}

std::vector<double> BenchmarkConfig::deltas() const {
  if (delta_grid.empty()) return {scenario.delta};
  return delta_grid;
}

std::size_t BenchmarkConfig::run_horizon() const {
  if (horizon != 0) return horizon;
  return static_cast<std::size_t>(std::ceil(10.0 * target_arl0));
}

ScenarioSpec BenchmarkConfig::scenario_at(double delta) const {
  ScenarioSpec s = scenario;
  s.delta = delta;
  return s;
}

const PolicySpec& BenchmarkConfig::policy(const std::string& id) const {
  for (const auto& p : policies)
    if (p.id == id) return p;
  throw ConfigError(fmt::format("no policy with id '{}'", id));
}

BenchmarkConfig parse_config(const json& doc) {
  check_keys(doc, {"scenario", "policies", "q", "Ks", "target_arl0", "replications", "delta_grid", "horizon",
                   "calibration", "output", "workers", "master_seed"},
             "config");
  BenchmarkConfig cfg;
  try {
    cfg.scenario = parse_scenario(doc.value("scenario", json::object()));
    const auto q = get_or<std::size_t>(doc, "q", 10);
    const auto ks = get_or<std::size_t>(doc, "Ks", 1);
    if (!doc.contains("policies") || !doc["policies"].is_array()) throw ConfigError("config.policies must be a list");
    for (const auto& p : doc["policies"]) cfg.policies.push_back(parse_policy(p, q, ks));
    cfg.target_arl0 = get_or<double>(doc, "target_arl0", cfg.target_arl0);
    cfg.replications = get_or<std::size_t>(doc, "replications", cfg.replications);
    cfg.delta_grid = get_or<std::vector<double>>(doc, "delta_grid", {});
    cfg.horizon = get_or<std::size_t>(doc, "horizon", 0);
    cfg.workers = get_or<std::size_t>(doc, "workers", 1);
    cfg.master_seed = get_or<std::uint64_t>(doc, "master_seed", 0);
    if (auto c = doc.find("calibration"); c != doc.end()) {
      check_keys(*c, {"replications", "tolerance", "max_horizon", "bracket", "cache", "thresholds"}, "calibration");
      auto& cal = cfg.calibration;
      cal.replications = get_or<std::size_t>(*c, "replications", cal.replications);
      cal.tolerance = get_or<double>(*c, "tolerance", cal.tolerance);
      cal.max_horizon = get_or<std::size_t>(*c, "max_horizon", 0);
      if (auto b = c->find("bracket"); b != c->end() && !b->is_null()) {
        const auto v = b->get<std::vector<double>>();
        if (v.size() != 2) throw ConfigError("calibration.bracket must be [low, high]");
        cal.bracket = std::pair{v[0], v[1]};
      }
      cal.cache = get_or<std::string>(*c, "cache", "");
      cal.thresholds = get_or<std::map<std::string, double>>(*c, "thresholds", {});
    }
    if (auto o = doc.find("output"); o != doc.end()) {
      check_keys(*o, {"dir", "trajectories"}, "output");
      cfg.output.dir = get_or<std::string>(*o, "dir", "results");
      cfg.output.trajectories = get_or<std::vector<std::size_t>>(*o, "trajectories", {});
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("malformed config: {}", e.what()));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  try {
    cfg.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

BenchmarkConfig load_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return parse_config(doc);
}

json config_to_json(const BenchmarkConfig& cfg) {
  json j;
  j["scenario"] = scenario_to_json(cfg.scenario);
  j["policies"] = json::array();
  for (const auto& p : cfg.policies) j["policies"].push_back(policy_to_json(p));
  j["target_arl0"] = cfg.target_arl0;
  j["replications"] = cfg.replications;
  j["delta_grid"] = cfg.delta_grid;
  j["horizon"] = cfg.horizon;
  j["workers"] = cfg.workers;
  j["master_seed"] = cfg.master_seed;
  const auto& cal = cfg.calibration;
  j["calibration"] = {{"replications", cal.replications},
                      {"tolerance", cal.tolerance},
                      {"max_horizon", cal.max_horizon},
                      {"bracket", cal.bracket ? json({cal.bracket->first, cal.bracket->second}) : json(nullptr)},
                      {"cache", cal.cache.string()},
                      {"thresholds", cal.thresholds}};
  j["output"] = {{"dir", cfg.output.dir.string()}, {"trajectories", cfg.output.trajectories}};
  return j;
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::string config_hash(const BenchmarkConfig& cfg) {
  json j = config_to_json(cfg);
  j.erase("output");
  j.erase("workers");
  j["calibration"].erase("cache");
  return fnv1a_hex(j.dump());
}

std::string scenario_hash(const ScenarioSpec& spec) {
  json j;
  j["kind"] = to_string(spec.kind);
  j["bank_delta"] = spec.design_delta();
  switch (spec.kind) {
    case ScenarioKind::nonoverlap:
      j["p"] = spec.p;
      j["K"] = spec.num_modes;
      break;
    case ScenarioKind::overlap:
      j["grid"] = {spec.rows, spec.cols};
      j["knots"] = spec.knots;
      break;
    case ScenarioKind::custom:
      j["bank_file"] = fnv1a_hex(read_file(spec.bank_file));
      j.erase("bank_delta");
      break;
  }
  return fnv1a_hex(j.dump());
}

std::string policy_key(const PolicySpec& resolved) {
  json j = policy_to_json(resolved);
  j.erase("id");
  return fmt::format("{}-{}", to_string(resolved.kind), fnv1a_hex(j.dump()));
}

const SummaryRow& SummaryTable::at(const std::string& policy, double delta) const {
  for (const auto& r : rows)
    if (r.policy == policy && r.delta == delta) return r;
  throw std::out_of_range(fmt::format("no summary row for ({}, {})", policy, delta));
}

SummaryTable summarize(const std::vector<RunRecord>& records, const std::vector<ThresholdInfo>& thresholds) {
  struct Group {
    std::string policy;
    double delta;
    RunningStats delay;
    RunningStats correct;
    std::size_t censored = 0;
  };
  std::vector<Group> groups;
  for (const auto& r : records) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const Group& g) { return g.policy == r.policy && g.delta == r.delta; });
    if (it == groups.end()) {
      groups.push_back({r.policy, r.delta, {}, {}, 0});
      it = groups.end() - 1;
    }
    it->delay.add(static_cast<double>(r.delay));
    if (r.fired) it->correct.add(r.correct ? 1.0 : 0.0);
    if (r.censored) ++it->censored;
  }
  SummaryTable table;
  for (const auto& g : groups) {
    SummaryRow row;
    row.policy = g.policy;
    row.delta = g.delta;
    row.replications = g.delay.n;
    row.fired = g.correct.n;
    row.censoring_rate = static_cast<double>(g.censored) / static_cast<double>(g.delay.n);
    row.mean_delay = g.delay.mean;
    row.sd_delay = g.delay.sd();
    row.se_delay = g.delay.se();
    row.accuracy = g.correct.mean;
    row.sd_accuracy = g.correct.sd();
    row.se_accuracy = g.correct.se();
    for (const auto& t : thresholds)
      if (t.policy == g.policy && t.delta == g.delta) row.threshold = t.threshold;
    table.rows.push_back(row);
  }
  return table;
}

std::vector<ThresholdInfo> resolve_thresholds(const BenchmarkConfig& cfg, std::ostream* log) {
  cfg.validate();
  CalibrationCache cache(cfg.calibration.cache);
  std::vector<ThresholdInfo> out;
  bool dirty = false;
  for (double delta : cfg.deltas()) {
    const ScenarioSpec scenario = cfg.scenario_at(delta);
    auto bank = std::make_shared<const ModeBank>(build_bank(scenario));
    for (const auto& policy : cfg.policies) {
      ThresholdInfo info;
      info.policy = policy.id;
      info.delta = delta;
      if (auto fixed = cfg.calibration.thresholds.find(policy.id); fixed != cfg.calibration.thresholds.end()) {
        info.threshold = fixed->second;
        info.source = "fixed";
        out.push_back(info);
        continue;
      }
      const PolicySpec resolved = policy.resolve(*bank);
      const std::string key = CalibrationCache::key(scenario_hash(scenario), policy_key(resolved), cfg.target_arl0);
      std::optional<CalibrationResult> result = cache.find(key);
      info.source = "cache";
      if (!result) {
        CalibrationSpec spec;
        spec.target_arl0 = cfg.target_arl0;
        spec.replications = cfg.calibration.replications;
        spec.max_horizon = cfg.calibration.max_horizon;
        spec.tolerance = cfg.calibration.tolerance;
        spec.bracket = cfg.calibration.bracket;
        spec.workers = cfg.workers;
        spec.seed = derive_seed(cfg.master_seed, kCalibrationStream);
        if (log) *log << fmt::format("calibrating {} at delta={} ...\n", policy.id, delta) << std::flush;
        result = bisect_threshold(spec, resolved, bank);
        cache.store(key, *result);
        dirty = true;
        info.source = "calibrated";
      }
      info.threshold = result->threshold;
      info.arl0 = result->achieved.mean;
      info.arl0_se = result->achieved.se;
      info.converged = result->converged;
      if (log) {
        *log << fmt::format("  {} delta={} A={:.6g} ARL0={:.2f} (se {:.2f}) [{}{}]\n", policy.id, delta, info.threshold,
                            info.arl0, info.arl0_se, info.source, info.converged ? "" : ", not converged");
      }
      out.push_back(info);
    }
  }
  if (dirty) cache.save();
  return out;
}

namespace {

RunRecord simulate(const BenchmarkConfig& cfg, const ScenarioSpec& scenario, std::shared_ptr<const ModeBank> bank,
                   const PolicySpec& policy, double delta, double threshold, std::size_t replication,
                   std::vector<TraceRow>* trace, AccessLog* access) {
  const std::uint64_t rep_seed = derive_seed(cfg.master_seed, kRunStream, replication);
  RunRecord rec;
  rec.policy = policy.id;
  rec.delta = delta;
  rec.replication = replication;
  rec.seed = rep_seed;
  rec.true_modes = draw_true_modes(scenario, bank->size(), derive_seed(rep_seed, kTruthStream));
  StreamGenerator gen(bank, scenario.change_time, rec.true_modes, scenario.mixing, scenario.data_scale(),
                      derive_seed(rep_seed, kDataStream));
  auto detector = make_detector(policy, bank, derive_seed(rep_seed, kPolicyStream));
  RunOptions options;
  options.threshold = threshold;
  options.horizon = cfg.run_horizon();
  options.trace = trace != nullptr;
  options.log_access = access != nullptr;
  RunOutcome out = run_policy(*detector, gen, options);
  rec.stopping_time = out.stopping_time;
  const std::size_t nu = scenario.change_time == kNoChange ? 0 : scenario.change_time;
  rec.delay = out.stopping_time > nu ? out.stopping_time - nu : 0;
  rec.fired = out.fired;
  rec.censored = out.censored;
  rec.isolated_mode = out.isolated_mode;
  rec.correct = out.fired && std::find(rec.true_modes.begin(), rec.true_modes.end(), *out.isolated_mode) !=
                                 rec.true_modes.end();
  if (trace) *trace = std::move(out.trace);
  if (access) *access = std::move(out.access);
  return rec;
}

double threshold_for(const std::vector<ThresholdInfo>& thresholds, const std::string& policy, double delta) {
  for (const auto& t : thresholds)
    if (t.policy == policy && t.delta == delta) return t.threshold;
  throw ConfigError(fmt::format("no threshold for policy '{}' at delta={}", policy, delta));
}

}  // namespace

RunRecord run_replication(const BenchmarkConfig& cfg, const PolicySpec& policy, double delta, double threshold,
                          std::size_t replication, std::vector<TraceRow>* trace, AccessLog* access) {
  const ScenarioSpec scenario = cfg.scenario_at(delta);
  auto bank = std::make_shared<const ModeBank>(build_bank(scenario));
  return simulate(cfg, scenario, bank, policy, delta, threshold, replication, trace, access);
}

BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, std::ostream* log) {
  return run_benchmark(cfg, resolve_thresholds(cfg, log), log);
}

BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, const std::vector<ThresholdInfo>& thresholds,
                              std::ostream* log) {
  cfg.validate();
  BenchmarkResult result;
  result.thresholds = thresholds;
  const std::set<std::size_t> traced(cfg.output.trajectories.begin(), cfg.output.trajectories.end());
  for (double delta : cfg.deltas()) {
    const ScenarioSpec scenario = cfg.scenario_at(delta);
    auto bank = std::make_shared<const ModeBank>(build_bank(scenario));
    for (const auto& policy : cfg.policies) {
      const double threshold = threshold_for(thresholds, policy.id, delta);
      std::vector<RunRecord> records(cfg.replications);
      std::vector<std::vector<TraceRow>> traces(cfg.replications);
      parallel_for(cfg.replications, cfg.workers, [&](std::size_t r) {
        records[r] = simulate(cfg, scenario, bank, policy, delta, threshold, r, traced.count(r) ? &traces[r] : nullptr,
                              nullptr);
      });
      for (std::size_t r : traced)
        if (r < cfg.replications) result.trajectories[r].emplace_back(records[r], std::move(traces[r]));
      result.records.insert(result.records.end(), records.begin(), records.end());
      if (log) {
        const auto part = summarize(records, thresholds).rows.front();
        *log << fmt::format("  {} delta={}: delay {:.2f} (sd {:.2f}), accuracy {:.3f}, censored {:.3f}\n", policy.id,
                            delta, part.mean_delay, part.sd_delay, part.accuracy, part.censoring_rate)
             << std::flush;
      }
    }
  }
  result.table = summarize(result.records, thresholds);
  return result;
}

std::string records_csv(const std::vector<RunRecord>& records) {
  std::string out = kRecordsHeader;
  out += '\n';
  for (const auto& r : records) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.policy, format_double(r.delta), r.replication, r.seed,
                       join(r.true_modes), r.stopping_time, r.delay, r.fired ? 1 : 0, r.censored ? 1 : 0,
                       r.isolated_mode ? std::to_string(*r.isolated_mode) : std::string(), r.correct ? 1 : 0);
  }
  return out;
}

std::vector<RunRecord> parse_records_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kRecordsHeader) throw std::invalid_argument("records.csv: unexpected header");
  std::vector<RunRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 11) throw std::invalid_argument(fmt::format("records.csv: bad row '{}'", line));
    RunRecord r;
    r.policy = f[0];
    r.delta = std::stod(f[1]);
    r.replication = std::stoull(f[2]);
    r.seed = std::stoull(f[3]);
    r.true_modes = split_indices(f[4]);
    r.stopping_time = std::stoull(f[5]);
    r.delay = std::stoull(f[6]);
    r.fired = f[7] == "1";
    r.censored = f[8] == "1";
    if (!f[9].empty()) r.isolated_mode = std::stoull(f[9]);
    r.correct = f[10] == "1";
    out.push_back(std::move(r));
  }
  return out;
}

std::string summary_csv(const SummaryTable& table) {
  std::string out = kSummaryHeader;
  out += '\n';
  for (const auto& r : table.rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", r.policy, format_double(r.delta), r.replications,
                       r.fired, format_double(r.censoring_rate), format_double(r.mean_delay),
                       format_double(r.sd_delay), format_double(r.se_delay), format_double(r.accuracy),
                       format_double(r.sd_accuracy), format_double(r.se_accuracy), format_double(r.threshold));
  }
  return out;
}

std::string trajectory_csv(const std::vector<std::pair<RunRecord, std::vector<TraceRow>>>& runs) {
  std::string out = "policy,delta,t,statistic,plan,ranking\n";
  for (const auto& [rec, rows] : runs) {
    for (const auto& row : rows) {
      out += fmt::format("{},{},{},{},{},{}\n", rec.policy, format_double(rec.delta), row.t,
                         format_double(row.statistic), join(row.plan), join(row.ranking));
    }
  }
  return out;
}

json summary_json(const BenchmarkConfig& cfg, const BenchmarkResult& result) {
  json doc;
  doc["config"] = config_to_json(cfg);
  doc["config_hash"] = config_hash(cfg);
  doc["thresholds"] = json::array();
  for (const auto& t : result.thresholds) {
    doc["thresholds"].push_back({{"policy", t.policy},
                                 {"delta", t.delta},
                                 {"threshold", t.threshold},
                                 {"arl0", t.arl0},
                                 {"arl0_se", t.arl0_se},
                                 {"converged", t.converged},
                                 {"source", t.source}});
  }
  doc["summary"] = json::array();
  for (const auto& r : result.table.rows) {
    doc["summary"].push_back({{"policy", r.policy},
                              {"delta", r.delta},
                              {"replications", r.replications},
                              {"fired", r.fired},
                              {"censoring_rate", r.censoring_rate},
                              {"mean_delay", r.mean_delay},
                              {"sd_delay", r.sd_delay},
                              {"se_delay", r.se_delay},
                              {"accuracy", r.accuracy},
                              {"sd_accuracy", r.sd_accuracy},
                              {"se_accuracy", r.se_accuracy},
                              {"threshold", r.threshold}});
  }
  return doc;
}

SummaryTable summary_from_json(const json& doc) {
  SummaryTable table;
  for (const auto& j : doc.at("summary")) {
    SummaryRow r;
    r.policy = j.at("policy").get<std::string>();
    r.delta = j.at("delta").get<double>();
    r.replications = j.at("replications").get<std::size_t>();
    r.fired = j.at("fired").get<std::size_t>();
    r.censoring_rate = j.at("censoring_rate").get<double>();
    r.mean_delay = j.at("mean_delay").get<double>();
    r.sd_delay = j.at("sd_delay").get<double>();
    r.se_delay = j.at("se_delay").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    r.sd_accuracy = j.at("sd_accuracy").get<double>();
    r.se_accuracy = j.at("se_accuracy").get<double>();
    r.threshold = j.at("threshold").get<double>();
    table.rows.push_back(r);
  }
  return table;
}

std::vector<ThresholdInfo> thresholds_from_json(const json& doc) {
  std::vector<ThresholdInfo> out;
  for (const auto& j : doc.at("thresholds")) {
    ThresholdInfo t;
    t.policy = j.at("policy").get<std::string>();
    t.delta = j.at("delta").get<double>();
    t.threshold = j.at("threshold").get<double>();
    t.arl0 = j.at("arl0").get<double>();
    t.arl0_se = j.at("arl0_se").get<double>();
    t.converged = j.at("converged").get<bool>();
    t.source = j.at("source").get<std::string>();
    out.push_back(t);
  }
  return out;
}

void export_results(const BenchmarkConfig& cfg, const BenchmarkResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "summary.csv", summary_csv(result.table));
  write_file(dir / "records.csv", records_csv(result.records));
  write_file(dir / "summary.json", summary_json(cfg, result).dump(2) + "\n");
  for (const auto& [rep, runs] : result.trajectories)
    write_file(dir / fmt::format("trajectory_{}.csv", rep), trajectory_csv(runs));
}

ReplayResult replay(const BenchmarkConfig& cfg, const std::vector<ThresholdInfo>& thresholds, const std::string& policy,
                    double delta, std::size_t replication) {
  const PolicySpec& spec = cfg.policy(policy);
  ReplayResult out;
  out.record = run_replication(cfg, spec, delta, threshold_for(thresholds, policy, delta), replication, &out.trace,
                               &out.access);
  return out;
}

ReplayResult replay_archive(const std::filesystem::path& dir, const std::string& policy, double delta,
                            std::size_t replication, const BenchmarkConfig* expected) {
  json doc;
  try {
    doc = json::parse(read_file(dir / "summary.json"));
  } catch (const json::exception& e) {
    throw ReplayError(fmt::format("unreadable archive {}: {}", dir.string(), e.what()));
  }
  const BenchmarkConfig cfg = parse_config(doc.at("config"));
  const std::string stored = doc.at("config_hash").get<std::string>();
  if (config_hash(cfg) != stored) throw ReplayError("archive config does not match its recorded hash");
  if (expected && config_hash(*expected) != stored)
    throw ReplayError(fmt::format("config hash mismatch: archive {} vs given {}", stored, config_hash(*expected)));
  ReplayResult out = replay(cfg, thresholds_from_json(doc), policy, delta, replication);
  const auto records = parse_records_csv(read_file(dir / "records.csv"));
  auto it = std::find_if(records.begin(), records.end(), [&](const RunRecord& r) {
    return r.policy == policy && r.delta == delta && r.replication == replication;
  });
  if (it == records.end())
    throw ReplayError(fmt::format("archive has no record for ({}, {}, {})", policy, delta, replication));
  if (!(*it == out.record)) throw ReplayError("replayed run differs from the archived record");
  return out;
}

double true_support_fraction(const ModeBank& bank, const AccessLog& access, std::span<const std::size_t> true_modes,
                             std::size_t change_time, std::size_t until) {
  std::vector<bool> on_support(bank.dim(), false);
  for (auto k : true_modes) {
    const Eigen::VectorXd diff = bank.mode(k).mean() - bank.base().mean();
    for (std::size_t j = 0; j < bank.dim(); ++j)
      if (diff[static_cast<Eigen::Index>(j)] != 0.0) on_support[j] = true;
  }
  std::size_t hits = 0;
  std::size_t total = 0;
  for (const auto& [t, j] : access.reads) {
    if (t <= change_time || t > until) continue;
    ++total;
    if (on_support[j]) ++hits;
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace mtssrp
