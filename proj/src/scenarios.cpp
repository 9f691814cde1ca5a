#include "mtssrp/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

#include "mtssrp/planner.hpp"
#include "mtssrp/rng.hpp"

namespace mtssrp {

namespace {

constexpr std::uint64_t kMixingKey = 0x6d6978696e67ULL;
constexpr std::uint64_t kTrueModeKey = 0x74727565ULL;

}  // namespace

ScenarioKind parse_scenario_kind(std::string_view name) {
  if (name == "nonoverlap") return ScenarioKind::nonoverlap;
  if (name == "overlap") return ScenarioKind::overlap;
  if (name == "custom") return ScenarioKind::custom;
  throw std::invalid_argument(fmt::format("unknown scenario kind '{}'", name));
}

std::string_view to_string(ScenarioKind kind) noexcept {
  switch (kind) {
    case ScenarioKind::nonoverlap: return "nonoverlap";
    case ScenarioKind::overlap: return "overlap";
    case ScenarioKind::custom: return "custom";
  }
  return "?";
}

Mixing parse_mixing(std::string_view name) {
  if (name == "single") return Mixing::single;
  if (name == "per_tick_uniform") return Mixing::per_tick_uniform;
  if (name == "simultaneous") return Mixing::simultaneous;
  throw std::invalid_argument(fmt::format("unknown mixing '{}'", name));
}

std::string_view to_string(Mixing mixing) noexcept {
  switch (mixing) {
    case Mixing::single: return "single";
    case Mixing::per_tick_uniform: return "per_tick_uniform";
    case Mixing::simultaneous: return "simultaneous";
  }
  return "?";
}

double ScenarioSpec::design_delta() const { return bank_delta.value_or(delta); }

double ScenarioSpec::data_scale() const {
  if (kind == ScenarioKind::custom && !bank_delta) return 1.0;
  return delta / design_delta();
}

void ScenarioSpec::validate() const {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw std::invalid_argument("delta must be finite and >= 0");
  if (bank_delta && (!(*bank_delta > 0.0) || !std::isfinite(*bank_delta)))
    throw std::invalid_argument("bank_delta must be finite and > 0");
  if (kind != ScenarioKind::custom && !(design_delta() > 0.0))
    throw std::invalid_argument("delta = 0 needs an explicit bank_delta to build the mode bank");
  if (kind == ScenarioKind::nonoverlap) {
    if (num_modes == 0 || p == 0 || p % num_modes != 0)
      throw std::invalid_argument(fmt::format("p = {} is not divisible by K = {}", p, num_modes));
  }
  if (kind == ScenarioKind::overlap && (knots < 2 || rows == 0 || cols == 0))
    throw std::invalid_argument("overlap scenario needs knots >= 2 and a non-empty grid");
  if (kind == ScenarioKind::custom && bank_file.empty()) throw std::invalid_argument("custom scenario needs bank_file");
  if (true_modes.empty() && num_true_modes == 0) throw std::invalid_argument("num_true_modes must be >= 1");
  if (mixing == Mixing::single && (true_modes.size() > 1 || (true_modes.empty() && num_true_modes > 1)))
    throw std::invalid_argument("single mixing takes exactly one true mode");
}

ModeBank build_nonoverlap(std::size_t p, std::size_t num_modes, double delta) {
  if (num_modes == 0 || p % num_modes != 0)
    throw std::invalid_argument(fmt::format("p = {} is not divisible by K = {}", p, num_modes));
  const std::size_t block = p / num_modes;
  const auto n = static_cast<Eigen::Index>(p);
  GaussianModel base = GaussianModel::diagonal(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n));
  std::vector<GaussianModel> modes;
  std::vector<std::string> labels;
  modes.reserve(num_modes);
  for (std::size_t k = 0; k < num_modes; ++k) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    mean.segment(static_cast<Eigen::Index>(k * block), static_cast<Eigen::Index>(block)).setConstant(delta);
    modes.push_back(GaussianModel::diagonal(std::move(mean), Eigen::VectorXd::Ones(n)));
    labels.push_back(fmt::format("row_{}", k));
  }
  return ModeBank(std::move(base), std::move(modes), std::move(labels));
}

Eigen::MatrixXd bspline_basis_on_grid(std::size_t count, std::size_t cells, std::size_t degree) {
  if (count < 2 || cells == 0) throw std::invalid_argument("need at least two basis functions and one cell");
  degree = std::min(degree, count - 1);
  const std::size_t spans = count - degree;
  // open uniform knot vector: degree+1 zeros, interior 1..spans-1, degree+1 copies of spans
  std::vector<double> knots;
  for (std::size_t i = 0; i < degree; ++i) knots.push_back(0.0);
  for (std::size_t i = 0; i <= spans; ++i) knots.push_back(static_cast<double>(i));
  for (std::size_t i = 0; i < degree; ++i) knots.push_back(static_cast<double>(spans));

  Eigen::MatrixXd out(static_cast<Eigen::Index>(cells), static_cast<Eigen::Index>(count));
  std::vector<double> n(knots.size() - 1);
  for (std::size_t c = 0; c < cells; ++c) {
    const double u = (static_cast<double>(c) + 0.5) / static_cast<double>(cells) * static_cast<double>(spans);
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) n[i] = (knots[i] <= u && u < knots[i + 1]) ? 1.0 : 0.0;
    for (std::size_t d = 1; d <= degree; ++d) {
      for (std::size_t i = 0; i + d + 1 < knots.size(); ++i) {
        double v = 0.0;
        const double left = knots[i + d] - knots[i];
        const double right = knots[i + d + 1] - knots[i + 1];
        if (left > 0.0) v += (u - knots[i]) / left * n[i];
        if (right > 0.0) v += (knots[i + d + 1] - u) / right * n[i + 1];
        n[i] = v;
      }
    }
    for (std::size_t i = 0; i < count; ++i) out(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) = n[i];
  }
  return out;
}

ModeBank build_overlap(std::size_t rows, std::size_t cols, std::size_t knots, double delta) {
  if (knots < 2) throw std::invalid_argument("knots must be >= 2");
  const Eigen::MatrixXd by_row = bspline_basis_on_grid(knots, rows);
  const Eigen::MatrixXd by_col = bspline_basis_on_grid(knots, cols);
  const auto p = static_cast<Eigen::Index>(rows * cols);
  GaussianModel base = GaussianModel::diagonal(Eigen::VectorXd::Zero(p), Eigen::VectorXd::Ones(p));
  std::vector<GaussianModel> modes;
  std::vector<std::string> labels;
  for (std::size_t a = 0; a < knots; ++a) {
    for (std::size_t b = 0; b < knots; ++b) {
      Eigen::VectorXd bump(p);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          bump[static_cast<Eigen::Index>(r * cols + c)] =
              by_row(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(a)) *
              by_col(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(b));
      const double peak = bump.maxCoeff();
      Eigen::VectorXd mean(p);
      for (Eigen::Index j = 0; j < p; ++j) mean[j] = delta * (bump[j] / peak);
      modes.push_back(GaussianModel::diagonal(std::move(mean), Eigen::VectorXd::Ones(p)));
      labels.push_back(fmt::format("knot_{}_{}", a, b));
    }
  }
  return ModeBank(std::move(base), std::move(modes), std::move(labels));
}

namespace {

GaussianModel fit_diagonal(const Eigen::MatrixXd& samples, double floor) {
  if (samples.rows() < 2) throw std::invalid_argument("need at least two samples per model");
  const Eigen::VectorXd mean = samples.colwise().mean().transpose();
  Eigen::VectorXd var(samples.cols());
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    const double ss = (samples.col(j).array() - mean[j]).square().sum();
    var[j] = std::max(floor, ss / static_cast<double>(samples.rows() - 1));
  }
  return GaussianModel::diagonal(mean, var);
}

std::vector<double> to_list(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_list(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json model_json(const GaussianModel& m) {
  nlohmann::json out;
  out["mean"] = to_list(m.mean());
  if (m.is_diagonal()) {
    out["variance"] = to_list(m.variances());
  } else {
    const Eigen::MatrixXd cov = m.covariance();
    auto rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < cov.rows(); ++r) rows.push_back(to_list(cov.row(r).transpose()));
    out["covariance"] = std::move(rows);
  }
  return out;
}

GaussianModel model_from_json(const nlohmann::json& j) {
  Eigen::VectorXd mean = from_list(j.at("mean"));
  if (j.contains("covariance")) {
    const auto& rows = j.at("covariance");
    Eigen::MatrixXd cov(mean.size(), mean.size());
    if (rows.size() != static_cast<std::size_t>(mean.size())) throw std::invalid_argument("covariance shape mismatch");
    for (Eigen::Index r = 0; r < mean.size(); ++r) {
      const Eigen::VectorXd row = from_list(rows.at(static_cast<std::size_t>(r)));
      if (row.size() != mean.size()) throw std::invalid_argument("covariance shape mismatch");
      cov.row(r) = row.transpose();
    }
    return GaussianModel::full(std::move(mean), std::move(cov));
  }
  return GaussianModel::diagonal(std::move(mean), from_list(j.at("variance")));
}

}  // namespace

ModeBank bank_from_samples(const Eigen::MatrixXd& in_control, const std::vector<Eigen::MatrixXd>& mode_samples,
                           std::vector<std::string> labels, double variance_floor) {
  if (!(variance_floor > 0.0)) throw std::invalid_argument("variance floor must be positive");
  GaussianModel base = fit_diagonal(in_control, variance_floor);
  std::vector<GaussianModel> modes;
  modes.reserve(mode_samples.size());
  for (const auto& s : mode_samples) {
    if (s.cols() != in_control.cols()) throw std::invalid_argument("sample dimension mismatch");
    modes.push_back(fit_diagonal(s, variance_floor));
  }
  return ModeBank(std::move(base), std::move(modes), std::move(labels));
}

ModeBank load_bank_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open bank file {}", path.string()));
  nlohmann::json doc;
  try {
    in >> doc;
    GaussianModel base = model_from_json(doc.at("base"));
    std::vector<GaussianModel> modes;
    std::vector<std::string> labels;
    for (const auto& m : doc.at("modes")) {
      modes.push_back(model_from_json(m));
      labels.push_back(m.value("label", fmt::format("mode_{}", labels.size())));
    }
    return ModeBank(std::move(base), std::move(modes), std::move(labels));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(fmt::format("bad bank file {}: {}", path.string(), e.what()));
  }
}

void save_bank_file(const ModeBank& bank, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["base"] = model_json(bank.base());
  auto modes = nlohmann::json::array();
  for (std::size_t k = 0; k < bank.size(); ++k) {
    auto m = model_json(bank.mode(k));
    m["label"] = bank.label(k);
    modes.push_back(std::move(m));
  }
  doc["modes"] = std::move(modes);
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write bank file {}", path.string()));
  out << doc.dump(1) << '\n';
}

ModeBank build_bank(const ScenarioSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case ScenarioKind::nonoverlap: return build_nonoverlap(spec.p, spec.num_modes, spec.design_delta());
    case ScenarioKind::overlap: return build_overlap(spec.rows, spec.cols, spec.knots, spec.design_delta());
    case ScenarioKind::custom: return load_bank_file(spec.bank_file);
  }
  throw std::logic_error("unreachable");
}

std::vector<std::size_t> draw_true_modes(const ScenarioSpec& spec, std::size_t num_modes, std::uint64_t seed) {
  if (!spec.true_modes.empty()) {
    for (auto k : spec.true_modes)
      if (k >= num_modes) throw std::invalid_argument(fmt::format("true mode {} out of range [0, {})", k, num_modes));
    return spec.true_modes;
  }
  if (spec.num_true_modes > num_modes) throw std::invalid_argument("more true modes than modes");
  return plan_random(num_modes, spec.num_true_modes, derive_seed(seed, kTrueModeKey)).indices;
}

StreamGenerator::StreamGenerator(std::shared_ptr<const ModeBank> bank, std::size_t change_time,
                                 std::vector<std::size_t> true_modes, Mixing mixing, double data_scale,
                                 std::uint64_t seed)
    : bank_(std::move(bank)),
      change_time_(change_time),
      true_modes_(std::move(true_modes)),
      mixing_(mixing),
      data_scale_(data_scale),
      seed_(seed) {
  if (!bank_) throw std::invalid_argument("null bank");
  if (change_time_ != kNoChange && true_modes_.empty()) throw std::invalid_argument("a change needs true modes");
  for (auto k : true_modes_)
    if (k >= bank_->size()) throw std::invalid_argument(fmt::format("true mode {} out of range", k));
  if (mixing_ == Mixing::single && true_modes_.size() > 1)
    throw std::invalid_argument("single mixing takes exactly one true mode");
  full_cov_ = !bank_->is_diagonal();
}

StreamGenerator StreamGenerator::in_control(std::shared_ptr<const ModeBank> bank, std::uint64_t seed) {
  return StreamGenerator(std::move(bank), kNoChange, {}, Mixing::single, 1.0, seed);
}

std::optional<std::size_t> StreamGenerator::active_mode(std::size_t t) const {
  if (!post_change(t)) return std::nullopt;
  switch (mixing_) {
    case Mixing::single: return true_modes_.front();
    case Mixing::per_tick_uniform:
      return true_modes_[keyed_index(seed_, kMixingKey, t, true_modes_.size())];
    case Mixing::simultaneous: return std::nullopt;
  }
  return std::nullopt;
}

Eigen::VectorXd StreamGenerator::mean_at(std::size_t t) const {
  const Eigen::VectorXd& mu0 = bank_->base().mean();
  if (!post_change(t)) return mu0;
  if (mixing_ == Mixing::simultaneous) {
    Eigen::VectorXd mu = mu0;
    for (auto k : true_modes_) mu += data_scale_ * (bank_->mode(k).mean() - mu0);
    return mu;
  }
  return mu0 + data_scale_ * (bank_->mode(*active_mode(t)).mean() - mu0);
}

double StreamGenerator::value(std::size_t t, std::size_t j) const {
  const auto jj = static_cast<Eigen::Index>(j);
  const double z = keyed_normal(seed_, t, j);
  const GaussianModel& base = bank_->base();
  if (!post_change(t)) return base.mean()[jj] + std::sqrt(base.variances()[jj]) * z;
  if (mixing_ == Mixing::simultaneous) {
    double mu = base.mean()[jj];
    for (auto k : true_modes_) mu += data_scale_ * (bank_->mode(k).mean()[jj] - base.mean()[jj]);
    return mu + std::sqrt(base.variances()[jj]) * z;
  }
  const GaussianModel& m = bank_->mode(*active_mode(t));
  const double mu = base.mean()[jj] + data_scale_ * (m.mean()[jj] - base.mean()[jj]);
  return mu + std::sqrt(m.variances()[jj]) * z;
}

StreamTick StreamGenerator::tick(std::size_t t) const {
  StreamTick out;
  out.t = t;
  out.active_mode = active_mode(t);
  const std::size_t p = dim();
  if (!full_cov_) {
    out.full_x.resize(static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) out.full_x[static_cast<Eigen::Index>(j)] = value(t, j);
    return out;
  }
  if (cached_t_ != t || cached_x_.size() == 0) {
    Eigen::VectorXd z(static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) z[static_cast<Eigen::Index>(j)] = keyed_normal(seed_, t, j);
    const GaussianModel& cov_model =
        (post_change(t) && mixing_ != Mixing::simultaneous) ? bank_->mode(*active_mode(t)) : bank_->base();
    cached_x_ = mean_at(t) + cov_model.cholesky_factor() * z;
    cached_t_ = t;
  }
  out.full_x = cached_x_;
  return out;
}

Observation StreamGenerator::observe(std::size_t t, const SamplingPlan& plan) {
  Observation obs;
  obs.time = t;
  obs.indices = plan.indices;
  obs.values.resize(plan.indices.size());
  if (full_cov_) {
    const StreamTick full = tick(t);
    for (std::size_t i = 0; i < plan.indices.size(); ++i)
      obs.values[i] = full.full_x[static_cast<Eigen::Index>(plan.indices.at(i))];
  } else {
    for (std::size_t i = 0; i < plan.indices.size(); ++i) {
      if (plan.indices[i] >= dim()) throw std::invalid_argument("plan index out of range");
      obs.values[i] = value(t, plan.indices[i]);
    }
  }
  if (log_enabled_)
    for (auto j : plan.indices) log_.reads.emplace_back(t, j);
  return obs;
}

StreamTick generate_tick(const ScenarioSpec& spec, std::shared_ptr<const ModeBank> bank, std::size_t t,
                         std::uint64_t seed) {
  spec.validate();
  std::vector<std::size_t> truth = draw_true_modes(spec, bank->size(), seed);
  StreamGenerator gen(std::move(bank), spec.change_time, std::move(truth), spec.mixing, spec.data_scale(), seed);
  return gen.tick(t);
}

}  // namespace mtssrp
