#include "mtssrp/model.hpp"

#include <algorithm>
#include <cmath>
#include <list>
#include <map>
#include <mutex>
#include <numbers>

#include <Eigen/Cholesky>
#include <fmt/format.h>

namespace mtssrp {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 * pi)

}  // namespace

double UnivariateGaussian::log_pdf(double x) const noexcept {
  const double d = x - mean;
  return -kHalfLog2Pi - 0.5 * std::log(variance) - d * d / (2.0 * variance);
}

double coordinate_llr(const UnivariateGaussian& alt, const UnivariateGaussian& base, double x) noexcept {
  return alt.log_pdf(x) - base.log_pdf(x);
}

void Observation::validate(std::size_t dim) const {
  if (indices.size() != values.size()) {
    throw ModelError(fmt::format("observation has {} indices but {} values", indices.size(), values.size()));
  }
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= dim) {
      throw ModelError(fmt::format("observed index {} out of range for dimension {}", indices[i], dim));
    }
    if (i > 0 && indices[i] <= indices[i - 1]) {
      throw ModelError("observed indices must be strictly increasing");
    }
  }
}

// Small LRU of sub-block factors. Index sets repeat heavily once the planner
// settles on a region, so even a few dozen entries catch most calls.
struct GaussianModel::SubblockCache {
  struct Entry {
    Eigen::MatrixXd lower;
    double log_det = 0.0;
  };

  static constexpr std::size_t kCapacity = 64;

  std::mutex mutex;
  std::list<std::vector<std::size_t>> order;
  std::map<std::vector<std::size_t>, std::pair<Entry, std::list<std::vector<std::size_t>>::iterator>> entries;

  std::optional<Entry> find(const std::vector<std::size_t>& key) {
    std::lock_guard lock(mutex);
    auto it = entries.find(key);
    if (it == entries.end()) return std::nullopt;
    order.splice(order.begin(), order, it->second.second);
    return it->second.first;
  }

  void insert(const std::vector<std::size_t>& key, Entry entry) {
    std::lock_guard lock(mutex);
    if (entries.contains(key)) return;
    order.push_front(key);
    entries.emplace(key, std::make_pair(std::move(entry), order.begin()));
    if (entries.size() > kCapacity) {
      entries.erase(order.back());
      order.pop_back();
    }
  }
};

GaussianModel GaussianModel::diagonal(Eigen::VectorXd mean, Eigen::VectorXd variances) {
  if (mean.size() != variances.size()) {
    throw ModelError(fmt::format("mean has length {} but variances have length {}", mean.size(), variances.size()));
  }
  if (mean.size() == 0) throw ModelError("model dimension must be positive");
  for (Eigen::Index j = 0; j < variances.size(); ++j) {
    if (!(variances[j] > 0.0) || !std::isfinite(variances[j])) {
      throw ModelError(fmt::format("variance at coordinate {} must be positive and finite", j));
    }
  }
  GaussianModel m;
  m.mean_ = std::move(mean);
  m.variances_ = std::move(variances);
  return m;
}

GaussianModel GaussianModel::full(Eigen::VectorXd mean, Eigen::MatrixXd covariance) {
  if (covariance.rows() != covariance.cols() || covariance.rows() != mean.size()) {
    throw ModelError("covariance must be square with the same dimension as the mean");
  }
  if (mean.size() == 0) throw ModelError("model dimension must be positive");
  const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ModelError("covariance must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) throw ModelError("covariance is not positive definite");
  Eigen::MatrixXd lower = llt.matrixL();
  for (Eigen::Index j = 0; j < lower.rows(); ++j) {
    if (!(lower(j, j) > 0.0)) throw ModelError("covariance is not positive definite");
  }
  GaussianModel m;
  m.mean_ = std::move(mean);
  m.variances_ = covariance.diagonal();
  m.cholesky_ = std::move(lower);
  m.covariance_ = std::move(covariance);
  m.cache_ = std::make_shared<SubblockCache>();
  return m;
}

Eigen::MatrixXd GaussianModel::covariance() const {
  if (covariance_) return *covariance_;
  return variances_.asDiagonal();
}

double GaussianModel::covariance_at(std::size_t a, std::size_t b) const noexcept {
  const auto ia = static_cast<Eigen::Index>(a);
  if (covariance_) return (*covariance_)(ia, static_cast<Eigen::Index>(b));
  return a == b ? variances_[ia] : 0.0;
}

const Eigen::MatrixXd& GaussianModel::cholesky_factor() const {
  if (!covariance_) throw ModelError("cholesky_factor() requires a full-covariance model");
  return cholesky_;
}

double GaussianModel::marginal_log_density(std::span<const std::size_t> indices, std::span<const double> values) const {
  if (indices.size() != values.size()) throw ModelError("indices and values must have equal length");
  if (indices.empty()) return 0.0;
  if (!covariance_) {
    double total = 0.0;
    for (std::size_t i = 0; i < indices.size(); ++i) total += coordinate(indices[i]).log_pdf(values[i]);
    return total;
  }

  const auto n = static_cast<Eigen::Index>(indices.size());
  std::vector<std::size_t> key(indices.begin(), indices.end());
  auto entry = cache_->find(key);
  if (!entry) {
    Eigen::MatrixXd block(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index b = 0; b < n; ++b) {
        block(a, b) = (*covariance_)(static_cast<Eigen::Index>(indices[a]), static_cast<Eigen::Index>(indices[b]));
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(block);
    SubblockCache::Entry fresh;
    fresh.lower = llt.matrixL();
    fresh.log_det = 2.0 * fresh.lower.diagonal().array().log().sum();
    cache_->insert(key, fresh);
    entry = std::move(fresh);
  }
  Eigen::VectorXd resid(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    resid[a] = values[static_cast<std::size_t>(a)] - mean_[static_cast<Eigen::Index>(indices[a])];
  }
  entry->lower.triangularView<Eigen::Lower>().solveInPlace(resid);
  return -static_cast<double>(n) * kHalfLog2Pi - 0.5 * entry->log_det - 0.5 * resid.squaredNorm();
}

bool GaussianModel::same_distribution(const GaussianModel& other) const {
  if (dim() != other.dim() || is_diagonal() != other.is_diagonal()) return false;
  if (mean_ != other.mean_) return false;
  if (covariance_) return *covariance_ == *other.covariance_;
  return variances_ == other.variances_;
}

Eigen::VectorXd GaussianModel::sample(Rng& rng) const {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(mean_.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = normal(rng);
  if (covariance_) return mean_ + cholesky_.triangularView<Eigen::Lower>() * z;
  return mean_ + (variances_.array().sqrt() * z.array()).matrix();
}

ModeBank::ModeBank(GaussianModel base, std::vector<GaussianModel> modes, std::vector<std::string> labels)
    : base_(std::move(base)), modes_(std::move(modes)), labels_(std::move(labels)) {
  if (modes_.empty()) throw ModelError("a mode bank needs at least one failure mode");
  if (labels_.empty()) {
    for (std::size_t k = 0; k < modes_.size(); ++k) labels_.push_back(fmt::format("mode_{}", k));
  }
  if (labels_.size() != modes_.size()) throw ModelError("one label per failure mode is required");

  diagonal_ = base_.is_diagonal();
  for (std::size_t k = 0; k < modes_.size(); ++k) {
    if (modes_[k].dim() != base_.dim()) {
      throw ModelError(fmt::format("mode {} has dimension {} but the base has {}", k, modes_[k].dim(), base_.dim()));
    }
    if (modes_[k].same_distribution(base_)) {
      throw ModelError(fmt::format("mode {} is identical to the in-control model", k));
    }
    diagonal_ = diagonal_ && modes_[k].is_diagonal();
  }

  if (!diagonal_) return;
  supports_.resize(modes_.size());
  terms_.resize(dim());
  for (std::size_t j = 0; j < dim(); ++j) {
    const auto base_j = base_.coordinate(j);
    for (std::size_t k = 0; k < modes_.size(); ++k) {
      const auto alt = modes_[k].coordinate(j);
      if (alt == base_j) continue;
      supports_[k].push_back(j);
      terms_[j].push_back({k, alt});
    }
  }
}

std::size_t ModeBank::dominant_mode(std::size_t j) const {
  std::size_t best = 0;
  double best_shift = -1.0;
  const auto jj = static_cast<Eigen::Index>(j);
  for (std::size_t k = 0; k < modes_.size(); ++k) {
    const double shift = std::abs(modes_[k].mean()[jj] - base_.mean()[jj]);
    if (shift > best_shift) {
      best_shift = shift;
      best = k;
    }
  }
  return best;
}

double marginal_log_density(const GaussianModel& model, const Observation& obs) {
  obs.validate(model.dim());
  return model.marginal_log_density(obs.indices, obs.values);
}

double log_likelihood_ratio(const ModeBank& bank, std::size_t k, const Observation& obs) {
  if (k >= bank.size()) throw ModelError(fmt::format("mode index {} out of range (K = {})", k, bank.size()));
  obs.validate(bank.dim());
  const auto& mode = bank.mode(k);
  if (bank.is_diagonal()) {
    // Coordinates where the two marginals coincide contribute exactly zero
    // and are skipped, so unaffected coordinates never perturb the sum.
    double total = 0.0;
    for (std::size_t i = 0; i < obs.indices.size(); ++i) {
      const std::size_t j = obs.indices[i];
      const auto alt = mode.coordinate(j);
      const auto base = bank.base().coordinate(j);
      if (alt == base) continue;
      total += coordinate_llr(alt, base, obs.values[i]);
    }
    return total;
  }
  return mode.marginal_log_density(obs.indices, obs.values) - bank.base().marginal_log_density(obs.indices, obs.values);
}

void log_likelihood_ratios(const ModeBank& bank, const Observation& obs, std::span<double> out) {
  if (out.size() != bank.size()) throw ModelError("output span must have one slot per mode");
  obs.validate(bank.dim());
  std::fill(out.begin(), out.end(), 0.0);
  if (!bank.is_diagonal()) {
    const double base = bank.base().marginal_log_density(obs.indices, obs.values);
    for (std::size_t k = 0; k < bank.size(); ++k) {
      out[k] = bank.mode(k).marginal_log_density(obs.indices, obs.values) - base;
    }
    return;
  }
  for (std::size_t i = 0; i < obs.indices.size(); ++i) {
    const std::size_t j = obs.indices[i];
    const auto base = bank.base().coordinate(j);
    for (const auto& term : bank.coordinate_terms(j)) {
      out[term.mode] += coordinate_llr(term.alt, base, obs.values[i]);
    }
  }
}

Eigen::VectorXd sample_mode(const ModeBank& bank, std::size_t k, Rng& rng) {
  return bank.mode(k).sample(rng);
}

}  // namespace mtssrp
