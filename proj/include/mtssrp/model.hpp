#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mtssrp/rng.hpp"

namespace mtssrp {

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One coordinate of a Gaussian model.
struct UnivariateGaussian {
  double mean = 0.0;
  double variance = 1.0;

  double log_pdf(double x) const noexcept;
  bool operator==(const UnivariateGaussian&) const = default;
};

/// log alt(x) - log base(x). Exactly antisymmetric in (alt, base).
double coordinate_llr(const UnivariateGaussian& alt, const UnivariateGaussian& base, double x) noexcept;

/// Partially observed sensor vector: values at a strictly increasing subset of coordinates.
struct Observation {
  std::size_t time = 0;
  std::vector<std::size_t> indices;
  std::vector<double> values;

  /// Throws ModelError unless indices are strictly increasing, below `dim`, and aligned with values.
  void validate(std::size_t dim) const;
};

/// A p-dimensional Gaussian with either diagonal or full covariance.
///
/// Immutable after construction. Full-covariance models keep a small
/// thread-safe LRU cache of sub-block Cholesky factors keyed by index set,
/// so sharing one instance across worker threads is fine.
class GaussianModel {
 public:
  static GaussianModel diagonal(Eigen::VectorXd mean, Eigen::VectorXd variances);
  static GaussianModel full(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mean_.size()); }
  bool is_diagonal() const noexcept { return !covariance_.has_value(); }

  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  /// Diagonal of the covariance (the variances in the diagonal case).
  const Eigen::VectorXd& variances() const noexcept { return variances_; }
  /// Dense covariance. Built on demand for diagonal models.
  Eigen::MatrixXd covariance() const;
  double covariance_at(std::size_t a, std::size_t b) const noexcept;
  /// Lower Cholesky factor of the full covariance.
  const Eigen::MatrixXd& cholesky_factor() const;

  UnivariateGaussian coordinate(std::size_t j) const noexcept {
    return {mean_[static_cast<Eigen::Index>(j)], variances_[static_cast<Eigen::Index>(j)]};
  }

  /// Log-density of the marginal on `indices` evaluated at `values`.
  double marginal_log_density(std::span<const std::size_t> indices, std::span<const double> values) const;

  /// Same mean and covariance (bitwise).
  bool same_distribution(const GaussianModel& other) const;

  /// Draw a full vector.
  Eigen::VectorXd sample(Rng& rng) const;

 private:
  struct SubblockCache;

  GaussianModel() = default;

  Eigen::VectorXd mean_;
  Eigen::VectorXd variances_;
  std::optional<Eigen::MatrixXd> covariance_;
  Eigen::MatrixXd cholesky_;
  std::shared_ptr<SubblockCache> cache_;
};

/// The in-control model f0 together with K failure-mode models f1..fK.
class ModeBank {
 public:
  /// One failure mode whose marginal at a coordinate differs from the base.
  struct ModeTerm {
    std::size_t mode;
    UnivariateGaussian alt;
  };

  ModeBank(GaussianModel base, std::vector<GaussianModel> modes, std::vector<std::string> labels = {});

  std::size_t dim() const noexcept { return base_.dim(); }
  std::size_t size() const noexcept { return modes_.size(); }
  bool is_diagonal() const noexcept { return diagonal_; }

  const GaussianModel& base() const noexcept { return base_; }
  const GaussianModel& mode(std::size_t k) const { return modes_.at(k); }
  const std::string& label(std::size_t k) const { return labels_.at(k); }

  /// Coordinates where mode k's marginal differs from the base. Diagonal banks only.
  std::span<const std::size_t> support(std::size_t k) const { return supports_.at(k); }
  /// Modes whose marginal at coordinate j differs from the base. Diagonal banks only.
  std::span<const ModeTerm> coordinate_terms(std::size_t j) const { return terms_.at(j); }

  /// Mode with the largest |mean shift| at coordinate j (lowest index on ties).
  std::size_t dominant_mode(std::size_t j) const;

 private:
  GaussianModel base_;
  std::vector<GaussianModel> modes_;
  std::vector<std::string> labels_;
  bool diagonal_ = true;
  std::vector<std::vector<std::size_t>> supports_;
  std::vector<std::vector<ModeTerm>> terms_;
};

double marginal_log_density(const GaussianModel& model, const Observation& obs);

/// log f_k(y) - log f_0(y) on the observed coordinates. Zero for an empty observation.
double log_likelihood_ratio(const ModeBank& bank, std::size_t k, const Observation& obs);

/// All K log-likelihood ratios at once; bit-identical to calling log_likelihood_ratio per mode.
void log_likelihood_ratios(const ModeBank& bank, const Observation& obs, std::span<double> out);

/// One draw from f_k.
Eigen::VectorXd sample_mode(const ModeBank& bank, std::size_t k, Rng& rng);

}  // namespace mtssrp
