#pragma once

// Exact GP regression: Matérn-5/2 ARD kernel plus white noise, inputs
// normalized to [-1, 1], outputs standardized, hyperparameters fit by
// maximizing the log marginal likelihood.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace beamtune::gp {

struct Hyperparams {
  std::vector<double> length_scales;  // one per input dimension
  double signal_var = 1.0;
  double noise_var = 1e-4;

  std::size_t dim() const { return length_scales.size(); }
  /// (log l_1..l_d, log sf2, log sn2)
  std::vector<double> to_log() const;
  static Hyperparams from_log(std::span<const double> log_params);
  /// Throws InvalidParameter unless length scales and signal variance are
  /// positive and the noise variance is non-negative.
  void validate() const;
};

struct HyperparamBounds {
  double length_lo = 1e-2, length_hi = 1e2;
  double signal_lo = 1e-3, signal_hi = 1e3;
  double noise_lo = 1e-8, noise_hi = 1.0;

  Hyperparams clamp(const Hyperparams& hp) const;
};

/// Matérn-5/2 covariance between two points (no noise term).
double matern52(std::span<const double> x1, std::span<const double> x2, const Hyperparams& hp);

/// Cross-covariance matrix K(A, B) through the dispatched SIMD kernel.
/// Rows of A and B are points.
Eigen::MatrixXd cross_covariance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                 const Hyperparams& hp);

/// Affine map from a box to [-1, 1]^d.
struct InputNormalizer {
  std::vector<double> lo, hi;

  std::vector<double> normalize(std::span<const double> x) const;
  std::vector<double> denormalize(std::span<const double> z) const;
};

/// y -> (y - mean) / std; std falls back to 1 for constant data.
struct Standardizer {
  double mean = 0.0;
  double scale = 1.0;

  static Standardizer fit(std::span<const double> y);
  double standardize(double y) const { return (y - mean) / scale; }
  double destandardize(double z) const { return z * scale + mean; }
};

struct Prediction {
  std::vector<double> mean;
  std::vector<double> variance;
};

class Model {
 public:
  /// Conditions on (X, y). X rows are normalized inputs; y raw outputs,
  /// standardized internally. Jitter starts at 1e-6 sf2 and doubles up to
  /// three times if the Cholesky factorization fails.
  static Model condition(Eigen::MatrixXd x, std::span<const double> y, const Hyperparams& hp);

  /// Posterior in raw output units.
  Prediction posterior(const Eigen::MatrixXd& queries) const;
  /// Posterior in standardized units (variance clamped at 0).
  Prediction posterior_standardized(const Eigen::MatrixXd& queries) const;

  double log_marginal_likelihood() const { return log_likelihood_; }
  const Hyperparams& hyperparams() const { return hp_; }
  const Standardizer& standardizer() const { return standardizer_; }
  const Eigen::MatrixXd& inputs() const { return x_; }
  const Eigen::VectorXd& targets() const { return y_; }
  double jitter() const { return jitter_; }
  int jitter_doublings() const { return jitter_doublings_; }
  /// Lower Cholesky factor of K + sn2 I + jitter I.
  Eigen::MatrixXd cholesky_factor() const { return llt_.matrixL(); }
  /// K + sn2 I + jitter I as factorized.
  Eigen::MatrixXd training_covariance() const;

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;  // standardized
  Hyperparams hp_;
  Standardizer standardizer_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
  int jitter_doublings_ = 0;
  double log_likelihood_ = 0.0;
};

/// Log marginal likelihood of already-standardized targets; nullopt when
/// every jitter level fails to factorize.
std::optional<double> log_marginal_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                              const Hyperparams& hp);

struct FitOptions {
  int restarts = 4;
  int max_evaluations = 200;  // per restart
  std::uint64_t seed = 0;
  HyperparamBounds bounds;
  /// Start of restart 0 (e.g. the previous step's fit); default start otherwise.
  std::optional<Hyperparams> warm_start;
};

struct FitResult {
  Hyperparams hyperparams;
  double log_likelihood = 0.0;
  bool fallback = false;  // every restart failed; bounded defaults returned
  int best_restart = -1;
  std::vector<double> start_log_likelihoods;  // per restart, at its initial point
};

/// Multi-restart Nelder-Mead in log-hyperparameter space. `y` are raw
/// outputs (standardized internally). Needs at least two points.
FitResult fit_hyperparams(const Eigen::MatrixXd& x, std::span<const double> y,
                          const FitOptions& options);

}  // namespace beamtune::gp
