#include "beamtune/gp.hpp"

#include "beamtune/errors.hpp"
#include "beamtune/kernels.hpp"
#include "beamtune/nelder_mead.hpp"
#include "beamtune/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace beamtune::gp {

namespace {

constexpr double kSqrt5 = 2.2360679774997896964;
constexpr int kMaxJitterDoublings = 3;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dimension-major copy of the rows of `x`, each coordinate divided by its
// length scale.
RowMatrix scaled_block(const Eigen::MatrixXd& x, const Hyperparams& hp) {
  RowMatrix out(x.cols(), x.rows());
  for (Eigen::Index d = 0; d < x.cols(); ++d) {
    const double inv = 1.0 / hp.length_scales[static_cast<std::size_t>(d)];
    for (Eigen::Index j = 0; j < x.rows(); ++j) out(d, j) = x(j, d) * inv;
  }
  return out;
}

// Lower triangle of K(X, X) computed row by row, then mirrored.
Eigen::MatrixXd training_kernel(const Eigen::MatrixXd& x, const Hyperparams& hp) {
  const auto n = x.rows();
  const auto d = x.cols();
  const RowMatrix block = scaled_block(x, hp);
  const auto& k = kernels::active();
  RowMatrix out(n, n);
  std::vector<double> point(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < d; ++c) point[static_cast<std::size_t>(c)] = block(c, i);
    k.matern52_row(point.data(), block.data(), static_cast<std::size_t>(i + 1),
                   static_cast<std::size_t>(n), static_cast<std::size_t>(d), hp.signal_var,
                   out.row(i).data());
  }
  Eigen::MatrixXd sym(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      sym(i, j) = out(i, j);
      sym(j, i) = out(i, j);
    }
  }
  return sym;
}

struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
  int doublings = 0;
  bool ok = false;
};

Factorization factorize(const Eigen::MatrixXd& x, const Hyperparams& hp) {
  Eigen::MatrixXd k = training_kernel(x, hp);
  Factorization f;
  f.jitter = 1e-6 * hp.signal_var;
  for (f.doublings = 0; f.doublings <= kMaxJitterDoublings; ++f.doublings) {
    Eigen::MatrixXd kk = k;
    kk.diagonal().array() += hp.noise_var + f.jitter;
    f.llt.compute(kk);
    if (f.llt.info() == Eigen::Success) {
      f.ok = true;
      return f;
    }
    f.jitter *= 2.0;
  }
  f.doublings = kMaxJitterDoublings;
  return f;
}

double log_likelihood_from(const Factorization& f, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& alpha) {
  const double n = static_cast<double>(y.size());
  double log_det_half = 0.0;
  const auto& l = f.llt.matrixLLT();
  for (Eigen::Index i = 0; i < y.size(); ++i) log_det_half += std::log(l(i, i));
  return -0.5 * y.dot(alpha) - log_det_half - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

}  // namespace

// ---- hyperparameters ---------------------------------------------------------

std::vector<double> Hyperparams::to_log() const {
  std::vector<double> out;
  for (double l : length_scales) out.push_back(std::log(l));
  out.push_back(std::log(signal_var));
  out.push_back(std::log(noise_var));
  return out;
}

Hyperparams Hyperparams::from_log(std::span<const double> p) {
  if (p.size() < 3) throw InvalidParameter("log hyperparameters need d + 2 entries");
  Hyperparams hp;
  for (std::size_t i = 0; i + 2 < p.size(); ++i) hp.length_scales.push_back(std::exp(p[i]));
  hp.signal_var = std::exp(p[p.size() - 2]);
  hp.noise_var = std::exp(p[p.size() - 1]);
  return hp;
}

void Hyperparams::validate() const {
  if (length_scales.empty()) throw InvalidParameter("kernel needs at least one length scale");
  for (double l : length_scales) {
    if (!(l > 0.0) || !std::isfinite(l)) throw InvalidParameter("length scales must be positive");
  }
  if (!(signal_var > 0.0) || !std::isfinite(signal_var)) {
    throw InvalidParameter("signal variance must be positive");
  }
  if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) {
    throw InvalidParameter("noise variance must be non-negative");
  }
}

Hyperparams HyperparamBounds::clamp(const Hyperparams& hp) const {
  Hyperparams out = hp;
  for (double& l : out.length_scales) l = std::clamp(l, length_lo, length_hi);
  out.signal_var = std::clamp(out.signal_var, signal_lo, signal_hi);
  out.noise_var = std::clamp(out.noise_var, noise_lo, noise_hi);
  return out;
}

double matern52(std::span<const double> x1, std::span<const double> x2, const Hyperparams& hp) {
  hp.validate();
  if (x1.size() != x2.size() || x1.size() != hp.dim()) {
    throw InvalidParameter("kernel inputs must match the length-scale dimension");
  }
  double r2 = 0.0;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    const double z = (x1[i] - x2[i]) / hp.length_scales[i];
    r2 += z * z;
  }
  const double s = kSqrt5 * std::sqrt(r2);
  return hp.signal_var * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

Eigen::MatrixXd cross_covariance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                 const Hyperparams& hp) {
  hp.validate();
  if (a.cols() != b.cols() || static_cast<std::size_t>(a.cols()) != hp.dim()) {
    throw InvalidParameter("cross_covariance: dimension mismatch");
  }
  const RowMatrix block = scaled_block(b, hp);
  const auto& k = kernels::active();
  RowMatrix out(a.rows(), b.rows());
  std::vector<double> point(static_cast<std::size_t>(a.cols()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      point[static_cast<std::size_t>(c)] = a(i, c) / hp.length_scales[static_cast<std::size_t>(c)];
    }
    k.matern52_row(point.data(), block.data(), static_cast<std::size_t>(b.rows()),
                   static_cast<std::size_t>(b.rows()), static_cast<std::size_t>(a.cols()),
                   hp.signal_var, out.row(i).data());
  }
  return out;
}

// ---- normalization -------------------------------------------------------------

std::vector<double> InputNormalizer::normalize(std::span<const double> x) const {
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = 2.0 * (x[i] - lo[i]) / (hi[i] - lo[i]) - 1.0;
  return z;
}

std::vector<double> InputNormalizer::denormalize(std::span<const double> z) const {
  std::vector<double> x(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) x[i] = lo[i] + 0.5 * (z[i] + 1.0) * (hi[i] - lo[i]);
  return x;
}

Standardizer Standardizer::fit(std::span<const double> y) {
  Standardizer s;
  if (y.empty()) return s;
  double sum = 0.0;
  for (double v : y) sum += v;
  s.mean = sum / static_cast<double>(y.size());
  double ss = 0.0;
  for (double v : y) ss += (v - s.mean) * (v - s.mean);
  const double sd = y.size() > 1 ? std::sqrt(ss / static_cast<double>(y.size() - 1)) : 0.0;
  s.scale = sd > 0.0 && std::isfinite(sd) ? sd : 1.0;
  return s;
}

// ---- model -----------------------------------------------------------------

Model Model::condition(Eigen::MatrixXd x, std::span<const double> y, const Hyperparams& hp) {
  hp.validate();
  if (x.rows() < 1 || static_cast<std::size_t>(x.rows()) != y.size()) {
    throw InvalidParameter("GP needs n >= 1 inputs matching the outputs");
  }
  if (static_cast<std::size_t>(x.cols()) != hp.dim()) {
    throw InvalidParameter("GP input dimension does not match length scales");
  }
  Model m;
  m.x_ = std::move(x);
  m.hp_ = hp;
  m.standardizer_ = Standardizer::fit(y);
  m.y_.resize(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) {
    m.y_[static_cast<Eigen::Index>(i)] = m.standardizer_.standardize(y[i]);
  }
  Factorization f = factorize(m.x_, hp);
  if (!f.ok) throw InvalidParameter("kernel matrix is not positive definite even with jitter");
  m.llt_ = std::move(f.llt);
  m.jitter_ = f.jitter;
  m.jitter_doublings_ = f.doublings;
  m.alpha_ = m.llt_.solve(m.y_);
  m.log_likelihood_ = log_likelihood_from(Factorization{m.llt_, m.jitter_, 0, true}, m.y_, m.alpha_);
  return m;
}

Eigen::MatrixXd Model::training_covariance() const {
  Eigen::MatrixXd k = training_kernel(x_, hp_);
  k.diagonal().array() += hp_.noise_var + jitter_;
  return k;
}

Prediction Model::posterior_standardized(const Eigen::MatrixXd& queries) const {
  const Eigen::MatrixXd ks = cross_covariance(queries, x_, hp_);  // m x n
  Prediction p;
  const Eigen::VectorXd mean = ks * alpha_;
  // v = L^{-1} k_*; var = sf2 - |v|^2
  const Eigen::MatrixXd v = llt_.matrixL().solve(ks.transpose());
  p.mean.assign(mean.data(), mean.data() + mean.size());
  p.variance.resize(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    p.variance[static_cast<std::size_t>(i)] =
        std::max(0.0, hp_.signal_var - v.col(i).squaredNorm());
  }
  return p;
}

Prediction Model::posterior(const Eigen::MatrixXd& queries) const {
  Prediction p = posterior_standardized(queries);
  const double s2 = standardizer_.scale * standardizer_.scale;
  for (auto& m : p.mean) m = standardizer_.destandardize(m);
  for (auto& v : p.variance) v *= s2;
  return p;
}

std::optional<double> log_marginal_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                              const Hyperparams& hp) {
  const Factorization f = factorize(x, hp);
  if (!f.ok) return std::nullopt;
  const Eigen::VectorXd alpha = f.llt.solve(y);
  const double ll = log_likelihood_from(f, y, alpha);
  if (!std::isfinite(ll)) return std::nullopt;
  return ll;
}

// ---- fitting ------------------------------------------------------------------

FitResult fit_hyperparams(const Eigen::MatrixXd& x, std::span<const double> y,
                          const FitOptions& options) {
  if (x.rows() < 2 || static_cast<std::size_t>(x.rows()) != y.size()) {
    throw InvalidParameter("hyperparameter fit needs at least two observations");
  }
  if (options.restarts < 1) throw InvalidParameter("need at least one restart");
  const std::size_t dim = static_cast<std::size_t>(x.cols());
  const Standardizer st = Standardizer::fit(y);
  Eigen::VectorXd ys(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) ys[static_cast<Eigen::Index>(i)] = st.standardize(y[i]);

  const HyperparamBounds& b = options.bounds;
  std::vector<double> lo, hi;
  for (std::size_t i = 0; i < dim; ++i) {
    lo.push_back(std::log(b.length_lo));
    hi.push_back(std::log(b.length_hi));
  }
  lo.push_back(std::log(b.signal_lo));
  hi.push_back(std::log(b.signal_hi));
  lo.push_back(std::log(b.noise_lo));
  hi.push_back(std::log(b.noise_hi));

  auto clamp_log = [&](std::span<const double> p) {
    std::vector<double> c(p.begin(), p.end());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::clamp(c[i], lo[i], hi[i]);
    return c;
  };
  constexpr double kFailed = 1e300;
  auto negative_ll = [&](std::span<const double> p) {
    const auto ll = log_marginal_likelihood(x, ys, Hyperparams::from_log(clamp_log(p)));
    return ll ? -*ll : kFailed;
  };

  Hyperparams defaults;
  defaults.length_scales.assign(dim, 1.0);
  defaults.signal_var = 1.0;
  defaults.noise_var = 1e-4;

  Rng rng(options.seed);
  FitResult out;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_params;
  for (int r = 0; r < options.restarts; ++r) {
    std::vector<double> start;
    if (r == 0) {
      start = (options.warm_start ? b.clamp(*options.warm_start) : defaults).to_log();
    } else {
      for (std::size_t i = 0; i < dim; ++i) start.push_back(uniform(rng, std::log(0.1), std::log(3.0)));
      start.push_back(uniform(rng, std::log(0.1), std::log(10.0)));
      start.push_back(uniform(rng, std::log(1e-6), std::log(1e-1)));
    }
    start = clamp_log(start);
    const double f0 = negative_ll(start);
    out.start_log_likelihoods.push_back(f0 >= kFailed ? -std::numeric_limits<double>::infinity() : -f0);

    std::vector<double> spreads(start.size(), 0.5);
    for (std::size_t i = 0; i < start.size(); ++i) {
      if (start[i] + spreads[i] > hi[i]) spreads[i] = -spreads[i];
    }
    nm::Options opt;
    opt.max_evaluations = options.max_evaluations;
    opt.x_tolerance = 1e-3;
    opt.f_tolerance = 1e-6;
    opt.jitter_seed = derive_seed({options.seed, static_cast<std::uint64_t>(r)});
    const nm::Result res = nm::minimize(negative_ll, nm::axis_simplex(start, spreads), opt);
    double value = res.best_value;
    std::vector<double> params = res.best;
    if (f0 <= value) {
      value = f0;
      params = start;
    }
    if (value < kFailed && value < best) {
      best = value;
      best_params = clamp_log(params);
      out.best_restart = r;
    }
  }

  if (best_params.empty()) {
    out.fallback = true;
    out.hyperparams = defaults;
    double var = 0.0;
    for (Eigen::Index i = 0; i < ys.size(); ++i) var += ys[i] * ys[i];
    out.hyperparams.signal_var =
        std::clamp(var / static_cast<double>(std::max<Eigen::Index>(1, ys.size() - 1)), b.signal_lo, b.signal_hi);
    const auto ll = log_marginal_likelihood(x, ys, out.hyperparams);
    out.log_likelihood = ll ? *ll : -std::numeric_limits<double>::infinity();
    return out;
  }
  out.hyperparams = Hyperparams::from_log(best_params);
  out.log_likelihood = -best;
  return out;
}

}  // namespace beamtune::gp
