#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance suite: per-particle transport, Simpson quadrature and a
// dense-inverse GP posterior.

#include "beamtune/gp.hpp"
#include "beamtune/optics.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using namespace beamtune::optics;

struct Particle {
  double x, xp, y, yp;
};

inline void drift(Particle& p, double l) {
  p.x += l * p.xp;
  p.y += l * p.yp;
}

inline void focus_plane(double& x, double& xp, double k, double l) {
  if (k > 0.0) {
    const double w = std::sqrt(k);
    const double x1 = std::cos(w * l) * x + std::sin(w * l) / w * xp;
    const double xp1 = -w * std::sin(w * l) * x + std::cos(w * l) * xp;
    x = x1;
    xp = xp1;
  } else if (k < 0.0) {
    const double w = std::sqrt(-k);
    const double x1 = std::cosh(w * l) * x + std::sinh(w * l) / w * xp;
    const double xp1 = w * std::sinh(w * l) * x + std::cosh(w * l) * xp;
    x = x1;
    xp = xp1;
  } else {
    x += l * xp;
  }
}

inline void push(Particle& p, const Lattice& lattice, const MagnetSettings& u, const Misalignments& m) {
  const double k[3] = {u.k_q1, u.k_q2, u.k_q3};
  const double dx[3] = {m.q1_dx, m.q2_dx, m.q3_dx};
  const double dy[3] = {m.q1_dy, m.q2_dy, m.q3_dy};
  for (const Element& el : lattice.elements) {
    if (const auto* d = std::get_if<Drift>(&el)) {
      drift(p, d->length);
    } else if (const auto* q = std::get_if<Quadrupole>(&el)) {
      const int i = static_cast<int>(q->slot);
      p.x -= dx[i];
      p.y -= dy[i];
      focus_plane(p.x, p.xp, k[i], q->length);
      focus_plane(p.y, p.yp, -k[i], q->length);
      p.x += dx[i];
      p.y += dy[i];
    } else if (const auto* c = std::get_if<Corrector>(&el)) {
      drift(p, 0.5 * c->length);
      if (c->plane == CorrectorPlane::Horizontal) {
        p.xp += u.a_ch;
      } else {
        p.yp += u.a_cv;
      }
      drift(p, 0.5 * c->length);
    } else {
      p.x -= m.screen_dx;
      p.y -= m.screen_dy;
    }
  }
}

/// Sample moments (x, x', y, y') of an ensemble pushed particle by particle.
struct EnsembleMoments {
  std::array<double, 4> mean{};
  std::array<double, 4> sigma{};
};

/// Ensemble whose sample moments equal the incoming beam exactly: standard
/// normals, centered and whitened, then scaled.
inline EnsembleMoments track_ensemble(const IncomingBeam& in, const MagnetSettings& u, const Misalignments& m,
                                      const Lattice& lattice, std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<std::array<double, 4>> z(n);
  std::array<double, 4> mean{};
  for (auto& p : z) {
    for (int i = 0; i < 4; ++i) {
      p[i] = g(rng);
      mean[i] += p[i] / static_cast<double>(n);
    }
  }
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
  for (auto& p : z) {
    Eigen::Vector4d v;
    for (int i = 0; i < 4; ++i) {
      p[i] -= mean[i];
      v[i] = p[i];
    }
    cov += v * v.transpose() / static_cast<double>(n);
  }
  const Eigen::Matrix4d w = cov.llt().matrixL().solve(Eigen::Matrix4d::Identity());
  const double scale[4] = {in.sigma_x, in.sigma_xp, in.sigma_y, in.sigma_yp};
  const double center[4] = {in.mu_x, in.mu_xp, in.mu_y, in.mu_yp};

  std::array<double, 4> s1{}, s2{};
  for (const auto& p : z) {
    Eigen::Vector4d v(p[0], p[1], p[2], p[3]);
    v = w * v;
    Particle q{center[0] + scale[0] * v[0], center[1] + scale[1] * v[1], center[2] + scale[2] * v[2],
               center[3] + scale[3] * v[3]};
    push(q, lattice, u, m);
    const double c[4] = {q.x, q.xp, q.y, q.yp};
    for (int i = 0; i < 4; ++i) {
      s1[i] += c[i];
      s2[i] += c[i] * c[i];
    }
  }
  EnsembleMoments out;
  for (int i = 0; i < 4; ++i) {
    out.mean[i] = s1[i] / static_cast<double>(n);
    out.sigma[i] = std::sqrt(std::max(0.0, s2[i] / static_cast<double>(n) - out.mean[i] * out.mean[i]));
  }
  return out;
}

inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// Mean and standard deviation of N(mu, sigma^2) restricted to [lo, hi].
inline std::pair<double, double> truncated_moments(double mu, double sigma, double lo, double hi) {
  auto pdf = [&](double x) { return std::exp(-0.5 * std::pow((x - mu) / sigma, 2)); };
  const double z = simpson(pdf, lo, hi, 200000);
  const double m1 = simpson([&](double x) { return x * pdf(x); }, lo, hi, 200000) / z;
  const double m2 = simpson([&](double x) { return (x - m1) * (x - m1) * pdf(x); }, lo, hi, 200000) / z;
  return {m1, std::sqrt(m2)};
}

inline double matern(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b,
                     const beamtune::gp::Hyperparams& hp) {
  double r2 = 0.0;
  for (Eigen::Index d = 0; d < a.size(); ++d) {
    const double t = (a[d] - b[d]) / hp.length_scales[static_cast<std::size_t>(d)];
    r2 += t * t;
  }
  const double r = std::sqrt(r2);
  return hp.signal_var * (1.0 + std::sqrt(5.0) * r + 5.0 * r2 / 3.0) * std::exp(-std::sqrt(5.0) * r);
}

struct DensePosterior {
  std::vector<double> mean;
  std::vector<double> variance;
  double log_likelihood = 0.0;
};

/// Posterior through an explicit inverse of K + (sn2 + jitter) I, with the
/// targets standardized by their sample mean and standard deviation.
inline DensePosterior dense_posterior(const Eigen::MatrixXd& x, const std::vector<double>& y,
                                      const beamtune::gp::Hyperparams& hp, double jitter,
                                      const Eigen::MatrixXd& q) {
  const auto n = static_cast<int>(y.size());
  double mean = 0.0;
  for (double v : y) mean += v / n;
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1));
  Eigen::VectorXd ys(n);
  for (int i = 0; i < n; ++i) ys[i] = (y[static_cast<std::size_t>(i)] - mean) / sd;
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) k(i, j) = matern(x.row(i), x.row(j), hp);
  k.diagonal().array() += hp.noise_var + jitter;
  const Eigen::MatrixXd kinv = k.inverse();

  DensePosterior out;
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    Eigen::VectorXd ks(n);
    for (int j = 0; j < n; ++j) ks[j] = matern(q.row(i), x.row(j), hp);
    out.mean.push_back(ks.dot(kinv * ys) * sd + mean);
    out.variance.push_back((hp.signal_var - ks.dot(kinv * ks)) * sd * sd);
  }
  out.log_likelihood = -0.5 * ys.dot(kinv * ys) - 0.5 * std::log(k.determinant()) -
                       0.5 * n * std::log(2.0 * std::acos(-1.0));
  return out;
}

}  // namespace oracle
