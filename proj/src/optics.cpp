#include "beamtune/optics.hpp"

#include "beamtune/errors.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace beamtune::optics {

namespace {

bool finite(double v) { return std::isfinite(v); }

void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidParameter(what);
}

// exp(x^2) * erfc(x) for x >= 0.
double erfcx(double x) {
  if (x < 26.0) return std::exp(x * x) * std::erfc(x);
  const double inv2 = 1.0 / (x * x);
  const double series =
      1.0 + inv2 * (-0.5 + inv2 * (0.75 + inv2 * (-1.875 + inv2 * 6.5625)));
  return series / (x * std::sqrt(std::numbers::pi));
}

Mat4 drift_matrix(double length) {
  Mat4 m = Mat4::Identity();
  m(0, 1) = length;
  m(2, 3) = length;
  return m;
}

// 2x2 block for x'' = -k x over length L.
void plane_block(double k, double length, Mat4& m, int offset) {
  double c, s_over, s_times;
  if (k > 0.0) {
    const double w = std::sqrt(k);
    c = std::cos(w * length);
    s_over = std::sin(w * length) / w;
    s_times = -w * std::sin(w * length);
  } else if (k < 0.0) {
    const double w = std::sqrt(-k);
    c = std::cosh(w * length);
    s_over = std::sinh(w * length) / w;
    s_times = w * std::sinh(w * length);
  } else {
    c = 1.0;
    s_over = length;
    s_times = 0.0;
  }
  m(offset, offset) = c;
  m(offset, offset + 1) = s_over;
  m(offset + 1, offset) = s_times;
  m(offset + 1, offset + 1) = c;
}

Mat4 quadrupole_matrix(double k, double length) {
  Mat4 m = Mat4::Zero();
  plane_block(k, length, m, 0);
  plane_block(-k, length, m, 2);
  return m;
}

double corrector_angle(const MagnetSettings& u, CorrectorPlane plane) {
  return plane == CorrectorPlane::Horizontal ? u.a_ch : u.a_cv;
}

}  // namespace

void IncomingBeam::validate() const {
  require(finite(energy) && energy > 0.0, "incoming beam energy must be positive");
  for (double v : {mu_x, mu_xp, mu_y, mu_yp}) {
    require(finite(v), "incoming beam centroid must be finite");
  }
  for (double v : {sigma_x, sigma_xp, sigma_y, sigma_yp}) {
    require(finite(v) && v > 0.0, "incoming beam sizes must be positive");
  }
}

std::array<double, 2> Misalignments::quadrupole(int index) const {
  switch (index) {
    case 0: return {q1_dx, q1_dy};
    case 1: return {q2_dx, q2_dy};
    case 2: return {q3_dx, q3_dy};
  }
  throw InvalidParameter("quadrupole index out of range");
}

void Misalignments::validate(double bound) const {
  for (double v : {q1_dx, q1_dy, q2_dx, q2_dy, q3_dx, q3_dy, screen_dx, screen_dy}) {
    require(finite(v), "misalignment must be finite");
    require(std::abs(v) <= bound, "misalignment exceeds configured bound");
  }
}

bool MagnetSettings::within_physical_limits() const {
  for (double k : {k_q1, k_q2, k_q3}) {
    if (!finite(k) || std::abs(k) > kMaxQuadStrength) return false;
  }
  for (double a : {a_cv, a_ch}) {
    if (!finite(a) || std::abs(a) > kMaxSteeringAngle) return false;
  }
  return true;
}

double BeamMoments::sigma_x() const { return std::sqrt(std::max(0.0, covariance(0, 0))); }
double BeamMoments::sigma_xp() const { return std::sqrt(std::max(0.0, covariance(1, 1))); }
double BeamMoments::sigma_y() const { return std::sqrt(std::max(0.0, covariance(2, 2))); }
double BeamMoments::sigma_yp() const { return std::sqrt(std::max(0.0, covariance(3, 3))); }

BeamMoments BeamMoments::from_incoming(const IncomingBeam& beam) {
  BeamMoments m;
  m.centroid << beam.mu_x, beam.mu_xp, beam.mu_y, beam.mu_yp;
  m.covariance.diagonal() << beam.sigma_x * beam.sigma_x, beam.sigma_xp * beam.sigma_xp,
      beam.sigma_y * beam.sigma_y, beam.sigma_yp * beam.sigma_yp;
  return m;
}

double quad_strength(const MagnetSettings& u, QuadSlot slot) {
  switch (slot) {
    case QuadSlot::Q1: return u.k_q1;
    case QuadSlot::Q2: return u.k_q2;
    case QuadSlot::Q3: return u.k_q3;
  }
  return 0.0;
}

Mat4 element_matrix(const Element& element, const MagnetSettings& settings) {
  return std::visit(
      [&](const auto& e) -> Mat4 {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, Screen>) {
          throw InvalidParameter("screen has no transfer matrix");
        } else {
          require(finite(e.length) && e.length >= 0.0, "element length must be finite and >= 0");
          if constexpr (std::is_same_v<T, Quadrupole>) {
            const double k = quad_strength(settings, e.slot);
            require(finite(k), "quadrupole strength must be finite");
            return quadrupole_matrix(k, e.length);
          } else {
            return drift_matrix(e.length);
          }
        }
      },
      element);
}

void Lattice::validate() const {
  std::vector<std::string> order;
  int screens = 0;
  for (std::size_t i = 0; i < elements.size(); ++i) {
    const Element& el = elements[i];
    if (const auto* d = std::get_if<Drift>(&el)) {
      if (!finite(d->length) || d->length < 0.0) throw ConfigError("drift length must be >= 0");
    } else if (const auto* q = std::get_if<Quadrupole>(&el)) {
      if (!finite(q->length) || q->length <= 0.0) throw ConfigError("quadrupole length must be > 0");
      order.push_back(q->slot == QuadSlot::Q1 ? "Q1" : q->slot == QuadSlot::Q2 ? "Q2" : "Q3");
    } else if (const auto* c = std::get_if<Corrector>(&el)) {
      if (!finite(c->length) || c->length < 0.0) throw ConfigError("corrector length must be >= 0");
      order.push_back(c->plane == CorrectorPlane::Vertical ? "Cv" : "Ch");
    } else {
      const auto& s = std::get<Screen>(el);
      ++screens;
      if (i + 1 != elements.size()) throw ConfigError("screen must be the last element");
      if (!(s.half_width > 0.0) || !(s.half_height > 0.0) || !(s.resolution >= 0.0)) {
        throw ConfigError("screen extents must be positive");
      }
    }
  }
  if (screens != 1) throw ConfigError("lattice needs exactly one screen");
  const std::vector<std::string> expected{"Q1", "Q2", "Cv", "Q3", "Ch"};
  if (order != expected) {
    std::ostringstream os;
    os << "magnet order must be Q1 Q2 Cv Q3 Ch, got";
    for (const auto& s : order) os << ' ' << s;
    throw ConfigError(os.str());
  }
}

const Screen& Lattice::screen() const {
  for (const Element& el : elements) {
    if (const auto* s = std::get_if<Screen>(&el)) return *s;
  }
  throw ConfigError("lattice has no screen");
}

double Lattice::total_length() const {
  double total = 0.0;
  for (const Element& el : elements) {
    std::visit(
        [&](const auto& e) {
          if constexpr (!std::is_same_v<std::decay_t<decltype(e)>, Screen>) total += e.length;
        },
        el);
  }
  return total;
}

double Lattice::kick_to_screen(CorrectorPlane plane) const {
  double distance = 0.0;
  bool found = false;
  for (const Element& el : elements) {
    if (const auto* c = std::get_if<Corrector>(&el); c != nullptr && c->plane == plane) {
      found = true;
      distance = 0.5 * c->length;
      continue;
    }
    if (!found) continue;
    std::visit(
        [&](const auto& e) {
          if constexpr (!std::is_same_v<std::decay_t<decltype(e)>, Screen>) distance += e.length;
        },
        el);
  }
  if (!found) throw ConfigError("lattice has no corrector in requested plane");
  return distance;
}

Lattice Lattice::ares_ea() {
  Lattice l;
  l.elements = {
      Drift{0.17504},
      Quadrupole{0.122, QuadSlot::Q1},
      Drift{0.428},
      Quadrupole{0.122, QuadSlot::Q2},
      Drift{0.204},
      Corrector{0.02, CorrectorPlane::Vertical},
      Drift{0.204},
      Quadrupole{0.122, QuadSlot::Q3},
      Drift{0.179},
      Corrector{0.02, CorrectorPlane::Horizontal},
      Drift{0.45},
      Screen{},
  };
  return l;
}

BeamMoments track(const IncomingBeam& incoming, const MagnetSettings& settings,
                  const Misalignments& misalignments, const Lattice& lattice) {
  incoming.validate();
  BeamMoments m = BeamMoments::from_incoming(incoming);
  for (const Element& el : lattice.elements) {
    if (const auto* q = std::get_if<Quadrupole>(&el)) {
      const auto [dx, dy] = misalignments.quadrupole(static_cast<int>(q->slot));
      Vec4 shift;
      shift << dx, 0.0, dy, 0.0;
      const Mat4 r = element_matrix(el, settings);
      m.centroid = r * (m.centroid - shift) + shift;
      m.covariance = r * m.covariance * r.transpose();
    } else if (const auto* c = std::get_if<Corrector>(&el)) {
      const Mat4 half = drift_matrix(0.5 * c->length);
      m.centroid = half * m.centroid;
      m.centroid[c->plane == CorrectorPlane::Horizontal ? 1 : 3] +=
          corrector_angle(settings, c->plane);
      m.centroid = half * m.centroid;
      const Mat4 r = drift_matrix(c->length);
      m.covariance = r * m.covariance * r.transpose();
    } else if (std::holds_alternative<Drift>(el)) {
      const Mat4 r = element_matrix(el, settings);
      m.centroid = r * m.centroid;
      m.covariance = r * m.covariance * r.transpose();
    } else {
      m.centroid[0] -= misalignments.screen_dx;
      m.centroid[2] -= misalignments.screen_dy;
    }
  }
  return m;
}

TruncatedMoments truncated_gaussian_moments(double mu, double sigma, double lo,
                                            double hi) {
  require(sigma > 0.0 && hi > lo, "truncated moments need sigma > 0 and hi > lo");
  double a = (lo - mu) / sigma;
  double b = (hi - mu) / sigma;
  if (b <= 0.0) {
    // Mirror so the window lies on the upper side of the mean.
    const TruncatedMoments m = truncated_gaussian_moments(-mu, sigma, -hi, -lo);
    return {-m.mean, m.stddev};
  }
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  double pa, pb;  // pdf(a)/Z, pdf(b)/Z
  if (a < 0.0) {
    const double z = 0.5 * (std::erf(b * kInvSqrt2) - std::erf(a * kInvSqrt2));
    pa = inv_sqrt_2pi * std::exp(-0.5 * a * a) / z;
    pb = inv_sqrt_2pi * std::exp(-0.5 * b * b) / z;
  } else {
    const double ratio = std::exp(0.5 * (a * a - b * b));
    const double denom = erfcx(a * kInvSqrt2) - ratio * erfcx(b * kInvSqrt2);
    if (!(denom > 0.0)) return {0.5 * (lo + hi), (hi - lo) / std::sqrt(12.0)};
    pa = std::sqrt(2.0 / std::numbers::pi) / denom;
    pb = pa * ratio;
  }
  const double shift = pa - pb;
  const double bterm = std::isfinite(b) ? b * pb : 0.0;
  const double var = 1.0 + a * pa - bterm - shift * shift;
  return {mu + sigma * shift, sigma * std::sqrt(std::max(0.0, var))};
}

Measurement measure_screen(const BeamMoments& moments, const Screen& screen,
                           ScreenMode mode, std::optional<double> noise_rms,
                           std::mt19937_64* rng) {
  require(screen.half_width > 0.0 && screen.half_height > 0.0, "screen extents must be positive");
  Measurement out;
  out.beam = BeamParameters::from_moments(moments);
  if (mode == ScreenMode::Finite) {
    out.on_screen = std::abs(moments.mu_x()) <= screen.half_width &&
                    std::abs(moments.mu_y()) <= screen.half_height;
    if (out.beam.sigma_x > 0.0) {
      const auto tx = truncated_gaussian_moments(out.beam.mu_x, out.beam.sigma_x,
                                                 -screen.half_width, screen.half_width);
      out.beam.mu_x = tx.mean;
      out.beam.sigma_x = tx.stddev;
    }
    if (out.beam.sigma_y > 0.0) {
      const auto ty = truncated_gaussian_moments(out.beam.mu_y, out.beam.sigma_y,
                                                 -screen.half_height, screen.half_height);
      out.beam.mu_y = ty.mean;
      out.beam.sigma_y = ty.stddev;
    }
  }
  if (noise_rms && *noise_rms > 0.0) {
    if (rng == nullptr) throw InvalidParameter("measurement noise needs an rng");
    std::normal_distribution<double> noise(0.0, *noise_rms);
    out.beam.mu_x += noise(*rng);
    out.beam.sigma_x += noise(*rng);
    out.beam.mu_y += noise(*rng);
    out.beam.sigma_y += noise(*rng);
    out.beam.sigma_x = std::max(out.beam.sigma_x, screen.resolution);
    out.beam.sigma_y = std::max(out.beam.sigma_y, screen.resolution);
  }
  return out;
}

}  // namespace beamtune::optics
