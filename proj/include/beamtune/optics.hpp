#pragma once

// Linear transverse optics of the five-magnet section: thick-lens transfer
// matrices, first/second moment tracking and the screen measurement model.

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace beamtune::optics {

using Vec4 = Eigen::Matrix<double, 4, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;

// Phase-space coordinate order used everywhere: (x, x', y, y').

inline constexpr double kMaxQuadStrength = 72.0;     // 1/m^2
inline constexpr double kMaxSteeringAngle = 6.2e-3;  // rad

struct IncomingBeam {
  double energy = 107e6;  // eV
  double mu_x = 0.0;
  double mu_xp = 0.0;
  double mu_y = 0.0;
  double mu_yp = 0.0;
  double sigma_x = 1e-4;
  double sigma_xp = 1e-5;
  double sigma_y = 1e-4;
  double sigma_yp = 1e-5;

  void validate() const;
};

struct Misalignments {
  double q1_dx = 0.0, q1_dy = 0.0;
  double q2_dx = 0.0, q2_dy = 0.0;
  double q3_dx = 0.0, q3_dy = 0.0;
  double screen_dx = 0.0, screen_dy = 0.0;

  /// Offset of quadrupole `index` (0..2) as (dx, dy).
  std::array<double, 2> quadrupole(int index) const;
  void validate(double bound) const;
};

/// Actuator vector u = (k_Q1, k_Q2, alpha_Cv, k_Q3, alpha_Ch).
struct MagnetSettings {
  double k_q1 = 0.0;
  double k_q2 = 0.0;
  double a_cv = 0.0;
  double k_q3 = 0.0;
  double a_ch = 0.0;

  static constexpr std::size_t kSize = 5;

  std::array<double, kSize> to_array() const { return {k_q1, k_q2, a_cv, k_q3, a_ch}; }
  static MagnetSettings from_array(const std::array<double, kSize>& u) {
    return {u[0], u[1], u[2], u[3], u[4]};
  }
  bool within_physical_limits() const;
  bool operator==(const MagnetSettings&) const = default;
};

/// Beam moments at a lattice location.
struct BeamMoments {
  Vec4 centroid = Vec4::Zero();
  Mat4 covariance = Mat4::Zero();

  double mu_x() const { return centroid[0]; }
  double mu_xp() const { return centroid[1]; }
  double mu_y() const { return centroid[2]; }
  double mu_yp() const { return centroid[3]; }
  double sigma_x() const;
  double sigma_xp() const;
  double sigma_y() const;
  double sigma_yp() const;

  static BeamMoments from_incoming(const IncomingBeam& beam);
};

/// The four screen observables b = (mu_x, sigma_x, mu_y, sigma_y), metres.
struct BeamParameters {
  double mu_x = 0.0;
  double sigma_x = 0.0;
  double mu_y = 0.0;
  double sigma_y = 0.0;

  std::array<double, 4> to_array() const { return {mu_x, sigma_x, mu_y, sigma_y}; }
  static BeamParameters from_array(const std::array<double, 4>& b) {
    return {b[0], b[1], b[2], b[3]};
  }
  static BeamParameters from_moments(const BeamMoments& m) {
    return {m.mu_x(), m.sigma_x(), m.mu_y(), m.sigma_y()};
  }
  bool operator==(const BeamParameters&) const = default;
};

// ---- lattice --------------------------------------------------------------

enum class QuadSlot { Q1, Q2, Q3 };
enum class CorrectorPlane { Horizontal, Vertical };

struct Drift {
  double length = 0.0;
};

struct Quadrupole {
  double length = 0.0;
  QuadSlot slot = QuadSlot::Q1;  // selects both strength and misalignment
};

/// Thick corrector: half drift, angle kick, half drift.
struct Corrector {
  double length = 0.0;
  CorrectorPlane plane = CorrectorPlane::Horizontal;
};

struct Screen {
  double half_width = 4e-3;
  double half_height = 2.5e-3;
  double resolution = 20e-6;
};

using Element = std::variant<Drift, Quadrupole, Corrector, Screen>;

struct Lattice {
  std::vector<Element> elements;

  /// Magnet order Q1, Q2, Cv, Q3, Ch; exactly one screen, placed last.
  void validate() const;
  const Screen& screen() const;
  double total_length() const;
  /// Path length from the kick point of corrector `plane` to the screen.
  double kick_to_screen(CorrectorPlane plane) const;

  /// Section geometry after the public ARES experimental-area lattice.
  static Lattice ares_ea();
};

double quad_strength(const MagnetSettings& u, QuadSlot slot);

/// 4x4 transfer matrix of a drift, quadrupole or corrector body.
/// Throws InvalidParameter on non-finite inputs or a screen element.
Mat4 element_matrix(const Element& element, const MagnetSettings& settings);

/// Moments at the screen, centroid expressed in the (possibly misaligned)
/// screen frame.
BeamMoments track(const IncomingBeam& incoming, const MagnetSettings& settings,
                  const Misalignments& misalignments, const Lattice& lattice);

// ---- measurement ----------------------------------------------------------

enum class ScreenMode { Infinite, Finite };

struct Measurement {
  BeamParameters beam;
  bool on_screen = true;
};

struct TruncatedMoments {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Mean and standard deviation of N(mu, sigma^2) restricted to [lo, hi].
/// Stable far in the tails: a beam far off the window reads as a thin
/// sliver at the nearest edge.
TruncatedMoments truncated_gaussian_moments(double mu, double sigma, double lo,
                                            double hi);

/// Camera reading of `moments` on `screen`. Finite mode truncates the
/// distribution to the field of view in each plane; `on_screen` tests the
/// true centroid against the window. With `noise_rms` set, Gaussian noise
/// is added and sizes are clamped below at the screen resolution.
Measurement measure_screen(const BeamMoments& moments, const Screen& screen,
                           ScreenMode mode, std::optional<double> noise_rms,
                           std::mt19937_64* rng);

}  // namespace beamtune::optics
