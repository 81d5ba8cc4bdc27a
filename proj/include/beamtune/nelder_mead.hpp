#pragma once

// Nelder-Mead downhill simplex with an exact evaluation budget. Shared by
// the simplex baseline (one evaluation = one machine step) and the GP
// hyperparameter fit.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace beamtune::nm {

using Point = std::vector<double>;
using Objective = std::function<double(std::span<const double>)>;

struct Coefficients {
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
};

struct Options {
  Coefficients coeffs;
  int max_evaluations = 150;
  double x_tolerance = 1e-8;  // max vertex distance from the best, per coordinate
  double f_tolerance = 1e-8;  // max objective spread across the simplex
  std::uint64_t jitter_seed = 0;
};

struct Result {
  Point best;
  double best_value = 0.0;
  int evaluations = 0;
  int iterations = 0;
  bool converged = false;
  bool degenerate_restart = false;  // a shrink collapsed the simplex and it was re-spread
  std::vector<Point> final_simplex;  // sorted, best first
};

/// x_r = c + alpha (c - worst)
Point reflect(const Point& centroid, const Point& worst, double alpha);

/// Axis-aligned simplex: `base` plus base + spread_i e_i.
std::vector<Point> axis_simplex(const Point& base, const std::vector<double>& spreads);

/// True when the vertices are affinely independent (relative to edge scale).
bool is_nondegenerate(const std::vector<Point>& simplex);

/// Minimizes `f` from the given initial simplex (n + 1 vertices of size n).
/// Never calls `f` more than options.max_evaluations times.
Result minimize(const Objective& f, std::vector<Point> simplex, const Options& options);

}  // namespace beamtune::nm
