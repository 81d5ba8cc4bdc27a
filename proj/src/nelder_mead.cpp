#include "beamtune/nelder_mead.hpp"

#include "beamtune/errors.hpp"
#include "beamtune/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace beamtune::nm {

Point reflect(const Point& centroid, const Point& worst, double alpha) {
  Point out(centroid.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = centroid[i] + alpha * (centroid[i] - worst[i]);
  }
  return out;
}

std::vector<Point> axis_simplex(const Point& base, const std::vector<double>& spreads) {
  if (spreads.size() != base.size()) throw InvalidParameter("simplex spread size mismatch");
  std::vector<Point> s{base};
  for (std::size_t i = 0; i < base.size(); ++i) {
    Point v = base;
    v[i] += spreads[i];
    s.push_back(std::move(v));
  }
  return s;
}

bool is_nondegenerate(const std::vector<Point>& simplex) {
  if (simplex.empty()) return false;
  const std::size_t n = simplex[0].size();
  if (simplex.size() != n + 1) return false;
  Eigen::MatrixXd edges(n, n);
  double scale = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      edges(i, j) = simplex[j + 1][i] - simplex[0][i];
      norm += edges(i, j) * edges(i, j);
    }
    if (norm == 0.0) return false;
    scale *= std::sqrt(norm);
  }
  return std::abs(edges.determinant()) > 1e-12 * scale;
}

namespace {

class BudgetExhausted {};

}  // namespace

Result minimize(const Objective& f, std::vector<Point> simplex, const Options& opt) {
  const std::size_t n = simplex.empty() ? 0 : simplex[0].size();
  if (n == 0 || simplex.size() != n + 1) throw InvalidParameter("simplex needs n + 1 vertices");
  for (const auto& v : simplex) {
    if (v.size() != n) throw InvalidParameter("simplex vertices differ in dimension");
  }
  if (!is_nondegenerate(simplex)) throw InvalidParameter("initial simplex is degenerate");
  if (opt.max_evaluations < 1) throw InvalidParameter("evaluation budget must be positive");

  Result res;
  const auto& c = opt.coeffs;
  std::vector<double> fv(n + 1, 0.0);
  Rng jitter_rng(opt.jitter_seed);

  auto eval = [&](const Point& x) {
    if (res.evaluations >= opt.max_evaluations) throw BudgetExhausted{};
    ++res.evaluations;
    return f(x);
  };

  auto sort_simplex = [&] {
    std::vector<std::size_t> idx(simplex.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    std::vector<Point> s2;
    std::vector<double> f2;
    for (std::size_t k : idx) {
      s2.push_back(simplex[k]);
      f2.push_back(fv[k]);
    }
    simplex.swap(s2);
    fv.swap(f2);
  };

  std::size_t evaluated = 0;
  try {
    for (; evaluated <= n; ++evaluated) fv[evaluated] = eval(simplex[evaluated]);
    sort_simplex();

    while (true) {
      double xspread = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
          xspread = std::max(xspread, std::abs(simplex[j][i] - simplex[0][i]));
        }
      }
      const double fspread = fv[n] - fv[0];
      if (xspread <= opt.x_tolerance && fspread <= opt.f_tolerance) {
        res.converged = true;
        break;
      }
      ++res.iterations;

      Point centroid(n, 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[j][i];
      }
      for (double& v : centroid) v /= static_cast<double>(n);

      const Point xr = reflect(centroid, simplex[n], c.reflection);
      const double fr = eval(xr);
      bool do_shrink = false;

      if (fr < fv[0]) {
        const Point xe = reflect(centroid, simplex[n], c.reflection * c.expansion);
        const double fe = eval(xe);
        if (fe < fr) {
          simplex[n] = xe;
          fv[n] = fe;
        } else {
          simplex[n] = xr;
          fv[n] = fr;
        }
      } else if (fr < fv[n - 1]) {
        simplex[n] = xr;
        fv[n] = fr;
      } else if (fr < fv[n]) {
        const Point xc = reflect(centroid, simplex[n], c.reflection * c.contraction);
        const double fc = eval(xc);
        if (fc <= fr) {
          simplex[n] = xc;
          fv[n] = fc;
        } else {
          do_shrink = true;
        }
      } else {
        const Point xcc = reflect(centroid, simplex[n], -c.contraction);
        const double fcc = eval(xcc);
        if (fcc < fv[n]) {
          simplex[n] = xcc;
          fv[n] = fcc;
        } else {
          do_shrink = true;
        }
      }

      if (do_shrink) {
        std::vector<Point> shrunk = simplex;
        for (std::size_t j = 1; j <= n; ++j) {
          for (std::size_t i = 0; i < n; ++i) {
            shrunk[j][i] = simplex[0][i] + c.shrink * (simplex[j][i] - simplex[0][i]);
          }
        }
        if (!is_nondegenerate(shrunk)) {
          // Re-spread collapsed vertices around the best one.
          res.degenerate_restart = true;
          double scale = 0.0;
          for (std::size_t j = 1; j <= n; ++j) {
            for (std::size_t i = 0; i < n; ++i) {
              scale = std::max(scale, std::abs(shrunk[j][i] - shrunk[0][i]));
            }
          }
          scale = std::max(scale, 1e-8);
          for (std::size_t j = 1; j <= n; ++j) {
            shrunk[j] = shrunk[0];
            shrunk[j][j - 1] += scale * uniform(jitter_rng, 0.5, 1.0);
          }
        }
        // Commit vertex by vertex so a budget cut leaves values consistent.
        for (std::size_t j = 1; j <= n; ++j) {
          const double fj = eval(shrunk[j]);
          simplex[j] = std::move(shrunk[j]);
          fv[j] = fj;
        }
      }
      sort_simplex();
    }
  } catch (const BudgetExhausted&) {
    if (evaluated <= n) {
      // Budget ran out while evaluating the initial simplex.
      simplex.resize(evaluated);
      fv.resize(evaluated);
      if (simplex.empty()) throw InvalidParameter("no evaluations performed");
    }
    sort_simplex();
  }

  res.best = simplex[0];
  res.best_value = fv[0];
  res.final_simplex = simplex;
  return res;
}

}  // namespace beamtune::nm
