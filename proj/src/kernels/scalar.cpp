#include "beamtune/kernels.hpp"

#include <cmath>

namespace beamtune::kernels::scalar {

namespace {
constexpr double kSqrt5 = 2.2360679774997896964;
}

void matern52_row(const double* point, const double* block, std::size_t count,
                  std::size_t stride, std::size_t dim, double signal_var,
                  double* out) {
  for (std::size_t j = 0; j < count; ++j) {
    double d2 = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = point[d] - block[d * stride + j];
      d2 += diff * diff;
    }
    const double s = kSqrt5 * std::sqrt(d2);
    out[j] = signal_var * (1.0 + s + s * s / 3.0) * std::exp(-s);
  }
}

void dense(const double* weights, const double* bias, const double* in,
           std::size_t rows, std::size_t cols, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* w = weights + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += w[c] * in[c];
    out[r] = acc + bias[r];
  }
}

}  // namespace beamtune::kernels::scalar
