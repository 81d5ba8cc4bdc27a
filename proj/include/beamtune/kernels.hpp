#pragma once

// Data-parallel inner loops used by the GP surrogate and the policy MLP.
// Each kernel has a scalar reference implementation and, on x86-64 hosts
// with AVX2+FMA, a vectorized variant chosen once at runtime.

#include <cstddef>
#include <string_view>

namespace beamtune::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

/// Matérn-5/2 covariance between one point and a block of points.
///
/// `point` holds `dim` coordinates already divided by their length scales.
/// `block` is dimension-major: coordinate d of point j lives at
/// `block[d * stride + j]`, also pre-scaled. Writes `count` covariances.
using Matern52RowFn = void (*)(const double* point, const double* block,
                               std::size_t count, std::size_t stride,
                               std::size_t dim, double signal_var, double* out);

/// out = weights * in + bias, `weights` row-major rows x cols.
using DenseFn = void (*)(const double* weights, const double* bias,
                         const double* in, std::size_t rows, std::size_t cols,
                         double* out);

struct KernelTable {
  Isa isa;
  Matern52RowFn matern52_row;
  DenseFn dense;
};

/// Table for the best ISA supported by this CPU. Setting the environment
/// variable BEAMTUNE_SIMD=scalar forces the reference path.
const KernelTable& active();

/// Table for a specific ISA, or nullptr when it was not compiled in or the
/// CPU lacks support.
const KernelTable* table_for(Isa isa);

namespace scalar {
void matern52_row(const double* point, const double* block, std::size_t count,
                  std::size_t stride, std::size_t dim, double signal_var,
                  double* out);
void dense(const double* weights, const double* bias, const double* in,
           std::size_t rows, std::size_t cols, double* out);
}  // namespace scalar

namespace avx2 {
void matern52_row(const double* point, const double* block, std::size_t count,
                  std::size_t stride, std::size_t dim, double signal_var,
                  double* out);
void dense(const double* weights, const double* bias, const double* in,
           std::size_t rows, std::size_t cols, double* out);
}  // namespace avx2

}  // namespace beamtune::kernels
