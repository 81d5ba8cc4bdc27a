#include "beamtune/kernels.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace beamtune::kernels;

namespace {

double matern_ref(double r, double sf2) {
  const double s = std::sqrt(5.0) * r;
  return sf2 * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

}  // namespace

TEST_CASE("scalar matern row matches the closed form") {
  const double point[2] = {0.0, 0.0};
  // dim-major block of three points: (1,0), (0,0), (3,4)
  const double block[6] = {1.0, 0.0, 3.0, 0.0, 0.0, 4.0};
  double out[3];
  scalar::matern52_row(point, block, 3, 3, 2, 2.0, out);
  CHECK(out[0] == doctest::Approx(2.0 * 0.5239941088318203).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(2.0));
  CHECK(out[2] == doctest::Approx(matern_ref(5.0, 2.0)).epsilon(1e-13));
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  const KernelTable* simd = table_for(Isa::Avx2);
  if (simd == nullptr) {
    MESSAGE("AVX2 not available on this host; equivalence test skipped");
    return;
  }
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (std::size_t count : {1u, 3u, 4u, 7u, 8u, 33u, 155u}) {
    for (std::size_t dim : {1u, 5u}) {
      const std::size_t stride = count + 3;
      std::vector<double> point(dim), block(dim * stride);
      for (auto& v : point) v = u(rng);
      for (auto& v : block) v = u(rng);
      std::vector<double> a(count), b(count);
      scalar::matern52_row(point.data(), block.data(), count, stride, dim, 1.7, a.data());
      simd->matern52_row(point.data(), block.data(), count, stride, dim, 1.7, b.data());
      for (std::size_t j = 0; j < count; ++j) {
        CHECK(b[j] == doctest::Approx(a[j]).epsilon(1e-13).scale(1e-300));
        CHECK(std::abs(b[j] - a[j]) <= 1e-14 * 1.7);
      }
    }
  }
  for (std::size_t rows : {1u, 5u, 64u}) {
    for (std::size_t cols : {1u, 3u, 13u, 64u}) {
      std::vector<double> w(rows * cols), bias(rows), in(cols), a(rows), b(rows);
      for (auto& v : w) v = u(rng);
      for (auto& v : bias) v = u(rng);
      for (auto& v : in) v = u(rng);
      scalar::dense(w.data(), bias.data(), in.data(), rows, cols, a.data());
      simd->dense(w.data(), bias.data(), in.data(), rows, cols, b.data());
      for (std::size_t i = 0; i < rows; ++i) CHECK(std::abs(b[i] - a[i]) <= 1e-12 * (1.0 + std::abs(a[i])));
    }
  }
}

TEST_CASE("far points decay to zero without overflow") {
  const KernelTable* simd = table_for(Isa::Avx2);
  const double point[1] = {0.0};
  const double block[4] = {1e3, 1e6, 1e5, 0.5};
  double a[4];
  scalar::matern52_row(point, block, 4, 4, 1, 1.0, a);
  CHECK(a[0] == 0.0);
  CHECK(a[2] == 0.0);
  if (simd) {
    double b[4];
    simd->matern52_row(point, block, 4, 4, 1, 1.0, b);
    for (int i = 0; i < 4; ++i) {
      CHECK(std::isfinite(b[i]));
      CHECK(std::abs(b[i] - a[i]) < 1e-14);
    }
  }
}

TEST_CASE("active table honours a scalar request and always exists") {
  const KernelTable& t = active();
  CHECK((t.isa == Isa::Scalar || t.isa == Isa::Avx2));
  CHECK(table_for(Isa::Scalar) != nullptr);
  CHECK(isa_name(Isa::Scalar) == "scalar");
}
