#include "beamtune/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace beamtune::kernels {

namespace {

constexpr KernelTable kScalarTable{Isa::Scalar, &scalar::matern52_row,
                                   &scalar::dense};

#if defined(BEAMTUNE_BUILD_AVX2)
constexpr KernelTable kAvx2Table{Isa::Avx2, &avx2::matern52_row, &avx2::dense};

bool cpu_has_avx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

const KernelTable& select() {
  const char* forced = std::getenv("BEAMTUNE_SIMD");
  if (forced != nullptr && std::strcmp(forced, "scalar") == 0) return kScalarTable;
  if (const KernelTable* t = table_for(Isa::Avx2)) return *t;
  return kScalarTable;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

const KernelTable* table_for(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return &kScalarTable;
    case Isa::Avx2:
#if defined(BEAMTUNE_BUILD_AVX2)
      if (cpu_has_avx2()) return &kAvx2Table;
#endif
      return nullptr;
  }
  return nullptr;
}

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace beamtune::kernels
