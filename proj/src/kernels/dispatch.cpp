// Copyright 2026 The Conserva Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <string_view>

#include "conserva/kernels.hpp"

namespace conserva::kernels {

#if defined(CONSERVA_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double l1_distance(const double* a, const double* b, std::size_t n);
}  // namespace avx2
#endif

#if defined(CONSERVA_HAVE_NEON)
namespace neon {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double l1_distance(const double* a, const double* b, std::size_t n);
}  // namespace neon
#endif

namespace {

constexpr KernelTable kScalar{Isa::kScalar, "scalar", &scalar::dot,
                              &scalar::axpy, &scalar::l1_distance};
#if defined(CONSERVA_HAVE_AVX2)
constexpr KernelTable kAvx2{Isa::kAvx2, "avx2", &avx2::dot, &avx2::axpy,
                            &avx2::l1_distance};

bool cpu_has_avx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif
#if defined(CONSERVA_HAVE_NEON)
// NEON is architectural on aarch64.
constexpr KernelTable kNeon{Isa::kNeon, "neon", &neon::dot, &neon::axpy,
                            &neon::l1_distance};
#endif

const KernelTable& select() {
  if (const char* forced = std::getenv("CONSERVA_KERNELS");
      forced != nullptr && std::string_view(forced) == "scalar") {
    return kScalar;
  }
#if defined(CONSERVA_HAVE_AVX2)
  if (cpu_has_avx2()) return kAvx2;
#endif
#if defined(CONSERVA_HAVE_NEON)
  return kNeon;
#endif
  return kScalar;
}

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

std::vector<const KernelTable*> available_tables() {
  std::vector<const KernelTable*> out{&kScalar};
#if defined(CONSERVA_HAVE_AVX2)
  if (cpu_has_avx2()) out.push_back(&kAvx2);
#endif
#if defined(CONSERVA_HAVE_NEON)
  out.push_back(&kNeon);
#endif
  return out;
}

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace conserva::kernels
