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

#pragma once

// Dense double-precision kernels for the inner loops of tabular planning:
// Bellman backups (dot), mixing transition rows under a stochastic policy
// (axpy) and total-variation / L1 distances (l1_distance).
//
// Every kernel has a scalar reference version and, where the target supports
// it, an AVX2+FMA or NEON version. The dispatcher picks one at first use from
// the running CPU; CONSERVA_KERNELS=scalar forces the reference path.
// Vector variants reassociate sums, so results agree with the scalar path to
// a few ulps times the vector length, not bit-for-bit.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace conserva::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

struct KernelTable {
  Isa isa;
  std::string_view name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*l1_distance)(const double* a, const double* b, std::size_t n);
};

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double l1_distance(const double* a, const double* b, std::size_t n);
}  // namespace scalar

const KernelTable& scalar_table();

// Tables compiled in and supported by this CPU, scalar first.
std::vector<const KernelTable*> available_tables();

// The table used by the inline wrappers below.
const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline double l1_distance(std::span<const double> a,
                          std::span<const double> b) {
  return active().l1_distance(a.data(), b.data(), a.size());
}

}  // namespace conserva::kernels
