// Copyright 2026 The fedmix Authors
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

// Data-parallel double-precision kernels behind every dense inner loop.
//
// Each backend fills a KernelTable. The scalar table is the reference; vector
// tables must match it bit-for-bit on the elementwise kernels (axpy, scale)
// and to rounding on the reductions (dot, sq_diff_sum), whose summation order
// differs. Selection happens once per process: FEDMIX_SIMD=scalar|avx2|neon
// forces a backend, otherwise the widest one the CPU supports wins.

#include <cstddef>
#include <string_view>
#include <vector>

namespace fedmix::simd {

struct KernelTable {
  std::string_view name;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double* y, double alpha, const double* x, std::size_t n);
  // y[i] = alpha * x[i]
  void (*scale)(double* y, double alpha, const double* x, std::size_t n);
  // sum_i (a[i] - b[i])^2
  double (*sq_diff_sum)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_kernels();

/// nullptr when the backend was not compiled in or the CPU lacks support.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

/// Backends usable on this machine, scalar first.
std::vector<const KernelTable*> available_kernels();

/// The process-wide backend. Resolved on first call.
const KernelTable& active();

/// Overrides the process-wide backend. Returns false if `name` is unknown or
/// unavailable here, leaving the current choice untouched.
bool set_active(std::string_view name);

}  // namespace fedmix::simd
