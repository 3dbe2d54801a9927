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

#include <atomic>
#include <cstdlib>

#include "fedmix/simd/kernels.hpp"

namespace fedmix::simd {

#if defined(FEDMIX_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(FEDMIX_HAVE_NEON)
const KernelTable& neon_table();
#endif

const KernelTable* avx2_kernels() {
#if defined(FEDMIX_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_kernels() {
#if defined(FEDMIX_HAVE_NEON)
  return &neon_table();  // mandatory on aarch64
#else
  return nullptr;
#endif
}

std::vector<const KernelTable*> available_kernels() {
  std::vector<const KernelTable*> out{&scalar_kernels()};
  if (const auto* t = avx2_kernels()) out.push_back(t);
  if (const auto* t = neon_kernels()) out.push_back(t);
  return out;
}

namespace {

const KernelTable* find(std::string_view name) {
  for (const auto* t : available_kernels()) {
    if (t->name == name) return t;
  }
  return nullptr;
}

const KernelTable* resolve_default() {
  if (const char* env = std::getenv("FEDMIX_SIMD"); env != nullptr && *env != '\0') {
    if (const auto* t = find(env)) return t;
  }
  return available_kernels().back();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{resolve_default()};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

bool set_active(std::string_view name) {
  const auto* t = find(name);
  if (t == nullptr) return false;
  current().store(t, std::memory_order_release);
  return true;
}

}  // namespace fedmix::simd
