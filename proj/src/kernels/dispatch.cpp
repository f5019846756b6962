/*
 Copyright 2026 The safedap Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include <atomic>
#include <cstdlib>
#include <string_view>

#include "safedap/kernels.hpp"

namespace safedap::kernels {
namespace {

const KernelTable* choose() {
    if (const char* env = std::getenv("SAFEDAP_SIMD"); env != nullptr && std::string_view(env) == "scalar") {
        return &scalar::table();
    }
    if (cpu_has_avx2()) {
        if (const KernelTable* t = avx2::table(); t != nullptr) return t;
    }
    return &scalar::table();
}

std::atomic<const KernelTable*> g_override{nullptr};

}  // namespace

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(__i386__)) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable& active() {
    if (const KernelTable* t = g_override.load(std::memory_order_acquire); t != nullptr) return *t;
    static const KernelTable* chosen = choose();
    return *chosen;
}

void set_active(const KernelTable* table) { g_override.store(table, std::memory_order_release); }

}  // namespace safedap::kernels
