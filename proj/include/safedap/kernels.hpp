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
#pragma once

// Data-parallel inner loops shared by the DAP algebra and the simulator.
//
// Every kernel has a portable scalar reference in kernels::scalar and, on
// x86-64, an AVX2 variant in kernels::avx2. The active table is picked once at
// startup from CPUID; SAFEDAP_SIMD=scalar in the environment forces the
// reference path. Variants are equivalence-tested against the reference.

#include <cstddef>
#include <span>
#include <string_view>

namespace safedap::kernels {

struct KernelTable {
    std::string_view name;
    /// In-place coordinatewise clamp to [-bound, bound].
    void (*clamp_box)(std::span<double> v, double bound);
    /// Sum of absolute values.
    double (*abs_sum)(std::span<const double> v);
    double (*dot)(std::span<const double> a, std::span<const double> b);
    /// y += alpha * x
    void (*axpy)(double alpha, std::span<const double> x, std::span<double> y);
    /// Largest absolute value (0 for an empty span).
    double (*max_abs)(std::span<const double> v);
};

namespace scalar {
const KernelTable& table();
}

namespace avx2 {
/// nullptr when the binary was built without AVX2 support.
const KernelTable* table();
}

/// True when the running CPU reports AVX2 and FMA.
bool cpu_has_avx2();

/// Kernel table selected for this process.
const KernelTable& active();

/// Override the selection (tests use this to pin a variant). Passing nullptr
/// restores the automatic choice.
void set_active(const KernelTable* table);

inline void clamp_box(std::span<double> v, double bound) { active().clamp_box(v, bound); }
inline double abs_sum(std::span<const double> v) { return active().abs_sum(v); }
inline double dot(std::span<const double> a, std::span<const double> b) { return active().dot(a, b); }
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) { active().axpy(alpha, x, y); }
inline double max_abs(std::span<const double> v) { return active().max_abs(v); }

}  // namespace safedap::kernels
