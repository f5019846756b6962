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
// Compiled with -mavx2 -mfma. Nothing in here may run before the dispatcher
// has confirmed CPU support.
#include "safedap/kernels.hpp"

#include <algorithm>
#include <cmath>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define SAFEDAP_HAVE_AVX2 1
#else
#define SAFEDAP_HAVE_AVX2 0
#endif

namespace safedap::kernels::avx2 {

#if SAFEDAP_HAVE_AVX2
namespace {

inline __m256d abs_pd(__m256d x) {
    const __m256d sign = _mm256_set1_pd(-0.0);
    return _mm256_andnot_pd(sign, x);
}

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

void clamp_box(std::span<double> v, double bound) {
    const __m256d hi = _mm256_set1_pd(bound);
    const __m256d lo = _mm256_set1_pd(-bound);
    std::size_t i = 0;
    const std::size_t n = v.size();
    for (; i + 4 <= n; i += 4) {
        __m256d x = _mm256_loadu_pd(v.data() + i);
        // max(min(x, hi), lo) matches std::clamp for finite inputs
        x = _mm256_max_pd(_mm256_min_pd(x, hi), lo);
        _mm256_storeu_pd(v.data() + i, x);
    }
    for (; i < n; ++i) v[i] = std::clamp(v[i], -bound, bound);
}

double abs_sum(std::span<const double> v) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    const std::size_t n = v.size();
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, abs_pd(_mm256_loadu_pd(v.data() + i)));
    double s = hsum(acc);
    for (; i < n; ++i) s += std::fabs(v[i]);
    return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    const std::size_t n = a.size();
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    const __m256d a = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    const std::size_t n = x.size();
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_loadu_pd(y.data() + i);
        yv = _mm256_fmadd_pd(a, _mm256_loadu_pd(x.data() + i), yv);
        _mm256_storeu_pd(y.data() + i, yv);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

double max_abs(std::span<const double> v) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    const std::size_t n = v.size();
    for (; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, abs_pd(_mm256_loadu_pd(v.data() + i)));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double m = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
    for (; i < n; ++i) m = std::max(m, std::fabs(v[i]));
    return m;
}

}  // namespace

const KernelTable* table() {
    static const KernelTable t{"avx2", &clamp_box, &abs_sum, &dot, &axpy, &max_abs};
    return &t;
}
#else
const KernelTable* table() { return nullptr; }
#endif

}  // namespace safedap::kernels::avx2
