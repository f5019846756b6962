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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "safedap/kernels.hpp"

using namespace safedap::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

double rel_close(double a, double b) { return std::abs(a - b) <= 1e-12 * (1.0 + std::abs(a) + std::abs(b)); }

}  // namespace

TEST_CASE("scalar reference kernels") {
    std::vector<double> v{1.5, -2.5, 0.25, -0.1};
    const KernelTable& s = scalar::table();
    CHECK(s.abs_sum(v) == doctest::Approx(4.35));
    CHECK(s.max_abs(v) == 2.5);
    CHECK(s.max_abs({}) == 0.0);
    CHECK(s.dot(v, v) == doctest::Approx(1.5 * 1.5 + 2.5 * 2.5 + 0.0625 + 0.01));
    std::vector<double> y(4, 1.0);
    s.axpy(2.0, v, y);
    CHECK(y[1] == doctest::Approx(-4.0));
    s.clamp_box(v, 1.0);
    CHECK(v == std::vector<double>{1.0, -1.0, 0.25, -0.1});
}

TEST_CASE("avx2 kernels match the scalar reference") {
    const KernelTable* fast = avx2::table();
    if (fast == nullptr || !cpu_has_avx2()) {
        MESSAGE("AVX2 unavailable; skipping equivalence");
        return;
    }
    const KernelTable& ref = scalar::table();
    std::mt19937_64 rng(7);
    for (std::size_t n = 0; n < 70; ++n) {
        const auto a = random_vec(n, rng);
        const auto b = random_vec(n, rng);
        CHECK(rel_close(fast->abs_sum(a), ref.abs_sum(a)));
        CHECK(rel_close(fast->dot(a, b), ref.dot(a, b)));
        CHECK(fast->max_abs(a) == ref.max_abs(a));

        auto c1 = a, c2 = a;
        fast->clamp_box(c1, 1.2);
        ref.clamp_box(c2, 1.2);
        CHECK(c1 == c2);

        auto y1 = b, y2 = b;
        fast->axpy(0.7, a, y1);
        ref.axpy(0.7, a, y2);
        for (std::size_t i = 0; i < n; ++i) CHECK(rel_close(y1[i], y2[i]));
    }
}

TEST_CASE("dispatch can be pinned and restored") {
    set_active(&scalar::table());
    CHECK(active().name == scalar::table().name);
    std::vector<double> v{-4.0, 2.0};
    CHECK(abs_sum(v) == 6.0);
    set_active(nullptr);
    if (cpu_has_avx2() && avx2::table() != nullptr && std::getenv("SAFEDAP_SIMD") == nullptr) {
        CHECK(active().name == avx2::table()->name);
    }
}
