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
#include "safedap/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace safedap::kernels::scalar {
namespace {

void clamp_box(std::span<double> v, double bound) {
    for (double& x : v) {
        x = std::clamp(x, -bound, bound);
    }
}

double abs_sum(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += std::fabs(x);
    return acc;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

}  // namespace

const KernelTable& table() {
    static const KernelTable t{"scalar", &clamp_box, &abs_sum, &dot, &axpy, &max_abs};
    return t;
}

}  // namespace safedap::kernels::scalar
