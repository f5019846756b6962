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

#include "test_util.hpp"

using namespace safedap;
using namespace safedap::testing;

TEST_CASE("noise-free data recovers the model exactly") {
    Rng rng(51);
    const SystemModel s = random_stable_model(3, 2, rng);
    RegressionDataset data(3, 2);
    Vector x = Vector::Zero(3);
    for (int t = 0; t < 50; ++t) {
        const Vector u = random_matrix(2, 1, rng);
        const Vector xn = step_plant(s, x, u, Vector::Zero(3));
        data.add(x, u, xn);
        x = xn + random_matrix(3, 1, rng, 0.1);  // reset-style excitation of the state
    }
    CHECK(data.count() == 50);
    const SystemModel est = least_squares(data, 1e-14);
    CHECK(model_distance(est, s) < 1e-9);
    data.clear();
    CHECK(data.count() == 0);
}

TEST_CASE("least squares matches the normal equations") {
    Rng rng(52);
    RegressionDataset data(2, 1);
    Matrix Z(3, 40), Y(2, 40);
    for (int t = 0; t < 40; ++t) {
        const Vector x = random_matrix(2, 1, rng), u = random_matrix(1, 1, rng), y = random_matrix(2, 1, rng);
        data.add(x, u, y);
        Z.col(t) << x, u;
        Y.col(t) = y;
    }
    const Matrix theta = (Y * Z.transpose()) * (Z * Z.transpose()).inverse();
    const SystemModel est = least_squares(data, 0.0 + 1e-14);
    CHECK((est.stacked() - theta).norm() < 1e-10);
}

TEST_CASE("rank-deficient data is rejected") {
    RegressionDataset data(2, 1);
    CHECK_THROWS_AS(least_squares(data), ContractError);
    for (int t = 0; t < 10; ++t) data.add(Vector{{1.0, 0.0}}, Vector{{0.0}}, Vector{{0.5, 0.0}});
    CHECK_THROWS_AS(least_squares(data, 0.0), ContractError);
}

TEST_CASE("projection onto the prior ball") {
    const SystemModel c(Matrix{{0.5}}, Matrix{{1.0}});
    const SystemModel inside(Matrix{{0.51}}, Matrix{{1.0}});
    CHECK(model_distance(project_uncertainty(inside, c, 0.1), inside) == 0.0);
    const SystemModel far(Matrix{{0.8}}, Matrix{{1.4}});
    const SystemModel p = project_uncertainty(far, c, 0.1);
    CHECK(model_distance(p, c) == doctest::Approx(0.1));
    // Radial: p - c is parallel to far - c.
    CHECK((p.A(0, 0) - 0.5) / (p.B(0, 0) - 1.0) == doctest::Approx(0.3 / 0.4));
    const UncertaintySet set{p, 0.05, c, 0.1};
    CHECK(set.contains(p));
    CHECK_FALSE(set.contains(far));
}

TEST_CASE("BMSB constants") {
    const BmsbConstants a = bmsb_constants(0.04, 0.25, 0.25, 0.25, 0.2, 1.0);
    CHECK(a.s_z == doctest::Approx(std::min({0.01, std::sqrt(3.0) / 2.0 * 0.05, 0.04 * 0.25 * 0.2 / 4.0})));
    CHECK(a.p_z == 0.25);
    CHECK_THROWS_AS(bmsb_constants(0.0, 0.25, 0.25, 0.25, 0.2, 1.0), ContractError);
}

namespace {
RadiusConstants constants() {
    RadiusConstants c;
    c.sigma_sub = 0.1;
    c.b_z = 3.0;
    c.s_z = 0.01;
    c.p_z = 0.25;
    c.n = 2;
    c.m = 1;
    return c;
}
}  // namespace

TEST_CASE("confidence radius formula and scaling") {
    RadiusConstants c = constants();
    c.floor_scale = 0.0;
    const double d = 3.0;
    const double delta = 0.01;
    const double num = 2 + d * std::log(10 / 0.25) + 2 * d * std::log(300.0) + std::log(100.0);
    const double expect = std::sqrt(2.0) * 90 * 0.1 / 0.25 * std::sqrt(num / (1000 * 1e-4));
    CHECK(confidence_radius(1000, delta, c) == doctest::Approx(expect));
    CHECK(confidence_radius(4000, delta, c) == doctest::Approx(expect / 2));
    c.radius_scale = 0.1;
    CHECK(confidence_radius(1000, delta, c) == doctest::Approx(expect / 10));
    CHECK(confidence_radius(1000, delta / 10, c) > confidence_radius(1000, delta, c));
}

TEST_CASE("sample floor") {
    RadiusConstants c = constants();
    const double floor = sample_floor(0.01, c);
    const double expect = 10 / 0.0625 * (std::log(100.0) + 6 * std::log(40.0) + 6 * std::log(300.0));
    CHECK(floor == doctest::Approx(expect));
    CHECK_THROWS_AS(confidence_radius(static_cast<std::int64_t>(floor) - 1, 0.01, c), SampleFloorError);
    CHECK_NOTHROW(confidence_radius(static_cast<std::int64_t>(floor) + 1, 0.01, c));
    c.floor_scale = 0.5;
    CHECK(sample_floor(0.01, c) == doctest::Approx(expect / 2));
}

TEST_CASE("episode failure budgets sum below p") {
    double total = 0;
    for (int e = 1; e <= 1000; ++e) total += episode_delta(e, 0.1);
    CHECK(total < 0.1 * M_PI * M_PI / 36 + 1e-12);
    CHECK(episode_delta(2, 0.1) == doctest::Approx(0.1 / 24));
    CHECK_THROWS_AS(episode_delta(0, 0.1), ContractError);
}

TEST_CASE("schedule radius uses the previous excitation level") {
    RadiusInputs in;
    in.base = constants();
    in.base.floor_scale = 0.0;
    in.s_w = 0.05;
    in.p_w = 0.25;
    in.s_eta = 0.25;
    in.p_eta = 0.25;
    in.b_u = 1.0;
    const RadiusConstants c = radius_constants_at(0.1, in);
    CHECK(c.s_z == doctest::Approx(bmsb_constants(0.05, 0.25, 0.25, 0.25, 0.1, 1.0).s_z));
    CHECK(schedule_radius(2, 500, 0.1, 0.1, in) == doctest::Approx(confidence_radius(500, 0.1 / 24, c)));
    CHECK(schedule_radius(1, 500, 0.2, 0.1, in) < schedule_radius(1, 500, 0.1, 0.1, in));
}

TEST_CASE("least-squares error shrinks with data") {
    Rng rng(53);
    const SystemModel s = random_stable_model(2, 1, rng, 0.5);
    auto error = [&](int T, std::uint64_t seed) {
        Rng r(seed);
        RegressionDataset data(2, 1);
        Vector x = Vector::Zero(2);
        const DisturbanceModel d = DisturbanceModel::make(NoiseKind::uniform_box, 2, 0.05);
        const ExcitationModel e = ExcitationModel::make(NoiseKind::uniform_box, 1);
        for (int t = 0; t < T; ++t) {
            const Vector u = e.sample(r, 0.2);
            const Vector xn = step_plant(s, x, u, d.sample(r));
            data.add(x, u, xn);
            x = xn;
        }
        return model_distance(least_squares(data), s);
    };
    std::vector<double> small, large;
    for (std::uint64_t seed = 1; seed <= 15; ++seed) {
        small.push_back(error(500, seed));
        large.push_back(error(8000, seed + 100));
    }
    const double ratio = median(small) / median(large);
    CHECK(ratio > 2.5);
    CHECK(ratio < 6.5);
}
