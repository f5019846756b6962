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

namespace {

TighteningInputs scalar_inputs(double alpha = 1.0) {
    const ConstraintSpec c = box_constraints(1, 1, 1.0, 1.0, 0.1);
    return TighteningInputs::from(c, StabilityCertificate{1.0, 0.5, 1.0}, alpha);
}

}  // namespace

TEST_CASE("bundle terms for a scalar system") {
    // kappa = kappa_B = 1, gamma = 1/2, |D| = 1, w = 0.1, x_max = u_max = 1, z = sqrt 2.
    const TighteningInputs in = scalar_inputs();
    const TighteningBundle b = compute_bundle(in, 3, 0.01, 0.02, 0.05);
    CHECK(b.eps_H == doctest::Approx(0.125));
    CHECK(b.eps_v == doctest::Approx(0.1 * 4.0 * std::sqrt(3.0) * 0.01));
    CHECK(b.eps_w_hat == doctest::Approx(std::sqrt(2.0) * 2.0 * 0.02));
    CHECK(b.eps_theta_hat == doctest::Approx(5.0 * 0.1 * 8.0 * 0.02));
    CHECK(b.eps_theta == doctest::Approx(b.eps_w_hat + b.eps_theta_hat));
    CHECK(b.eps_eta_x == doctest::Approx(2.0 * 0.05));
    CHECK(b.eps_eta_u == doctest::Approx(0.05));
    // b_x = 4 w/gamma + 4 w/gamma^2 = 0.8 + 1.6; eta = 0.05 < w so the first branch holds.
    CHECK(in.state_bound(0.05) == doctest::Approx(2.4));
    CHECK(b.eps_P == doctest::Approx((2.4 + 1.0) * 0.125));
    CHECK(b.eps_x() == doctest::Approx(b.eps_theta + b.eps_eta_x + b.eps_H + b.eps_v));
    CHECK(in.c1() == doctest::Approx(2.0 * std::sqrt(2.0) + 4.0));
}

TEST_CASE("state bound switches branch for large excitation") {
    const TighteningInputs in = scalar_inputs();
    // 2 (w + eta)/gamma = 4 (0.1 + 0.5) = 2.4 > 4 w / gamma = 0.8.
    CHECK(in.state_bound(0.5) == doctest::Approx(2.4 + 1.6));
}

TEST_CASE("alpha scales every term") {
    const TighteningBundle a = compute_bundle(scalar_inputs(1.0), 4, 0.01, 0.03, 0.02);
    const TighteningBundle b = compute_bundle(scalar_inputs(0.5), 4, 0.01, 0.03, 0.02);
    CHECK(b.eps_x() == doctest::Approx(0.5 * a.eps_x()));
    CHECK(b.eps_u() == doctest::Approx(0.5 * a.eps_u()));
    CHECK(b.eps_P == doctest::Approx(0.5 * a.eps_P));
}

TEST_CASE("monotone dependence on the schedule parameters") {
    const TighteningInputs in = scalar_inputs();
    const TighteningBundle base = compute_bundle(in, 4, 0.01, 0.03, 0.02);
    CHECK(compute_bundle(in, 5, 0.01, 0.03, 0.02).eps_H < base.eps_H);
    CHECK(compute_bundle(in, 4, 0.02, 0.03, 0.02).eps_v > base.eps_v);
    CHECK(compute_bundle(in, 4, 0.01, 0.04, 0.02).eps_theta > base.eps_theta);
    CHECK(compute_bundle(in, 4, 0.01, 0.03, 0.03).eps_eta_x > base.eps_eta_x);
    CHECK_THROWS_AS(compute_bundle(in, 0, 0.01, 0.03, 0.02), ContractError);
    CHECK_THROWS_AS(compute_bundle(in, 4, -0.01, 0.03, 0.02), ContractError);
}

TEST_CASE("state bound holds along trajectories") {
    // Any in-box policy, |w| <= w_max and |eta| <= w/kappa_B keeps |x|_2 <= b_x.
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 2, m = 2, H = 6;
        const SystemModel s = random_stable_model(n, m, rng, 0.7);
        const double kB = spectral_norm(s.B);
        const StabilityCertificate cert{1.0, 0.3, kB};
        const ConstraintSpec c = box_constraints(n, m, 5.0, 5.0, 0.1);
        const TighteningInputs in = TighteningInputs::from(c, cert);
        const DapPolicy M = random_box_policy(H, m, n, cert, rng, 1.0);
        std::vector<Vector> hist(H, Vector::Zero(n));
        Vector x = Vector::Zero(n);
        double worst = 0;
        std::bernoulli_distribution coin(0.5);
        for (int t = 0; t < 400; ++t) {
            Vector u = Vector::Zero(m);
            for (int k = 1; k <= H; ++k) u += M[k] * hist[k - 1];
            Vector eta(m);
            for (int i = 0; i < m; ++i) eta[i] = coin(rng) ? 0.1 / kB : -0.1 / kB;
            Vector w(n);
            for (int i = 0; i < n; ++i) w[i] = coin(rng) ? 0.1 : -0.1;
            x = step_plant(s, x, u + eta, w);
            hist.insert(hist.begin(), w);
            hist.pop_back();
            worst = std::max(worst, x.norm());
        }
        CHECK(worst <= in.state_bound(0.1 / kB));
    }
}

TEST_CASE("initial feasibility margin") {
    const TighteningInputs in = scalar_inputs();
    const TighteningBundle b0 = compute_bundle(in, 8, 0.001, 0.01, 0.05);
    const TighteningBundle ini = compute_bundle(in, 8, 0.0, 0.01, 0.0);
    const InitialFeasibility f = initial_feasibility_margin(in, b0, 0.05, 0.01, 0.6, 0.3);
    CHECK(f.state_slack == doctest::Approx(0.6 - ini.eps_theta - b0.eps_P - b0.eps_x() - 0.05));
    CHECK(f.action_slack == doctest::Approx(0.3 - b0.eps_P - b0.eps_u()));
    CHECK(f.ok == (f.state_slack >= 0 && f.action_slack >= 0));
    // Exactly on the boundary counts as feasible.
    const double eps_F_x = ini.eps_theta + b0.eps_P + b0.eps_x() + 0.05;
    CHECK(initial_feasibility_margin(in, b0, 0.05, 0.01, eps_F_x, 0.3).ok);
    CHECK_FALSE(initial_feasibility_margin(in, b0, 0.05, 0.01, eps_F_x - 1e-6, 0.3).ok);
}

TEST_CASE("monotone schedule check") {
    const TighteningInputs in = scalar_inputs();
    const double cap = 0.1 / in.c1();
    std::vector<EpisodeParameters> ok{{0.1, 4, 0.01, 0.05}, {0.1, 5, 0.008, cap}, {0.08, 6, 0.005, cap / 2}};
    CHECK(check_monotone_schedule(ok, in, 0.1).ok);

    auto bad = ok;
    bad[2].H = 3;
    CHECK(check_monotone_schedule(bad, in, 0.1).first_violation == 2);
    bad = ok;
    bad[1].delta_M = 0.02;
    CHECK_FALSE(check_monotone_schedule(bad, in, 0.1).ok);
    bad = ok;
    bad[2].eta_bar = 0.2;
    CHECK_FALSE(check_monotone_schedule(bad, in, 0.1).ok);
    bad = ok;
    bad[2].r = cap * 1.5;
    CHECK(check_monotone_schedule(bad, in, 0.1).reason == "radius increases");
    bad = ok;
    bad[1].r = cap * 1.01;
    bad[2].r = cap * 0.5;
    CHECK(check_monotone_schedule(bad, in, 0.1).first_violation == 1);
    // r^(0) = r_ini is unconstrained.
    bad = ok;
    bad[0].r = 10.0;
    CHECK(check_monotone_schedule(bad, in, 0.1).ok);
}
