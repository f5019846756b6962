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

#include <sstream>

#include "qp_oracle.hpp"

using namespace safedap;
using namespace safedap::testing;

TEST_CASE("interior point agrees with active-set enumeration") {
    Rng rng(31);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 2 + trial % 5;
        const int rows = 3 + trial % 6;
        const qp::QpProblem p = random_problem(n, rows, rng);
        const qp::QpResult r = qp::solve(p);
        REQUIRE(r.status == qp::QpStatus::optimal);
        CHECK(r.objective == doctest::Approx(active_set_oracle(p)).epsilon(1e-7).scale(1.0));
        const qp::KktResiduals k = qp::kkt_residuals(p, r.x, r.z);
        CHECK(k.stationarity < 1e-6);
        CHECK(k.primal_infeasibility < 1e-7);
        CHECK(k.dual_infeasibility == 0.0);
    }
}

TEST_CASE("unconstrained problem") {
    qp::QpProblem p;
    p.P_core = Matrix{{2.0, 0.0}, {0.0, 4.0}};
    p.q = Vector{{-2.0, 4.0}};
    p.aux_ridge.resize(0);
    p.G.resize(0, 2);
    p.h.resize(0);
    const qp::QpResult r = qp::solve(p);
    CHECK(r.status == qp::QpStatus::optimal);
    CHECK(r.x[0] == doctest::Approx(1.0));
    CHECK(r.x[1] == doctest::Approx(-1.0));
}

TEST_CASE("auxiliary variables: l1-regularised scalar") {
    // min 1/2 (x - 3)^2 + t  s.t. |x| <= t  ->  x = 2.
    qp::QpProblem p;
    p.P_core = Matrix::Identity(1, 1);
    p.q = Vector{{-3.0, 1.0}};
    p.aux_ridge = Vector::Constant(1, 1e-10);
    Matrix G{{1.0, -1.0}, {-1.0, -1.0}};
    p.G = G.sparseView();
    p.h = Vector::Zero(2);
    const qp::QpResult r = qp::solve(p);
    CHECK(r.status == qp::QpStatus::optimal);
    CHECK(r.x[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(r.x[1] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("infeasible problem is reported with a margin") {
    qp::QpProblem p;
    p.P_core = Matrix::Identity(1, 1);
    p.q = Vector::Zero(1);
    p.aux_ridge.resize(0);
    Matrix G{{1.0}, {-1.0}};
    p.G = G.sparseView();
    p.h = Vector{{-1.0, -1.0}};  // x <= -1 and x >= 1
    const qp::QpResult r = qp::solve(p);
    CHECK(r.status == qp::QpStatus::infeasible);
    CHECK(r.infeasibility_margin == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(qp::to_string(r.status) == "infeasible");
}

TEST_CASE("invalid problems are rejected") {
    qp::QpProblem p;
    p.P_core = Matrix::Identity(2, 2);
    p.q = Vector::Zero(3);
    p.aux_ridge.resize(0);
    p.G.resize(0, 2);
    p.h.resize(0);
    CHECK_THROWS_AS(qp::solve(p), ContractError);
}

namespace {

struct SmallInstance {
    SystemModel s;
    ConstraintSpec c;
    StabilityCertificate cert;
};

SmallInstance small_instance(Rng& rng) {
    SmallInstance out{random_stable_model(2, 1, rng, 0.6), box_constraints(2, 1, 1.0, 1.0, 0.05), {}};
    out.cert = {1.0, 0.4, spectral_norm(out.s.B)};
    return out;
}

}  // namespace

TEST_CASE("safe set rows agree with direct evaluation") {
    Rng rng(41);
    const SmallInstance in = small_instance(rng);
    const int H = 4;
    const SafePolicyPolytope omega = build_safe_set(in.s, 0.1, 0.05, H, in.c, in.cert);
    CHECK(omega.n_policy() == 8);
    int inside = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const DapPolicy M = random_box_policy(H, 1, 2, in.cert, rng, trial % 2 ? 0.4 : 1.2);
        const double v = omega.violation(M);
        if (std::abs(v) < 1e-6) continue;
        CHECK(omega.contains(M) == (v <= 0.0));
        inside += v <= 0.0;
    }
    CHECK(inside > 0);
    // Longer policies need zero tails; shorter ones are padded.
    CHECK(omega.contains(DapPolicy(H + 2, 1, 2)));
    CHECK(omega.contains(DapPolicy(H - 1, 1, 2)));
    DapPolicy tail(H + 1, 1, 2);
    tail[H + 1](0, 0) = 1e-3;
    CHECK_FALSE(omega.contains(tail));
    std::ostringstream os;
    omega.dump(os);
    CHECK(!os.str().empty());
}

TEST_CASE("robust program solution lies in its polytope and beats feasible points") {
    Rng rng(43);
    const SmallInstance in = small_instance(rng);
    const int H = 5;
    const SafePolicyPolytope omega = build_safe_set(in.s, 0.3, 0.2, H, in.c, in.cert);
    const QuadraticCost f = cost_quadratic(H, in.s, Matrix::Identity(2, 2), Matrix::Identity(1, 1),
                                           0.01 * Matrix::Identity(2, 2));
    const QpSolution sol = solve_qp(f, omega);
    REQUIRE(sol.optimal());
    CHECK(omega.violation(sol.policy) <= 1e-7);
    CHECK(sol.objective == doctest::Approx(f(sol.policy.flatten())).epsilon(1e-6));
    for (int trial = 0; trial < 100; ++trial) {
        const DapPolicy M = random_box_policy(H, 1, 2, in.cert, rng, 0.3);
        if (omega.violation(M) <= 0.0) CHECK(f(M.flatten()) >= sol.objective - 1e-9);
    }
}

TEST_CASE("feasibility witness and emptiness") {
    Rng rng(45);
    const SmallInstance in = small_instance(rng);
    const SafePolicyPolytope omega = build_safe_set(in.s, 0.2, 0.1, 3, in.c, in.cert);
    const FeasibilityResult f = check_feasible(omega, 0.3);
    REQUIRE(f.feasible);
    const SafePolicyPolytope tighter = build_safe_set(in.s, 0.5, 0.1, 3, in.c, in.cert);
    CHECK(tighter.violation(f.witness) <= 1e-7);
    // Tightening beyond the constraint bound empties the set.
    const SafePolicyPolytope empty = build_safe_set(in.s, 0.999, 0.1, 3, in.c, in.cert);
    const FeasibilityResult e = check_feasible(empty, 0.1);
    CHECK_FALSE(e.feasible);
    CHECK(e.margin > 0.0);
}

TEST_CASE("robust CE reports infeasibility") {
    Rng rng(47);
    const SmallInstance in = small_instance(rng);
    const TighteningInputs ti = TighteningInputs::from(in.c, in.cert);
    const CostWeights w{Matrix::Identity(2, 2), Matrix::Identity(1, 1), 0.01 * Matrix::Identity(2, 2)};
    CHECK_NOTHROW(build_and_solve_robust_ce(in.s, 0.0, 0.0, 6, 0.001, ti, in.c, w));
    CHECK_THROWS_AS(build_and_solve_robust_ce(in.s, 1.0, 0.0, 6, 0.001, ti, in.c, w), InfeasibleProgram);
}

TEST_CASE("mid policy lies in both sets") {
    Rng rng(49);
    const SmallInstance in = small_instance(rng);
    const SafePolicyPolytope a = build_safe_set(in.s, 0.1, 0.05, 4, in.c, in.cert);
    const SystemModel s2(in.s.A * 1.01, in.s.B);
    const SafePolicyPolytope b = build_safe_set(s2, 0.2, 0.05, 3, in.c, in.cert);
    const QuadraticCost f = cost_quadratic(4, in.s, Matrix::Identity(2, 2), Matrix::Identity(1, 1),
                                           0.01 * Matrix::Identity(2, 2));
    const DapPolicy Ma = solve_qp(f, a).policy;
    const FeasibilityResult fb = check_feasible(b, 0.0);
    REQUIRE(fb.feasible);
    const DapPolicy mid = find_mid_policy(Ma, a, fb.witness, b);
    CHECK(mid.H() == 3);
    CHECK(a.violation(mid) <= 1e-7);
    CHECK(b.violation(mid) <= 1e-7);
    // When both endpoints lie in both sets the midpoint is the average.
    const DapPolicy zero(3, 1, 2);
    const DapPolicy small = interpolate(zero, fb.witness, 0.1);
    const DapPolicy m2 = find_mid_policy(zero, a, small, b);
    CHECK(frobenius_distance(m2, interpolate(zero, small, 0.5)) < 1e-6);
}
