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

Matrix mpow(const Matrix& A, int k) {
    Matrix P = Matrix::Identity(A.rows(), A.cols());
    for (int i = 0; i < k; ++i) P = P * A;
    return P;
}

// Independent transcription of Phi_k for the oracle.
Matrix phi_oracle(const DapPolicy& M, const SystemModel& s, int k) {
    const int H = M.H();
    Matrix out = k <= H ? mpow(s.A, k - 1) : Matrix::Zero(s.n(), s.n());
    for (int i = 1; i <= H; ++i) {
        if (k - i >= 1 && k - i <= H) out += mpow(s.A, i - 1) * s.B * M[k - i];
    }
    return out;
}

}  // namespace

TEST_CASE("flat layout") {
    Rng rng(1);
    const DapPolicy M(std::vector<Matrix>{random_matrix(2, 3, rng), random_matrix(2, 3, rng)});
    const Vector v = M.flatten();
    CHECK(v.size() == 12);
    CHECK(v[DapPolicy::flat_index(2, 1, 2, 2, 3)] == M[2](1, 2));
    CHECK(v[DapPolicy::flat_index(1, 0, 1, 2, 3)] == M[1](0, 1));
    const DapPolicy back = DapPolicy::unflatten(v, 2, 2, 3);
    CHECK(frobenius_distance(back, M) == 0.0);
}

TEST_CASE("padding, truncation and interpolation") {
    Rng rng(2);
    const DapPolicy a = DapPolicy(std::vector<Matrix>{random_matrix(1, 2, rng)});
    const DapPolicy b = DapPolicy(std::vector<Matrix>{random_matrix(1, 2, rng), random_matrix(1, 2, rng)});
    CHECK(pad_policy(a, 3).H() == 3);
    CHECK(pad_policy(a, 3)[3].norm() == 0.0);
    CHECK(truncate_policy(b, 1)[1] == b[1]);
    const double d = std::sqrt((a[1] - b[1]).squaredNorm() + b[2].squaredNorm());
    CHECK(frobenius_distance(a, b) == doctest::Approx(d));
    const DapPolicy mid = interpolate(a, b, 0.25);
    CHECK(mid.H() == 2);
    CHECK((mid[1] - (0.75 * a[1] + 0.25 * b[1])).norm() < 1e-15);
    CHECK((mid[2] - 0.25 * b[2]).norm() < 1e-15);
    CHECK(frobenius_distance(interpolate(a, b, 0.0), pad_policy(a, 2)) == 0.0);
}

TEST_CASE("phi_x matches the transfer-map definition") {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const SystemModel s = random_stable_model(3, 2, rng);
        const DapPolicy M = DapPolicy(std::vector<Matrix>{random_matrix(2, 3, rng), random_matrix(2, 3, rng),
                                                          random_matrix(2, 3, rng)});
        const auto phis = phi_x(M, s);
        REQUIRE(phis.size() == 6);
        for (int k = 1; k <= 6; ++k) CHECK((phis[k - 1] - phi_oracle(M, s, k)).norm() < 1e-12);
    }
}

TEST_CASE("phi_affine reproduces phi_x") {
    Rng rng(6);
    const SystemModel s = random_stable_model(2, 2, rng);
    const int H = 4;
    const PhiAffine pa = phi_affine(H, s);
    for (int trial = 0; trial < 5; ++trial) {
        const DapPolicy M = DapPolicy::unflatten(random_matrix(H * 4, 1, rng), H, 2, 2);
        const Vector v = M.flatten();
        const auto phis = phi_x(M, s);
        for (int k = 1; k <= 2 * H; ++k) {
            const Vector vec = pa.c[k - 1] + pa.J[k - 1] * v;
            const Matrix Phi = Eigen::Map<const Matrix>(vec.data(), 2, 2);
            CHECK((Phi - phis[k - 1]).norm() < 1e-12);
        }
    }
}

TEST_CASE("state expansion is exact for a fixed policy") {
    Rng rng(8);
    const int n = 2, m = 1, H = 3;
    const SystemModel s = random_stable_model(n, m, rng);
    const DapPolicy M = DapPolicy::unflatten(random_matrix(H * m * n, 1, rng), H, m, n);
    std::vector<Vector> w;  // w[t]
    std::vector<Vector> x{random_matrix(n, 1, rng)};
    const int T = 4 * H;
    for (int t = 0; t < T; ++t) {
        Vector u = Vector::Zero(m);
        for (int k = 1; k <= H; ++k)
            if (t - k >= 0) u += M[k] * w[t - k];
        w.push_back(random_matrix(n, 1, rng, 0.1));
        x.push_back(step_plant(s, x[t], u, w[t]));
    }
    for (int t = 2 * H; t <= T; ++t) {
        std::vector<Vector> hist;
        for (int k = 1; k <= 2 * H; ++k) hist.push_back(w[t - k]);
        const Vector lhs = x[t] - mpow(s.A, H) * x[t - H];
        CHECK((lhs - approx_state(M, s, hist)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("time-varying expansion holds with estimated disturbances and excitation") {
    Rng rng(10);
    const int n = 2, m = 2, H = 3;
    const SystemModel s = random_stable_model(n, m, rng);
    std::vector<DapPolicy> pol;
    std::vector<Vector> w, what, eta;
    std::vector<Vector> x{random_matrix(n, 1, rng)};
    const int T = 5 * H;
    for (int t = 0; t < T; ++t) {
        pol.push_back(DapPolicy::unflatten(random_matrix(H * m * n, 1, rng), H, m, n));
        eta.push_back(random_matrix(m, 1, rng, 0.05));
        Vector u = eta.back();
        for (int k = 1; k <= H; ++k)
            if (t - k >= 0) u += pol[t][k] * what[t - k];
        w.push_back(random_matrix(n, 1, rng, 0.1));
        what.push_back(random_matrix(n, 1, rng, 0.1));  // arbitrary, need not equal w
        x.push_back(step_plant(s, x[t], u, w[t]));
    }
    for (int t = 2 * H; t <= T; ++t) {
        std::vector<DapPolicy> ps;
        std::vector<Vector> wh, ww, ee;
        for (int i = 1; i <= H; ++i) {
            ps.push_back(pol[t - i]);
            ww.push_back(w[t - i]);
            ee.push_back(eta[t - i]);
        }
        for (int k = 1; k <= 2 * H; ++k) wh.push_back(what[t - k]);
        const Vector lhs = x[t] - mpow(s.A, H) * x[t - H];
        CHECK((lhs - approx_state_time_varying(ps, s, H, wh, ww, ee)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("g functions are attained by sign patterns") {
    Rng rng(12);
    const int n = 2, m = 1, H = 2;
    const SystemModel s = random_stable_model(n, m, rng);
    const ConstraintSpec c = box_constraints(n, m, 1.0, 1.0, 0.2);
    const DapPolicy M = DapPolicy::unflatten(random_matrix(H * m * n, 1, rng), H, m, n);
    const Vector gx = g_state(M, s, c);
    const Vector gu = g_action(M, c);
    Vector best_x = Vector::Constant(c.kx(), -1e300);
    Vector best_u = Vector::Constant(c.ku(), -1e300);
    const int bits = 2 * H * n;
    for (int pat = 0; pat < (1 << bits); ++pat) {
        std::vector<Vector> hist(2 * H, Vector(n));
        for (int b = 0; b < bits; ++b) hist[b / n][b % n] = (pat >> b) & 1 ? 0.2 : -0.2;
        best_x = best_x.cwiseMax(c.Dx * approx_state(M, s, hist));
        Vector u = Vector::Zero(m);
        for (int k = 1; k <= H; ++k) u += M[k] * hist[k - 1];
        best_u = best_u.cwiseMax(c.Du * u);
    }
    CHECK((best_x - gx).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((best_u - gu).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("quadratic form of the cost agrees with eval_f") {
    Rng rng(14);
    const int n = 2, m = 2, H = 3;
    const SystemModel s = random_stable_model(n, m, rng);
    const Matrix Q = Matrix{{2.0, 0.3}, {0.3, 1.0}};
    const Matrix R = Matrix{{1.0, 0.0}, {0.0, 0.5}};
    const Matrix Sigma = Matrix{{0.02, 0.005}, {0.005, 0.01}};
    const QuadraticCost f = cost_quadratic(H, s, Q, R, Sigma);
    for (int trial = 0; trial < 10; ++trial) {
        const DapPolicy M = DapPolicy::unflatten(random_matrix(H * m * n, 1, rng), H, m, n);
        const double direct = eval_f(M, s, Q, R, Sigma);
        CHECK(f(M.flatten()) == doctest::Approx(direct).epsilon(1e-12));
    }
    // The zero policy pays only the open-loop state cost.
    double open = 0;
    for (int k = 1; k <= H; ++k) {
        const Matrix Ak = mpow(s.A, k - 1);
        open += (Ak.transpose() * Q * Ak * Sigma).trace();
    }
    CHECK(f.c == doctest::Approx(open));
    CHECK_THROWS_AS(eval_f(DapPolicy(H, m, n), s, -Q, R, Sigma), ContractError);
}

TEST_CASE("eval_f is linear in the disturbance covariance") {
    Rng rng(15);
    const SystemModel s = random_stable_model(2, 1, rng);
    const DapPolicy M = DapPolicy::unflatten(random_matrix(4, 1, rng), 2, 1, 2);
    const Matrix Q = Matrix::Identity(2, 2), R = Matrix::Identity(1, 1), S = 0.01 * Matrix::Identity(2, 2);
    CHECK(eval_f(M, s, Q, R, 3.0 * S) == doctest::Approx(3.0 * eval_f(M, s, Q, R, S)));
}

TEST_CASE("decaying box") {
    const StabilityCertificate cert{2.0, 0.5, 1.0};
    CHECK(box_bound(1, 4, cert) == doctest::Approx(2.0 * 2.0 * 4.0));
    CHECK(box_bound(3, 4, cert) == doctest::Approx(16.0 * 0.25));
    Rng rng(16);
    const DapPolicy M = random_box_policy(4, 2, 4, cert, rng);
    CHECK(in_box(M, cert));
    DapPolicy big = M;
    big[4] *= 1.2 / 0.9;
    CHECK_FALSE(in_box(big, cert));
}
