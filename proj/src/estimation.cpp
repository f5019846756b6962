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
#include "safedap/estimation.hpp"

#include <cmath>


namespace safedap {

RegressionDataset::RegressionDataset(int n, int m)
    : n_(n), m_(m), gram_(Matrix::Zero(n + m, n + m)), cross_(Matrix::Zero(n, n + m)), z_(n + m) {
    require(n > 0 && m > 0, "RegressionDataset: dimensions must be positive");
}

void RegressionDataset::add(const Vector& x, const Vector& u, const Vector& x_next) {
    require(x.size() == n_ && u.size() == m_ && x_next.size() == n_, "RegressionDataset::add: dimension mismatch");
    z_ << x, u;
    gram_.selfadjointView<Eigen::Lower>().rankUpdate(z_);
    cross_.noalias() += x_next * z_.transpose();
    ++count_;
}

void RegressionDataset::clear() {
    gram_.setZero();
    cross_.setZero();
    count_ = 0;
}

SystemModel least_squares(const RegressionDataset& data, double ridge) {
    require(ridge >= 0.0, "least_squares: ridge must be nonnegative");
    const int d = data.n() + data.m();
    Matrix G = data.gram().selfadjointView<Eigen::Lower>();
    G.diagonal().array() += ridge;
    Eigen::LDLT<Matrix> ldlt(G);
    const double scale = std::max(1.0, G.diagonal().cwiseAbs().maxCoeff());
    const Vector D = ldlt.vectorD();
    const bool singular = ldlt.info() != Eigen::Success || D.minCoeff() <= 1e-14 * scale || data.count() == 0;
    require(!singular, "least_squares: Gram matrix is rank deficient (" + std::to_string(data.count()) +
                           " samples, dimension " + std::to_string(d) + ")");
    const Matrix theta = ldlt.solve(data.cross().transpose()).transpose();
    return SystemModel::from_stacked(theta, data.n());
}

double model_distance(const SystemModel& a, const SystemModel& b) {
    return std::sqrt((a.A - b.A).squaredNorm() + (a.B - b.B).squaredNorm());
}

SystemModel project_uncertainty(const SystemModel& theta_tilde, const SystemModel& theta_ini, double r_ini) {
    require(r_ini >= 0.0, "project_uncertainty: negative radius");
    const double dist = model_distance(theta_tilde, theta_ini);
    if (dist <= r_ini) return theta_tilde;
    double s = r_ini / dist;
    for (;;) {
        SystemModel p(theta_ini.A + s * (theta_tilde.A - theta_ini.A), theta_ini.B + s * (theta_tilde.B - theta_ini.B));
        // Rounding can leave the result a few ulps outside the ball.
        if (model_distance(p, theta_ini) <= r_ini) return p;
        s = std::nextafter(s, 0.0);
    }
}

BmsbConstants bmsb_constants(double s_w, double p_w, double s_eta, double p_eta, double eta_bar, double b_u) {
    require(s_w > 0 && p_w > 0 && s_eta > 0 && p_eta > 0 && eta_bar >= 0 && b_u > 0,
            "bmsb_constants: inputs must be positive");
    BmsbConstants c;
    c.s_z = std::min({s_w / 4.0, std::sqrt(3.0) / 2.0 * s_eta * eta_bar, s_w * s_eta * eta_bar / (4.0 * b_u)});
    c.p_z = std::min(p_w, p_eta);
    return c;
}

namespace {

double log_terms(const RadiusConstants& c) {
    const double d = c.n + c.m;
    return d * std::log(10.0 / c.p_z) + 2.0 * d * std::log(c.b_z / c.s_z);
}

void check(const RadiusConstants& c, double delta) {
    require(c.sigma_sub >= 0 && c.b_z > 0 && c.s_z > 0 && c.p_z > 0 && c.p_z < 1 && c.n > 0 && c.m > 0,
            "confidence_radius: invalid constants");
    require(delta > 0.0 && delta < 1.0, "confidence_radius: delta must lie in (0, 1)");
    require(c.radius_scale > 0.0 && c.floor_scale >= 0.0, "confidence_radius: invalid scale");
}

}  // namespace

double sample_floor(double delta, const RadiusConstants& c) {
    check(c, delta);
    const double d = c.n + c.m;
    const double raw = 10.0 / (c.p_z * c.p_z) *
                       (std::log(1.0 / delta) + 2.0 * d * std::log(10.0 / c.p_z) + 2.0 * d * std::log(c.b_z / c.s_z));
    return c.floor_scale * raw;
}

double confidence_radius(std::int64_t T_data, double delta, const RadiusConstants& c) {
    check(c, delta);
    const double floor = sample_floor(delta, c);
    if (static_cast<double>(T_data) < floor) {
        throw SampleFloorError("confidence_radius: " + std::to_string(T_data) + " samples below the floor of " +
                               std::to_string(std::ceil(floor)));
    }
    const double num = c.n + log_terms(c) + std::log(1.0 / delta);
    const double r2 = 90.0 * c.sigma_sub / c.p_z * std::sqrt(num / (static_cast<double>(T_data) * c.s_z * c.s_z));
    return c.radius_scale * std::sqrt(static_cast<double>(c.n)) * r2;
}

double episode_delta(int e, double p) {
    require(e >= 1, "episode_delta: episode index must be >= 1");
    require(p > 0.0 && p < 1.0, "episode_delta: p must lie in (0, 1)");
    return p / (6.0 * e * e);
}

RadiusConstants radius_constants_at(double eta_bar, const RadiusInputs& in) {
    RadiusConstants c = in.base;
    const BmsbConstants b = bmsb_constants(in.s_w, in.p_w, in.s_eta, in.p_eta, eta_bar, in.b_u);
    c.s_z = b.s_z;
    c.p_z = b.p_z;
    return c;
}

double schedule_radius(int e, std::int64_t T_D_prev, double eta_bar_prev, double p, const RadiusInputs& in) {
    return confidence_radius(T_D_prev, episode_delta(e, p), radius_constants_at(eta_bar_prev, in));
}

}  // namespace safedap
