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

// Least-squares identification of (A, B) and the confidence radii that feed
// the robust programs.

#include <cstdint>
#include <stdexcept>

#include "safedap/model.hpp"

namespace safedap {

class RegressionDataset {
public:
    RegressionDataset(int n, int m);

    /// Adds one pair (z_t = (x_t; u_t), x_{t+1}).
    void add(const Vector& x, const Vector& u, const Vector& x_next);
    void clear();

    [[nodiscard]] int n() const { return n_; }
    [[nodiscard]] int m() const { return m_; }
    [[nodiscard]] std::int64_t count() const { return count_; }
    /// sum z z'
    [[nodiscard]] const Matrix& gram() const { return gram_; }
    /// sum x_{t+1} z'
    [[nodiscard]] const Matrix& cross() const { return cross_; }

private:
    int n_;
    int m_;
    std::int64_t count_{0};
    Matrix gram_;
    Matrix cross_;
    Vector z_;
};

/// (sum x_{t+1} z')(sum z z' + ridge I)^{-1}. Throws ContractError when the
/// regularised Gram matrix is singular.
SystemModel least_squares(const RegressionDataset& data, double ridge = 1e-10);

/// Frobenius ball around theta_ini intersected with itself is the prior set;
/// the projection rescales the offset radially.
SystemModel project_uncertainty(const SystemModel& theta_tilde, const SystemModel& theta_ini, double r_ini);

/// |(A B) - (A' B')|_F
double model_distance(const SystemModel& a, const SystemModel& b);

struct UncertaintySet {
    SystemModel center;
    double r{0};
    SystemModel ini_center;
    double r_ini{0};
    [[nodiscard]] bool contains(const SystemModel& theta) const {
        return model_distance(theta, center) <= r && model_distance(theta, ini_center) <= r_ini;
    }
};

struct BmsbConstants {
    double s_z{0};
    double p_z{0};
};

/// s_z = min(s_w/4, (sqrt 3/2) s_eta eta, s_w s_eta eta / (4 b_u)), p_z = min(p_w, p_eta).
BmsbConstants bmsb_constants(double s_w, double p_w, double s_eta, double p_eta, double eta_bar, double b_u);

struct RadiusConstants {
    double sigma_sub{0};
    double b_z{0};
    double s_z{0};
    double p_z{0};
    int n{0};
    int m{0};
    /// Multiplier on the returned radius (1 = analysed constant).
    double radius_scale{1.0};
    /// Multiplier on the minimum sample count (1 = analysed constant).
    double floor_scale{1.0};
};

class SampleFloorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// (10/p_z^2)(log(1/delta) + 2d log(10/p_z) + 2d log(b_z/s_z)), times floor_scale.
double sample_floor(double delta, const RadiusConstants& c);

/// Frobenius radius sqrt(n) * (90 sigma/p_z) sqrt((n + d log(10/p_z) + 2d log(b_z/s_z) + log(1/delta)) / (T s_z^2)),
/// times radius_scale. Throws SampleFloorError below the sample floor.
double confidence_radius(std::int64_t T_data, double delta, const RadiusConstants& c);

/// Per-episode failure budget p / (6 e^2).
double episode_delta(int e, double p);

/// Radius after episode e-1: confidence_radius(T_D_prev, p/(6e^2)) with s_z
/// evaluated at the previous excitation level.
struct RadiusInputs {
    RadiusConstants base;  ///< s_z, p_z ignored
    double s_w{0}, p_w{0}, s_eta{0}, p_eta{0};
    double b_u{0};
};
double schedule_radius(int e, std::int64_t T_D_prev, double eta_bar_prev, double p, const RadiusInputs& in);
RadiusConstants radius_constants_at(double eta_bar, const RadiusInputs& in);

}  // namespace safedap
