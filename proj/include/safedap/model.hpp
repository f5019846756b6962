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

// Plant, constraint and noise types for the constrained LQR setting
// x_{t+1} = A x_t + B u_t + w_t with D_x x <= d_x, D_u u <= d_u, |w|_inf <= w_max.

#include <string>

#include "safedap/types.hpp"

namespace safedap {

struct SystemModel {
    Matrix A;  ///< n x n
    Matrix B;  ///< n x m

    SystemModel() = default;
    SystemModel(Matrix a, Matrix b);

    [[nodiscard]] int n() const { return static_cast<int>(A.rows()); }
    [[nodiscard]] int m() const { return static_cast<int>(B.cols()); }
    /// The stacked matrix (A B), n x (n + m).
    [[nodiscard]] Matrix stacked() const;
    static SystemModel from_stacked(const Matrix& theta, int n);
    void validate() const;
};

/// A x + B u + w.
Vector step_plant(const SystemModel& model, const Vector& x, const Vector& u, const Vector& w);

/// Largest Euclidean norm over the bounded polytope {v : D v <= d}.
/// Exact by vertex enumeration when the number of candidate vertices is
/// small, otherwise an upper bound from per-coordinate linear programs.
/// Throws ContractError if the polytope is unbounded or empty.
double polytope_l2_radius(const Matrix& D, const Vector& d);

struct ConstraintSpec {
    Matrix Dx;
    Vector dx;
    Matrix Du;
    Vector du;
    double w_max{0};
    double x_max{0};
    double u_max{0};
    double z_max{0};

    /// Validates the data and computes x_max, u_max, z_max.
    static ConstraintSpec make(Matrix Dx, Vector dx, Matrix Du, Vector du, double w_max);

    [[nodiscard]] int n() const { return static_cast<int>(Dx.cols()); }
    [[nodiscard]] int m() const { return static_cast<int>(Du.cols()); }
    [[nodiscard]] int kx() const { return static_cast<int>(Dx.rows()); }
    [[nodiscard]] int ku() const { return static_cast<int>(Du.rows()); }
    /// Max absolute row sum.
    [[nodiscard]] double Dx_norm_inf() const;
    [[nodiscard]] double Du_norm_inf() const;
};

struct MembershipReport {
    Vector state_slack;   ///< d_x - D_x x
    Vector action_slack;  ///< d_u - D_u u
    bool state_violation{false};
    bool action_violation{false};
    [[nodiscard]] bool any() const { return state_violation || action_violation; }
};

MembershipReport check_membership(const ConstraintSpec& constraints, const Vector& x, const Vector& u);

/// Coordinatewise clamp to [-w_max, w_max].
Vector project_box(Vector v, double w_max);

enum class NoiseKind { uniform_box, truncated_gaussian };

NoiseKind parse_noise_kind(const std::string& name);
std::string to_string(NoiseKind kind);

/// Anti-concentration pair: P(lambda' X >= s) >= p for all unit lambda.
struct AntiConcentration {
    double s{0};
    double p{0};
};

/// Default constants for a distribution with unit l_inf support in dimension
/// dim (scale s by the support radius).
AntiConcentration default_anti_concentration(NoiseKind kind, int dim);

/// Variance of one coordinate of the unit-support distribution.
double unit_coordinate_variance(NoiseKind kind);

/// Draws one vector from the unit-support distribution (|v|_inf <= 1).
Vector sample_unit_noise(NoiseKind kind, int dim, Rng& rng);

struct DisturbanceModel {
    NoiseKind kind{NoiseKind::uniform_box};
    int n{0};
    double w_max{0};
    double sigma_sub{0};
    Matrix Sigma;
    double s_w{0};
    double p_w{0};

    static DisturbanceModel make(NoiseKind kind, int n, double w_max);
    [[nodiscard]] Vector sample(Rng& rng) const;
};

struct ExcitationModel {
    NoiseKind kind{NoiseKind::uniform_box};
    int m{0};
    double s_eta{0};
    double p_eta{0};

    static ExcitationModel make(NoiseKind kind, int m);
    /// Zero when eta_bar is zero; otherwise |eta|_inf <= eta_bar.
    [[nodiscard]] Vector sample(Rng& rng, double eta_bar) const;
};

struct StabilityCertificate {
    double kappa{1};
    double gamma{0};
    double kappa_B{0};
    void validate() const;
};

struct StabilityCheck {
    bool stable{true};
    int first_violation{-1};  ///< smallest t with |A^t|_2 > kappa (1-gamma)^t
    int horizon{0};           ///< powers checked: 0..horizon
};

StabilityCheck verify_kappa_gamma(const Matrix& A, const StabilityCertificate& cert, int horizon = 200);

/// Largest singular value.
double spectral_norm(const Matrix& M);

}  // namespace safedap
