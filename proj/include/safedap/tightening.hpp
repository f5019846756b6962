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

// Constraint-tightening terms. Every robust program subtracts these error
// budgets from the constraint bounds d_x, d_u.

#include <vector>

#include "safedap/model.hpp"

namespace safedap {

struct TighteningInputs {
    StabilityCertificate cert;
    double Dx_norm{0};  ///< |D_x|_inf
    double Du_norm{0};  ///< |D_u|_inf
    double w_max{0};
    double x_max{0};
    double u_max{0};
    double z_max{0};
    int n{0};
    int m{0};
    /// Global multiplier on every term; 1 reproduces the analysed constants.
    double alpha{1.0};

    static TighteningInputs from(const ConstraintSpec& constraints, const StabilityCertificate& cert, double alpha = 1.0);
    void validate() const;

    /// Coefficient of sqrt(mn) r in eps_theta.
    [[nodiscard]] double c1() const;
    /// Almost-sure state bound 4 sqrt(n) kappa w/gamma + 4 sqrt(mn) kappa^3 kappa_B w/gamma^2,
    /// valid for excitation up to w/kappa_B. Larger excitation levels use
    /// 2 sqrt(n) kappa (w + kappa_B eta)/gamma in place of the first term.
    [[nodiscard]] double state_bound(double eta_max = 0.0) const;
};

struct TighteningBundle {
    int H{1};
    double delta_M{0};
    double r{0};
    double eta_bar{0};

    double eps_H{0};
    double eps_v{0};
    double eps_theta_hat{0};
    double eps_w_hat{0};
    double eps_theta{0};
    double eps_eta_x{0};
    double eps_eta_u{0};
    double eps_P{0};

    /// eps_theta + eps_eta_x + eps_H + eps_v
    [[nodiscard]] double eps_x() const { return eps_theta + eps_eta_x + eps_H + eps_v; }
    [[nodiscard]] double eps_u() const { return eps_eta_u; }
};

TighteningBundle compute_bundle(const TighteningInputs& inputs, int H, double delta_M, double r, double eta_bar);

struct InitialFeasibility {
    bool ok{false};
    double state_slack{0};   ///< eps_F,x - eps_theta(r_ini) - eps_P - eps_x^(0) - eps_0
    double action_slack{0};  ///< eps_F,u - eps_P - eps_u^(0)
};

/// Strict initial feasibility budget check; boundary equality counts as feasible.
InitialFeasibility initial_feasibility_margin(const TighteningInputs& inputs, const TighteningBundle& bundle0, double eps0,
                                              double r_ini, double eps_F_x, double eps_F_u);

struct EpisodeParameters {
    double eta_bar{0};
    int H{1};
    double delta_M{0};
    double r{0};
};

struct MonotoneCheck {
    bool ok{true};
    int first_violation{-1};  ///< episode index, -1 when ok
    std::string reason;
};

/// 1/H, sqrt(H) delta_M, eta_bar and r non-increasing, and r at episode 1 at
/// most eps0 / (c1 sqrt(mn)). params[e] belongs to episode e; the radius of
/// episode 0 is r_ini and is not constrained.
MonotoneCheck check_monotone_schedule(const std::vector<EpisodeParameters>& params, const TighteningInputs& inputs,
                                      double eps0);

}  // namespace safedap
