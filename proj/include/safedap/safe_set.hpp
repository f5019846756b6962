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

// Safe policy polytopes and the quadratic programs posed over them.
//
// The decision vector is [vec(M); t] where vec(M) uses the DapPolicy flat
// layout and t holds one auxiliary per scalar entry that appears inside an l1
// norm. Each such entry e (affine in vec(M)) gets the linking rows
// e - t <= 0 and -e - t <= 0; the l1 sums become linear rows in t.

#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "safedap/dap.hpp"
#include "safedap/qp_solver.hpp"
#include "safedap/tightening.hpp"

namespace safedap {

enum class RowKind { state_link, state_sum, action_link, action_sum, box_link, box_sum };

struct RowOrigin {
    RowKind kind;
    int index{0};  ///< constraint row i / j, or policy row for the box
    int lag{0};    ///< k (1-based)
    int entry{0};  ///< column inside the l1 term, -1 for sum rows
};

class SafePolicyPolytope {
public:
    SystemModel model;
    ConstraintSpec constraints;
    StabilityCertificate cert;
    double eps_x{0};
    double eps_u{0};
    int H{1};

    qp::SparseRowMatrix G;
    Vector h;
    std::vector<RowOrigin> origins;

    [[nodiscard]] int n_policy() const { return H * model.m() * model.n(); }
    [[nodiscard]] int n_aux() const { return static_cast<int>(aux_const.size()); }

    /// Auxiliaries set to the exact absolute values of their entries.
    [[nodiscard]] Vector exact_auxiliaries(const Vector& v) const;

    /// Membership through the row system with exact auxiliaries. A policy
    /// with longer memory must have zero blocks beyond H; shorter ones are padded.
    [[nodiscard]] bool contains(const DapPolicy& policy, double tol = 1e-6) const;

    /// Largest violation of g_state <= d_x - eps_x, g_action <= d_u - eps_u and
    /// the memory box, evaluated directly (<= 0 for members).
    [[nodiscard]] double violation(const DapPolicy& policy) const;

    /// Plain-text dump: dimensions, triplets of G, h and optionally the objective.
    void dump(std::ostream& os, const QuadraticCost* objective = nullptr) const;

    // Per auxiliary: entry = aux_coef.row(a) * v + aux_const[a].
    Eigen::SparseMatrix<double, Eigen::RowMajor> aux_coef;
    Vector aux_const;
};

SafePolicyPolytope build_safe_set(const SystemModel& theta_hat, double eps_x, double eps_u, int H,
                                  const ConstraintSpec& constraints, const StabilityCertificate& cert);

struct QpSolution {
    DapPolicy policy;
    double objective{0};
    qp::KktResiduals kkt;
    int iterations{0};
    qp::QpStatus status{qp::QpStatus::max_iterations};
    double infeasibility_margin{0};
    Vector x;  ///< full decision vector
    Vector z;  ///< multipliers

    [[nodiscard]] bool optimal() const { return status == qp::QpStatus::optimal; }
};

/// Minimize the policy cost over the polytope. Auxiliaries carry a tiny ridge.
QpSolution solve_qp(const QuadraticCost& objective, const SafePolicyPolytope& polytope, const qp::QpSettings& settings = {},
                    double aux_ridge = 1e-10);

/// Raised when a program that theory says is feasible turns out empty.
class InfeasibleProgram : public std::runtime_error {
public:
    InfeasibleProgram(const std::string& what, double margin) : std::runtime_error(what), margin_(margin) {}
    [[nodiscard]] double margin() const { return margin_; }

private:
    double margin_;
};

struct CostWeights {
    Matrix Q;
    Matrix R;
    Matrix Sigma;
};

struct RobustCeResult {
    DapPolicy policy;
    SafePolicyPolytope polytope;
    TighteningBundle bundle;
    QpSolution solution;
};

/// Minimizer of f(.; theta_hat) over Omega(theta_hat, eps_x, eps_u) with
/// eps_x = eps_theta(r) + eps_eta_x(eta) + eps_H(H) + eps_v(delta_M, H) and
/// eps_u = eps_eta_u(eta). Throws InfeasibleProgram with the bundle in the message.
RobustCeResult build_and_solve_robust_ce(const SystemModel& theta_hat, double r, double eta_bar, int H, double delta_M,
                                         const TighteningInputs& inputs, const ConstraintSpec& constraints,
                                         const CostWeights& weights, const qp::QpSettings& settings = {});

struct FeasibilityResult {
    bool feasible{false};
    DapPolicy witness;
    double margin{0};  ///< infeasibility margin when not feasible
};

/// Is the polytope with its state rows tightened by a further eps0 nonempty?
FeasibilityResult check_feasible(const SafePolicyPolytope& polytope, double eps0, const qp::QpSettings& settings = {});

/// argmin |X - M|_F^2 + |X - M'|_F^2 over the intersection. Policies from the
/// shorter-memory set are zero beyond its H, so X has min(H, H') blocks.
/// Throws InfeasibleProgram when the intersection is empty.
DapPolicy find_mid_policy(const DapPolicy& M, const SafePolicyPolytope& omega, const DapPolicy& M_prime,
                          const SafePolicyPolytope& omega_prime, const qp::QpSettings& settings = {});

}  // namespace safedap
