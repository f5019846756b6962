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

// Disturbance-action policies u_t = sum_k M[k] w_{t-k}: transfer maps, the
// worst-case constraint functions and the stationary quadratic cost.
//
// Histories are newest first: hist[0] is w_{t-1}, hist[1] is w_{t-2}, ...
// Entries missing from a short history are treated as zero.

#include <vector>

#include "safedap/model.hpp"

namespace safedap {

class DapPolicy {
public:
    DapPolicy() = default;
    /// H zero blocks of size m x n.
    DapPolicy(int H, int m, int n);
    explicit DapPolicy(std::vector<Matrix> blocks);

    [[nodiscard]] int H() const { return static_cast<int>(blocks_.size()); }
    [[nodiscard]] int m() const { return m_; }
    [[nodiscard]] int n() const { return n_; }
    [[nodiscard]] int size() const { return H() * m_ * n_; }

    /// Block k, 1-based as in M[1..H].
    [[nodiscard]] const Matrix& operator[](int k) const { return blocks_[k - 1]; }
    Matrix& operator[](int k) { return blocks_[k - 1]; }
    [[nodiscard]] const std::vector<Matrix>& blocks() const { return blocks_; }

    /// Flat layout: k-major, then row, then column.
    [[nodiscard]] Vector flatten() const;
    static DapPolicy unflatten(const Vector& v, int H, int m, int n);
    static constexpr int flat_index(int k, int row, int col, int m, int n) { return ((k - 1) * m + row) * n + col; }

private:
    std::vector<Matrix> blocks_;
    int m_{0};
    int n_{0};
};

/// Frobenius distance of the stacked blocks; the shorter policy is zero-padded.
double frobenius_distance(const DapPolicy& a, const DapPolicy& b);

/// (1 - lambda) a + lambda b, zero-padding to the longer memory.
DapPolicy interpolate(const DapPolicy& a, const DapPolicy& b, double lambda);

/// Appends zero blocks up to H_new (>= H).
DapPolicy pad_policy(const DapPolicy& policy, int H_new);

/// Keeps the first H_new blocks.
DapPolicy truncate_policy(const DapPolicy& policy, int H_new);

/// Phi_1 .. Phi_{2H}, index 0 holds Phi_1.
std::vector<Matrix> phi_x(const DapPolicy& policy, const SystemModel& model);

/// Phi_k as an affine function of the flat policy: vec(Phi_k) = c[k-1] + J[k-1] v
/// with column-major vec. J[k-1] is n^2 x (H m n).
struct PhiAffine {
    std::vector<Vector> c;
    std::vector<Matrix> J;
};
PhiAffine phi_affine(int H, const SystemModel& model);

/// sum_{k=1}^{2H} Phi_k w_{t-k}.
Vector approx_state(const DapPolicy& policy, const SystemModel& model, const std::vector<Vector>& w_hist);

/// Right-hand side of the state expansion for a time-varying policy:
/// x_t - A^H x_{t-H} = sum_{k,i} A^{i-1} B M_{t-i}[k-i] what_{t-k} + sum_i A^{i-1} (w_{t-i} + B eta_{t-i}).
/// policies[i-1] is the policy used at stage t-i.
Vector approx_state_time_varying(const std::vector<DapPolicy>& policies, const SystemModel& model, int H,
                                 const std::vector<Vector>& what_hist, const std::vector<Vector>& w_hist,
                                 const std::vector<Vector>& eta_hist);

/// w_max * sum_k |D_x,i' Phi_k|_1 per state row.
Vector g_state(const DapPolicy& policy, const SystemModel& model, const ConstraintSpec& constraints);

/// w_max * sum_k |D_u,j' M[k]|_1 per action row.
Vector g_action(const DapPolicy& policy, const ConstraintSpec& constraints);

/// sum_k tr(Phi_k' Q Phi_k Sigma) + sum_k tr(M[k]' R M[k] Sigma).
double eval_f(const DapPolicy& policy, const SystemModel& model, const Matrix& Q, const Matrix& R, const Matrix& Sigma);

/// f(v) = 0.5 v' P v + q' v + c over the flat policy of memory H.
struct QuadraticCost {
    Matrix P;
    Vector q;
    double c{0};
    [[nodiscard]] double operator()(const Vector& v) const { return 0.5 * v.dot(P * v) + q.dot(v) + c; }
};
QuadraticCost cost_quadratic(int H, const SystemModel& model, const Matrix& Q, const Matrix& R, const Matrix& Sigma);

/// 2 sqrt(n) kappa^2 (1 - gamma)^{k-1}.
double box_bound(int k, int n, const StabilityCertificate& cert);

/// Every block within its decaying max-row-sum bound.
bool in_box(const DapPolicy& policy, const StabilityCertificate& cert);

}  // namespace safedap
