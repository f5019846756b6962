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
#include "safedap/dap.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "safedap/kernels.hpp"

namespace safedap {

DapPolicy::DapPolicy(int H, int m, int n) : m_(m), n_(n) {
    require(H >= 0 && m > 0 && n > 0, "DapPolicy: invalid dimensions");
    blocks_.assign(H, Matrix::Zero(m, n));
}

DapPolicy::DapPolicy(std::vector<Matrix> blocks) : blocks_(std::move(blocks)) {
    require(!blocks_.empty(), "DapPolicy: need at least one block");
    m_ = static_cast<int>(blocks_.front().rows());
    n_ = static_cast<int>(blocks_.front().cols());
    for (const Matrix& b : blocks_) {
        require(b.rows() == m_ && b.cols() == n_, "DapPolicy: inconsistent block shapes");
    }
}

Vector DapPolicy::flatten() const {
    Vector v(size());
    for (int k = 1; k <= H(); ++k) {
        for (int r = 0; r < m_; ++r) {
            for (int c = 0; c < n_; ++c) v[flat_index(k, r, c, m_, n_)] = blocks_[k - 1](r, c);
        }
    }
    return v;
}

DapPolicy DapPolicy::unflatten(const Vector& v, int H, int m, int n) {
    require(v.size() >= static_cast<Eigen::Index>(H) * m * n, "DapPolicy::unflatten: vector too short");
    DapPolicy p(H, m, n);
    for (int k = 1; k <= H; ++k) {
        for (int r = 0; r < m; ++r) {
            for (int c = 0; c < n; ++c) p[k](r, c) = v[flat_index(k, r, c, m, n)];
        }
    }
    return p;
}

double frobenius_distance(const DapPolicy& a, const DapPolicy& b) {
    require(a.m() == b.m() && a.n() == b.n(), "frobenius_distance: shape mismatch");
    double sq = 0.0;
    const int H = std::max(a.H(), b.H());
    for (int k = 1; k <= H; ++k) {
        if (k <= a.H() && k <= b.H()) {
            sq += (a[k] - b[k]).squaredNorm();
        } else {
            sq += (k <= a.H() ? a[k] : b[k]).squaredNorm();
        }
    }
    return std::sqrt(sq);
}

DapPolicy interpolate(const DapPolicy& a, const DapPolicy& b, double lambda) {
    const int H = std::max(a.H(), b.H());
    DapPolicy pa = pad_policy(a, H);
    const DapPolicy pb = pad_policy(b, H);
    for (int k = 1; k <= H; ++k) pa[k] = (1.0 - lambda) * pa[k] + lambda * pb[k];
    return pa;
}

DapPolicy pad_policy(const DapPolicy& policy, int H_new) {
    require(H_new >= policy.H(), "pad_policy: new memory shorter than the policy");
    DapPolicy out(H_new, policy.m(), policy.n());
    for (int k = 1; k <= policy.H(); ++k) out[k] = policy[k];
    return out;
}

DapPolicy truncate_policy(const DapPolicy& policy, int H_new) {
    require(H_new >= 1 && H_new <= policy.H(), "truncate_policy: invalid memory");
    DapPolicy out(H_new, policy.m(), policy.n());
    for (int k = 1; k <= H_new; ++k) out[k] = policy[k];
    return out;
}

namespace {

// A^0 .. A^{count-1}
std::vector<Matrix> powers(const Matrix& A, int count) {
    std::vector<Matrix> p;
    p.reserve(count);
    if (count > 0) p.push_back(Matrix::Identity(A.rows(), A.cols()));
    for (int i = 1; i < count; ++i) p.push_back(A * p.back());
    return p;
}

void check_dims(const DapPolicy& policy, const SystemModel& model) {
    require(policy.m() == model.m() && policy.n() == model.n(), "policy and model dimensions differ");
}

}  // namespace

std::vector<Matrix> phi_x(const DapPolicy& policy, const SystemModel& model) {
    check_dims(policy, model);
    const int H = policy.H();
    const int n = model.n();
    const std::vector<Matrix> Ap = powers(model.A, H);
    std::vector<Matrix> AB(H);
    for (int i = 0; i < H; ++i) AB[i] = Ap[i] * model.B;
    std::vector<Matrix> phi(2 * H, Matrix::Zero(n, n));
    for (int k = 1; k <= 2 * H; ++k) {
        Matrix& P = phi[k - 1];
        if (k <= H) P = Ap[k - 1];
        for (int i = std::max(1, k - H); i <= std::min(H, k - 1); ++i) P.noalias() += AB[i - 1] * policy[k - i];
    }
    return phi;
}

PhiAffine phi_affine(int H, const SystemModel& model) {
    require(H >= 1, "phi_affine: H must be >= 1");
    const int n = model.n();
    const int m = model.m();
    const int nv = H * m * n;
    const std::vector<Matrix> Ap = powers(model.A, H);
    PhiAffine out;
    out.c.assign(2 * H, Vector::Zero(n * n));
    out.J.assign(2 * H, Matrix::Zero(n * n, nv));
    for (int k = 1; k <= 2 * H; ++k) {
        if (k <= H) out.c[k - 1] = Eigen::Map<const Vector>(Ap[k - 1].data(), n * n);
        for (int i = std::max(1, k - H); i <= std::min(H, k - 1); ++i) {
            const Matrix AB = Ap[i - 1] * model.B;
            const int j = k - i;
            // d vec(AB M[j]) / d M[j](r, c): column AB(:, r) placed at matrix column c.
            for (int r = 0; r < m; ++r) {
                for (int c = 0; c < n; ++c) {
                    const int col = DapPolicy::flat_index(j, r, c, m, n);
                    out.J[k - 1].block(c * n, col, n, 1) += AB.col(r);
                }
            }
        }
    }
    return out;
}

Vector approx_state(const DapPolicy& policy, const SystemModel& model, const std::vector<Vector>& w_hist) {
    const std::vector<Matrix> phi = phi_x(policy, model);
    Vector x = Vector::Zero(model.n());
    const int len = std::min<int>(static_cast<int>(phi.size()), static_cast<int>(w_hist.size()));
    for (int k = 1; k <= len; ++k) x.noalias() += phi[k - 1] * w_hist[k - 1];
    return x;
}

Vector approx_state_time_varying(const std::vector<DapPolicy>& policies, const SystemModel& model, int H,
                                 const std::vector<Vector>& what_hist, const std::vector<Vector>& w_hist,
                                 const std::vector<Vector>& eta_hist) {
    require(H >= 1, "approx_state_time_varying: H must be >= 1");
    require(static_cast<int>(policies.size()) >= H, "approx_state_time_varying: need H past policies");
    const int n = model.n();
    auto at = [](const std::vector<Vector>& h, int idx, int dim) -> Vector {
        return idx < static_cast<int>(h.size()) ? h[idx] : Vector::Zero(dim);
    };
    const std::vector<Matrix> Ap = powers(model.A, H);
    Vector x = Vector::Zero(n);
    for (int i = 1; i <= H; ++i) {
        const Matrix AB = Ap[i - 1] * model.B;
        const DapPolicy& Mi = policies[i - 1];
        check_dims(Mi, model);
        for (int j = 1; j <= Mi.H(); ++j) {
            const int k = i + j;
            if (k > 2 * H) break;
            x.noalias() += AB * (Mi[j] * at(what_hist, k - 1, n));
        }
        x.noalias() += Ap[i - 1] * (at(w_hist, i - 1, n) + model.B * at(eta_hist, i - 1, model.m()));
    }
    return x;
}

Vector g_state(const DapPolicy& policy, const SystemModel& model, const ConstraintSpec& constraints) {
    require(constraints.n() == model.n(), "g_state: constraint dimension mismatch");
    const std::vector<Matrix> phi = phi_x(policy, model);
    const int kx = constraints.kx();
    Vector g = Vector::Zero(kx);
    Eigen::RowVectorXd row(model.n());
    for (const Matrix& P : phi) {
        for (int i = 0; i < kx; ++i) {
            row.noalias() = constraints.Dx.row(i) * P;
            g[i] += kernels::abs_sum({row.data(), static_cast<std::size_t>(row.size())});
        }
    }
    return g * constraints.w_max;
}

Vector g_action(const DapPolicy& policy, const ConstraintSpec& constraints) {
    require(constraints.m() == policy.m(), "g_action: constraint dimension mismatch");
    const int ku = constraints.ku();
    Vector g = Vector::Zero(ku);
    Eigen::RowVectorXd row(policy.n());
    for (int k = 1; k <= policy.H(); ++k) {
        for (int j = 0; j < ku; ++j) {
            row.noalias() = constraints.Du.row(j) * policy[k];
            g[j] += kernels::abs_sum({row.data(), static_cast<std::size_t>(row.size())});
        }
    }
    return g * constraints.w_max;
}

namespace {

void require_psd(const Matrix& S, const char* what, bool strict) {
    require(S.rows() == S.cols(), std::string(what) + " must be square");
    require((S - S.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + S.cwiseAbs().maxCoeff()),
            std::string(what) + " must be symmetric");
    if (S.size() == 0) return;
    const double lo = Eigen::SelfAdjointEigenSolver<Matrix>(S, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    const double floor = -1e-12 * (1.0 + S.cwiseAbs().maxCoeff());
    require(strict ? lo > 0.0 : lo >= floor, std::string(what) + (strict ? " must be positive definite" : " must be PSD"));
}

}  // namespace

double eval_f(const DapPolicy& policy, const SystemModel& model, const Matrix& Q, const Matrix& R, const Matrix& Sigma) {
    check_dims(policy, model);
    require_psd(Q, "Q", true);
    require_psd(R, "R", true);
    require_psd(Sigma, "Sigma_w", false);
    double f = 0.0;
    for (const Matrix& P : phi_x(policy, model)) f += (P.transpose() * Q * P * Sigma).trace();
    for (const Matrix& M : policy.blocks()) f += (M.transpose() * R * M * Sigma).trace();
    return f;
}

QuadraticCost cost_quadratic(int H, const SystemModel& model, const Matrix& Q, const Matrix& R, const Matrix& Sigma) {
    require_psd(Q, "Q", true);
    require_psd(R, "R", true);
    require_psd(Sigma, "Sigma_w", false);
    const int n = model.n();
    const int m = model.m();
    const int nv = H * m * n;
    const PhiAffine pa = phi_affine(H, model);
    // tr(X' Q X S) = vec(X)' (S kron Q) vec(X) for symmetric S.
    Matrix KQ(n * n, n * n);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) KQ.block(a * n, b * n, n, n) = Sigma(a, b) * Q;
    }
    QuadraticCost cost;
    cost.P = Matrix::Zero(nv, nv);
    cost.q = Vector::Zero(nv);
    for (int k = 0; k < 2 * H; ++k) {
        const Matrix KJ = KQ * pa.J[k];
        cost.P.noalias() += 2.0 * pa.J[k].transpose() * KJ;
        cost.q.noalias() += 2.0 * KJ.transpose() * pa.c[k];
        cost.c += pa.c[k].dot(KQ * pa.c[k]);
    }
    // Action term: block k contributes tr(M' R M S) = sum_{r,s,c,d} M(r,c) R(r,s) M(s,d) S(d,c).
    for (int k = 1; k <= H; ++k) {
        for (int r = 0; r < m; ++r) {
            for (int c = 0; c < n; ++c) {
                const int i = DapPolicy::flat_index(k, r, c, m, n);
                for (int s = 0; s < m; ++s) {
                    for (int d = 0; d < n; ++d) {
                        cost.P(i, DapPolicy::flat_index(k, s, d, m, n)) += 2.0 * R(r, s) * Sigma(d, c);
                    }
                }
            }
        }
    }
    cost.P = 0.5 * (cost.P + cost.P.transpose());
    return cost;
}

double box_bound(int k, int n, const StabilityCertificate& cert) {
    return 2.0 * std::sqrt(static_cast<double>(n)) * cert.kappa * cert.kappa * std::pow(1.0 - cert.gamma, k - 1);
}

bool in_box(const DapPolicy& policy, const StabilityCertificate& cert) {
    for (int k = 1; k <= policy.H(); ++k) {
        const double norm = policy[k].cwiseAbs().rowwise().sum().maxCoeff();
        if (norm > box_bound(k, policy.n(), cert)) return false;
    }
    return true;
}

}  // namespace safedap
