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
#include "safedap/safe_set.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace safedap {

namespace {

using Triplet = Eigen::Triplet<double>;

struct Builder {
    int nv;
    std::vector<Triplet> coef;  // aux index, policy column, value
    std::vector<double> consts;
    std::vector<Triplet> rows;  // row, column (aux offset by nv), value
    std::vector<double> rhs;
    std::vector<RowOrigin> origins;

    // Adds an auxiliary for entry (a . v + b) and its two linking rows.
    int add_aux(const std::vector<std::pair<int, double>>& a, double b, RowKind link, int index, int lag, int entry) {
        const int id = static_cast<int>(consts.size());
        consts.push_back(b);
        for (const auto& [c, val] : a) coef.emplace_back(id, c, val);
        for (double sign : {1.0, -1.0}) {
            const int r = static_cast<int>(rhs.size());
            for (const auto& [c, val] : a) rows.emplace_back(r, c, sign * val);
            rows.emplace_back(r, nv + id, -1.0);
            rhs.push_back(-sign * b);
            origins.push_back({link, index, lag, entry});
        }
        return id;
    }

    void add_sum(const std::vector<int>& aux, double weight, double bound, RowKind kind, int index, int lag) {
        const int r = static_cast<int>(rhs.size());
        for (int id : aux) rows.emplace_back(r, nv + id, weight);
        rhs.push_back(bound);
        origins.push_back({kind, index, lag, -1});
    }
};

std::string describe(const TighteningBundle& b) {
    std::ostringstream os;
    os << "H=" << b.H << " delta_M=" << b.delta_M << " r=" << b.r << " eta_bar=" << b.eta_bar << " eps_H=" << b.eps_H
       << " eps_v=" << b.eps_v << " eps_theta=" << b.eps_theta << " eps_eta_x=" << b.eps_eta_x
       << " eps_eta_u=" << b.eps_eta_u << " eps_x=" << b.eps_x() << " eps_u=" << b.eps_u();
    return os.str();
}

}  // namespace

SafePolicyPolytope build_safe_set(const SystemModel& theta_hat, double eps_x, double eps_u, int H,
                                  const ConstraintSpec& constraints, const StabilityCertificate& cert) {
    require(eps_x >= 0.0 && eps_u >= 0.0, "build_safe_set: tightenings must be nonnegative");
    require(H >= 1, "build_safe_set: H must be >= 1");
    require(constraints.n() == theta_hat.n() && constraints.m() == theta_hat.m(), "build_safe_set: dimension mismatch");
    const int n = theta_hat.n();
    const int m = theta_hat.m();
    const double w = constraints.w_max;

    SafePolicyPolytope poly;
    poly.model = theta_hat;
    poly.constraints = constraints;
    poly.cert = cert;
    poly.eps_x = eps_x;
    poly.eps_u = eps_u;
    poly.H = H;

    Builder b{H * m * n, {}, {}, {}, {}, {}};
    const PhiAffine pa = phi_affine(H, theta_hat);

    // State rows: entries of D_x,i' Phi_k.
    std::vector<std::pair<int, double>> a;
    for (int i = 0; i < constraints.kx(); ++i) {
        std::vector<int> aux;
        double fixed = 0.0;
        for (int k = 1; k <= 2 * H; ++k) {
            for (int c = 0; c < n; ++c) {
                Eigen::RowVectorXd coef = Eigen::RowVectorXd::Zero(b.nv);
                double cst = 0.0;
                for (int r = 0; r < n; ++r) {
                    const double d = constraints.Dx(i, r);
                    if (d == 0.0) continue;
                    coef += d * pa.J[k - 1].row(c * n + r);
                    cst += d * pa.c[k - 1][c * n + r];
                }
                a.clear();
                for (int col = 0; col < b.nv; ++col) {
                    if (coef[col] != 0.0) a.emplace_back(col, coef[col]);
                }
                if (a.empty()) {
                    fixed += std::abs(cst);
                } else {
                    aux.push_back(b.add_aux(a, cst, RowKind::state_link, i, k, c));
                }
            }
        }
        b.add_sum(aux, w, constraints.dx[i] - eps_x - w * fixed, RowKind::state_sum, i, 0);
    }

    // Action rows: entries of D_u,j' M[k].
    for (int j = 0; j < constraints.ku(); ++j) {
        std::vector<int> aux;
        for (int k = 1; k <= H; ++k) {
            for (int c = 0; c < n; ++c) {
                a.clear();
                for (int r = 0; r < m; ++r) {
                    const double d = constraints.Du(j, r);
                    if (d != 0.0) a.emplace_back(DapPolicy::flat_index(k, r, c, m, n), d);
                }
                if (!a.empty()) aux.push_back(b.add_aux(a, 0.0, RowKind::action_link, j, k, c));
            }
        }
        b.add_sum(aux, w, constraints.du[j] - eps_u, RowKind::action_sum, j, 0);
    }

    // Memory box: max row l1 norm of M[k] bounded.
    for (int k = 1; k <= H; ++k) {
        const double bound = box_bound(k, n, cert);
        for (int r = 0; r < m; ++r) {
            std::vector<int> aux;
            for (int c = 0; c < n; ++c) {
                a.assign(1, {DapPolicy::flat_index(k, r, c, m, n), 1.0});
                aux.push_back(b.add_aux(a, 0.0, RowKind::box_link, r, k, c));
            }
            b.add_sum(aux, 1.0, bound, RowKind::box_sum, r, k);
        }
    }

    const int na = static_cast<int>(b.consts.size());
    poly.G.resize(static_cast<Eigen::Index>(b.rhs.size()), b.nv + na);
    poly.G.setFromTriplets(b.rows.begin(), b.rows.end());
    poly.h = Eigen::Map<const Vector>(b.rhs.data(), static_cast<Eigen::Index>(b.rhs.size()));
    poly.origins = std::move(b.origins);
    poly.aux_coef.resize(na, b.nv);
    poly.aux_coef.setFromTriplets(b.coef.begin(), b.coef.end());
    poly.aux_const = Eigen::Map<const Vector>(b.consts.data(), na);
    return poly;
}

Vector SafePolicyPolytope::exact_auxiliaries(const Vector& v) const {
    return (aux_coef * v + aux_const).cwiseAbs();
}

namespace {

// Flat policy of memory H, or nullopt when nonzero blocks lie beyond H.
bool fit_policy(const DapPolicy& policy, int H, Vector& v) {
    for (int k = H + 1; k <= policy.H(); ++k) {
        if (policy[k].cwiseAbs().maxCoeff() != 0.0) return false;
    }
    v = (policy.H() >= H ? truncate_policy(policy, H) : pad_policy(policy, H)).flatten();
    return true;
}

}  // namespace

bool SafePolicyPolytope::contains(const DapPolicy& policy, double tol) const {
    Vector v;
    if (!fit_policy(policy, H, v)) return false;
    Vector x(n_policy() + n_aux());
    x << v, exact_auxiliaries(v);
    return G.rows() == 0 || (G * x - h).maxCoeff() <= tol;
}

double SafePolicyPolytope::violation(const DapPolicy& policy) const {
    double worst = -std::numeric_limits<double>::infinity();
    DapPolicy p = policy;
    if (policy.H() > H) {
        for (int k = H + 1; k <= policy.H(); ++k) {
            if (policy[k].cwiseAbs().maxCoeff() != 0.0) return std::numeric_limits<double>::infinity();
        }
        p = truncate_policy(policy, H);
    }
    worst = std::max(worst, (g_state(p, model, constraints) - (constraints.dx.array() - eps_x).matrix()).maxCoeff());
    worst = std::max(worst, (g_action(p, constraints) - (constraints.du.array() - eps_u).matrix()).maxCoeff());
    for (int k = 1; k <= p.H(); ++k) {
        worst = std::max(worst, p[k].cwiseAbs().rowwise().sum().maxCoeff() - box_bound(k, p.n(), cert));
    }
    return worst;
}

void SafePolicyPolytope::dump(std::ostream& os, const QuadraticCost* objective) const {
    os.precision(17);
    os << "# safe policy polytope: G v <= h, v = [vec(M) (k-major, row, column); auxiliaries]\n";
    os << "dims " << G.rows() << ' ' << G.cols() << ' ' << n_policy() << ' ' << n_aux() << '\n';
    os << "eps_x " << eps_x << "\neps_u " << eps_u << "\nH " << H << '\n';
    os << "G " << G.nonZeros() << '\n';
    for (int r = 0; r < G.outerSize(); ++r) {
        for (qp::SparseRowMatrix::InnerIterator it(G, r); it; ++it) os << r << ' ' << it.col() << ' ' << it.value() << '\n';
    }
    os << "h " << h.size() << '\n';
    for (Eigen::Index i = 0; i < h.size(); ++i) os << h[i] << '\n';
    if (objective != nullptr) {
        os << "P " << objective->P.rows() << '\n';
        for (Eigen::Index r = 0; r < objective->P.rows(); ++r) {
            for (Eigen::Index c = 0; c < objective->P.cols(); ++c) os << objective->P(r, c) << (c + 1 < objective->P.cols() ? ' ' : '\n');
        }
        os << "q " << objective->q.size() << '\n';
        for (Eigen::Index i = 0; i < objective->q.size(); ++i) os << objective->q[i] << '\n';
        os << "c " << objective->c << '\n';
    }
}

namespace {

QpSolution finish(const qp::QpResult& res, int H, int m, int n, double constant, const qp::QpProblem& prob) {
    QpSolution s;
    s.status = res.status;
    s.iterations = res.iterations;
    s.kkt = res.kkt;
    s.infeasibility_margin = res.infeasibility_margin;
    s.x = res.x;
    s.z = res.z;
    s.policy = DapPolicy::unflatten(res.x.head(H * m * n), H, m, n);
    s.objective = prob.objective(res.x) + constant;
    return s;
}

}  // namespace

QpSolution solve_qp(const QuadraticCost& objective, const SafePolicyPolytope& polytope, const qp::QpSettings& settings,
                    double aux_ridge) {
    require(objective.P.rows() == polytope.n_policy(), "solve_qp: objective and polytope sizes differ");
    qp::QpProblem prob;
    prob.P_core = objective.P;
    prob.q = Vector::Zero(polytope.n_policy() + polytope.n_aux());
    prob.q.head(polytope.n_policy()) = objective.q;
    prob.aux_ridge = Vector::Constant(polytope.n_aux(), aux_ridge);
    prob.G = polytope.G;
    prob.h = polytope.h;
    const qp::QpResult res = qp::solve(prob, settings);
    return finish(res, polytope.H, polytope.model.m(), polytope.model.n(), objective.c, prob);
}

RobustCeResult build_and_solve_robust_ce(const SystemModel& theta_hat, double r, double eta_bar, int H, double delta_M,
                                         const TighteningInputs& inputs, const ConstraintSpec& constraints,
                                         const CostWeights& weights, const qp::QpSettings& settings) {
    RobustCeResult out;
    out.bundle = compute_bundle(inputs, H, delta_M, r, eta_bar);
    out.polytope = build_safe_set(theta_hat, out.bundle.eps_x(), out.bundle.eps_u(), H, constraints, inputs.cert);
    const QuadraticCost cost = cost_quadratic(H, theta_hat, weights.Q, weights.R, weights.Sigma);
    out.solution = solve_qp(cost, out.polytope, settings);
    if (!out.solution.optimal()) {
        throw InfeasibleProgram("robust CE program " + qp::to_string(out.solution.status) +
                                    " (margin " + std::to_string(out.solution.infeasibility_margin) + "): " +
                                    describe(out.bundle),
                                out.solution.infeasibility_margin);
    }
    out.policy = out.solution.policy;
    return out;
}

FeasibilityResult check_feasible(const SafePolicyPolytope& polytope, double eps0, const qp::QpSettings& settings) {
    require(eps0 >= 0.0, "check_feasible: eps0 must be nonnegative");
    const int nv = polytope.n_policy();
    qp::QpProblem prob;
    prob.P_core = 2.0 * Matrix::Identity(nv, nv);
    prob.q = Vector::Zero(nv + polytope.n_aux());
    prob.aux_ridge = Vector::Constant(polytope.n_aux(), 1e-10);
    prob.G = polytope.G;
    prob.h = polytope.h;
    for (std::size_t r = 0; r < polytope.origins.size(); ++r) {
        if (polytope.origins[r].kind == RowKind::state_sum) prob.h[static_cast<Eigen::Index>(r)] -= eps0;
    }
    const qp::QpResult res = qp::solve(prob, settings);
    FeasibilityResult out;
    out.feasible = res.status == qp::QpStatus::optimal;
    out.margin = res.infeasibility_margin;
    out.witness = DapPolicy::unflatten(res.x.head(nv), polytope.H, polytope.model.m(), polytope.model.n());
    return out;
}

DapPolicy find_mid_policy(const DapPolicy& M, const SafePolicyPolytope& omega, const DapPolicy& M_prime,
                          const SafePolicyPolytope& omega_prime, const qp::QpSettings& settings) {
    require(M.m() == M_prime.m() && M.n() == M_prime.n(), "find_mid_policy: shape mismatch");
    const int m = M.m();
    const int n = M.n();
    const int H = std::min(omega.H, omega_prime.H);
    const int nv = H * m * n;
    const int na1 = omega.n_aux();
    const int na2 = omega_prime.n_aux();

    std::vector<Triplet> trips;
    std::vector<double> rhs;
    auto append = [&](const SafePolicyPolytope& poly, int aux_offset) {
        const int row0 = static_cast<int>(rhs.size());
        const int pv = poly.n_policy();
        for (int r = 0; r < poly.G.outerSize(); ++r) {
            for (qp::SparseRowMatrix::InnerIterator it(poly.G, r); it; ++it) {
                const int c = static_cast<int>(it.col());
                if (c < pv) {
                    if (c < nv) trips.emplace_back(row0 + r, c, it.value());
                } else {
                    trips.emplace_back(row0 + r, nv + aux_offset + (c - pv), it.value());
                }
            }
            rhs.push_back(poly.h[r]);
        }
    };
    append(omega, 0);
    append(omega_prime, na1);

    // |X - M|^2 + |X - M'|^2 = 2|X|^2 - 2 X'(M + M') + const on the kept blocks.
    const Vector a = pad_policy(M, std::max(M.H(), H)).flatten().head(nv);
    const Vector b = pad_policy(M_prime, std::max(M_prime.H(), H)).flatten().head(nv);
    qp::QpProblem prob;
    prob.P_core = 4.0 * Matrix::Identity(nv, nv);
    prob.q = Vector::Zero(nv + na1 + na2);
    prob.q.head(nv) = -2.0 * (a + b);
    prob.aux_ridge = Vector::Constant(na1 + na2, 1e-10);
    prob.G.resize(static_cast<Eigen::Index>(rhs.size()), nv + na1 + na2);
    prob.G.setFromTriplets(trips.begin(), trips.end());
    prob.h = Eigen::Map<const Vector>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
    const qp::QpResult res = qp::solve(prob, settings);
    if (res.status != qp::QpStatus::optimal) {
        std::ostringstream os;
        os << "mid-policy program " << qp::to_string(res.status) << " (margin " << res.infeasibility_margin
           << "): first set H=" << omega.H << " eps_x=" << omega.eps_x << " eps_u=" << omega.eps_u
           << "; second set H=" << omega_prime.H << " eps_x=" << omega_prime.eps_x << " eps_u=" << omega_prime.eps_u;
        throw InfeasibleProgram(os.str(), res.infeasibility_margin);
    }
    return DapPolicy::unflatten(res.x.head(nv), H, m, n);
}

}  // namespace safedap
