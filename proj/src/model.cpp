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
#include "safedap/model.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <numbers>

#include "safedap/kernels.hpp"
#include "safedap/qp_solver.hpp"

namespace safedap {

SystemModel::SystemModel(Matrix a, Matrix b) : A(std::move(a)), B(std::move(b)) { validate(); }

Matrix SystemModel::stacked() const {
    Matrix theta(n(), n() + m());
    theta << A, B;
    return theta;
}

SystemModel SystemModel::from_stacked(const Matrix& theta, int n) {
    require(theta.rows() == n && theta.cols() > n, "from_stacked: bad shape");
    return SystemModel(theta.leftCols(n), theta.rightCols(theta.cols() - n));
}

void SystemModel::validate() const {
    require(A.rows() > 0 && A.rows() == A.cols(), "SystemModel: A must be square and non-empty");
    require(B.rows() == A.rows() && B.cols() > 0, "SystemModel: B must be n x m with m > 0");
    require(A.allFinite() && B.allFinite(), "SystemModel: non-finite entries");
}

Vector step_plant(const SystemModel& model, const Vector& x, const Vector& u, const Vector& w) {
    require(x.size() == model.n() && w.size() == model.n(), "step_plant: state/disturbance dimension mismatch");
    require(u.size() == model.m(), "step_plant: action dimension mismatch");
    return model.A * x + model.B * u + w;
}

namespace {

double binomial(int k, int n) {
    double c = 1.0;
    for (int i = 1; i <= n; ++i) c = c * (k - n + i) / i;
    return c;
}

// Max of v_i over the polytope intersected with a large box.
double coordinate_extent(const Matrix& D, const Vector& d, int coord, double sign, double box) {
    const int n = static_cast<int>(D.cols());
    const int k = static_cast<int>(D.rows());
    qp::QpProblem lp;
    lp.P_core = Matrix::Zero(n, n);
    lp.q = Vector::Zero(n);
    lp.q[coord] = -sign;
    lp.aux_ridge = Vector(0);
    std::vector<Eigen::Triplet<double>> trips;
    for (int r = 0; r < k; ++r) {
        for (int c = 0; c < n; ++c) {
            if (D(r, c) != 0.0) trips.emplace_back(r, c, D(r, c));
        }
    }
    for (int c = 0; c < n; ++c) {
        trips.emplace_back(k + 2 * c, c, 1.0);
        trips.emplace_back(k + 2 * c + 1, c, -1.0);
    }
    lp.G.resize(k + 2 * n, n);
    lp.G.setFromTriplets(trips.begin(), trips.end());
    lp.h.resize(k + 2 * n);
    lp.h.head(k) = d;
    lp.h.tail(2 * n).setConstant(box);
    const qp::QpResult res = qp::solve(lp);
    require(res.status == qp::QpStatus::optimal, "polytope_l2_radius: polytope is empty or the bound LP failed");
    return sign * res.x[coord];
}

}  // namespace

double polytope_l2_radius(const Matrix& D, const Vector& d) {
    const int n = static_cast<int>(D.cols());
    const int k = static_cast<int>(D.rows());
    require(n > 0 && k == d.size(), "polytope_l2_radius: shape mismatch");
    require(k >= n + 1, "polytope_l2_radius: fewer than n + 1 rows cannot bound a polytope");

    // Boundedness: every coordinate must stay well inside an artificial box.
    const double scale = 1.0 + d.cwiseAbs().maxCoeff();
    const double box = 1e6 * scale;
    Vector extent(n);
    for (int c = 0; c < n; ++c) {
        const double hi = coordinate_extent(D, d, c, 1.0, box);
        const double lo = coordinate_extent(D, d, c, -1.0, box);
        require(hi < 1e-3 * box && lo < 1e-3 * box, "polytope_l2_radius: polytope is unbounded");
        extent[c] = std::max(std::abs(hi), std::abs(lo));
    }
    if (binomial(k, n) > 20000.0) return extent.norm();

    // Vertex enumeration over n-subsets of active rows.
    const double tol = 1e-9 * scale;
    double best = 0.0;
    bool found = false;
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    Matrix Ds(n, n);
    Vector ds(n);
    while (true) {
        for (int i = 0; i < n; ++i) {
            Ds.row(i) = D.row(idx[i]);
            ds[i] = d[idx[i]];
        }
        Eigen::FullPivLU<Matrix> lu(Ds);
        if (lu.isInvertible()) {
            const Vector v = lu.solve(ds);
            if ((D * v - d).maxCoeff() <= tol) {
                best = std::max(best, v.norm());
                found = true;
            }
        }
        int pos = n - 1;
        while (pos >= 0 && idx[pos] == k - n + pos) --pos;
        if (pos < 0) break;
        ++idx[pos];
        for (int i = pos + 1; i < n; ++i) idx[i] = idx[i - 1] + 1;
    }
    require(found, "polytope_l2_radius: no vertex found");
    return best;
}

ConstraintSpec ConstraintSpec::make(Matrix Dx, Vector dx, Matrix Du, Vector du, double w_max) {
    ConstraintSpec c;
    require(Dx.rows() == dx.size() && Du.rows() == du.size(), "ConstraintSpec: row count mismatch");
    require(Dx.allFinite() && dx.allFinite() && Du.allFinite() && du.allFinite(), "ConstraintSpec: non-finite data");
    require((dx.array() > 0.0).all() && (du.array() > 0.0).all(),
            "ConstraintSpec: d_x and d_u must be strictly positive");
    require(std::isfinite(w_max) && w_max > 0.0, "ConstraintSpec: w_max must be positive");
    c.Dx = std::move(Dx);
    c.dx = std::move(dx);
    c.Du = std::move(Du);
    c.du = std::move(du);
    c.w_max = w_max;
    c.x_max = polytope_l2_radius(c.Dx, c.dx);
    c.u_max = polytope_l2_radius(c.Du, c.du);
    c.z_max = std::hypot(c.x_max, c.u_max);
    return c;
}

double ConstraintSpec::Dx_norm_inf() const { return Dx.cwiseAbs().rowwise().sum().maxCoeff(); }
double ConstraintSpec::Du_norm_inf() const { return Du.cwiseAbs().rowwise().sum().maxCoeff(); }

MembershipReport check_membership(const ConstraintSpec& constraints, const Vector& x, const Vector& u) {
    require(x.size() == constraints.n() && u.size() == constraints.m(), "check_membership: dimension mismatch");
    MembershipReport r;
    r.state_slack = constraints.dx - constraints.Dx * x;
    r.action_slack = constraints.du - constraints.Du * u;
    r.state_violation = (r.state_slack.array() < 0.0).any();
    r.action_violation = (r.action_slack.array() < 0.0).any();
    return r;
}

Vector project_box(Vector v, double w_max) {
    require(w_max >= 0.0, "project_box: negative bound");
    kernels::clamp_box({v.data(), static_cast<std::size_t>(v.size())}, w_max);
    return v;
}

NoiseKind parse_noise_kind(const std::string& name) {
    if (name == "uniform-box" || name == "uniform_box" || name == "uniform") return NoiseKind::uniform_box;
    if (name == "truncated-gaussian" || name == "truncated_gaussian") return NoiseKind::truncated_gaussian;
    throw ContractError("unknown noise kind: " + name);
}

std::string to_string(NoiseKind kind) {
    return kind == NoiseKind::uniform_box ? "uniform-box" : "truncated-gaussian";
}

AntiConcentration default_anti_concentration(NoiseKind kind, int dim) {
    // For the uniform box the coordinate directions give P(w_i >= 1/2) = 1/4
    // exactly, but oblique directions in dim >= 2 fall below 1/4 at s = 1/2
    // (0.209 on the diagonal of the square). s = 1/4 keeps p >= 1/4 in every
    // direction and dimension; the same holds for the clipped Gaussian.
    if (kind == NoiseKind::uniform_box && dim == 1) return {0.5, 0.25};
    return {0.25, 0.25};
}

namespace {
constexpr double kGaussStd = 0.5;  // truncated-gaussian: N(0, 1/4) clipped to [-1, 1]

double std_normal_cdf(double a) { return 0.5 * std::erfc(-a / std::numbers::sqrt2); }
}  // namespace

double unit_coordinate_variance(NoiseKind kind) {
    if (kind == NoiseKind::uniform_box) return 1.0 / 3.0;
    const double s = kGaussStd;
    const double c = 1.0;
    const double a = c / s;
    const double phi = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
    const double Phi = std_normal_cdf(a);
    return s * s * ((2.0 * Phi - 1.0) - 2.0 * a * phi) + 2.0 * c * c * (1.0 - Phi);
}

Vector sample_unit_noise(NoiseKind kind, int dim, Rng& rng) {
    Vector v(dim);
    if (kind == NoiseKind::uniform_box) {
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        for (int i = 0; i < dim; ++i) v[i] = dist(rng);
    } else {
        std::normal_distribution<double> dist(0.0, kGaussStd);
        for (int i = 0; i < dim; ++i) v[i] = std::clamp(dist(rng), -1.0, 1.0);
    }
    return v;
}

DisturbanceModel DisturbanceModel::make(NoiseKind kind, int n, double w_max) {
    require(n > 0, "DisturbanceModel: n must be positive");
    require(w_max >= 0.0, "DisturbanceModel: w_max must be nonnegative");
    DisturbanceModel d;
    d.kind = kind;
    d.n = n;
    d.w_max = w_max;
    // Independent coordinates bounded by w_max: every projection onto a unit
    // direction is w_max^2-sub-Gaussian (Hoeffding).
    d.sigma_sub = w_max;
    d.Sigma = Matrix::Identity(n, n) * (w_max * w_max * unit_coordinate_variance(kind));
    const AntiConcentration ac = default_anti_concentration(kind, n);
    d.s_w = ac.s * w_max;
    d.p_w = ac.p;
    return d;
}

Vector DisturbanceModel::sample(Rng& rng) const {
    Vector w = sample_unit_noise(kind, n, rng) * w_max;
    return project_box(std::move(w), w_max);
}

ExcitationModel ExcitationModel::make(NoiseKind kind, int m) {
    require(m > 0, "ExcitationModel: m must be positive");
    ExcitationModel e;
    e.kind = kind;
    e.m = m;
    const AntiConcentration ac = default_anti_concentration(kind, m);
    e.s_eta = ac.s;
    e.p_eta = ac.p;
    return e;
}

Vector ExcitationModel::sample(Rng& rng, double eta_bar) const {
    require(eta_bar >= 0.0, "ExcitationModel: negative excitation level");
    if (eta_bar == 0.0) return Vector::Zero(m);
    return project_box(sample_unit_noise(kind, m, rng) * eta_bar, eta_bar);
}

void StabilityCertificate::validate() const {
    require(kappa >= 1.0, "StabilityCertificate: kappa must be >= 1");
    require(gamma >= 0.0 && gamma < 1.0, "StabilityCertificate: gamma must lie in [0, 1)");
    require(kappa_B >= 0.0 && std::isfinite(kappa_B), "StabilityCertificate: kappa_B must be finite and nonnegative");
}

double spectral_norm(const Matrix& M) {
    if (M.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(M);
    return svd.singularValues()(0);
}

StabilityCheck verify_kappa_gamma(const Matrix& A, const StabilityCertificate& cert, int horizon) {
    require(horizon >= 1, "verify_kappa_gamma: horizon must be >= 1");
    require(A.rows() == A.cols(), "verify_kappa_gamma: A must be square");
    StabilityCheck out;
    out.horizon = horizon;
    Matrix power = Matrix::Identity(A.rows(), A.cols());
    double bound = cert.kappa;
    for (int t = 0; t <= horizon; ++t) {
        if (spectral_norm(power) > bound * (1.0 + 1e-12) + 1e-300) {
            out.stable = false;
            out.first_violation = t;
            return out;
        }
        power = A * power;
        bound *= 1.0 - cert.gamma;
    }
    return out;
}

}  // namespace safedap
