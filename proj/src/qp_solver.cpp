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
#include "safedap/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace safedap::qp {

std::string to_string(QpStatus status) {
    switch (status) {
        case QpStatus::optimal: return "optimal";
        case QpStatus::infeasible: return "infeasible";
        case QpStatus::max_iterations: return "max-iterations";
    }
    return "unknown";
}

double QpProblem::objective(const Vector& x) const {
    const int nc = n_core();
    const auto xc = x.head(nc);
    const auto xa = x.tail(n_aux());
    return 0.5 * xc.dot(P_core * xc) + 0.5 * xa.dot(aux_ridge.cwiseProduct(xa)) + q.dot(x);
}

void QpProblem::validate() const {
    require(P_core.rows() == P_core.cols(), "qp: P_core must be square");
    require(q.size() == n_vars(), "qp: q has wrong length");
    require(G.cols() == n_vars(), "qp: G has wrong column count");
    require(h.size() == G.rows(), "qp: h has wrong length");
    require((aux_ridge.array() > 0.0).all(), "qp: auxiliary ridge must be positive");
    require(P_core.allFinite() && q.allFinite() && h.allFinite(), "qp: non-finite data");
}

KktResiduals kkt_residuals(const QpProblem& problem, const Vector& x, const Vector& z) {
    KktResiduals r;
    const int nc = problem.n_core();
    Vector grad = problem.q;
    grad.head(nc) += problem.P_core * x.head(nc);
    grad.tail(problem.n_aux()) += problem.aux_ridge.cwiseProduct(x.tail(problem.n_aux()));
    if (problem.n_rows() > 0) grad += problem.G.transpose() * z;
    r.stationarity = grad.size() > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
    if (problem.n_rows() > 0) {
        const Vector slack = problem.h - problem.G * x;
        r.primal_infeasibility = std::max(0.0, (-slack).maxCoeff());
        r.complementarity = z.cwiseProduct(slack).cwiseAbs().maxCoeff();
        r.dual_infeasibility = std::max(0.0, (-z).maxCoeff());
    }
    return r;
}

namespace {

// Newton system K dx = rhs with K = P + G' W G, solved by eliminating the
// auxiliary block. Auxiliaries that share a row are coupled; the coupled
// groups form dense diagonal blocks of K_aa which are factored separately.
// The rows of G are scattered directly into the blocks every iteration.
class NewtonSolver {
public:
    explicit NewtonSolver(const QpProblem& p) : prob_(p), nc_(p.n_core()), na_(p.n_aux()) {
        const int rows = p.n_rows();
        for (int r = 0; r < rows; ++r) {
            for (SparseRowMatrix::InnerIterator it(p.G, r); it; ++it) {
                const int c = static_cast<int>(it.col());
                if (c < nc_) {
                    core_idx_.push_back(c);
                    core_val_.push_back(it.value());
                } else {
                    aux_idx_.push_back(c - nc_);
                    aux_val_.push_back(it.value());
                }
            }
            core_end_.push_back(static_cast<int>(core_idx_.size()));
            aux_end_.push_back(static_cast<int>(aux_idx_.size()));
        }
        // Union-find over auxiliaries appearing in a common row.
        std::vector<int> parent(na_);
        for (int a = 0; a < na_; ++a) parent[a] = a;
        auto find = [&](int a) {
            while (parent[a] != a) a = parent[a] = parent[parent[a]];
            return a;
        };
        int a0 = 0;
        for (int r = 0; r < rows; ++r) {
            for (int i = a0 + 1; i < aux_end_[r]; ++i) parent[find(aux_idx_[i])] = find(aux_idx_[a0]);
            a0 = aux_end_[r];
        }
        std::vector<int> block_of_root(na_, -1);
        std::vector<std::vector<int>> members;
        for (int a = 0; a < na_; ++a) {
            const int root = find(a);
            if (block_of_root[root] < 0) {
                block_of_root[root] = static_cast<int>(members.size());
                members.emplace_back();
            }
            members[block_of_root[root]].push_back(a);
        }
        pos_.assign(na_, 0);
        block_of_.assign(na_, 0);
        int off = 0;
        for (std::size_t b = 0; b < members.size(); ++b) {
            block_off_.push_back(off);
            for (int a : members[b]) {
                pos_[a] = off++;
                block_of_[a] = static_cast<int>(b);
            }
        }
        block_off_.push_back(off);
        blocks_.resize(members.size());
        llts_.resize(members.size());
        for (std::size_t b = 0; b < members.size(); ++b) {
            const int sz = block_off_[b + 1] - block_off_[b];
            blocks_[b].resize(sz, sz);
        }
    }

    bool factor(const Vector& w) {
        const int rows = prob_.n_rows();
        Kcc_ = prob_.P_core;
        Kac_.setZero(na_, nc_);
        for (std::size_t b = 0; b < blocks_.size(); ++b) blocks_[b].setZero();
        for (int a = 0; a < na_; ++a) {
            const int b = block_of_[a];
            const int l = pos_[a] - block_off_[b];
            blocks_[b](l, l) = prob_.aux_ridge[a];
        }
        int c0 = 0, a0 = 0;
        for (int r = 0; r < rows; ++r) {
            const double wr = w[r];
            const int c1 = core_end_[r];
            const int a1 = aux_end_[r];
            for (int i = c0; i < c1; ++i) {
                const double wi = wr * core_val_[i];
                for (int j = c0; j < c1; ++j) Kcc_(core_idx_[j], core_idx_[i]) += wi * core_val_[j];
                for (int j = a0; j < a1; ++j) Kac_(pos_[aux_idx_[j]], core_idx_[i]) += wi * aux_val_[j];
            }
            if (a1 > a0) {
                const int b = block_of_[aux_idx_[a0]];
                Matrix& K = blocks_[b];
                const int off = block_off_[b];
                for (int i = a0; i < a1; ++i) {
                    const double wi = wr * aux_val_[i];
                    const int li = pos_[aux_idx_[i]] - off;
                    for (int j = a0; j < a1; ++j) K(pos_[aux_idx_[j]] - off, li) += wi * aux_val_[j];
                }
            }
            c0 = c1;
            a0 = a1;
        }
        if (na_ > 0) {
            KaaInvKac_.resize(na_, nc_);
            for (std::size_t b = 0; b < blocks_.size(); ++b) {
                llts_[b].compute(blocks_[b]);
                if (llts_[b].info() != Eigen::Success) return false;
                const int off = block_off_[b];
                const int sz = block_off_[b + 1] - off;
                if (nc_ > 0) KaaInvKac_.middleRows(off, sz) = llts_[b].solve(Kac_.middleRows(off, sz));
            }
            if (nc_ > 0) Kcc_.noalias() -= Kac_.transpose() * KaaInvKac_;
        }
        if (nc_ > 0) {
            llt_.compute(Kcc_);
            if (llt_.info() != Eigen::Success) {
                const double reg = 1e-12 * std::max(1.0, Kcc_.diagonal().cwiseAbs().maxCoeff());
                Kcc_.diagonal().array() += reg;
                llt_.compute(Kcc_);
                if (llt_.info() != Eigen::Success) return false;
            }
        }
        return true;
    }

    Vector solve(const Vector& rhs) const {
        Vector dx(nc_ + na_);
        Vector ra(na_);
        for (int a = 0; a < na_; ++a) ra[pos_[a]] = rhs[nc_ + a];
        if (nc_ > 0) {
            const Vector rc = rhs.head(nc_) - KaaInvKac_.transpose() * ra;
            dx.head(nc_) = llt_.solve(rc);
            if (na_ > 0) ra -= Kac_ * dx.head(nc_);
        }
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            const int off = block_off_[b];
            const int sz = block_off_[b + 1] - off;
            ra.segment(off, sz) = llts_[b].solve(ra.segment(off, sz));
        }
        for (int a = 0; a < na_; ++a) dx[nc_ + a] = ra[pos_[a]];
        return dx;
    }

private:
    const QpProblem& prob_;
    int nc_;
    int na_;
    std::vector<int> core_idx_, aux_idx_, core_end_, aux_end_;
    std::vector<double> core_val_, aux_val_;
    std::vector<int> pos_, block_of_, block_off_;
    std::vector<Matrix> blocks_;
    std::vector<Eigen::LLT<Matrix>> llts_;
    Matrix Kcc_;
    Matrix Kac_;  ///< rows in block order
    Matrix KaaInvKac_;
    Eigen::LLT<Matrix> llt_;
};

double max_step(const Vector& v, const Vector& dv) {
    double alpha = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
    }
    return alpha;
}

struct IpmOutcome {
    Vector x, z;
    int iterations{0};
    bool converged{false};
};

bool converged(const QpProblem& p, const Vector& x, const Vector& z, double tol, double q_scale, double h_scale) {
    const KktResiduals r = kkt_residuals(p, x, z);
    return r.stationarity <= tol * q_scale && r.primal_infeasibility <= tol * h_scale &&
           r.complementarity <= tol * std::max(q_scale, h_scale) && r.dual_infeasibility == 0.0;
}

IpmOutcome run_ipm(const QpProblem& p, const QpSettings& settings) {
    const int n = p.n_vars();
    const int m = p.n_rows();
    const int nc = p.n_core();
    const int na = p.n_aux();
    const double q_scale = 1.0 + (n > 0 ? p.q.cwiseAbs().maxCoeff() : 0.0);
    const double h_scale = 1.0 + (m > 0 ? p.h.cwiseAbs().maxCoeff() : 0.0);

    auto apply_P = [&](const Vector& x) {
        Vector y(n);
        y.head(nc) = p.P_core * x.head(nc);
        y.tail(na) = p.aux_ridge.cwiseProduct(x.tail(na));
        return y;
    };

    NewtonSolver newton(p);
    IpmOutcome out;
    if (m == 0) {
        if (!newton.factor(Vector())) return out;
        out.x = newton.solve(-p.q);
        out.z = Vector();
        out.converged = true;
        return out;
    }

    // Initial point: minimize 1/2 x'Px + q'x + 1/2 ||Gx - h||^2, then shift
    // slacks and multipliers into the positive orthant.
    Vector x(n), s(m), z(m);
    if (!newton.factor(Vector::Ones(m))) return out;
    x = newton.solve(-p.q + p.G.transpose() * p.h);
    Vector r0 = p.G * x - p.h;
    s = -r0;
    z = r0;
    const double shift_s = -s.minCoeff();
    if (shift_s >= 0.0) s.array() += 1.0 + shift_s;
    const double shift_z = -z.minCoeff();
    if (shift_z >= 0.0) z.array() += 1.0 + shift_z;

    const double z_blowup = 1e10 * q_scale * h_scale;
    for (int it = 1; it <= settings.max_iterations; ++it) {
        out.iterations = it;
        const Vector rd = apply_P(x) + p.q + p.G.transpose() * z;
        const Vector rp = p.G * x + s - p.h;
        const double mu = s.dot(z) / m;

        if (converged(p, x, z, settings.tol, q_scale, h_scale) && mu <= settings.tol) {
            out.converged = true;
            break;
        }
        if (!z.allFinite() || z.maxCoeff() > z_blowup) break;

        const Vector w = z.cwiseQuotient(s);
        if (!newton.factor(w)) break;

        // Predictor.
        Vector rhs = -rd - p.G.transpose() * (w.cwiseProduct(rp) - z);
        Vector dx = newton.solve(rhs);
        Vector ds = -rp - p.G * dx;
        Vector dz = w.cwiseProduct(p.G * dx + rp) - z;
        const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
        const double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / m;
        const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

        // Corrector.
        const Vector rc = s.cwiseProduct(z) + ds.cwiseProduct(dz) - Vector::Constant(m, sigma * mu);
        rhs = -rd - p.G.transpose() * (w.cwiseProduct(rp) - rc.cwiseQuotient(s));
        dx = newton.solve(rhs);
        ds = -rp - p.G * dx;
        dz = w.cwiseProduct(p.G * dx + rp) - rc.cwiseQuotient(s);
        const double alpha = std::min(1.0, settings.step_fraction * std::min(max_step(s, ds), max_step(z, dz)));

        x += alpha * dx;
        s += alpha * ds;
        z += alpha * dz;
        if (settings.verbose) {
            std::cerr << "ipm " << it << " mu=" << mu << " |rp|=" << rp.cwiseAbs().maxCoeff()
                      << " |rd|=" << rd.cwiseAbs().maxCoeff() << " alpha=" << alpha << '\n';
        }
    }
    out.x = std::move(x);
    out.z = std::move(z);
    if (!out.converged && out.x.allFinite() && out.z.allFinite()) {
        out.converged = converged(p, out.x, out.z, settings.tol, q_scale, h_scale);
    }
    return out;
}

// Smallest uniform relaxation t >= -1 making G x <= h + t feasible.
double feasibility_margin(const QpProblem& p, const QpSettings& settings) {
    QpProblem ph;
    const int nc = p.n_core();
    const int na = p.n_aux();
    const int m = p.n_rows();
    ph.P_core = Matrix::Zero(nc + 1, nc + 1);
    ph.P_core.diagonal().head(nc).setConstant(1e-10);
    ph.q = Vector::Zero(nc + 1 + na);
    ph.q[nc] = 1.0;
    ph.aux_ridge = Vector::Constant(na, 1e-10);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(p.G.nonZeros() + m + 1);
    for (int r = 0; r < m; ++r) {
        for (SparseRowMatrix::InnerIterator itr(p.G, r); itr; ++itr) {
            const int c = static_cast<int>(itr.col());
            trips.emplace_back(r, c < nc ? c : c + 1, itr.value());
        }
        trips.emplace_back(r, nc, -1.0);
    }
    trips.emplace_back(m, nc, -1.0);
    ph.G.resize(m + 1, nc + 1 + na);
    ph.G.setFromTriplets(trips.begin(), trips.end());
    ph.h.resize(m + 1);
    ph.h.head(m) = p.h;
    ph.h[m] = 1.0;
    QpSettings s = settings;
    s.max_iterations = std::max(settings.max_iterations, 200);
    const IpmOutcome o = run_ipm(ph, s);
    if (!o.x.allFinite() || o.x.size() == 0) return std::numeric_limits<double>::infinity();
    // Evaluate the certificate directly rather than trusting the t coordinate.
    Vector xp(nc + na);
    xp.head(nc) = o.x.head(nc);
    xp.tail(na) = o.x.tail(na);
    return (p.G * xp - p.h).maxCoeff();
}

}  // namespace

QpResult solve(const QpProblem& problem, const QpSettings& settings) {
    problem.validate();
    QpResult res;
    IpmOutcome o = run_ipm(problem, settings);
    res.iterations = o.iterations;
    const double h_scale = 1.0 + (problem.n_rows() > 0 ? problem.h.cwiseAbs().maxCoeff() : 0.0);
    if (o.converged) {
        res.x = std::move(o.x);
        res.z = std::move(o.z);
        res.status = QpStatus::optimal;
    } else {
        const double margin = problem.n_rows() > 0 ? feasibility_margin(problem, settings) : 0.0;
        res.infeasibility_margin = margin;
        res.status = margin > settings.tol * h_scale ? QpStatus::infeasible : QpStatus::max_iterations;
        res.x = o.x.size() == problem.n_vars() && o.x.allFinite() ? o.x : Vector::Zero(problem.n_vars());
        res.z = o.z.size() == problem.n_rows() && o.z.allFinite() ? o.z : Vector::Zero(problem.n_rows());
    }
    res.objective = problem.objective(res.x);
    res.kkt = kkt_residuals(problem, res.x, res.z);
    return res;
}

}  // namespace safedap::qp
