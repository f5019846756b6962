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

// Primal-dual interior-point solver for convex QPs over linear inequalities:
//
//     minimize   1/2 x' P x + q' x
//     subject to G x <= h
//
// The variable vector is split into a dense "core" block and an auxiliary
// block. Auxiliaries carry only a diagonal ridge in P and no cross terms with
// the core. That is the shape of every l1-epigraph program in this library,
// and it lets each Newton step factor the sparse auxiliary block once and
// reduce to a small dense system on the core.

#include <Eigen/Sparse>
#include <string>

#include "safedap/types.hpp"

namespace safedap::qp {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct QpProblem {
    Matrix P_core;          ///< n_core x n_core, symmetric PSD
    Vector q;               ///< n_core + n_aux
    Vector aux_ridge;       ///< n_aux, strictly positive
    SparseRowMatrix G;      ///< rows x (n_core + n_aux)
    Vector h;

    [[nodiscard]] int n_core() const { return static_cast<int>(P_core.rows()); }
    [[nodiscard]] int n_aux() const { return static_cast<int>(aux_ridge.size()); }
    [[nodiscard]] int n_vars() const { return n_core() + n_aux(); }
    [[nodiscard]] int n_rows() const { return static_cast<int>(G.rows()); }
    [[nodiscard]] double objective(const Vector& x) const;
    void validate() const;
};

struct QpSettings {
    double tol{1e-8};
    int max_iterations{200};
    double step_fraction{0.99};
    bool verbose{false};
};

enum class QpStatus { optimal, infeasible, max_iterations };

std::string to_string(QpStatus status);

struct KktResiduals {
    double stationarity{0};            ///< ||P x + q + G' z||_inf
    double primal_infeasibility{0};    ///< max(G x - h)_+
    double complementarity{0};         ///< max |z_i (h - G x)_i|
    double dual_infeasibility{0};      ///< max(-z)_+
};

/// Residuals recomputed from scratch for a candidate primal/dual pair.
KktResiduals kkt_residuals(const QpProblem& problem, const Vector& x, const Vector& z);

struct QpResult {
    Vector x;
    Vector z;   ///< inequality multipliers
    double objective{0};
    KktResiduals kkt;
    int iterations{0};
    QpStatus status{QpStatus::max_iterations};
    /// For infeasible problems: the smallest uniform relaxation t with
    /// G x <= h + t feasible (positive).
    double infeasibility_margin{0};
};

QpResult solve(const QpProblem& problem, const QpSettings& settings = {});

}  // namespace safedap::qp
