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

// Problem instances as JSON documents.

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "safedap/controller.hpp"

namespace safedap {

struct ProblemConfig {
    std::string name{"instance"};
    SystemModel truth;
    SystemModel theta_ini;
    double r_ini{0};
    Matrix Dx;
    Vector dx;
    Matrix Du;
    Vector du;
    double w_max{0};
    StabilityCertificate cert;
    Matrix Q;
    Matrix R;

    NoiseKind disturbance_kind{NoiseKind::uniform_box};
    std::optional<double> s_w, p_w;  ///< override the defaults when set
    bool zero_disturbance{false};
    NoiseKind excitation_kind{NoiseKind::uniform_box};
    std::optional<double> s_eta, p_eta;

    double eps0{0};
    double eps_F_x{0};
    double eps_F_u{0};

    std::int64_t T1{1024};
    int horizon_exp{12};
    double p{0.1};
    ScheduleConstants constants;

    double ridge{1e-10};
    bool use_all_history{false};
    double radius_scale{1.0};
    double sample_floor_scale{1.0};

    double alpha{1.0};
    qp::QpSettings qp;

    int H_bench{0};  ///< 0: twice the largest scheduled memory
    std::int64_t benchmark_mc_steps{200000};

    std::uint64_t seed{1};
};

ProblemConfig parse_config(const nlohmann::json& j);
ProblemConfig load_config(const std::string& path);
/// Fully resolved document (defaults filled in); parse_config(to_json(c)) == c.
nlohmann::json to_json(const ProblemConfig& config);
/// FNV-1a over the canonical serialisation of the resolved config, as 16 hex digits.
std::string config_hash(const ProblemConfig& config);

nlohmann::json matrix_to_json(const Matrix& M);
nlohmann::json vector_to_json(const Vector& v);

}  // namespace safedap
