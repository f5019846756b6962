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
#include "safedap/config.hpp"

#include <cstdio>
#include <fstream>

namespace safedap {

using nlohmann::json;

namespace {

Matrix parse_matrix(const json& j, const std::string& key) {
    require(j.is_array() && !j.empty(), "config: " + key + " must be a non-empty array of rows");
    // A flat array is read as a column.
    if (!j.front().is_array()) {
        Matrix M(static_cast<Eigen::Index>(j.size()), 1);
        for (std::size_t i = 0; i < j.size(); ++i) M(static_cast<Eigen::Index>(i), 0) = j[i].get<double>();
        return M;
    }
    const std::size_t rows = j.size();
    const std::size_t cols = j.front().size();
    Matrix M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        require(j[r].is_array() && j[r].size() == cols, "config: " + key + " has ragged rows");
        for (std::size_t c = 0; c < cols; ++c) M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
    return M;
}

Vector parse_vector(const json& j, const std::string& key) {
    require(j.is_array() && !j.empty(), "config: " + key + " must be a non-empty array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

const json& need(const json& j, const std::string& key) {
    require(j.contains(key), "config: missing key '" + key + "'");
    return j.at(key);
}

template <typename T>
T value_or(const json& j, const std::string& key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::optional<double> optional_double(const json& j, const std::string& key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

}  // namespace

json matrix_to_json(const Matrix& M) {
    json out = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
        out.push_back(row);
    }
    return out;
}

json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

ProblemConfig parse_config(const json& j) {
    require(j.is_object(), "config: top level must be an object");
    ProblemConfig c;
    c.name = value_or<std::string>(j, "name", c.name);
    c.truth = SystemModel(parse_matrix(need(j, "A"), "A"), parse_matrix(need(j, "B"), "B"));
    const int n = c.truth.n();
    const int m = c.truth.m();
    c.theta_ini = SystemModel(j.contains("A_ini") ? parse_matrix(j["A_ini"], "A_ini") : c.truth.A,
                              j.contains("B_ini") ? parse_matrix(j["B_ini"], "B_ini") : c.truth.B);
    require(c.theta_ini.n() == n && c.theta_ini.m() == m, "config: initial estimate has the wrong shape");
    c.r_ini = need(j, "r_ini").get<double>();
    c.Dx = parse_matrix(need(j, "D_x"), "D_x");
    c.dx = parse_vector(need(j, "d_x"), "d_x");
    c.Du = parse_matrix(need(j, "D_u"), "D_u");
    c.du = parse_vector(need(j, "d_u"), "d_u");
    require(c.Dx.cols() == n && c.Du.cols() == m, "config: constraint matrices do not match (A, B)");
    c.w_max = need(j, "w_max").get<double>();
    c.cert.kappa = need(j, "kappa").get<double>();
    c.cert.gamma = need(j, "gamma").get<double>();
    c.cert.kappa_B = need(j, "kappa_B").get<double>();
    c.cert.validate();
    c.Q = j.contains("Q") ? parse_matrix(j["Q"], "Q") : Matrix::Identity(n, n);
    c.R = j.contains("R") ? parse_matrix(j["R"], "R") : Matrix::Identity(m, m);
    require(c.Q.rows() == n && c.Q.cols() == n && c.R.rows() == m && c.R.cols() == m, "config: Q or R has the wrong shape");

    const json dist = value_or<json>(j, "disturbance", json::object());
    c.disturbance_kind = parse_noise_kind(value_or<std::string>(dist, "kind", "uniform-box"));
    c.s_w = optional_double(dist, "s");
    c.p_w = optional_double(dist, "p");
    c.zero_disturbance = value_or<bool>(dist, "zero", false);
    const json exc = value_or<json>(j, "excitation", json::object());
    c.excitation_kind = parse_noise_kind(value_or<std::string>(exc, "kind", "uniform-box"));
    c.s_eta = optional_double(exc, "s");
    c.p_eta = optional_double(exc, "p");

    const json& feas = need(j, "feasibility");
    c.eps0 = need(feas, "eps0").get<double>();
    c.eps_F_x = need(feas, "eps_F_x").get<double>();
    c.eps_F_u = need(feas, "eps_F_u").get<double>();

    const json sched = value_or<json>(j, "schedule", json::object());
    c.T1 = value_or<std::int64_t>(sched, "T1", c.T1);
    c.horizon_exp = value_or<int>(sched, "horizon_exp", c.horizon_exp);
    c.p = value_or<double>(sched, "p", c.p);
    c.constants.c_delta = value_or<double>(sched, "c_delta", c.constants.c_delta);
    c.constants.c_eta = value_or<double>(sched, "c_eta", c.constants.c_eta);
    c.constants.c_H = value_or<double>(sched, "c_H", c.constants.c_H);

    const json est = value_or<json>(j, "estimation", json::object());
    c.ridge = value_or<double>(est, "ridge", c.ridge);
    c.use_all_history = value_or<bool>(est, "use_all_history", c.use_all_history);
    c.radius_scale = value_or<double>(est, "radius_scale", c.radius_scale);
    c.sample_floor_scale = value_or<double>(est, "sample_floor_scale", c.sample_floor_scale);

    const json tight = value_or<json>(j, "tightening", json::object());
    c.alpha = value_or<double>(tight, "alpha", c.alpha);

    const json qp = value_or<json>(j, "qp", json::object());
    c.qp.tol = value_or<double>(qp, "tol", c.qp.tol);
    c.qp.max_iterations = value_or<int>(qp, "max_iterations", c.qp.max_iterations);

    const json bench = value_or<json>(j, "benchmark", json::object());
    c.H_bench = value_or<int>(bench, "H", c.H_bench);
    c.benchmark_mc_steps = value_or<std::int64_t>(bench, "mc_steps", c.benchmark_mc_steps);

    c.seed = value_or<std::uint64_t>(j, "seed", c.seed);

    require(c.r_ini >= 0.0, "config: r_ini must be nonnegative");
    require(c.T1 >= 1 && (c.T1 & (c.T1 - 1)) == 0, "config: schedule.T1 must be a power of two");
    require(c.horizon_exp >= 1 && c.horizon_exp < 40, "config: schedule.horizon_exp out of range");
    require((std::int64_t{1} << c.horizon_exp) >= c.T1, "config: horizon 2^horizon_exp must be at least T1");
    require(c.alpha > 0.0 && c.alpha <= 1.0, "config: tightening.alpha must lie in (0, 1]");
    return c;
}

ProblemConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& err) {
        throw ContractError("config: " + path + ": " + err.what());
    }
    return parse_config(j);
}

json to_json(const ProblemConfig& c) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json j;
    j["name"] = c.name;
    j["A"] = matrix_to_json(c.truth.A);
    j["B"] = matrix_to_json(c.truth.B);
    j["A_ini"] = matrix_to_json(c.theta_ini.A);
    j["B_ini"] = matrix_to_json(c.theta_ini.B);
    j["r_ini"] = c.r_ini;
    j["D_x"] = matrix_to_json(c.Dx);
    j["d_x"] = vector_to_json(c.dx);
    j["D_u"] = matrix_to_json(c.Du);
    j["d_u"] = vector_to_json(c.du);
    j["w_max"] = c.w_max;
    j["kappa"] = c.cert.kappa;
    j["gamma"] = c.cert.gamma;
    j["kappa_B"] = c.cert.kappa_B;
    j["Q"] = matrix_to_json(c.Q);
    j["R"] = matrix_to_json(c.R);
    j["disturbance"] = {{"kind", to_string(c.disturbance_kind)}, {"s", opt(c.s_w)}, {"p", opt(c.p_w)}, {"zero", c.zero_disturbance}};
    j["excitation"] = {{"kind", to_string(c.excitation_kind)}, {"s", opt(c.s_eta)}, {"p", opt(c.p_eta)}};
    j["feasibility"] = {{"eps0", c.eps0}, {"eps_F_x", c.eps_F_x}, {"eps_F_u", c.eps_F_u}};
    j["schedule"] = {{"T1", c.T1}, {"horizon_exp", c.horizon_exp}, {"p", c.p}, {"c_delta", c.constants.c_delta},
                     {"c_eta", c.constants.c_eta}, {"c_H", c.constants.c_H}};
    j["estimation"] = {{"ridge", c.ridge}, {"use_all_history", c.use_all_history}, {"radius_scale", c.radius_scale},
                       {"sample_floor_scale", c.sample_floor_scale}};
    j["tightening"] = {{"alpha", c.alpha}};
    j["qp"] = {{"tol", c.qp.tol}, {"max_iterations", c.qp.max_iterations}};
    j["benchmark"] = {{"H", c.H_bench}, {"mc_steps", c.benchmark_mc_steps}};
    j["seed"] = c.seed;
    return j;
}

std::string config_hash(const ProblemConfig& config) {
    const std::string text = to_json(config).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace safedap
