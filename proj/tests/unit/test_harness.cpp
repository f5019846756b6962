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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_util.hpp"

using namespace safedap;
using namespace safedap::testing;

namespace {

ProblemConfig scalar_config() { return load_config(repo_path("configs/scalar.json")); }

std::string csv_of(const TrajectoryLog& log) {
    std::ostringstream os;
    write_csv(log, os);
    return os.str();
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("safedap_test_" + name)).string();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SAFEDAP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config round trip and hash") {
    for (const char* name : {"configs/scalar.json", "configs/two_state.json"}) {
        const ProblemConfig c = load_config(repo_path(name));
        const ProblemConfig back = parse_config(to_json(c));
        CHECK(to_json(back).dump() == to_json(c).dump());
        CHECK(config_hash(back) == config_hash(c));
        CHECK(config_hash(c).size() == 16);
    }
    ProblemConfig c = scalar_config();
    const std::string h = config_hash(c);
    c.r_ini += 1e-9;
    CHECK(config_hash(c) != h);
    c = scalar_config();
    c.seed = 2;
    CHECK(config_hash(c) != h);
}

TEST_CASE("malformed configs are rejected") {
    nlohmann::json j = to_json(scalar_config());
    j["A"] = nlohmann::json::array({nlohmann::json::array({0.5, 0.1})});
    CHECK_THROWS(parse_config(j));
    CHECK_THROWS(load_config(repo_path("configs/does_not_exist.json")));
}

TEST_CASE("same seed gives the same trajectory") {
    const Instance inst = make_instance(scalar_config(), 13);
    const TrajectoryLog a = simulate(inst, 5);
    const TrajectoryLog b = simulate(inst, 5);
    CHECK(csv_of(a) == csv_of(b));
    const TrajectoryLog c = simulate(inst, 6);
    CHECK(csv_of(a) != csv_of(c));
}

TEST_CASE("logged rows are consistent with the true plant") {
    const Instance inst = make_instance(scalar_config(), 13);
    const TrajectoryLog log = simulate(inst, 9);
    REQUIRE(static_cast<std::int64_t>(log.rows.size()) == inst.horizon());
    const SystemModel& truth = inst.config.truth;
    for (std::size_t i = 0; i < log.rows.size(); ++i) {
        const LogRow& r = log.rows[i];
        CHECK(r.t == static_cast<std::int64_t>(i));
        const Vector next = i + 1 < log.rows.size() ? log.rows[i + 1].x : log.x_final;
        CHECK(step_plant(truth, r.x, r.u, r.w) == next);
        CHECK(r.cost == doctest::Approx(r.x.dot(inst.weights.Q * r.x) + r.u.dot(inst.weights.R * r.u)));
        CHECK(r.w.cwiseAbs().maxCoeff() <= inst.config.w_max);
    }
    CHECK(log.action_violations() == 0);
    CHECK(log.state_violations() == 0);
    CHECK(log.radii.size() == log.estimate_errors.size());
}

TEST_CASE("zero disturbance leaves the state at rest until excitation starts") {
    ProblemConfig c = scalar_config();
    c.zero_disturbance = true;
    const TrajectoryLog log = simulate(make_instance(c, 13), 1);
    bool excited = false;
    for (const LogRow& r : log.rows) {
        CHECK(r.w.norm() == 0.0);
        excited = excited || r.eta.norm() > 0.0;
        if (!excited) CHECK(r.cost == 0.0);
    }
    CHECK(excited);
}

TEST_CASE("excitation seed changes nothing before the first excited step") {
    const Instance inst = make_instance(scalar_config(), 13);
    const TrajectoryLog a = simulate(inst, RunSeeds{4, 4});
    const TrajectoryLog b = simulate(inst, RunSeeds{4, 5});
    std::size_t first = 0;
    while (first < a.rows.size() && a.rows[first].eta.norm() == 0.0) ++first;
    REQUIRE(first > 0);
    REQUIRE(first < a.rows.size());
    for (std::size_t i = 0; i < first; ++i) {
        CHECK(a.rows[i].x == b.rows[i].x);
        CHECK(a.rows[i].u == b.rows[i].u);
    }
    CHECK(b.rows[first].eta.norm() > 0.0);
    CHECK(a.rows[first].eta != b.rows[first].eta);
}

TEST_CASE("regret bookkeeping") {
    TrajectoryLog empty;
    const RegretReport r0 = compute_regret(empty, 1.0);
    CHECK(r0.regret == 0.0);
    CHECK(r0.T == 0);

    const Instance inst = make_instance(scalar_config(), 13);
    const TrajectoryLog log = simulate(inst, 2);
    const RegretReport r = compute_regret(log, 1e-4);
    double total = 0;
    for (const LogRow& row : log.rows) total += row.cost;
    CHECK(r.total_cost == doctest::Approx(total));
    CHECK(r.regret == doctest::Approx(total - 1e-4 * inst.horizon()));
    double sum_ep = 0, sum_reg = 0;
    for (double v : r.episode_cost) sum_ep += v;
    for (double v : r.episode_regret) sum_reg += v;
    CHECK(sum_ep == doctest::Approx(r.total_cost));
    CHECK(sum_reg == doctest::Approx(r.regret));
    CHECK(r.episode_cost.size() == static_cast<std::size_t>(inst.episodes()));
}

TEST_CASE("csv round trip") {
    const Instance inst = make_instance(scalar_config(), 13);
    const TrajectoryLog log = simulate(inst, 3);
    const std::string path = temp_path("roundtrip.csv");
    write_csv(log, path);
    const TrajectoryLog back = read_csv(path);
    REQUIRE(back.rows.size() == log.rows.size());
    for (std::size_t i = 0; i < log.rows.size(); ++i) {
        const LogRow& a = log.rows[i];
        const LogRow& b = back.rows[i];
        CHECK(a.t == b.t);
        CHECK((a.x - b.x).norm() <= 1e-9);
        CHECK((a.u - b.u).norm() <= 1e-9);
        CHECK((a.w - b.w).norm() <= 1e-9);
        CHECK((a.w_hat - b.w_hat).norm() <= 1e-9);
        CHECK(std::abs(a.cost - b.cost) <= 1e-9);
        CHECK(a.phase == b.phase);
        CHECK(a.episode == b.episode);
        CHECK(a.policy_changed == b.policy_changed);
    }
    CHECK(compute_regret(back, 1e-4).regret == doctest::Approx(compute_regret(log, 1e-4).regret));
    std::filesystem::remove(path);
    CHECK(parse_export_format("csv") == ExportFormat::csv);
    CHECK(parse_export_format("json-summary") == ExportFormat::json_summary);
    CHECK_THROWS(parse_export_format("xml"));
}

TEST_CASE("log-log fits") {
    std::vector<std::pair<double, double>> pts;
    for (int k = 10; k <= 16; ++k) pts.emplace_back(std::ldexp(1.0, k), 3.0 * std::pow(std::ldexp(1.0, k), 2.0 / 3.0));
    const ScalingFit f = fit_scaling(pts);
    CHECK(f.slope == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(f.intercept == doctest::Approx(std::log(3.0)));
    CHECK(f.residual < 1e-12);

    std::vector<std::pair<double, double>> flat{{1, 2}, {2, 2}, {4, 2}};
    CHECK(std::abs(fit_scaling(flat).slope) < 1e-12);

    Rng rng(81);
    std::uniform_real_distribution<double> jitter(0.95, 1.05);
    std::vector<std::pair<double, double>> noisy;
    for (int k = 8; k <= 16; ++k) noisy.emplace_back(std::ldexp(1.0, k), jitter(rng) / std::sqrt(std::ldexp(1.0, k)));
    const double s = fit_scaling(noisy).slope;
    CHECK(s > -0.6);
    CHECK(s < -0.4);

    CHECK_THROWS(fit_scaling({{1, 1}, {2, 2}}));
    CHECK_THROWS(fit_scaling({{1, 1}, {2, -1}, {3, 2}}));
    CHECK(median({3, 1, 2}) == 2);
    CHECK(median({4, 1, 2, 3}) == 2.5);
}

TEST_CASE("benchmark policy matches its simulated cost") {
    const Instance inst = make_instance(scalar_config(), 13);
    const BenchmarkResult b = benchmark_cost(inst, 400000, 11);
    CHECK(b.J_star > 0);
    CHECK(std::abs(b.mc_average - b.J_star) <= 4 * b.mc_stderr + 0.02 * b.J_star);

    // Doubling the memory changes the benchmark only slightly.
    const BenchmarkResult b2 = benchmark_cost(inst.config.truth, 2 * b.H, inst.constraints, inst.tightening,
                                              inst.weights, inst.disturbance, 0, 11);
    CHECK(std::abs(b2.J_star - b.J_star) <= 0.05 * b.J_star);
}

TEST_CASE("benchmark cost scales with the disturbance covariance") {
    // Far-away constraints make the optimum the unconstrained one, so J* is linear in Sigma.
    const SystemModel truth(Matrix{{0.5}}, Matrix{{1.0}});
    const ConstraintSpec cs = box_constraints(1, 1, 100.0, 100.0, 0.1);
    Instance inst = make_instance(scalar_config(), 13);
    TighteningInputs ti = inst.tightening;
    const DisturbanceModel d = DisturbanceModel::make(NoiseKind::uniform_box, 1, 0.1);
    CostWeights w1 = inst.weights;
    w1.Sigma = d.Sigma;
    CostWeights w2 = w1;
    w2.Sigma *= 4.0;
    const double j1 = benchmark_cost(truth, 8, cs, ti, w1, d, 0, 1).J_star;
    const double j2 = benchmark_cost(truth, 8, cs, ti, w2, d, 0, 1).J_star;
    CHECK(j2 == doctest::Approx(4 * j1).epsilon(1e-6));
}

TEST_CASE("preflight failures stop the run") {
    ProblemConfig c = scalar_config();
    c.r_ini = 0.001;  // truth outside the prior ball
    const Instance inst = make_instance(c, 13);
    const PreflightReport pf = preflight(inst);
    CHECK_FALSE(pf.ok);
    CHECK_FALSE(pf.failures.empty());
    CHECK_THROWS_AS(simulate(inst, 1), PreflightError);
    CHECK(preflight(make_instance(scalar_config(), 13)).ok);
}

TEST_CASE("estimation error study") {
    const Instance inst = make_instance(scalar_config(), 13);
    const double e1 = estimation_error(inst, 1000, inst.eta_bar(), 1);
    CHECK(e1 > 0);
    CHECK(e1 == estimation_error(inst, 1000, inst.eta_bar(), 1));
    const EstimationStudy st = estimation_study(inst, {500, 2000, 8000}, inst.eta_bar(), {0.05, 0.1, 0.2}, 2000, 5);
    REQUIRE(st.by_T.size() == 3);
    REQUIRE(st.by_eta.size() == 3);
    CHECK(st.fit_T.slope < -0.3);
    CHECK(st.fit_eta.slope < -0.5);
}

TEST_CASE("command line exit codes") {
    const std::string scalar = repo_path("configs/scalar.json");
    CHECK(run_cli("check-feasibility --config " + scalar) == 0);
    const std::string out = temp_path("cli.csv");
    CHECK(run_cli("run --config " + scalar + " --horizon-exp 13 --seed 2 --quiet --out " + out) == 0);
    const TrajectoryLog cli_log = read_csv(out);
    CHECK(csv_of(cli_log).size() > 0);
    CHECK(cli_log.rows.size() == 8192);
    CHECK(csv_of(simulate(make_instance(scalar_config(), 13), 2)) == [&] {
        std::ifstream in(out);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }());
    std::filesystem::remove(out);

    ProblemConfig bad = scalar_config();
    bad.r_ini = 0.001;
    const std::string bad_path = temp_path("bad.json");
    write_text(bad_path, to_json(bad).dump(2));
    CHECK(run_cli("check-feasibility --config " + bad_path) == 2);
    CHECK(run_cli("run --config " + bad_path) == 2);
    std::filesystem::remove(bad_path);
    CHECK(run_cli("run --config " + repo_path("configs/missing.json")) != 0);
    CHECK(run_cli("run") != 0);
}
