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

// Closed-loop simulation, benchmark cost, regret and scaling fits, plus
// CSV/JSON persistence.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "safedap/config.hpp"

namespace safedap {

/// Everything derived from a config for one horizon.
struct Instance {
    ProblemConfig config;
    int horizon_exp{0};
    ConstraintSpec constraints;
    DisturbanceModel disturbance;
    ExcitationModel excitation;
    TighteningInputs tightening;
    RadiusInputs radius;
    CostWeights weights;

    [[nodiscard]] std::int64_t horizon() const { return std::int64_t{1} << horizon_exp; }
    [[nodiscard]] int episodes() const;
    [[nodiscard]] double eta_bar() const;
    [[nodiscard]] ScheduleInputs schedule_inputs() const;
    /// Radius constants with the calibration scales removed.
    [[nodiscard]] RadiusInputs theoretical_radius() const;
};

Instance make_instance(const ProblemConfig& config, std::optional<int> horizon_exp = std::nullopt);

struct PreflightReport {
    bool ok{false};
    std::vector<std::string> failures;
    std::vector<std::string> notes;
    std::optional<EpisodeSchedule> schedule;
    TighteningBundle bundle0;
    InitialFeasibility initial;
    MonotoneCheck monotone;
    bool zero_in_initial_set{false};
    bool strictly_feasible{false};  ///< Omega(theta_ini, eps_x^(0) + eps0, eps_u^(0)) nonempty
    double strict_margin{0};
    double zero_policy_margin_x{0};  ///< min_i d_x,i - g_i(0; theta_ini)
    double zero_policy_margin_u{0};
    double first_radius{0};
    double first_radius_theory{0};
    double first_floor{0};
    double first_floor_theory{0};
    std::int64_t first_exploration{0};

    [[nodiscard]] nlohmann::json to_json() const;
};

PreflightReport preflight(const Instance& instance);

class PreflightError : public std::runtime_error {
public:
    explicit PreflightError(PreflightReport report);
    [[nodiscard]] const PreflightReport& report() const { return report_; }

private:
    PreflightReport report_;
};

/// True plant; exposes the disturbance of the last step for logging only.
class SimulatedPlant : public Plant {
public:
    SimulatedPlant(SystemModel truth, DisturbanceModel disturbance, Rng rng, bool zero_disturbance = false);
    [[nodiscard]] const Vector& state() const override { return x_; }
    void apply(const Vector& u) override;
    [[nodiscard]] const Vector& last_disturbance() const { return w_; }

private:
    SystemModel truth_;
    DisturbanceModel disturbance_;
    Rng rng_;
    bool zero_;
    Vector x_;
    Vector w_;
};

struct LogRow {
    std::int64_t t{0};
    Vector x;
    Vector u;
    Vector w;
    Vector w_hat;
    Vector eta;
    double cost{0};
    int episode{0};
    Phase phase{Phase::transit1};
    int transit_step{0};
    bool policy_changed{false};
    double variation{0};
    double variation_budget{0};
    double membership{0};
    double min_state_slack{0};
    double min_action_slack{0};
    bool state_violation{false};
    bool action_violation{false};
};

struct RunSeeds {
    std::uint64_t disturbance{0};
    std::uint64_t excitation{0};
};

struct TrajectoryLog {
    int n{0};
    int m{0};
    std::vector<LogRow> rows;
    Vector x_final;
    std::vector<EpisodeRecord> episodes;
    std::vector<double> radii;             ///< r^(e), e = 0..
    std::vector<double> estimate_errors;   ///< |theta_hat^(e) - theta*|_F, same indexing
    std::vector<double> raw_errors;        ///< |theta_tilde^(e) - theta*|_2 per estimated episode
    bool truth_in_all_sets{true};
    bool condition_violated{false};
    std::string violation_message;
    std::string config_hash;
    RunSeeds seeds;

    [[nodiscard]] int action_violations() const;
    [[nodiscard]] int state_violations() const;
};

/// Runs the adaptive controller for the whole horizon. Throws PreflightError before simulating when
/// the instance fails its preflight.
TrajectoryLog simulate(const Instance& instance, RunSeeds seeds);
TrajectoryLog simulate(const Instance& instance, std::uint64_t seed);

struct BenchmarkResult {
    double J_star{0};
    DapPolicy policy;
    int H{0};
    double mc_average{0};
    double mc_stderr{0};
    std::int64_t mc_steps{0};
};

/// J* = f(M*; theta*) for the optimal policy of memory H_bench under the
/// tightening eps_H(H_bench), plus a Monte-Carlo long-run average of that
/// policy on the true plant (mc_steps = 0 skips it).
BenchmarkResult benchmark_cost(const SystemModel& truth, int H_bench, const ConstraintSpec& constraints,
                               const TighteningInputs& tightening, const CostWeights& weights,
                               const DisturbanceModel& disturbance, std::int64_t mc_steps, std::uint64_t seed,
                               const qp::QpSettings& settings = {});

/// Benchmark with the instance's memory (H_bench or twice the largest scheduled H).
BenchmarkResult benchmark_cost(const Instance& instance, std::int64_t mc_steps, std::uint64_t seed);

/// Monte-Carlo average stage cost of a fixed policy run with exact disturbances.
struct MonteCarloCost {
    double mean{0};
    double stderr_{0};
};
MonteCarloCost long_run_cost(const DapPolicy& policy, const SystemModel& truth, const CostWeights& weights,
                             const DisturbanceModel& disturbance, std::int64_t steps, Rng& rng);

struct RegretReport {
    double total_cost{0};
    double J_star{0};
    std::int64_t T{0};
    double regret{0};
    std::vector<double> episode_cost;
    std::vector<double> episode_regret;
    int action_violations{0};
    int state_violations{0};
    bool truth_in_all_sets{true};
};

RegretReport compute_regret(const TrajectoryLog& log, double J_star);

struct ScalingFit {
    double slope{0};
    double intercept{0};
    double residual{0};  ///< root-mean-square residual in log space
};

/// Least squares of log(value) on log(scale).
ScalingFit fit_scaling(const std::vector<std::pair<double, double>>& points);

double median(std::vector<double> values);

enum class ExportFormat { csv, json_summary };
ExportFormat parse_export_format(const std::string& name);

/// Column order: t, x_*, u_*, w_*, w_hat_*, cost, episode, phase,
/// state_violation, action_violation, transit_step, policy_changed, membership.
void write_csv(const TrajectoryLog& log, std::ostream& os);
void write_csv(const TrajectoryLog& log, const std::string& path);
TrajectoryLog read_csv(const std::string& path);

nlohmann::json summary_json(const TrajectoryLog& log, const RegretReport& report, const Instance& instance);
void write_text(const std::string& path, const std::string& text);

struct SweepRow {
    int horizon_exp{0};
    std::uint64_t seed{0};
    double regret{0};
    double total_cost{0};
    int action_violations{0};
    int state_violations{0};
    bool truth_in_all_sets{true};
    bool condition_violated{false};
    double final_error{0};
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double J_star{0};
    std::vector<std::pair<double, double>> median_regret;  ///< (T, median regret)
    std::optional<ScalingFit> fit;
};

/// Runs every (horizon, seed) pair; rows sorted by (horizon, seed).
SweepResult sweep(const ProblemConfig& config, const std::vector<int>& horizon_exps,
                  const std::vector<std::uint64_t>& seeds, std::int64_t benchmark_mc_steps = 0);

struct EstimationPoint {
    std::int64_t T{0};
    double eta_bar{0};
    double median_error{0};
};

struct EstimationStudy {
    std::vector<EstimationPoint> by_T;
    std::vector<EstimationPoint> by_eta;
    ScalingFit fit_T;
    ScalingFit fit_eta;
};

/// Least-squares error |theta_tilde - theta*|_2 from T samples collected under
/// pure excitation of level eta_bar (zero policy), median over seeds.
double estimation_error(const Instance& instance, std::int64_t T, double eta_bar, std::uint64_t seed);
EstimationStudy estimation_study(const Instance& instance, const std::vector<std::int64_t>& Ts, double eta_fixed,
                                 const std::vector<double>& etas, std::int64_t T_fixed, int seeds);

}  // namespace safedap
