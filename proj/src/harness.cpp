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
#include "safedap/harness.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace safedap {

namespace {

int log2_exact(std::int64_t v) {
    int k = 0;
    while ((std::int64_t{1} << k) < v) ++k;
    return k;
}

double stage_cost(const Vector& x, const Vector& u, const CostWeights& w) { return x.dot(w.Q * x) + u.dot(w.R * u); }

// Nominal memory and variation budget of episode 0; used by the preflight
// when the full schedule cannot be built.
std::pair<int, double> nominal_first_episode(const Instance& inst) {
    const ProblemConfig& c = inst.config;
    const double g = c.cert.gamma;
    const int H_rate = static_cast<int>(
        std::ceil(c.constants.c_H * std::log(static_cast<double>(c.T1)) / std::log(1.0 / (1.0 - g))));
    const int H = std::max(H_rate, memory_floor(c.cert));
    const double mn = static_cast<double>(inst.constraints.m()) * inst.constraints.n();
    const double delta = c.constants.c_delta * c.eps_F_x / (std::sqrt(mn * H) * std::cbrt(static_cast<double>(c.T1)));
    return {H, delta};
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json bundle_json(const TighteningBundle& b) {
    return {{"H", b.H},         {"delta_M", b.delta_M},   {"r", b.r},
            {"eta_bar", b.eta_bar}, {"eps_H", b.eps_H},   {"eps_v", b.eps_v},
            {"eps_theta", b.eps_theta}, {"eps_w_hat", b.eps_w_hat}, {"eps_theta_hat", b.eps_theta_hat},
            {"eps_eta_x", b.eps_eta_x}, {"eps_eta_u", b.eps_eta_u}, {"eps_P", b.eps_P},
            {"eps_x", b.eps_x()},   {"eps_u", b.eps_u()}};
}

nlohmann::json model_json(const SystemModel& m) {
    if (m.A.size() == 0) return nullptr;
    return {{"A", matrix_to_json(m.A)}, {"B", matrix_to_json(m.B)}};
}

}  // namespace

int Instance::episodes() const { return horizon_exp - log2_exact(config.T1) + 1; }

double Instance::eta_bar() const {
    const double m = constraints.m();
    return config.constants.c_eta * std::min(config.eps_F_x / std::sqrt(m), config.eps_F_u);
}

ScheduleInputs Instance::schedule_inputs() const {
    ScheduleInputs in;
    in.T1 = config.T1;
    in.episodes = episodes();
    in.p = config.p;
    in.eps_F_x = config.eps_F_x;
    in.eps_F_u = config.eps_F_u;
    in.eps0 = config.eps0;
    in.r_ini = config.r_ini;
    in.constants = config.constants;
    in.tightening = tightening;
    in.radius = radius;
    return in;
}

RadiusInputs Instance::theoretical_radius() const {
    RadiusInputs out = radius;
    out.base.radius_scale = 1.0;
    out.base.floor_scale = 1.0;
    return out;
}

Instance make_instance(const ProblemConfig& config, std::optional<int> horizon_exp) {
    Instance inst;
    inst.config = config;
    inst.horizon_exp = horizon_exp.value_or(config.horizon_exp);
    require(inst.horizon_exp >= 0 && inst.horizon_exp < 40, "instance: horizon exponent out of range");
    require(inst.horizon() >= config.T1, "instance: horizon must be at least T1");
    inst.constraints = ConstraintSpec::make(config.Dx, config.dx, config.Du, config.du, config.w_max);
    const int n = inst.constraints.n();
    const int m = inst.constraints.m();
    require(config.truth.n() == n && config.truth.m() == m, "instance: model and constraint dimensions differ");
    inst.disturbance = DisturbanceModel::make(config.disturbance_kind, n, config.w_max);
    if (config.s_w) inst.disturbance.s_w = *config.s_w;
    if (config.p_w) inst.disturbance.p_w = *config.p_w;
    inst.excitation = ExcitationModel::make(config.excitation_kind, m);
    if (config.s_eta) inst.excitation.s_eta = *config.s_eta;
    if (config.p_eta) inst.excitation.p_eta = *config.p_eta;
    inst.tightening = TighteningInputs::from(inst.constraints, config.cert, config.alpha);

    const double eta = inst.eta_bar();
    const double bx = inst.tightening.state_bound(eta);
    const double umax = inst.constraints.u_max;
    RadiusInputs& ri = inst.radius;
    ri.base.sigma_sub = inst.disturbance.sigma_sub;
    ri.base.b_z = std::sqrt(bx * bx + umax * umax);
    ri.base.n = n;
    ri.base.m = m;
    ri.base.radius_scale = config.radius_scale;
    ri.base.floor_scale = config.sample_floor_scale;
    ri.s_w = inst.disturbance.s_w;
    ri.p_w = inst.disturbance.p_w;
    ri.s_eta = inst.excitation.s_eta;
    ri.p_eta = inst.excitation.p_eta;
    ri.b_u = umax;

    inst.weights.Q = config.Q;
    inst.weights.R = config.R;
    inst.weights.Sigma = inst.disturbance.Sigma;
    return inst;
}

nlohmann::json PreflightReport::to_json() const {
    nlohmann::json j;
    j["ok"] = ok;
    j["failures"] = failures;
    j["notes"] = notes;
    j["initial"] = {{"ok", initial.ok}, {"state_slack", initial.state_slack}, {"action_slack", initial.action_slack}};
    j["monotone"] = {{"ok", monotone.ok}, {"first_violation", monotone.first_violation}, {"reason", monotone.reason}};
    j["bundle0"] = bundle_json(bundle0);
    j["zero_in_initial_set"] = zero_in_initial_set;
    j["zero_policy_margin_x"] = zero_policy_margin_x;
    j["zero_policy_margin_u"] = zero_policy_margin_u;
    j["strictly_feasible"] = strictly_feasible;
    j["strict_margin"] = strict_margin;
    j["first_radius"] = first_radius;
    j["first_radius_theory"] = first_radius_theory;
    j["first_floor"] = first_floor;
    j["first_floor_theory"] = first_floor_theory;
    j["first_exploration"] = first_exploration;
    if (schedule) {
        nlohmann::json eps = nlohmann::json::array();
        for (std::size_t e = 0; e < schedule->episodes.size(); ++e) {
            const EpisodeSpec& s = schedule->episodes[e];
            eps.push_back({{"episode", e},
                           {"T_start", s.T_start},
                           {"T_end", s.T_end},
                           {"T_D", s.T_D},
                           {"H", s.H},
                           {"eta_bar", s.eta_bar},
                           {"delta_M", s.delta_M},
                           {"r", schedule->radius[e]},
                           {"r_next", schedule->radius[e + 1]}});
        }
        j["schedule"] = eps;
        j["raised_exploration"] = schedule->raised_exploration;
    }
    return j;
}

PreflightReport preflight(const Instance& inst) {
    const ProblemConfig& c = inst.config;
    PreflightReport rep;
    auto failure = [&](std::string s) { rep.failures.push_back(std::move(s)); };

    if (model_distance(c.truth, c.theta_ini) > c.r_ini) failure("true model lies outside the initial uncertainty set");
    const StabilityCheck st_ini = verify_kappa_gamma(c.theta_ini.A, c.cert);
    if (!st_ini.stable) failure("A_ini violates the (kappa, gamma) certificate at power " + std::to_string(st_ini.first_violation));
    const StabilityCheck st_true = verify_kappa_gamma(c.truth.A, c.cert);
    if (!st_true.stable) failure("true A violates the (kappa, gamma) certificate at power " + std::to_string(st_true.first_violation));
    if (spectral_norm(c.theta_ini.B) + c.r_ini > c.cert.kappa_B * (1 + 1e-12))
        failure("kappa_B is below |B_ini|_2 + r_ini");

    const double eta = inst.eta_bar();
    int H0 = 0;
    double delta0 = 0;
    try {
        rep.schedule = make_schedule(inst.schedule_inputs());
        H0 = rep.schedule->episodes.front().H;
        delta0 = rep.schedule->episodes.front().delta_M;
        rep.first_exploration = rep.schedule->episodes.front().T_D;
        rep.first_radius = rep.schedule->radius[1];
    } catch (const SampleFloorError& err) {
        failure(std::string("sample floor: ") + err.what());
    } catch (const ContractError& err) {
        failure(std::string("schedule: ") + err.what());
    }
    if (!rep.schedule) std::tie(H0, delta0) = nominal_first_episode(inst);
    if (rep.first_exploration == 0) {
        rep.first_exploration =
            static_cast<std::int64_t>(std::ceil(std::pow(static_cast<double>(c.T1), 2.0 / 3.0) - 1e-9));
    }

    const double delta1 = episode_delta(1, c.p);
    rep.first_floor = sample_floor(delta1, radius_constants_at(eta, inst.radius));
    rep.first_floor_theory = sample_floor(delta1, radius_constants_at(eta, inst.theoretical_radius()));
    try {
        rep.first_radius_theory = schedule_radius(1, rep.first_exploration, eta, c.p, inst.theoretical_radius());
    } catch (const SampleFloorError&) {
        rep.first_radius_theory = std::numeric_limits<double>::infinity();
        rep.notes.push_back("the uncalibrated sample floor exceeds the first exploration length");
    }

    rep.bundle0 = compute_bundle(inst.tightening, H0, delta0, c.r_ini, eta);
    rep.initial = initial_feasibility_margin(inst.tightening, rep.bundle0, c.eps0, c.r_ini, c.eps_F_x, c.eps_F_u);
    if (!rep.initial.ok) failure("initial feasibility budget is negative");
    if (rep.schedule) {
        rep.monotone = check_monotone_schedule(rep.schedule->parameters(), inst.tightening, c.eps0);
        if (!rep.monotone.ok) failure("schedule is not monotone: " + rep.monotone.reason);
    }

    // Omega^(-1): the zero policy must be a member.
    const TighteningBundle b_prev = compute_bundle(inst.tightening, H0, delta0, c.r_ini, 0.0);
    const int n = inst.constraints.n();
    const int m = inst.constraints.m();
    const DapPolicy zero(H0, m, n);
    const Vector gx = g_state(zero, c.theta_ini, inst.constraints);
    const Vector gu = g_action(zero, inst.constraints);
    rep.zero_policy_margin_x = (inst.constraints.dx.array() - b_prev.eps_x() - gx.array()).minCoeff();
    rep.zero_policy_margin_u = (inst.constraints.du.array() - b_prev.eps_u() - gu.array()).minCoeff();
    rep.zero_in_initial_set = rep.zero_policy_margin_x >= 0.0 && rep.zero_policy_margin_u >= 0.0;
    if (!rep.zero_in_initial_set) failure("the zero policy is not in the initial safe set");

    const SafePolicyPolytope omega0 =
        build_safe_set(c.theta_ini, rep.bundle0.eps_x(), rep.bundle0.eps_u(), H0, inst.constraints, c.cert);
    const FeasibilityResult fr = check_feasible(omega0, c.eps0, c.qp);
    rep.strictly_feasible = fr.feasible;
    rep.strict_margin = fr.margin;
    if (!fr.feasible) failure("the first exploration set tightened by eps0 is empty");

    if (c.radius_scale != 1.0 || c.sample_floor_scale != 1.0) {
        rep.notes.push_back("confidence radius calibrated: radius_scale = " + fmt_double(c.radius_scale) +
                            ", sample_floor_scale = " + fmt_double(c.sample_floor_scale));
    }
    if (rep.schedule && !rep.schedule->raised_exploration.empty()) {
        std::string s = "exploration lengthened to keep radii non-increasing in episodes";
        for (int e : rep.schedule->raised_exploration) s += " " + std::to_string(e);
        rep.notes.push_back(s);
    }
    rep.notes.push_back("order-level regret conditions on T1 and H are not enforced (heuristic at this scale)");
    rep.ok = rep.failures.empty();
    return rep;
}

namespace {
std::string join_failures(const PreflightReport& r) {
    std::string s = "preflight failed";
    for (const auto& f : r.failures) s += "; " + f;
    return s;
}
}  // namespace

PreflightError::PreflightError(PreflightReport report)
    : std::runtime_error(join_failures(report)), report_(std::move(report)) {}

SimulatedPlant::SimulatedPlant(SystemModel truth, DisturbanceModel disturbance, Rng rng, bool zero_disturbance)
    : truth_(std::move(truth)), disturbance_(std::move(disturbance)), rng_(rng), zero_(zero_disturbance) {
    x_ = Vector::Zero(truth_.n());
    w_ = Vector::Zero(truth_.n());
}

void SimulatedPlant::apply(const Vector& u) {
    w_ = zero_ ? Vector::Zero(truth_.n()) : disturbance_.sample(rng_);
    x_ = step_plant(truth_, x_, u, w_);
}

int TrajectoryLog::action_violations() const {
    return static_cast<int>(std::count_if(rows.begin(), rows.end(), [](const LogRow& r) { return r.action_violation; }));
}

int TrajectoryLog::state_violations() const {
    return static_cast<int>(std::count_if(rows.begin(), rows.end(), [](const LogRow& r) { return r.state_violation; }));
}

TrajectoryLog simulate(const Instance& inst, RunSeeds seeds) {
    PreflightReport pf = preflight(inst);
    if (!pf.ok) throw PreflightError(std::move(pf));
    const ProblemConfig& c = inst.config;

    ControllerSettings cs;
    cs.constraints = inst.constraints;
    cs.cert = c.cert;
    cs.tightening = inst.tightening;
    cs.weights = inst.weights;
    cs.theta_ini = c.theta_ini;
    cs.r_ini = c.r_ini;
    cs.excitation = inst.excitation;
    cs.schedule = *pf.schedule;
    cs.ridge = c.ridge;
    cs.use_all_history = c.use_all_history;
    cs.qp = c.qp;

    SimulatedPlant plant(c.truth, inst.disturbance, make_stream(seeds.disturbance, 0), c.zero_disturbance);
    SafeAdaptiveController ctrl(std::move(cs), make_stream(seeds.excitation, 1));

    TrajectoryLog log;
    log.n = inst.constraints.n();
    log.m = inst.constraints.m();
    log.seeds = seeds;
    log.config_hash = config_hash(c);
    const std::int64_t T = inst.horizon();
    log.rows.reserve(static_cast<std::size_t>(T));
    for (std::int64_t t = 0; t < T; ++t) {
        StepRecord s = ctrl.advance(plant);
        LogRow row;
        row.t = s.t;
        row.w = plant.last_disturbance();
        row.cost = stage_cost(s.x, s.u, inst.weights);
        const MembershipReport mr = check_membership(inst.constraints, s.x, s.u);
        row.min_state_slack = mr.state_slack.minCoeff();
        row.min_action_slack = mr.action_slack.minCoeff();
        row.state_violation = mr.state_violation;
        row.action_violation = mr.action_violation;
        row.x = std::move(s.x);
        row.u = std::move(s.u);
        row.w_hat = std::move(s.w_hat);
        row.eta = std::move(s.eta);
        row.episode = s.episode;
        row.phase = s.phase;
        row.transit_step = s.transit_step;
        row.policy_changed = s.policy_changed;
        row.variation = s.variation;
        row.variation_budget = s.variation_budget;
        row.membership = s.membership;
        log.rows.push_back(std::move(row));
    }
    log.x_final = plant.state();
    log.episodes = ctrl.episodes();
    log.condition_violated = ctrl.condition_violated();
    log.violation_message = ctrl.violation_message();

    // Theta^(e) = B(theta_hat^(e), r^(e)) intersected with Theta_ini.
    auto record_set = [&](const SystemModel& centre, double r) {
        log.radii.push_back(r);
        log.estimate_errors.push_back(model_distance(centre, c.truth));
        const UncertaintySet set{centre, r, c.theta_ini, c.r_ini};
        if (!set.contains(c.truth)) log.truth_in_all_sets = false;
    };
    for (const EpisodeRecord& rec : log.episodes) {
        record_set(rec.theta, rec.r);
        if (rec.estimated) log.raw_errors.push_back(spectral_norm(rec.theta_tilde.stacked() - c.truth.stacked()));
    }
    if (!log.episodes.empty() && log.episodes.back().estimated)
        record_set(log.episodes.back().theta_next, log.episodes.back().r_next);
    return log;
}

TrajectoryLog simulate(const Instance& inst, std::uint64_t seed) { return simulate(inst, RunSeeds{seed, seed}); }

MonteCarloCost long_run_cost(const DapPolicy& policy, const SystemModel& truth, const CostWeights& weights,
                             const DisturbanceModel& disturbance, std::int64_t steps, Rng& rng) {
    require(steps >= 100, "long_run_cost: need at least 100 steps");
    const int H = policy.H();
    const int n = truth.n();
    std::vector<Vector> hist(H, Vector::Zero(n));  // ring, newest at head
    int head = 0;
    Vector x = Vector::Zero(n);
    const std::int64_t burn = 4 * H + 50;
    const int batches = 100;
    const std::int64_t per = steps / batches;
    std::vector<double> means;
    double acc = 0;
    std::int64_t in_batch = 0;
    for (std::int64_t t = 0; t < burn + per * batches; ++t) {
        Vector u = Vector::Zero(truth.m());
        for (int k = 1; k <= H; ++k) u.noalias() += policy[k] * hist[(head + k - 1) % H];
        if (t >= burn) {
            acc += stage_cost(x, u, weights);
            if (++in_batch == per) {
                means.push_back(acc / static_cast<double>(per));
                acc = 0;
                in_batch = 0;
            }
        }
        const Vector w = disturbance.sample(rng);
        x = step_plant(truth, x, u, w);
        head = (head + H - 1) % H;
        hist[head] = w;
    }
    double mean = 0;
    for (double v : means) mean += v;
    mean /= static_cast<double>(means.size());
    double var = 0;
    for (double v : means) var += (v - mean) * (v - mean);
    var /= static_cast<double>(means.size() - 1);
    return {mean, std::sqrt(var / static_cast<double>(means.size()))};
}

BenchmarkResult benchmark_cost(const SystemModel& truth, int H_bench, const ConstraintSpec& constraints,
                               const TighteningInputs& tightening, const CostWeights& weights,
                               const DisturbanceModel& disturbance, std::int64_t mc_steps, std::uint64_t seed,
                               const qp::QpSettings& settings) {
    require(H_bench >= memory_floor(tightening.cert), "benchmark_cost: H_bench below the memory floor");
    const double eps_H = compute_bundle(tightening, H_bench, 0.0, 0.0, 0.0).eps_H;
    const SafePolicyPolytope omega = build_safe_set(truth, eps_H, 0.0, H_bench, constraints, tightening.cert);
    const QuadraticCost cost = cost_quadratic(H_bench, truth, weights.Q, weights.R, weights.Sigma);
    const QpSolution sol = solve_qp(cost, omega, settings);
    if (!sol.optimal()) {
        throw InfeasibleProgram("benchmark_cost: the known-model program is " + qp::to_string(sol.status) +
                                    " (the instance admits no strictly safe policy)",
                                sol.infeasibility_margin);
    }
    BenchmarkResult out;
    out.H = H_bench;
    out.policy = sol.policy;
    out.J_star = eval_f(sol.policy, truth, weights.Q, weights.R, weights.Sigma);
    out.mc_steps = mc_steps;
    if (mc_steps > 0) {
        Rng rng = make_stream(seed, 2);
        const MonteCarloCost mc = long_run_cost(sol.policy, truth, weights, disturbance, mc_steps, rng);
        out.mc_average = mc.mean;
        out.mc_stderr = mc.stderr_;
    }
    return out;
}

BenchmarkResult benchmark_cost(const Instance& inst, std::int64_t mc_steps, std::uint64_t seed) {
    int H = inst.config.H_bench;
    if (H <= 0) {
        const EpisodeSchedule s = make_schedule(inst.schedule_inputs());
        H = 2 * s.max_H();
    }
    return benchmark_cost(inst.config.truth, H, inst.constraints, inst.tightening, inst.weights, inst.disturbance,
                          mc_steps, seed, inst.config.qp);
}

RegretReport compute_regret(const TrajectoryLog& log, double J_star) {
    RegretReport r;
    r.J_star = J_star;
    r.T = static_cast<std::int64_t>(log.rows.size());
    std::map<int, std::pair<double, std::int64_t>> per;
    for (const LogRow& row : log.rows) {
        r.total_cost += row.cost;
        auto& e = per[row.episode];
        e.first += row.cost;
        ++e.second;
        if (row.action_violation) ++r.action_violations;
        if (row.state_violation) ++r.state_violations;
    }
    r.regret = r.total_cost - static_cast<double>(r.T) * J_star;
    for (const auto& [episode, v] : per) {
        (void)episode;
        r.episode_cost.push_back(v.first);
        r.episode_regret.push_back(v.first - static_cast<double>(v.second) * J_star);
    }
    r.truth_in_all_sets = log.truth_in_all_sets;
    return r;
}

ScalingFit fit_scaling(const std::vector<std::pair<double, double>>& points) {
    require(points.size() >= 3, "fit_scaling: need at least three points");
    const double k = static_cast<double>(points.size());
    double sx = 0, sy = 0;
    for (const auto& [s, v] : points) {
        require(s > 0.0 && v > 0.0, "fit_scaling: scales and values must be positive");
        sx += std::log(s);
        sy += std::log(v);
    }
    const double mx = sx / k;
    const double my = sy / k;
    double sxx = 0, sxy = 0;
    for (const auto& [s, v] : points) {
        const double dx = std::log(s) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(v) - my);
    }
    require(sxx > 0.0, "fit_scaling: scales must not all be equal");
    ScalingFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0;
    for (const auto& [s, v] : points) {
        const double e = std::log(v) - (f.intercept + f.slope * std::log(s));
        ss += e * e;
    }
    f.residual = std::sqrt(ss / k);
    return f;
}

double median(std::vector<double> values) {
    require(!values.empty(), "median: empty input");
    std::sort(values.begin(), values.end());
    const std::size_t h = values.size() / 2;
    return values.size() % 2 ? values[h] : 0.5 * (values[h - 1] + values[h]);
}

ExportFormat parse_export_format(const std::string& name) {
    if (name == "csv") return ExportFormat::csv;
    if (name == "json-summary" || name == "json_summary" || name == "json") return ExportFormat::json_summary;
    throw ContractError("unknown export format '" + name + "' (csv, json-summary)");
}

void write_csv(const TrajectoryLog& log, std::ostream& os) {
    os << "t";
    for (int i = 0; i < log.n; ++i) os << ",x_" << i;
    for (int i = 0; i < log.m; ++i) os << ",u_" << i;
    for (int i = 0; i < log.n; ++i) os << ",w_" << i;
    for (int i = 0; i < log.n; ++i) os << ",w_hat_" << i;
    os << ",cost,episode,phase,state_violation,action_violation,transit_step,policy_changed,membership\n";
    auto put = [&](const Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) os << ',' << fmt_double(v[i]);
    };
    for (const LogRow& r : log.rows) {
        os << r.t;
        put(r.x);
        put(r.u);
        put(r.w);
        put(r.w_hat);
        os << ',' << fmt_double(r.cost) << ',' << r.episode << ',' << to_string(r.phase) << ','
           << int(r.state_violation) << ',' << int(r.action_violation) << ',' << r.transit_step << ','
           << int(r.policy_changed) << ',' << fmt_double(r.membership) << '\n';
    }
}

void write_csv(const TrajectoryLog& log, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_csv(log, f);
    f.flush();
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

namespace {
Phase parse_phase(const std::string& s) {
    for (Phase p : {Phase::transit1, Phase::explore, Phase::transit2, Phase::exploit})
        if (to_string(p) == s) return p;
    throw std::runtime_error("csv: unknown phase '" + s + "'");
}
}  // namespace

TrajectoryLog read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("csv: '" + path + "' is empty");
    TrajectoryLog log;
    {
        std::stringstream hs(line);
        std::string col;
        while (std::getline(hs, col, ',')) {
            if (col.rfind("x_", 0) == 0) ++log.n;
            if (col.rfind("u_", 0) == 0) ++log.m;
        }
    }
    const std::size_t expect = 1 + 3 * log.n + log.m + 8;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != expect) throw std::runtime_error("csv: wrong column count on line " + std::to_string(lineno));
        std::size_t k = 0;
        auto num = [&]() { return std::strtod(cells[k++].c_str(), nullptr); };
        auto vec = [&](int d) {
            Vector v(d);
            for (int i = 0; i < d; ++i) v[i] = num();
            return v;
        };
        LogRow r;
        r.t = std::strtoll(cells[k++].c_str(), nullptr, 10);
        r.x = vec(log.n);
        r.u = vec(log.m);
        r.w = vec(log.n);
        r.w_hat = vec(log.n);
        r.cost = num();
        r.episode = std::stoi(cells[k++]);
        r.phase = parse_phase(cells[k++]);
        r.state_violation = cells[k++] == "1";
        r.action_violation = cells[k++] == "1";
        r.transit_step = std::stoi(cells[k++]);
        r.policy_changed = cells[k++] == "1";
        r.membership = num();
        log.rows.push_back(std::move(r));
    }
    return log;
}

nlohmann::json summary_json(const TrajectoryLog& log, const RegretReport& report, const Instance& inst) {
    nlohmann::json j;
    j["name"] = inst.config.name;
    j["config_hash"] = log.config_hash;
    j["seed"] = log.seeds.disturbance;
    j["excitation_seed"] = log.seeds.excitation;
    j["horizon"] = inst.horizon();
    nlohmann::json eps = nlohmann::json::array();
    for (const EpisodeRecord& e : log.episodes) {
        nlohmann::json ej{{"episode", e.episode},
                          {"T_start", e.T_start},
                          {"t1", e.t1},
                          {"t2", e.t2},
                          {"H", e.H},
                          {"eta_bar", e.eta_bar},
                          {"delta_M", e.delta_M},
                          {"theta_hat", model_json(e.theta)},
                          {"r", e.r},
                          {"samples", e.samples},
                          {"objective_explore", e.objective_explore},
                          {"objective_exploit", e.objective_exploit},
                          {"bundle_explore", bundle_json(e.bundle_explore)},
                          {"bundle_exploit", bundle_json(e.bundle_exploit)},
                          {"transit_first", {e.W1_first, e.W2_first}},
                          {"transit_second", {e.W1_second, e.W2_second}},
                          {"infeasible", e.infeasible}};
        if (e.estimated) {
            ej["theta_tilde"] = model_json(e.theta_tilde);
            ej["theta_next"] = model_json(e.theta_next);
            ej["r_next"] = e.r_next;
        }
        if (!e.note.empty()) ej["note"] = e.note;
        eps.push_back(std::move(ej));
    }
    j["episodes"] = eps;
    j["regret"] = {{"total_cost", report.total_cost},
                   {"J_star", report.J_star},
                   {"T", report.T},
                   {"regret", report.regret},
                   {"episode_cost", report.episode_cost},
                   {"episode_regret", report.episode_regret}};
    j["violations"] = {{"state", report.state_violations}, {"action", report.action_violations}};
    j["truth_in_all_sets"] = log.truth_in_all_sets;
    j["estimate_errors"] = log.estimate_errors;
    j["radii"] = log.radii;
    j["condition_violated"] = log.condition_violated;
    if (log.condition_violated) j["violation_message"] = log.violation_message;
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << text;
    f.flush();
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

SweepResult sweep(const ProblemConfig& config, const std::vector<int>& horizon_exps,
                  const std::vector<std::uint64_t>& seeds, std::int64_t benchmark_mc_steps) {
    require(!horizon_exps.empty() && !seeds.empty(), "sweep: empty grid");
    std::vector<int> hs = horizon_exps;
    std::sort(hs.begin(), hs.end());
    hs.erase(std::unique(hs.begin(), hs.end()), hs.end());
    std::vector<std::uint64_t> ss = seeds;
    std::sort(ss.begin(), ss.end());

    SweepResult out;
    // One benchmark for the whole grid, at the longest horizon's memory.
    out.J_star = benchmark_cost(make_instance(config, hs.back()), benchmark_mc_steps, config.seed).J_star;
    for (int he : hs) {
        const Instance inst = make_instance(config, he);
        std::vector<double> regrets;
        for (std::uint64_t seed : ss) {
            const TrajectoryLog log = simulate(inst, seed);
            const RegretReport rep = compute_regret(log, out.J_star);
            SweepRow row;
            row.horizon_exp = he;
            row.seed = seed;
            row.regret = rep.regret;
            row.total_cost = rep.total_cost;
            row.action_violations = rep.action_violations;
            row.state_violations = rep.state_violations;
            row.truth_in_all_sets = log.truth_in_all_sets;
            row.condition_violated = log.condition_violated;
            row.final_error = log.estimate_errors.empty() ? 0.0 : log.estimate_errors.back();
            out.rows.push_back(row);
            regrets.push_back(rep.regret);
        }
        out.median_regret.emplace_back(static_cast<double>(inst.horizon()), median(regrets));
    }
    const bool positive = std::all_of(out.median_regret.begin(), out.median_regret.end(),
                                      [](const auto& p) { return p.second > 0.0; });
    if (out.median_regret.size() >= 3 && positive) out.fit = fit_scaling(out.median_regret);
    return out;
}

double estimation_error(const Instance& inst, std::int64_t T, double eta_bar, std::uint64_t seed) {
    require(T >= 1 && eta_bar > 0.0, "estimation_error: need T >= 1 and eta_bar > 0");
    const ProblemConfig& c = inst.config;
    SimulatedPlant plant(c.truth, inst.disturbance, make_stream(seed, 0), false);
    Rng rng = make_stream(seed, 1);
    RegressionDataset data(inst.constraints.n(), inst.constraints.m());
    for (std::int64_t t = 0; t < T; ++t) {
        const Vector x = plant.state();
        const Vector u = inst.excitation.sample(rng, eta_bar);
        plant.apply(u);
        data.add(x, u, plant.state());
    }
    const SystemModel est = least_squares(data, c.ridge);
    return spectral_norm(est.stacked() - c.truth.stacked());
}

EstimationStudy estimation_study(const Instance& inst, const std::vector<std::int64_t>& Ts, double eta_fixed,
                                 const std::vector<double>& etas, std::int64_t T_fixed, int seeds) {
    require(seeds >= 1, "estimation_study: need at least one seed");
    EstimationStudy out;
    auto med = [&](std::int64_t T, double eta) {
        std::vector<double> errs;
        for (int s = 1; s <= seeds; ++s) errs.push_back(estimation_error(inst, T, eta, static_cast<std::uint64_t>(s)));
        return median(errs);
    };
    std::vector<std::pair<double, double>> pt, pe;
    for (std::int64_t T : Ts) {
        out.by_T.push_back({T, eta_fixed, med(T, eta_fixed)});
        pt.emplace_back(static_cast<double>(T), out.by_T.back().median_error);
    }
    for (double eta : etas) {
        out.by_eta.push_back({T_fixed, eta, med(T_fixed, eta)});
        pe.emplace_back(eta, out.by_eta.back().median_error);
    }
    if (pt.size() >= 3) out.fit_T = fit_scaling(pt);
    if (pe.size() >= 3) out.fit_eta = fit_scaling(pe);
    return out;
}

}  // namespace safedap
