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
#include "safedap/controller.hpp"

#include <cmath>

namespace safedap {

int EpisodeSchedule::max_H() const {
    int h = 1;
    for (const EpisodeSpec& e : episodes) h = std::max(h, e.H);
    return h;
}

std::vector<EpisodeParameters> EpisodeSchedule::parameters() const {
    std::vector<EpisodeParameters> out;
    for (std::size_t e = 0; e < episodes.size(); ++e) {
        out.push_back({episodes[e].eta_bar, episodes[e].H, episodes[e].delta_M, radius[e]});
    }
    return out;
}

int memory_floor(const StabilityCertificate& cert) {
    require(cert.gamma > 0.0, "memory_floor: gamma must be positive");
    return std::max(1, static_cast<int>(std::ceil(std::log(2.0 * cert.kappa) / std::log(1.0 / (1.0 - cert.gamma)))));
}

EpisodeSchedule make_schedule(const ScheduleInputs& in) {
    require(in.T1 >= 1 && in.episodes >= 1, "make_schedule: need T1 >= 1 and at least one episode");
    require(in.p > 0.0 && in.p < 1.0, "make_schedule: p must lie in (0, 1)");
    require(in.eps_F_x > 0.0 && in.eps_F_u > 0.0, "make_schedule: eps_F must be positive");
    const TighteningInputs& ti = in.tightening;
    const double g = ti.cert.gamma;
    const double m = ti.m;
    const double n = ti.n;
    const double log_decay = std::log(1.0 / (1.0 - g));
    const int H_floor = memory_floor(ti.cert);
    const double eta = in.constants.c_eta * std::min(in.eps_F_x / std::sqrt(m), in.eps_F_u);

    EpisodeSchedule s;
    s.p = in.p;
    s.radius.push_back(in.r_ini);
    for (int e = 0; e < in.episodes; ++e) {
        EpisodeSpec spec;
        spec.T_start = e == 0 ? 0 : in.T1 << (e - 1);
        spec.T_end = in.T1 << e;
        const double span = static_cast<double>(spec.T_end - spec.T_start);
        spec.T_D = static_cast<std::int64_t>(std::ceil(std::pow(span, 2.0 / 3.0) - 1e-9));
        const int H_rate = static_cast<int>(std::ceil(in.constants.c_H * std::log(static_cast<double>(spec.T_end)) / log_decay));
        spec.H = std::max(H_rate, H_floor);
        spec.eta_bar = eta;
        spec.delta_M = in.constants.c_delta * in.eps_F_x /
                       (std::sqrt(m * n * spec.H) * std::cbrt(static_cast<double>(spec.T_end)));
        s.episodes.push_back(spec);
    }
    for (int e = 0; e < in.episodes; ++e) {
        EpisodeSpec& spec = s.episodes[e];
        double r = schedule_radius(e + 1, spec.T_D, spec.eta_bar, in.p, in.radius);
        if (e >= 1 && r > s.radius.back()) {
            // Equal exploration lengths with a smaller failure budget would
            // enlarge the radius; lengthen exploration until it does not.
            const double ratio = r / s.radius.back();
            spec.T_D = static_cast<std::int64_t>(std::ceil(static_cast<double>(spec.T_D) * ratio * ratio));
            r = schedule_radius(e + 1, spec.T_D, spec.eta_bar, in.p, in.radius);
            while (r > s.radius.back()) {
                ++spec.T_D;
                r = schedule_radius(e + 1, spec.T_D, spec.eta_bar, in.p, in.radius);
            }
            s.raised_exploration.push_back(e);
        }
        s.radius.push_back(r);
    }
    const MonotoneCheck mono = check_monotone_schedule(s.parameters(), ti, in.eps0);
    if (!mono.ok) {
        throw ContractError("make_schedule: schedule is not monotone at episode " + std::to_string(mono.first_violation) +
                            ": " + mono.reason);
    }
    return s;
}

ApproxDapState::ApproxDapState(int capacity, int n) {
    require(capacity >= 1 && n >= 1, "ApproxDapState: invalid size");
    buffer_.assign(capacity, Vector::Zero(n));
}

const Vector& ApproxDapState::w_hat(int k) const {
    const int cap = capacity();
    return buffer_[(head_ + k - 1) % cap];
}

void ApproxDapState::push(const Vector& w_hat) {
    const int cap = capacity();
    head_ = (head_ + cap - 1) % cap;
    buffer_[head_] = w_hat;
}

Vector approx_dap_step(const ApproxDapState& state, const ExcitationModel& excitation, double eta_bar, Rng& rng,
                       Vector* eta_out) {
    const DapPolicy& M = state.policy;
    require(M.H() <= state.capacity(), "approx_dap_step: policy memory exceeds the buffer");
    Vector u = Vector::Zero(M.m());
    for (int k = 1; k <= M.H(); ++k) u.noalias() += M[k] * state.w_hat(k);
    Vector eta = excitation.sample(rng, eta_bar);
    u += eta;
    if (eta_out != nullptr) *eta_out = std::move(eta);
    return u;
}

Vector record_observation(ApproxDapState& state, const SystemModel& theta_hat, double w_max, const Vector& x,
                          const Vector& u, const Vector& x_next) {
    Vector w = project_box(x_next - theta_hat.A * x - theta_hat.B * u, w_max);
    state.push(w);
    return w;
}

DapPolicy TransitPlan::waypoint(int s) const {
    require(s >= 0 && s < length(), "TransitPlan::waypoint: step out of range");
    if (s < W1) {
        return s + 1 == W1 ? mid : interpolate(from, mid, static_cast<double>(s + 1) / W1);
    }
    const int j = s - W1;
    return j + 1 == W2 ? to : interpolate(mid, to, static_cast<double>(j + 1) / W2);
}

TransitPlan plan_transit(const TransitEnd& source, const TransitEnd& target, int H_prime, const qp::QpSettings& settings) {
    require(source.delta_M > 0.0 && target.delta_M > 0.0, "plan_transit: variation budgets must be positive");
    TransitPlan plan;
    plan.from = source.M;
    plan.to = target.M;
    plan.mid = find_mid_policy(source.M, source.omega, target.M, target.omega, settings);
    plan.budget1 = std::min(source.delta_M, target.delta_M);
    plan.budget2 = target.delta_M;
    const double d1 = frobenius_distance(source.M, plan.mid);
    const double d2 = frobenius_distance(target.M, plan.mid);
    plan.W1 = std::max(static_cast<int>(std::ceil(d1 / plan.budget1)), H_prime);
    plan.W2 = d2 == 0.0 ? 0 : static_cast<int>(std::ceil(d2 / plan.budget2));
    plan.eta_min = std::min(source.eta_bar, target.eta_bar);
    plan.theta_min = source.r <= target.r ? source.theta : target.theta;
    plan.theta_prime = target.theta;
    plan.eta_prime = target.eta_bar;
    return plan;
}

std::string to_string(Phase phase) {
    switch (phase) {
        case Phase::transit1: return "transit-1";
        case Phase::explore: return "explore";
        case Phase::transit2: return "transit-2";
        case Phase::exploit: return "exploit";
    }
    return "unknown";
}

SafeAdaptiveController::SafeAdaptiveController(ControllerSettings settings, Rng excitation_rng)
    : s_(std::move(settings)),
      rng_(excitation_rng),
      dap_(std::max(1, s_.schedule.max_H()), s_.constraints.n()),
      data_(s_.constraints.n(), s_.constraints.m()),
      all_data_(s_.constraints.n(), s_.constraints.m()) {
    require(!s_.schedule.episodes.empty(), "controller: empty schedule");
    const EpisodeSpec& e0 = s_.schedule.episodes.front();
    const int n = s_.constraints.n();
    const int m = s_.constraints.m();
    M_prev_ = DapPolicy(e0.H, m, n);
    const TighteningBundle b = compute_bundle(s_.tightening, e0.H, e0.delta_M, s_.r_ini, 0.0);
    omega_prev_ = build_safe_set(s_.theta_ini, b.eps_x(), b.eps_u(), e0.H, s_.constraints, s_.cert);
    require(omega_prev_->violation(M_prev_) <= 0.0, "controller: the zero policy is not in the initial safe set");
    delta_prev_ = e0.delta_M;
    theta_next_ = s_.theta_ini;
    r_next_ = s_.r_ini;
    dap_.policy = M_prev_;
    designated_ = &*omega_prev_;
}

const SafePolicyPolytope& SafeAdaptiveController::designated() const { return *designated_; }

bool SafeAdaptiveController::transit_active() const {
    return !holding_ && plan_.has_value() && (phase_ == Phase::transit1 || phase_ == Phase::transit2) &&
           plan_step_ < plan_->length();
}

void SafeAdaptiveController::fail(const std::string& message) {
    violated_ = true;
    holding_ = true;
    if (violation_message_.empty()) violation_message_ = message;
    if (!records_.empty()) {
        records_.back().infeasible = true;
        records_.back().note = message;
    }
    plan_.reset();
    phase_ = Phase::exploit;
    phase_start_ = t_;
}

void SafeAdaptiveController::begin_episode() {
    ++episode_;
    const EpisodeSpec& spec = s_.schedule.episodes[episode_];
    EpisodeRecord rec;
    rec.episode = episode_;
    rec.T_start = t_;
    rec.H = spec.H;
    rec.eta_bar = spec.eta_bar;
    rec.delta_M = spec.delta_M;
    theta_e_ = theta_next_;
    r_e_ = r_next_;
    rec.theta = theta_e_;
    rec.r = r_e_;
    records_.push_back(rec);
    holding_ = false;
    data_.clear();
    try {
        RobustCeResult rce = build_and_solve_robust_ce(theta_e_, r_e_, spec.eta_bar, spec.H, spec.delta_M, s_.tightening,
                                                       s_.constraints, s_.weights, s_.qp);
        records_.back().bundle_explore = rce.bundle;
        records_.back().objective_explore = rce.solution.objective;
        M_dagger_ = std::move(rce.policy);
        omega_dagger_ = std::move(rce.polytope);
        plan_ = plan_transit({M_prev_, *omega_prev_, delta_prev_, 0.0, theta_e_, r_e_},
                             {M_dagger_, *omega_dagger_, spec.delta_M, spec.eta_bar, theta_e_, r_e_}, spec.H, s_.qp);
        records_.back().W1_first = plan_->W1;
        records_.back().W2_first = plan_->W2;
        enter(Phase::transit1);
    } catch (const InfeasibleProgram& err) {
        designated_ = &*omega_prev_;
        fail("episode " + std::to_string(episode_) + ", exploration program: " + err.what());
    }
}

void SafeAdaptiveController::finish_exploration() {
    const EpisodeSpec& spec = s_.schedule.episodes[episode_];
    EpisodeRecord& rec = records_.back();
    const RegressionDataset& data = s_.use_all_history ? all_data_ : data_;
    rec.samples = data.count();
    try {
        rec.theta_tilde = least_squares(data, s_.ridge);
    } catch (const ContractError& err) {
        designated_ = &*omega_dagger_;
        fail("episode " + std::to_string(episode_) + ", estimation: " + err.what());
        return;
    }
    theta_next_ = project_uncertainty(rec.theta_tilde, s_.theta_ini, s_.r_ini);
    r_next_ = s_.schedule.radius[episode_ + 1];
    rec.theta_next = theta_next_;
    rec.r_next = r_next_;
    rec.estimated = true;
    try {
        RobustCeResult rce = build_and_solve_robust_ce(theta_next_, r_next_, 0.0, spec.H, spec.delta_M, s_.tightening,
                                                       s_.constraints, s_.weights, s_.qp);
        rec.bundle_exploit = rce.bundle;
        rec.objective_exploit = rce.solution.objective;
        M_new_ = std::move(rce.policy);
        omega_new_ = std::move(rce.polytope);
        plan_ = plan_transit({M_dagger_, *omega_dagger_, spec.delta_M, spec.eta_bar, theta_e_, r_e_},
                             {M_new_, *omega_new_, spec.delta_M, 0.0, theta_next_, r_next_}, spec.H, s_.qp);
        rec.W1_second = plan_->W1;
        rec.W2_second = plan_->W2;
        enter(Phase::transit2);
    } catch (const InfeasibleProgram& err) {
        // Hold the exploration policy; it becomes the source of the next transit.
        M_prev_ = M_dagger_;
        omega_prev_ = *omega_dagger_;
        delta_prev_ = spec.delta_M;
        designated_ = &*omega_prev_;
        fail("episode " + std::to_string(episode_) + ", exploitation program: " + err.what());
    }
}

void SafeAdaptiveController::enter(Phase phase) {
    phase_ = phase;
    phase_start_ = t_;
    plan_step_ = 0;
    if (phase == Phase::exploit) {
        M_prev_ = M_new_;
        omega_prev_ = std::move(omega_new_);
        omega_new_.reset();
        delta_prev_ = s_.schedule.episodes[episode_].delta_M;
        designated_ = &*omega_prev_;
    } else if (phase == Phase::transit1) {
        designated_ = &*omega_prev_;
    } else if (phase == Phase::explore) {
        designated_ = &*omega_dagger_;
    } else {
        designated_ = &*omega_dagger_;
    }
    membership_ = designated_->violation(dap_.policy);
}

void SafeAdaptiveController::set_policy(DapPolicy policy) {
    last_variation_ = frobenius_distance(policy, dap_.policy);
    policy_changed_ = true;
    dap_.policy = std::move(policy);
    ++policy_id_;
}

const SystemModel& SafeAdaptiveController::estimate_for_residual() const {
    if (transit_active()) return plan_->in_step_one(plan_step_) ? plan_->theta_min : plan_->theta_prime;
    switch (phase_) {
        case Phase::explore: return theta_e_;
        default: return theta_next_;
    }
}

double SafeAdaptiveController::excitation_level() const {
    if (holding_) return 0.0;
    if (transit_active()) return plan_->in_step_one(plan_step_) ? plan_->eta_min : plan_->eta_prime;
    return phase_ == Phase::explore ? s_.schedule.episodes[episode_].eta_bar : 0.0;
}

StepRecord SafeAdaptiveController::advance(Plant& plant) {
    // Phase progression at the start of stage t.
    if (episode_ < 0) begin_episode();
    for (bool moved = true; moved;) {
        moved = false;
        const int next = episode_ + 1;
        const bool next_due = next < static_cast<int>(s_.schedule.episodes.size()) &&
                              t_ >= s_.schedule.episodes[next].T_start;
        if (holding_) {
            if (next_due) {
                begin_episode();
                moved = true;
            }
            continue;
        }
        if (phase_ == Phase::transit1 && plan_step_ >= plan_->length()) {
            records_.back().t1 = t_;
            enter(Phase::explore);
            moved = true;
        } else if (phase_ == Phase::explore && t_ - phase_start_ >= s_.schedule.episodes[episode_].T_D) {
            finish_exploration();
            moved = true;
        } else if (phase_ == Phase::transit2 && plan_step_ >= plan_->length()) {
            records_.back().t2 = t_;
            enter(Phase::exploit);
            moved = true;
        } else if (phase_ == Phase::exploit && next_due) {
            begin_episode();
            moved = true;
        }
    }

    StepRecord rec;
    rec.t = t_;
    rec.episode = episode_;
    rec.phase = phase_;
    policy_changed_ = false;
    last_variation_ = 0.0;
    if (transit_active()) {
        rec.transit_step = plan_->in_step_one(plan_step_) ? 1 : 2;
        rec.variation_budget = rec.transit_step == 1 ? plan_->budget1 : plan_->budget2;
        if (rec.transit_step == 2 && plan_step_ == plan_->W1) {
            designated_ = phase_ == Phase::transit1 ? &*omega_dagger_ : &*omega_new_;
            membership_ = designated_->violation(dap_.policy);
        }
        set_policy(plan_->waypoint(plan_step_));
    }
    if (policy_changed_) membership_ = designated_->violation(dap_.policy);
    rec.policy_changed = policy_changed_;
    rec.variation = last_variation_;
    rec.membership = membership_;
    rec.policy_id = policy_id_;

    const SystemModel& theta = estimate_for_residual();
    rec.x = plant.state();
    rec.u = approx_dap_step(dap_, s_.excitation, excitation_level(), rng_, &rec.eta);
    plant.apply(rec.u);
    rec.x_next = plant.state();
    rec.w_hat = record_observation(dap_, theta, s_.constraints.w_max, rec.x, rec.u, rec.x_next);
    if (phase_ == Phase::explore && !holding_) {
        data_.add(rec.x, rec.u, rec.x_next);
        all_data_.add(rec.x, rec.u, rec.x_next);
    }
    if (transit_active()) ++plan_step_;
    ++t_;
    return rec;
}

}  // namespace safedap
