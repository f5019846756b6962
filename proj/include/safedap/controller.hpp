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

// Episodic safe adaptive controller: exploration with excitation, model
// re-estimation, robust certainty-equivalent policies and slow transitions
// between them.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "safedap/estimation.hpp"
#include "safedap/safe_set.hpp"

namespace safedap {

struct ScheduleConstants {
    double c_delta{0.25};
    double c_eta{0.25};
    double c_H{1.0};
};

struct EpisodeSpec {
    std::int64_t T_start{0};
    std::int64_t T_end{0};
    std::int64_t T_D{0};
    int H{1};
    double eta_bar{0};
    double delta_M{0};
};

struct ScheduleInputs {
    std::int64_t T1{0};
    int episodes{1};
    double p{0.1};
    double eps_F_x{0};
    double eps_F_u{0};
    double eps0{0};
    double r_ini{0};
    ScheduleConstants constants;
    TighteningInputs tightening;
    RadiusInputs radius;
};

struct EpisodeSchedule {
    std::vector<EpisodeSpec> episodes;
    /// radius[e] is r^(e): radius[0] = r_ini, radius[e] for e >= 1 follows
    /// from the exploration data of episode e - 1. Size episodes + 1.
    std::vector<double> radius;
    /// Exploration lengths raised above the nominal rule to keep the radii
    /// non-increasing (episode indices).
    std::vector<int> raised_exploration;
    double p{0.1};

    [[nodiscard]] std::int64_t horizon() const { return episodes.empty() ? 0 : episodes.back().T_end; }
    [[nodiscard]] int max_H() const;
    [[nodiscard]] std::vector<EpisodeParameters> parameters() const;
};

/// Builds the doubling schedule T^(0) = 0, T^(1) = T1, T^(e+1) = 2 T^(e).
/// Throws SampleFloorError when an exploration phase is below the sample floor
/// and ContractError when the result is not monotone.
EpisodeSchedule make_schedule(const ScheduleInputs& in);

/// Minimum memory so that kappa (1-gamma)^H <= 1/2.
int memory_floor(const StabilityCertificate& cert);

/// Ring buffer of estimated disturbances plus the active policy.
class ApproxDapState {
public:
    ApproxDapState(int capacity, int n);

    /// w_hat_{t-k}, k = 1..capacity; zero before the first observation.
    [[nodiscard]] const Vector& w_hat(int k) const;
    void push(const Vector& w_hat);
    [[nodiscard]] int capacity() const { return static_cast<int>(buffer_.size()); }

    DapPolicy policy;

private:
    std::vector<Vector> buffer_;
    int head_{0};
};

/// sum_k M[k] w_hat_{t-k} + eta_t with eta_t drawn at level eta_bar (zero when
/// eta_bar = 0). The sampled excitation is written to eta_out when given.
Vector approx_dap_step(const ApproxDapState& state, const ExcitationModel& excitation, double eta_bar, Rng& rng,
                       Vector* eta_out = nullptr);

/// w_hat_t = clamp(x_{t+1} - A_hat x_t - B_hat u_t) pushed into the buffer; returns w_hat_t.
Vector record_observation(ApproxDapState& state, const SystemModel& theta_hat, double w_max, const Vector& x,
                          const Vector& u, const Vector& x_next);

struct TransitPlan {
    DapPolicy from;
    DapPolicy mid;
    DapPolicy to;
    int W1{0};
    int W2{0};
    double budget1{0};  ///< min(delta_M, delta_M')
    double budget2{0};  ///< delta_M'
    SystemModel theta_min;
    double eta_min{0};
    SystemModel theta_prime;
    double eta_prime{0};

    [[nodiscard]] int length() const { return W1 + W2; }
    /// Policy in force at step s of the transit, 0 <= s < length().
    [[nodiscard]] DapPolicy waypoint(int s) const;
    [[nodiscard]] bool in_step_one(int s) const { return s < W1; }
};

struct TransitEnd {
    const DapPolicy& M;
    const SafePolicyPolytope& omega;
    double delta_M;
    double eta_bar;
    const SystemModel& theta;
    double r;
};

/// Two-leg path M -> M_mid -> M'. Throws InfeasibleProgram when the sets do not intersect.
TransitPlan plan_transit(const TransitEnd& source, const TransitEnd& target, int H_prime,
                         const qp::QpSettings& settings = {});

enum class Phase { transit1, explore, transit2, exploit };
std::string to_string(Phase phase);

/// The controller only sees the plant through this interface.
class Plant {
public:
    virtual ~Plant() = default;
    [[nodiscard]] virtual const Vector& state() const = 0;
    virtual void apply(const Vector& u) = 0;
};

struct ControllerSettings {
    ConstraintSpec constraints;
    StabilityCertificate cert;
    TighteningInputs tightening;
    CostWeights weights;
    SystemModel theta_ini;
    double r_ini{0};
    ExcitationModel excitation;
    EpisodeSchedule schedule;
    double ridge{1e-10};
    bool use_all_history{false};
    qp::QpSettings qp;
};

struct EpisodeRecord {
    int episode{0};
    std::int64_t T_start{0};
    std::int64_t t1{-1};  ///< end of the first transit
    std::int64_t t2{-1};  ///< end of the second transit
    int H{0};
    double eta_bar{0};
    double delta_M{0};
    SystemModel theta;  ///< estimate in force at the start (centre of Theta^(e))
    double r{0};
    SystemModel theta_tilde;  ///< raw least-squares estimate from this episode
    SystemModel theta_next;   ///< projected estimate (centre of Theta^(e+1))
    double r_next{0};
    std::int64_t samples{0};
    TighteningBundle bundle_explore;
    TighteningBundle bundle_exploit;
    double objective_explore{0};
    double objective_exploit{0};
    int W1_first{0}, W2_first{0}, W1_second{0}, W2_second{0};
    bool estimated{false};
    bool infeasible{false};
    std::string note;
};

struct StepRecord {
    std::int64_t t{0};
    Vector x;
    Vector u;
    Vector eta;
    Vector x_next;
    Vector w_hat;
    int episode{0};
    Phase phase{Phase::transit1};
    int transit_step{0};          ///< 1 or 2 inside a transit, 0 otherwise
    bool policy_changed{false};
    double variation{0};          ///< |M_t - M_{t-1}|_F
    double variation_budget{0};   ///< allowed variation, 0 outside transits
    double membership{0};         ///< violation of the designated polytope (<= 0 member)
    int policy_id{0};
};

class SafeAdaptiveController {
public:
    /// Throws ContractError when the zero policy is not in the initial set.
    SafeAdaptiveController(ControllerSettings settings, Rng excitation_rng);

    /// One stage: act on the plant's current state, apply, observe.
    StepRecord advance(Plant& plant);

    [[nodiscard]] std::int64_t t() const { return t_; }
    [[nodiscard]] int episode() const { return episode_; }
    [[nodiscard]] Phase phase() const { return phase_; }
    [[nodiscard]] const DapPolicy& policy() const { return dap_.policy; }
    [[nodiscard]] const std::vector<EpisodeRecord>& episodes() const { return records_; }
    [[nodiscard]] bool condition_violated() const { return violated_; }
    [[nodiscard]] const std::string& violation_message() const { return violation_message_; }
    [[nodiscard]] const ControllerSettings& settings() const { return s_; }
    /// Polytope the current policy must belong to.
    [[nodiscard]] const SafePolicyPolytope& designated() const;

private:
    void begin_episode();
    void finish_exploration();
    void enter(Phase phase);
    void set_policy(DapPolicy policy);
    void fail(const std::string& message);
    [[nodiscard]] const SystemModel& estimate_for_residual() const;
    [[nodiscard]] double excitation_level() const;
    [[nodiscard]] bool transit_active() const;

    ControllerSettings s_;
    Rng rng_;
    ApproxDapState dap_;
    RegressionDataset data_;
    RegressionDataset all_data_;

    std::int64_t t_{0};
    int episode_{-1};
    Phase phase_{Phase::transit1};
    std::int64_t phase_start_{0};
    bool holding_{false};
    bool violated_{false};
    std::string violation_message_;

    // Current episode's quantities.
    SystemModel theta_e_;
    double r_e_{0};
    SystemModel theta_next_;
    double r_next_{0};

    // Old set (previous exploit), dagger set and new exploit set.
    DapPolicy M_prev_;
    std::optional<SafePolicyPolytope> omega_prev_;
    double delta_prev_{0};
    DapPolicy M_dagger_;
    std::optional<SafePolicyPolytope> omega_dagger_;
    DapPolicy M_new_;
    std::optional<SafePolicyPolytope> omega_new_;

    std::optional<TransitPlan> plan_;
    int plan_step_{0};
    const SafePolicyPolytope* designated_{nullptr};
    double membership_{0};
    int policy_id_{0};
    bool policy_changed_{false};
    double last_variation_{0};

    std::vector<EpisodeRecord> records_;
};

}  // namespace safedap
