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
#include "safedap/tightening.hpp"

#include <cmath>

namespace safedap {

TighteningInputs TighteningInputs::from(const ConstraintSpec& constraints, const StabilityCertificate& cert,
                                        double alpha) {
    TighteningInputs in;
    in.cert = cert;
    in.Dx_norm = constraints.Dx_norm_inf();
    in.Du_norm = constraints.Du_norm_inf();
    in.w_max = constraints.w_max;
    in.x_max = constraints.x_max;
    in.u_max = constraints.u_max;
    in.z_max = constraints.z_max;
    in.n = constraints.n();
    in.m = constraints.m();
    in.alpha = alpha;
    in.validate();
    return in;
}

void TighteningInputs::validate() const {
    cert.validate();
    require(cert.gamma > 0.0, "tightening: gamma must be positive");
    require(Dx_norm > 0 && Du_norm > 0 && w_max >= 0 && x_max > 0 && u_max > 0, "tightening: norms must be positive");
    require(std::abs(z_max * z_max - (x_max * x_max + u_max * u_max)) <= 1e-9 * z_max * z_max,
            "tightening: z_max^2 must equal x_max^2 + u_max^2");
    require(n > 0 && m > 0, "tightening: dimensions must be positive");
    require(alpha > 0.0, "tightening: alpha must be positive");
}

double TighteningInputs::c1() const {
    const double k = cert.kappa;
    const double g = cert.gamma;
    const double w_hat = Dx_norm * z_max * k / g;
    const double theta_hat = 5.0 * std::pow(k, 4) * cert.kappa_B * Dx_norm * w_max / std::pow(g, 3);
    return alpha * (w_hat + theta_hat);
}

double TighteningInputs::state_bound(double eta_max) const {
    const double k = cert.kappa;
    const double g = cert.gamma;
    const double sn = std::sqrt(static_cast<double>(n));
    const double smn = std::sqrt(static_cast<double>(m) * n);
    const double first = 4.0 * sn * k * w_max / g;
    const double general = 2.0 * sn * k * (w_max + cert.kappa_B * eta_max) / g;
    return std::max(first, general) + 4.0 * smn * k * k * k * cert.kappa_B * w_max / (g * g);
}

TighteningBundle compute_bundle(const TighteningInputs& in, int H, double delta_M, double r, double eta_bar) {
    require(H >= 1, "compute_bundle: H must be >= 1");
    require(delta_M >= 0.0 && r >= 0.0 && eta_bar >= 0.0, "compute_bundle: negative argument");
    const double k = in.cert.kappa;
    const double kb = in.cert.kappa_B;
    const double g = in.cert.gamma;
    const double a = in.alpha;
    const double m = in.m;
    const double n = in.n;
    const double decay = std::pow(1.0 - g, H);

    TighteningBundle b;
    b.H = H;
    b.delta_M = delta_M;
    b.r = r;
    b.eta_bar = eta_bar;
    b.eps_H = a * in.Dx_norm * k * in.x_max * decay;
    b.eps_v = a * in.Dx_norm * in.w_max * k * kb / (g * g) * std::sqrt(m * n * H) * delta_M;
    b.eps_w_hat = a * in.Dx_norm * in.z_max * k / g * r;
    b.eps_theta_hat = a * 5.0 * std::pow(k, 4) * kb * in.Dx_norm * in.w_max / std::pow(g, 3) * std::sqrt(m * n) * r;
    b.eps_theta = b.eps_w_hat + b.eps_theta_hat;
    b.eps_eta_x = a * in.Dx_norm * k * kb / g * std::sqrt(m) * eta_bar;
    b.eps_eta_u = a * in.Du_norm * eta_bar;
    b.eps_P = a * in.Dx_norm * k * (in.state_bound(eta_bar) + std::sqrt(n) * in.x_max) * decay;
    return b;
}

InitialFeasibility initial_feasibility_margin(const TighteningInputs& inputs, const TighteningBundle& bundle0, double eps0,
                                              double r_ini, double eps_F_x, double eps_F_u) {
    require(eps0 >= 0.0 && r_ini >= 0.0, "initial_feasibility_margin: negative argument");
    const TighteningBundle ini = compute_bundle(inputs, bundle0.H, 0.0, r_ini, 0.0);
    InitialFeasibility out;
    out.state_slack = eps_F_x - ini.eps_theta - bundle0.eps_P - bundle0.eps_x() - eps0;
    out.action_slack = eps_F_u - bundle0.eps_P - bundle0.eps_u();
    out.ok = out.state_slack >= 0.0 && out.action_slack >= 0.0;
    return out;
}

MonotoneCheck check_monotone_schedule(const std::vector<EpisodeParameters>& params, const TighteningInputs& inputs,
                                      double eps0) {
    require(!params.empty(), "check_monotone_schedule: need at least one episode");
    MonotoneCheck out;
    auto fail = [&](int e, std::string why) {
        out.ok = false;
        out.first_violation = e;
        out.reason = std::move(why);
        return out;
    };
    const double rel = 1e-12;
    for (std::size_t e = 1; e < params.size(); ++e) {
        const EpisodeParameters& a = params[e - 1];
        const EpisodeParameters& b = params[e];
        const int ei = static_cast<int>(e);
        if (b.H < a.H) return fail(ei, "H decreases");
        if (std::sqrt(static_cast<double>(b.H)) * b.delta_M > std::sqrt(static_cast<double>(a.H)) * a.delta_M * (1 + rel))
            return fail(ei, "sqrt(H) * delta_M increases");
        if (b.eta_bar > a.eta_bar * (1 + rel)) return fail(ei, "eta_bar increases");
        if (e >= 2 && b.r > a.r * (1 + rel)) return fail(ei, "radius increases");
    }
    if (params.size() >= 2) {
        const double cap = eps0 / (inputs.c1() * std::sqrt(static_cast<double>(inputs.m) * inputs.n));
        if (params[1].r > cap * (1 + rel)) return fail(1, "first estimated radius exceeds eps0 / (c1 sqrt(mn))");
    }
    return out;
}

}  // namespace safedap
