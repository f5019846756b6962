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
// safedap: run, sweep, check-feasibility, benchmark, estimate.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "safedap/harness.hpp"

using namespace safedap;

namespace {

constexpr int kPreflightExit = 2;
constexpr int kInfeasibleExit = 3;

void emit(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-") {
        std::cout << text;
    } else {
        write_text(out, text);
    }
}

std::string sweep_table(const SweepResult& s) {
    std::ostringstream os;
    os.precision(17);
    os << "horizon_exp,seed,regret,total_cost,action_violations,state_violations,truth_in_all_sets,condition_violated,"
          "final_error\n";
    for (const SweepRow& r : s.rows) {
        os << r.horizon_exp << ',' << r.seed << ',' << r.regret << ',' << r.total_cost << ',' << r.action_violations
           << ',' << r.state_violations << ',' << int(r.truth_in_all_sets) << ',' << int(r.condition_violated) << ','
           << r.final_error << '\n';
    }
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Safe adaptive control for constrained LQR"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> excitation_seed;
    std::optional<int> horizon_exp;
    std::string out;
    std::string format = "csv";
    std::int64_t mc_steps = -1;
    int seeds = 20;
    std::vector<int> horizons;
    bool quiet = false;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "instance JSON")->required()->check(CLI::ExistingFile);
        sub->add_option("--horizon-exp", horizon_exp, "horizon T = 2^k (overrides the config)");
        sub->add_option("--out", out, "output path (stdout when omitted)");
    };

    CLI::App* run = app.add_subcommand("run", "simulate one seed and export the log");
    common(run);
    run->add_option("--seed", seed, "disturbance seed");
    run->add_option("--excitation-seed", excitation_seed, "excitation seed (defaults to --seed)");
    run->add_option("--format", format, "csv or json-summary");
    run->add_option("--mc-steps", mc_steps, "Monte-Carlo steps for the benchmark in the summary (default 0)");
    run->add_flag("--quiet", quiet, "no summary on stderr");

    CLI::App* sw = app.add_subcommand("sweep", "regret over a grid of horizons and seeds");
    common(sw);
    sw->add_option("--seed", seed, "first seed");
    sw->add_option("--seeds", seeds, "number of seeds")->check(CLI::PositiveNumber);
    sw->add_option("--horizons", horizons, "horizon exponents (default 12 13 14 15 16)");
    sw->add_option("--format", format, "csv or json-summary");

    CLI::App* chk = app.add_subcommand("check-feasibility", "preflight only");
    common(chk);

    CLI::App* bench = app.add_subcommand("benchmark", "J* of the known-model program");
    common(bench);
    bench->add_option("--seed", seed, "Monte-Carlo seed");
    bench->add_option("--mc-steps", mc_steps, "Monte-Carlo steps (default from the config)");

    CLI::App* est = app.add_subcommand("estimate", "least-squares error scaling study");
    common(est);
    est->add_option("--seeds", seeds, "seeds per point")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        const ProblemConfig config = load_config(config_path);
        const Instance inst = make_instance(config, horizon_exp);

        if (chk->parsed()) {
            const PreflightReport rep = preflight(inst);
            emit(out, rep.to_json().dump(2) + "\n");
            return rep.ok ? 0 : kPreflightExit;
        }

        if (bench->parsed()) {
            const std::int64_t steps = mc_steps >= 0 ? mc_steps : config.benchmark_mc_steps;
            const BenchmarkResult b = benchmark_cost(inst, steps, seed);
            nlohmann::json j{{"name", config.name},
                             {"H", b.H},
                             {"J_star", b.J_star},
                             {"mc_steps", b.mc_steps},
                             {"mc_average", b.mc_average},
                             {"mc_stderr", b.mc_stderr}};
            j["policy"] = vector_to_json(b.policy.flatten());
            emit(out, j.dump(2) + "\n");
            return 0;
        }

        if (run->parsed()) {
            const ExportFormat fmt = parse_export_format(format);
            const TrajectoryLog log = simulate(inst, RunSeeds{seed, excitation_seed.value_or(seed)});
            const BenchmarkResult b = benchmark_cost(inst, std::max<std::int64_t>(mc_steps, 0), seed);
            const RegretReport rep = compute_regret(log, b.J_star);
            if (fmt == ExportFormat::csv) {
                if (out.empty() || out == "-") {
                    write_csv(log, std::cout);
                } else {
                    write_csv(log, out);
                }
            } else {
                emit(out, summary_json(log, rep, inst).dump(2) + "\n");
            }
            if (!quiet) {
                std::fprintf(stderr, "T=%lld J*=%.6g regret=%.6g state_violations=%d action_violations=%d truth_in_sets=%d\n",
                             static_cast<long long>(rep.T), rep.J_star, rep.regret, rep.state_violations,
                             rep.action_violations, int(log.truth_in_all_sets));
            }
            if (log.condition_violated) {
                std::fprintf(stderr, "runtime infeasibility: %s\n", log.violation_message.c_str());
                return kInfeasibleExit;
            }
            return 0;
        }

        if (sw->parsed()) {
            if (horizons.empty()) horizons = {12, 13, 14, 15, 16};
            std::vector<std::uint64_t> seed_list;
            for (int i = 0; i < seeds; ++i) seed_list.push_back(seed + static_cast<std::uint64_t>(i));
            const SweepResult s = sweep(config, horizons, seed_list);
            if (parse_export_format(format) == ExportFormat::csv) {
                emit(out, sweep_table(s));
            } else {
                nlohmann::json j;
                j["J_star"] = s.J_star;
                nlohmann::json med = nlohmann::json::array();
                for (const auto& [T, r] : s.median_regret) med.push_back({{"T", T}, {"median_regret", r}});
                j["median_regret"] = med;
                if (s.fit) j["fit"] = {{"slope", s.fit->slope}, {"intercept", s.fit->intercept}, {"residual", s.fit->residual}, {"theory", 2.0 / 3.0}};
                emit(out, j.dump(2) + "\n");
            }
            if (s.fit) std::fprintf(stderr, "regret exponent %.3f (theory 0.667)\n", s.fit->slope);
            const bool infeasible =
                std::any_of(s.rows.begin(), s.rows.end(), [](const SweepRow& r) { return r.condition_violated; });
            return infeasible ? kInfeasibleExit : 0;
        }

        if (est->parsed()) {
            std::vector<std::int64_t> Ts;
            for (int k = 10; k <= 16; ++k) Ts.push_back(std::int64_t{1} << k);
            const double eta = inst.eta_bar();
            const std::vector<double> etas{eta / 4, eta / 2, eta, 2 * eta};
            const EstimationStudy st = estimation_study(inst, Ts, eta, etas, std::int64_t{1} << 13, seeds);
            std::ostringstream os;
            os.precision(17);
            os << "study,T,eta_bar,median_error\n";
            for (const auto& p : st.by_T) os << "T," << p.T << ',' << p.eta_bar << ',' << p.median_error << '\n';
            for (const auto& p : st.by_eta) os << "eta," << p.T << ',' << p.eta_bar << ',' << p.median_error << '\n';
            emit(out, os.str());
            std::fprintf(stderr, "slope vs T %.3f (theory -0.5), slope vs eta %.3f (theory -1)\n", st.fit_T.slope,
                         st.fit_eta.slope);
            return 0;
        }
    } catch (const PreflightError& err) {
        std::cerr << err.what() << "\n";
        return kPreflightExit;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
