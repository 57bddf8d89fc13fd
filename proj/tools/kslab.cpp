#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kslab/acceptance.hpp"
#include "kslab/config.hpp"
#include "kslab/csv.hpp"
#include "kslab/errors.hpp"
#include "kslab/modulation.hpp"
#include "kslab/pde.hpp"
#include "kslab/specialfun.hpp"
#include "kslab/spectral.hpp"

namespace fs = std::filesystem;
using kslab::config::Command;
using kslab::config::RunConfig;
using json = nlohmann::json;

namespace {

constexpr int exit_failed_check = 1;
constexpr int exit_parameter = 2;
constexpr int exit_convergence = 3;

// a failure that already carries the operator and scale in its message
struct ConvergenceFailure : kslab::ConvergenceError {
    using kslab::ConvergenceError::ConvergenceError;
};

std::string short_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::ofstream open_out(const RunConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.output_dir);
    std::ofstream out(fs::path(cfg.output_dir) / name, std::ios::binary);
    if (!out) throw kslab::ParameterError("cannot write " + (fs::path(cfg.output_dir) / name).string());
    return out;
}

void write_json_file(const RunConfig& cfg, const std::string& name, const json& j) {
    auto out = open_out(cfg, name);
    out << j.dump(2) << '\n';
}

void write_config_record(const RunConfig& cfg) {
    auto out = open_out(cfg, "config.txt");
    out << cfg.to_text();
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

int cmd_spectrum(const RunConfig& cfg) {
    double beta = cfg.real("beta");
    long long n = cfg.integer("n");
    if (n < 0 || n > 11) throw kslab::ParameterError("n must lie in [0, 11]");
    int ppd = static_cast<int>(cfg.integer("ppd"));
    bool refined = cfg.boolean("refined");
    double bound = cfg.real("max_residual_scaled");
    write_config_record(cfg);
    bool all_ok = true;
    for (double nu : cfg.reals("nu")) {
        kslab::spectral::SpectrumReport rep;
        try {
            rep = kslab::spectral::spectrum_report(nu, beta, static_cast<int>(n + 1), ppd, refined);
        } catch (const kslab::ConvergenceError& e) {
            throw ConvergenceFailure("operator A^zeta (beta=" + short_num(beta) + ") at nu=" + short_num(nu) + ": " +
                                     e.what());
        }
        bool ok = true;
        for (std::size_t k = 0; k < rep.computed.size(); ++k) {
            ok = ok && rep.residual_scaled[k] <= bound;
            if (k > 0) ok = ok && rep.computed[k].alpha < rep.computed[k - 1].alpha;
        }
        std::string stem = "spectrum_nu_" + short_num(nu);
        {
            auto out = open_out(cfg, stem + ".csv");
            kslab::spectral::write_csv(rep, out);
        }
        {
            auto out = open_out(cfg, stem + ".json");
            kslab::spectral::write_json(rep, out);
        }
        double worst = *std::max_element(rep.residual_scaled.begin(), rep.residual_scaled.end());
        std::printf("nu=%s alpha0=%.8f max residual_scaled %.4f %s -> %s.{csv,json}\n", short_num(nu).c_str(),
                    rep.computed[0].alpha, worst, ok ? "ok" : "FAILED", stem.c_str());
        all_ok = all_ok && ok;
    }
    return all_ok ? 0 : exit_failed_check;
}

int cmd_modulate(const RunConfig& cfg) {
    using namespace kslab::modulation;
    bool stable = cfg.tag("mode") == "stable";
    int ell = static_cast<int>(cfg.integer("ell"));
    if (!stable && ell < 2) throw kslab::ParameterError("ell must be at least 2 in the unstable mode");
    Mode mode = stable ? Mode::make_stable() : Mode::make_unstable(ell);
    int N = static_cast<int>(cfg.integer("modes"));
    if (N < (stable ? 1 : ell)) throw kslab::ParameterError("modes must cover the tied amplitude");
    auto variant = cfg.tag("initial") == "plain" ? InitialVariant::plain : InitialVariant::centered;
    IntegrateOptions io;
    io.tolerance = cfg.real("tolerance");
    io.output_points = static_cast<int>(cfg.integer("output_points"));
    write_config_record(cfg);
    ModulationTrajectory traj;
    try {
        auto s0 = initial_state(mode, cfg.real("beta0"), cfg.real("tau0"), N, cfg.real("amplitude"), variant);
        traj = integrate(s0, mode, cfg.real("tau_end"), io);
    } catch (const kslab::ConvergenceError& e) {
        throw ConvergenceFailure(std::string("modulation system (") + (stable ? "stable" : "unstable") + "): " +
                                 e.what());
    }
    auto law = to_physical(traj);
    {
        auto out = open_out(cfg, "trajectory.csv");
        write_csv(traj, out);
    }
    {
        auto out = open_out(cfg, "law.csv");
        write_csv(law, out);
    }
    json j;
    j["mode"] = stable ? "stable" : "unstable";
    if (!stable) j["ell"] = ell;
    j["tau_end"] = traj.samples.back().tau;
    j["accepted_steps"] = traj.accepted_steps;
    j["rejected_steps"] = traj.rejected_steps;
    j["T"] = law.T;
    j["final_nu"] = traj.samples.back().nu();
    j["final_beta"] = traj.samples.back().beta;
    if (stable) {
        double worst = 0.0;
        for (const auto& s : law.samples)
            if (std::abs(s.log_T_minus_t) >= 100.0) worst = std::max(worst, std::abs(stable_law_ratio(s) - 1.0));
        j["final_prefactor"] = law.prefactor.back();
        j["law_constant"] = 2.0 * std::exp(-(2.0 + kslab::specialfun::euler_gamma) / 2.0);
        j["max_law_ratio_deviation_far"] = worst;
        std::printf("final prefactor nu e^{sqrt(beta tau)} = %.6f (constant %.5f)\n", law.prefactor.back(),
                    2.0 * std::exp(-(2.0 + kslab::specialfun::euler_gamma) / 2.0));
    } else {
        try {
            auto fit = fit_power_law(law, cfg.real("fit_tau_lo"), cfg.real("fit_tau_hi"));
            j["fit"] = {{"C", fit.C}, {"p", fit.p}, {"q", fit.q}, {"rms", fit.residual}, {"samples", fit.samples},
                        {"p_expected", ell / 2.0}, {"q_expected", -ell / (2.0 * (ell - 1))}};
            std::printf("fit p = %.4f (%.3f), q = %.4f (%.3f)\n", fit.p, ell / 2.0, fit.q, -ell / (2.0 * (ell - 1)));
        } catch (const kslab::FitError& e) {
            j["fit"] = nullptr;
            std::printf("no fit: %s\n", e.what());
        }
    }
    write_json_file(cfg, "summary.json", j);
    return 0;
}

int cmd_simulate(const RunConfig& cfg) {
    using namespace kslab::pde;
    GridSpec gs;
    gs.r_floor = cfg.real("r_floor");
    gs.r_max = cfg.real("r_max");
    gs.points_per_decade = static_cast<int>(cfg.integer("ppd"));
    InitialSpec is;
    is.preset = preset_from_string(cfg.tag("preset"));
    is.lambda0 = cfg.real("lambda0");
    is.mass_factor = cfg.real("mass_factor");
    is.amp = cfg.real("amp");
    is.width = cfg.real("width");
    RunOptions o;
    o.u0_cap = cfg.real("u0_cap");
    o.t_max = cfg.real("t_max");
    o.cfl = cfg.real("cfl");
    o.dt_u0 = cfg.real("dt_u0");
    o.record_growth = cfg.real("record_growth");
    o.record_dt = cfg.real("record_dt");
    o.snapshot_factor = cfg.real("snapshot_factor");
    o.decay_stop = cfg.real("decay_stop");
    o.projection_modes = static_cast<int>(cfg.integer("projection_modes"));
    o.projection_beta = cfg.real("projection_beta");
    write_config_record(cfg);
    auto init = make_initial(is, gs);
    RunResult r;
    try {
        r = run(init, gs, o);
    } catch (const kslab::ConvergenceError& e) {
        throw ConvergenceFailure(std::string("partial-mass flow: ") + e.what());
    }
    {
        auto out = open_out(cfg, "series.csv");
        write_csv(r.series, out);
    }
    for (std::size_t i = 0; i < r.snapshots.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "snapshot_%02zu.csv", i);
        auto out = open_out(cfg, name);
        write_csv(r.snapshots[i].field, out);
    }
    {
        auto out = open_out(cfg, "final.csv");
        write_csv(r.final_field, out);
    }
    {
        auto out = open_out(cfg, "projections.csv");
        write_csv(r.projections, out);
    }
    json j;
    j["stop"] = to_string(r.stop);
    j["T_est"] = number_or_null(r.T_est);
    j["t_final"] = r.final_field.t;
    j["steps"] = r.steps;
    j["regrids"] = r.regrids;
    j["monotonicity_violations"] = r.monotonicity_violations;
    j["max_u0"] = r.max_u0;
    j["final_lambda"] = number_or_null(r.series.back().lambda);
    j["final_profile_err"] = number_or_null(r.series.back().profile_err);
    j["snapshots"] = r.snapshots.size();
    write_json_file(cfg, "summary.json", j);
    std::printf("stop: %s at t=%.10g (max u0 %.4g, %ld steps, %d regrids)\n", to_string(r.stop), r.final_field.t,
                r.max_u0, r.steps, r.regrids);
    return 0;
}

int cmd_verify(const RunConfig& cfg) {
    kslab::acceptance::Options o;
    o.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
    o.spectral_ppd = static_cast<int>(cfg.integer("spectral_ppd"));
    o.pde_ppd = static_cast<int>(cfg.integer("pde_ppd"));
    o.q_ppd = static_cast<int>(cfg.integer("q_ppd"));
    o.criteria.clear();
    for (long long id : cfg.integers("criteria")) {
        if (id < 1 || id > kslab::acceptance::criterion_count)
            throw kslab::ParameterError("criteria: unknown acceptance item " + std::to_string(id));
        o.criteria.push_back(static_cast<int>(id));
    }
    auto results = kslab::acceptance::run(o, &std::cout);
    std::string failed;
    for (const auto& r : results)
        if (!r.pass) failed += (failed.empty() ? "" : ",") + std::to_string(r.id);
    if (failed.empty()) {
        std::cout << "all " << results.size() << " items passed\n";
        return 0;
    }
    std::cout << "failed items: " << failed << '\n';
    return exit_failed_check;
}

int cmd_tables(const RunConfig& cfg) {
    using namespace kslab;
    double beta = cfg.real("beta");
    int n = static_cast<int>(cfg.integer("n"));
    if (n < 0 || n > 11) throw ParameterError("n must lie in [0, 11]");
    int ppd = static_cast<int>(cfg.integer("ppd"));
    write_config_record(cfg);
    {
        auto out = open_out(cfg, "eigenvalues.csv");
        csv::write_header(out, {"nu", "n", "alpha_computed", "alpha_leading", "alpha_refined", "residual_scaled"});
        for (double nu : cfg.reals("nu")) {
            spectral::SpectrumReport rep;
            try {
                rep = spectral::spectrum_report(nu, beta, n + 1, ppd, true);
            } catch (const ConvergenceError& e) {
                throw ConvergenceFailure("operator A^zeta (beta=" + short_num(beta) + ") at nu=" + short_num(nu) +
                                         ": " + e.what());
            }
            for (int k = 0; k <= n; ++k) {
                auto i = static_cast<std::size_t>(k);
                double ref = rep.predicted_refined[i];
                out << csv::num(nu) << ',' << k << ',' << csv::num(rep.computed[i].alpha) << ','
                    << csv::num(rep.predicted_leading[i]) << ',' << (std::isnan(ref) ? "" : csv::num(ref)) << ','
                    << csv::num(rep.residual_scaled[i]) << '\n';
            }
        }
    }
    using namespace modulation;
    double tau_end = cfg.real("tau_end");
    {
        auto out = open_out(cfg, "law_constant.csv");
        csv::write_header(out, {"beta0", "tau_end", "beta_end", "prefactor", "predicted", "ratio"});
        for (double b0 : cfg.reals("betas")) {
            Mode mode = Mode::make_stable();
            auto traj = integrate(initial_state(mode, b0, 10.0, 3, 0.1), mode, tau_end);
            auto law = to_physical(traj);
            double b_end = traj.samples.back().beta;
            double pred = std::sqrt(2.0 / b_end) * std::exp(-(2.0 + specialfun::euler_gamma) / 2.0);
            csv::write_row(out, {b0, tau_end, b_end, law.prefactor.back(), pred, law.prefactor.back() / pred});
            if (b0 == beta) {
                auto lout = open_out(cfg, "lambda_law_stable.csv");
                write_csv(law, lout);
            }
        }
    }
    {
        auto out = open_out(cfg, "lambda_law_unstable.csv");
        csv::write_header(out, {"ell", "C", "p", "p_expected", "q", "q_expected", "rms", "samples"});
        for (long long ell : cfg.integers("ells")) {
            if (ell < 2) throw ParameterError("ells: sector index must be at least 2");
            Mode mode = Mode::make_unstable(static_cast<int>(ell));
            auto traj = integrate(initial_state(mode, beta, 10.0, static_cast<int>(ell) + 1, 0.1), mode, 2000.0);
            auto fit = fit_power_law(to_physical(traj), 50.0, 2000.0);
            double e = static_cast<double>(ell);
            csv::write_row(out, {e, fit.C, fit.p, e / 2.0, fit.q, -e / (2.0 * (e - 1.0)), fit.residual,
                                 static_cast<double>(fit.samples)});
        }
    }
    std::printf("wrote eigenvalues.csv, law_constant.csv, lambda_law_stable.csv, lambda_law_unstable.csv to %s\n",
                cfg.output_dir.c_str());
    return 0;
}

std::string parameter_usage(Command c) {
    std::ostringstream s;
    s << "Parameters (key=value):\n";
    for (const auto& p : kslab::config::parameter_specs(c)) {
        s << "  " << p.key << " = " << p.default_text;
        if (!p.tags.empty()) {
            s << "  {";
            for (std::size_t i = 0; i < p.tags.size(); ++i) s << (i ? "|" : "") << p.tags[i];
            s << "}";
        }
        s << "    " << p.help << '\n';
    }
    return s.str();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw kslab::ParameterError("cannot read config file " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kslab: radial Keller-Segel blow-up lab"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    long long seed = 0;
    std::vector<std::string> pairs;
    struct Sub {
        Command command;
        CLI::App* app;
    };
    std::vector<Sub> subs;
    const std::pair<Command, const char*> commands[] = {
        {Command::spectrum, "eigenvalue reports of the weighted operator, one CSV and JSON per nu"},
        {Command::modulate, "integrate the modulation equations and map them to physical time"},
        {Command::simulate, "run the partial-mass flow"},
        {Command::verify, "run the acceptance suite and print a pass/fail ledger"},
        {Command::tables, "eigenvalue-vs-prediction and lambda-law tables"}};
    for (const auto& [c, help] : commands) {
        auto* sub = app.add_subcommand(kslab::config::to_string(c), help);
        sub->add_option("--config", config_path, "file of key = value lines");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "seed of the random trial vectors");
        sub->add_option("pairs", pairs, "key=value overrides");
        sub->footer(parameter_usage(c));
        subs.push_back({c, sub});
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_parameter;
    }

    const Sub* active = nullptr;
    for (const auto& s : subs)
        if (s.app->parsed()) active = &s;

    try {
        RunConfig cfg(active->command);
        if (!config_path.empty()) cfg.apply_text(read_file(config_path));
        for (const auto& p : pairs) cfg.apply_pair(p);
        if (active->app->count("--seed")) cfg.set("seed", std::to_string(seed));
        if (!out_dir.empty()) cfg.set("output_dir", out_dir);
        switch (cfg.command()) {
            case Command::spectrum: return cmd_spectrum(cfg);
            case Command::modulate: return cmd_modulate(cfg);
            case Command::simulate: return cmd_simulate(cfg);
            case Command::verify: return cmd_verify(cfg);
            case Command::tables: return cmd_tables(cfg);
        }
    } catch (const kslab::ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << active->app->help();
        return exit_parameter;
    } catch (const kslab::RefinementError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << active->app->help();
        return exit_parameter;
    } catch (const ConvergenceFailure& e) {
        std::cerr << "convergence failure: " << e.what() << '\n';
        return exit_convergence;
    } catch (const kslab::Error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return exit_convergence;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_parameter;
    }
    return 0;
}
