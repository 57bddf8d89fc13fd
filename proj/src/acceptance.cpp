#include "kslab/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>

#include "kslab/errors.hpp"
#include "kslab/modulation.hpp"
#include "kslab/pde.hpp"
#include "kslab/spectral.hpp"

namespace kslab::acceptance {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

constexpr double kBeta = 0.5;
const double kNus[] = {1e-2, 1e-3, 1e-4};

struct Shared {
    std::optional<pde::RunResult> supercritical;
    double supercritical_seconds = 0.0;
};

const pde::RunResult& supercritical_run(const Options& o, Shared& sh) {
    if (!sh.supercritical) {
        auto t0 = Clock::now();
        pde::GridSpec gs;
        gs.points_per_decade = o.pde_ppd;
        pde::InitialSpec is;
        is.mass_factor = 1.1;
        sh.supercritical = pde::run(pde::make_initial(is, gs), gs);
        sh.supercritical_seconds = since(t0);
    }
    return *sh.supercritical;
}

Result eigenvalue_law(const Options& o) {
    Result r;
    r.pass = true;
    for (double nu : kNus) {
        auto t0 = Clock::now();
        auto rep = spectral::spectrum_report(nu, kBeta, 4, o.spectral_ppd, true);
        double secs = since(t0);
        double worst = 0.0;
        for (int n = 0; n <= 3; ++n) worst = std::max(worst, rep.residual_scaled[static_cast<std::size_t>(n)]);
        r.pass = r.pass && worst <= 5.0 && secs <= 60.0;
        r.detail += fmt("nu=%g: ", nu) + fmt("max residual_scaled %.3f", worst) + fmt(" (%.2f s); ", secs);
    }
    r.detail += "bound 5, 60 s per nu";
    return r;
}

Result refined_correction(const Options& o) {
    Result r;
    bool refined_ok = true, growth_ok = true;
    double worst_refined = 0.0;
    double prev_leading[2] = {-1.0, -1.0};
    std::string leading_text;
    double alpha0_spot = 0.0;
    for (double nu : kNus) {
        auto rep = spectral::spectrum_report(nu, kBeta, 2, o.spectral_ppd, true);
        double L3 = std::pow(std::abs(std::log(nu)), 3);
        for (int n = 0; n <= 1; ++n) {
            double a = rep.computed[static_cast<std::size_t>(n)].alpha;
            double refined = std::abs(a - rep.predicted_refined[static_cast<std::size_t>(n)]) / (2 * kBeta) * L3;
            double leading = std::abs(a - rep.predicted_leading[static_cast<std::size_t>(n)]) / (2 * kBeta) * L3;
            worst_refined = std::max(worst_refined, refined);
            refined_ok = refined_ok && refined <= 30.0;
            growth_ok = growth_ok && leading > prev_leading[n];
            prev_leading[n] = leading;
            leading_text += fmt(" %.3f", leading);
        }
        if (nu == 1e-3) alpha0_spot = rep.computed[0].alpha;
    }
    bool spot_ok = std::abs(alpha0_spot - 0.93185) <= 3e-3;
    r.pass = refined_ok && growth_ok && spot_ok;
    r.detail = fmt("max refined*L^3 %.3f (<= 30)", worst_refined) + "; leading*L^3 (n0,n1 per nu)" + leading_text +
               (growth_ok ? " growing" : " NOT growing") + fmt("; alpha0(1e-3) = %.5f", alpha0_spot) +
               fmt(" vs 0.93185 +- 3e-3 (off by %.4f)", alpha0_spot - 0.93185);
    return r;
}

Result eigenfunction_norms(const Options& o) {
    Result r;
    double nu = 1e-4, L = std::abs(std::log(nu));
    auto rep = spectral::spectrum_report(nu, kBeta, 2, o.spectral_ppd, false);
    double n0 = 8.0 * rep.computed[0].norm_sq / L;
    double n1 = 4.0 * rep.computed[1].norm_sq / (L * L);
    r.pass = n0 >= 0.8 && n0 <= 1.2 && n1 >= 0.7 && n1 <= 1.3;
    r.detail = fmt("8|phi0|^2/|ln nu| = %.4f in [0.8, 1.2]; ", n0) + fmt("4|phi1|^2/ln^2 nu = %.4f in [0.7, 1.3]", n1);
    return r;
}

Result spectral_gap(const Options& o) {
    Result r;
    r.pass = true;
    double worst_gap = -1e300, worst_bar = -1e300, worst_stab = 0.0;
    for (double nu : kNus) {
        double L = std::abs(std::log(nu));
        double nt = nu * (1.0 + 1.0 / L);
        auto grid = spectral::spectral_grid(nu, kBeta, o.spectral_ppd);
        auto form = spectral::assemble_operator(spectral::OperatorSpec::azeta(nu, kBeta), grid);
        auto pairs = spectral::solve_top_spectrum(form, 5);
        std::vector<spectral::EigenPair> low(pairs.begin(), pairs.begin() + 4);
        double g = spectral::spectral_gap_check(form, low, 100, o.seed) - pairs[4].alpha;
        auto fbar = spectral::assemble_operator(spectral::OperatorSpec::abar(nu, nt, kBeta), grid);
        auto pbar = spectral::solve_top_spectrum(fbar, 5);
        std::vector<spectral::EigenPair> lowbar(pbar.begin(), pbar.begin() + 4);
        double gb = spectral::spectral_gap_check(fbar, lowbar, 100, o.seed) - pbar[4].alpha;
        auto stab = spectral::eigen_stability_check(nu, nt, kBeta, grid, 4);
        double s = *std::max_element(stab.begin(), stab.end());
        worst_gap = std::max(worst_gap, g);
        worst_bar = std::max(worst_bar, gb);
        worst_stab = std::max(worst_stab, s);
        r.pass = r.pass && g <= 1e-6 && gb <= 1e-6 && s <= 50.0;
    }
    r.detail = fmt("max(RQ - alpha4) %.3e", worst_gap) + fmt(", Abar %.3e (<= 1e-6)", worst_bar) +
               fmt("; max |alphabar - alpha| ln^2 nu %.4f (<= 50)", worst_stab);
    return r;
}

Result coercivity(const Options& o) {
    Result r;
    using K = spectral::CoercivityKind;
    double v[2][3];
    for (int k = 0; k < 2; ++k) {
        auto grid = spectral::a0_grid(4000.0, o.spectral_ppd * (k + 1));
        v[k][0] = spectral::coercivity_check(K::delta0, grid, 20.0);
        v[k][1] = spectral::coercivity_check(K::delta1, grid, 20.0);
        v[k][2] = spectral::coercivity_check(K::hardy, grid, 20.0);
    }
    auto rel = [&](int i) { return std::abs(v[1][i] - v[0][i]) / std::abs(v[1][i]); };
    r.pass = v[1][0] > 0.01 && v[1][1] > 0 && v[1][2] >= 0.2 && rel(0) <= 0.1 && rel(1) <= 0.1 && rel(2) <= 0.1;
    r.detail = fmt("delta0 %.5f", v[1][0]) + fmt(" (doubling %.2e)", rel(0)) + fmt("; delta1 %.4g", v[1][1]) +
               fmt(" (doubling %.2e)", rel(1)) + fmt("; hardy %.4f", v[1][2]) + fmt(" (doubling %.2e)", rel(2));
    return r;
}

Result stable_law(const Options&) {
    Result r;
    using namespace modulation;
    auto t0 = Clock::now();
    Mode mode = Mode::make_stable();
    auto traj = integrate(initial_state(mode, kBeta, 10.0, 3, 0.1), mode, 1e5);
    auto law = to_physical(traj);
    double secs = since(t0);
    double pref = law.prefactor.back();
    double worst = 0.0;
    int counted = 0;
    for (const auto& s : law.samples)
        if (std::abs(s.log_T_minus_t) >= 100.0) {
            worst = std::max(worst, std::abs(stable_law_ratio(s) - 1.0));
            ++counted;
        }
    r.pass = pref >= 0.540 && pref <= 0.562 && counted > 0 && worst <= 0.1 && secs <= 10.0;
    r.detail = fmt("nu e^{sqrt(tau/2)} at tau=1e5 = %.6f in [0.540, 0.562]", pref) +
               fmt("; max |ratio - 1| %.4f", worst) + fmt(" over %.0f samples with |ln(T-t)| >= 100", counted) +
               fmt(" (<= 0.1); %.2f s", secs);
    return r;
}

Result unstable_laws(const Options&) {
    Result r;
    r.pass = true;
    using namespace modulation;
    for (int ell = 2; ell <= 4; ++ell) {
        auto t0 = Clock::now();
        Mode mode = Mode::make_unstable(ell);
        auto traj = integrate(initial_state(mode, kBeta, 10.0, ell + 1, 0.1), mode, 2000.0);
        auto fit = fit_power_law(to_physical(traj), 50.0, 2000.0);
        double secs = since(t0);
        double p_want = ell / 2.0, q_want = -ell / (2.0 * (ell - 1));
        bool ok = std::abs(fit.p - p_want) <= 0.05 && std::abs(fit.q - q_want) <= 0.15 && secs <= 10.0;
        r.pass = r.pass && ok;
        r.detail += fmt("ell=%.0f: ", ell) + fmt("p %.4f", fit.p) + fmt(" (%.3f)", p_want) + fmt(" q %.4f", fit.q) +
                    fmt(" (%.3f)", q_want) + fmt(" %.2f s; ", secs);
    }
    r.detail += "tolerances 0.05 / 0.15";
    return r;
}

Result overlap_constants(const Options& o) {
    Result r;
    auto t = spectral::overlap_table(1e-4, kBeta, o.spectral_ppd);
    auto within = [](double v, double target, double tol) { return std::abs(v / target - 1.0) <= tol; };
    r.pass = within(t.nu_phi0, 0.125, 0.15) && within(t.nu_phi1, -0.25, 0.2) && within(t.beta_phi1, 0.25, 0.2);
    r.detail = fmt("%.5f vs 1/8 (15%%); ", t.nu_phi0) + fmt("%.5f vs -1/4 (20%%); ", t.nu_phi1) +
               fmt("%.5f vs 1/4 (20%%)", t.beta_phi1);
    return r;
}

Result pde_solver(const Options& o, Shared& sh) {
    Result r;
    auto t0 = Clock::now();

    pde::GridSpec qs;
    qs.points_per_decade = o.q_ppd;
    pde::InitialSpec qi;
    auto q0 = pde::make_initial(qi, qs);
    pde::RunOptions qo;
    qo.t_max = 1.0;
    auto qr = pde::run(q0, qs, qo);
    double drift = 0.0;
    for (std::size_t i = 0; i < q0.m.size(); ++i) drift = std::max(drift, std::abs(qr.final_field.m[i] - q0.m[i]));
    bool q_ok = drift <= 1e-4 && qr.regrids == 0;

    const auto& sr = supercritical_run(o, sh);
    double mass_drift = 0.0;
    for (const auto& s : sr.snapshots)
        mass_drift = std::max(mass_drift, std::abs(s.field.m.back() - s.field.total) / s.field.total);
    mass_drift = std::max(mass_drift, std::abs(sr.final_field.m.back() - sr.final_field.total) / sr.final_field.total);
    double lam_first = NAN;
    for (const auto& s : sr.series)
        if (std::isfinite(s.lambda)) {
            lam_first = s.lambda;
            break;
        }
    double lam_last = sr.series.back().lambda;
    double decades = std::log10(lam_first / lam_last);
    double perr = sr.series.back().profile_err;
    int increases = 0, compared = 0;
    double prev = NAN;
    for (const auto& s : sr.series) {
        if (!std::isfinite(s.lambda_sq_over_Tmt) || s.T_est_minus_t <= 0) continue;
        if (std::isfinite(prev)) {
            ++compared;
            if (s.lambda_sq_over_Tmt > prev) ++increases;
        }
        prev = s.lambda_sq_over_Tmt;
    }
    bool super_ok = sr.stop == pde::StopReason::blowup_resolved && sr.max_u0 >= 1e10 && decades >= 3.0 &&
                    perr <= 0.05 && compared > 0 && increases == 0 && mass_drift <= 1e-10;

    pde::GridSpec gs;
    gs.points_per_decade = o.pde_ppd;
    pde::InitialSpec si;
    si.mass_factor = 0.9;
    auto s0 = pde::make_initial(si, gs);
    double u00 = pde::central_density(s0);
    auto sub = pde::run(s0, gs);
    bool sub_ok = sub.stop != pde::StopReason::blowup_resolved && sub.max_u0 <= 2.0 * u00;

    double secs = since(t0);
    r.pass = q_ok && super_ok && sub_ok && secs <= 300.0;
    r.detail = fmt("Q drift %.2e (<= 1e-4)", drift) + fmt(" at ppd %.0f", o.q_ppd) +
               "; supercritical: stop " + pde::to_string(sr.stop) + fmt(", max u0 %.3g", sr.max_u0) +
               fmt(", lambda %.3g", lam_first) + fmt(" -> %.3g", lam_last) + fmt(" (%.2f decades)", decades) +
               fmt(", profile err %.4f", perr) + fmt(", lambda^2/(T-t) increases %.0f", increases) +
               fmt("/%.0f", compared) + fmt(", mass drift %.1e", mass_drift) + "; subcritical: stop " +
               pde::to_string(sub.stop) + fmt(", max u0 %.3g", sub.max_u0) + fmt(" (u0(0) %.3g)", u00) +
               fmt("; %.1f s", secs);
    return r;
}

Result cross_module(const Options& o, Shared& sh) {
    Result r;
    double worst_nu = 0.0, worst_a2 = 0.0, worst_other = 0.0;
    bool synth_ok = true;
    for (double nus : {1e-2, 1e-3}) {
        auto zg = make_grid(nus * 1e-3, std::sqrt(240.0), 64, nus);
        auto phi2 = pde::leading_eigenfunction(zg, 2, nus, kBeta);
        std::vector<double> m(zg.size());
        for (std::size_t i = 0; i < zg.size(); ++i) {
            double y = zg[i] / nus;
            m[i] = 4 * y * y / (1 + y * y) + 0.01 * phi2[i];
        }
        auto p = pde::project_remainder(zg, m, kBeta, 3, 1.3 * nus);
        double enu = std::abs(p.nu / nus - 1.0), ea = std::abs(p.a[1] - 0.01);
        double eo = std::max(std::abs(p.a[0]), std::abs(p.a[2]));
        worst_nu = std::max(worst_nu, enu);
        worst_a2 = std::max(worst_a2, ea);
        worst_other = std::max(worst_other, eo);
        synth_ok = synth_ok && p.ok && enu <= 1e-4 && ea <= 1e-4;
    }

    const auto& sr = supercritical_run(o, sh);
    std::vector<double> y;
    for (const auto& p : sr.projections)
        if (p.ok && std::isfinite(p.me_norm)) y.push_back(std::log(p.me_norm / (p.nu * p.nu)));
    double slope = NAN;
    if (y.size() >= 2) {
        double n = static_cast<double>(y.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            double x = static_cast<double>(i);
            sx += x;
            sy += y[i];
            sxx += x * x;
            sxy += x * y[i];
        }
        slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    bool live_ok = y.size() >= 3 && slope < 0 && y.back() < y.front();
    r.pass = synth_ok && live_ok;
    r.detail = fmt("synthetic: |nu/nu* - 1| %.1e", worst_nu) + fmt(", |a2 - 0.01| %.1e", worst_a2) +
               fmt(", other a_n %.1e (<= 1e-4)", worst_other) + fmt("; live: %.0f", static_cast<double>(y.size())) +
               fmt(" of %.0f snapshots projected", static_cast<double>(sr.projections.size()));
    if (!y.empty()) r.detail += fmt(", |m_eps|/nu^2 first %.3g", std::exp(y.front())) + fmt(" last %.3g", std::exp(y.back()));
    if (std::isfinite(slope)) r.detail += fmt(", log-slope per snapshot %.3f", slope);
    r.detail += " (needs >= 3 and a downward trend)";
    return r;
}

}  // namespace

const char* criterion_name(int id) {
    static const char* names[] = {"eigenvalue-law",    "refined-correction", "eigenfunction-norms", "spectral-gap",
                                  "coercivity",        "stable-law",         "unstable-laws",       "overlap-constants",
                                  "pde-solver",        "cross-module-projection"};
    if (id < 1 || id > criterion_count) throw ParameterError("unknown acceptance item " + std::to_string(id));
    return names[id - 1];
}

std::vector<Result> run(const Options& o, std::ostream* progress) {
    Shared sh;
    std::vector<Result> out;
    for (int id : o.criteria) {
        criterion_name(id);
        auto t0 = Clock::now();
        Result r;
        try {
            switch (id) {
                case 1: r = eigenvalue_law(o); break;
                case 2: r = refined_correction(o); break;
                case 3: r = eigenfunction_norms(o); break;
                case 4: r = spectral_gap(o); break;
                case 5: r = coercivity(o); break;
                case 6: r = stable_law(o); break;
                case 7: r = unstable_laws(o); break;
                case 8: r = overlap_constants(o); break;
                case 9: r = pde_solver(o, sh); break;
                case 10: r = cross_module(o, sh); break;
            }
        } catch (const Error& e) {
            r.pass = false;
            r.detail = std::string("error: ") + e.what();
        }
        r.id = id;
        r.name = criterion_name(id);
        r.seconds = since(t0);
        if (progress) *progress << format_line(r) << std::endl;
        out.push_back(std::move(r));
    }
    return out;
}

std::string format_line(const Result& r) {
    return std::string(r.pass ? "[PASS] " : "[FAIL] ") + std::to_string(r.id) + " " + r.name + ": " + r.detail;
}

}  // namespace kslab::acceptance
