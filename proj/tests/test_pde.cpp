#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kslab/errors.hpp"
#include "kslab/pde.hpp"
#include "kslab/specialfun.hpp"

using namespace kslab;
using namespace kslab::pde;

namespace {

double Qexact(double y) { return 4 * y * y / (1 + y * y); }

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST_SUITE("pde") {
    TEST_CASE("initial presets") {
        GridSpec gs;
        auto f = make_initial({Preset::scaled_Q, 0.5, 1.1}, gs);
        CHECK(f.total == doctest::Approx(4.4));
        CHECK(f.m.back() == f.total);
        CHECK(f.grid.find_node(0.5) >= 0);
        CHECK(central_density(f) == doctest::Approx(1.1 * 8 / 0.25).epsilon(1e-6));
        auto b = make_initial({Preset::Q_plus_bump, 1.0, 1.0, 0.3, 2.0}, gs);
        CHECK(b.total == doctest::Approx(4.3));
        for (std::size_t i = 0; i < b.grid.size(); i += 29) {
            double r = b.grid[i];
            CHECK(b.m[i] == doctest::Approx(Qexact(r) + 0.3 * (1 - std::exp(-r * r / 4))).epsilon(1e-12));
        }
        CHECK(central_density(b) == doctest::Approx(8.0 + 2 * 0.3 / 4).epsilon(1e-6));
        CHECK_THROWS_AS(make_initial({Preset::scaled_Q, -1.0}, gs), ParameterError);
        CHECK_THROWS_AS(make_initial({Preset::Q_plus_bump, 1.0, 1.0, 0.1, 0.0}, gs), ParameterError);
        CHECK_THROWS_AS(make_pde_grid(gs, 1e-7), ResolutionError);
    }

    TEST_CASE("preset names round trip") {
        for (auto p : {Preset::scaled_Q, Preset::Q_plus_bump}) CHECK(preset_from_string(to_string(p)) == p);
        CHECK_THROWS_AS(preset_from_string("gaussian"), ParameterError);
        CHECK(std::string(to_string(StopReason::blowup_resolved)) != to_string(StopReason::subcritical));
    }

    TEST_CASE("linear part reproduces the heat kernel mass") {
        // m = M (1 - e^{-r^2 / (4 (t + 1))}) solves m_t = m_rr - m_r / r
        GridSpec gs;
        PartialMassField f;
        f.grid = make_pde_grid(gs, 1.0);
        const double M = 3.0;
        f.total = M;
        f.m.resize(f.grid.size());
        for (std::size_t i = 0; i < f.grid.size(); ++i) f.m[i] = -M * std::expm1(-f.grid[i] * f.grid[i] / 4);
        f.m.back() = M;
        const double dt = 1e-3;
        for (int k = 0; k < 1000; ++k) REQUIRE(step(f, dt, false));
        f.t = 1.0;
        double worst = 0;
        for (std::size_t i = 0; i < f.grid.size(); ++i) {
            double r = f.grid[i];
            worst = std::max(worst, std::abs(f.m[i] + M * std::expm1(-r * r / 8)));
        }
        CHECK(worst < 1e-3 * M);
        CHECK(f.m.back() == M);
    }

    TEST_CASE("Q is stationary under the full flow") {
        GridSpec gs;
        gs.points_per_decade = 64;
        auto f = make_initial({Preset::scaled_Q, 1.0, 1.0}, gs);
        auto m0 = f.m;
        double dt = 0.5 * flux_time_bound(f, 1.0);
        for (int k = 0; k < 50; ++k) REQUIRE(step(f, dt, true));
        double worst = 0;
        for (std::size_t i = 0; i < f.m.size(); ++i) worst = std::max(worst, std::abs(f.m[i] - m0[i]));
        CHECK(worst < 1e-3);
        CHECK(f.m.back() == 4.0);
    }

    TEST_CASE("steps above the flux bound are refused") {
        auto f = make_initial({Preset::scaled_Q, 0.01, 1.1}, GridSpec{});
        auto m0 = f.m;
        double bound = flux_time_bound(f, 1.0);
        CHECK(bound > 0);
        CHECK_FALSE(step(f, 2 * bound, true));
        CHECK(f.m == m0);
        CHECK(flux_time_bound(f, 0.5) == doctest::Approx(0.5 * bound));
        CHECK_THROWS_AS(step(f, -1.0, true), ParameterError);
    }

    TEST_CASE("scale extraction and profile error on an exact rescaled Q") {
        for (double lam : {1.0, 1e-2, 1e-4}) {
            auto f = make_initial({Preset::scaled_Q, lam, 1.0}, GridSpec{});
            auto s = extract_scale(f);
            CHECK(s.lambda == doctest::Approx(lam).epsilon(1e-6));
            CHECK(s.u0 == doctest::Approx(8 / (lam * lam)).epsilon(1e-4));
            CHECK(profile_error(f, lam) < 1e-10);
            CHECK(profile_error(f, 1.2 * lam) > 0.1);
            CHECK_FALSE(needs_regrid(f, lam));
        }
        auto f = make_initial({Preset::scaled_Q, 1.0, 0.4}, GridSpec{});
        CHECK(std::isnan(extract_scale(f).lambda));
        CHECK(needs_regrid(make_initial({Preset::scaled_Q, 1.0, 1.0}, GridSpec{}), 1e-5));
    }

    TEST_CASE("regrid keeps the field accurate and monotone") {
        GridSpec gs;
        auto f = make_initial({Preset::scaled_Q, 1e-3, 1.0}, gs);
        auto g = adapt(f, 1e-3, gs);
        REQUIRE(g.grid.front() == f.grid.front());
        REQUIRE(g.grid.back() == f.grid.back());
        CHECK(g.grid.find_node(2.5e-4) >= 0);
        double worst = 0;
        for (std::size_t i = 1; i < g.grid.size(); ++i) {
            double y = g.grid[i] / 1e-3;
            worst = std::max(worst, std::abs(g.m[i] / Qexact(y) - 1));
            CHECK(g.m[i] >= g.m[i - 1]);
        }
        CHECK(worst < 1e-6);
        CHECK(g.total == f.total);
        CHECK(g.m.back() == f.total);
        auto shrunk = make_pde_grid({1e-6, 1e4, 32}, 1e-3);
        CHECK_THROWS_AS(regrid(f, shrunk), ParameterError);
    }

    TEST_CASE("blow-up time of a synthetic power law") {
        for (double p : {1.0, 1.1}) {
            const double T = 2.5, c = 0.3;
            std::vector<ScaleSample> s;
            for (int k = 0; k < 400; ++k) {
                ScaleSample x;
                double u0 = 10 * std::pow(1.02, k);
                x.u0 = u0;
                x.t = T - std::pow(1 / (c * u0), 1 / p);
                s.push_back(x);
            }
            double T_est = estimate_blowup_time(s);
            double tail = T - s.back().t;
            CHECK(std::abs(T_est - T) < 1e-6 * tail);
        }
    }

    TEST_CASE("leading eigenfunction n = 0 is the rescaled T0") {
        double nu = 1e-2;
        auto zg = make_grid(nu * 1e-3, 10.0, 32, nu);
        auto phi = leading_eigenfunction(zg, 0, nu, 0.5);
        for (std::size_t i = 0; i < zg.size(); i += 23)
            CHECK(phi[i] == doctest::Approx(specialfun::eval_profile(specialfun::Profile::T0, zg[i], nu) / (nu * nu))
                                .epsilon(1e-12));
        CHECK_THROWS_AS(leading_eigenfunction(zg, -1, nu, 0.5), ParameterError);
    }

    TEST_CASE("projection recovers a synthetic remainder") {
        double nus = 5e-3;
        auto zg = make_grid(nus * 1e-3, std::sqrt(240.0), 64, nus);
        auto phi1 = leading_eigenfunction(zg, 1, nus, 0.5);
        auto phi2 = leading_eigenfunction(zg, 2, nus, 0.5);
        std::vector<double> m(zg.size());
        // a mixed remainder gives the orthogonality functional more than one root in the interval
        for (std::size_t i = 0; i < zg.size(); ++i) m[i] = Qexact(zg[i] / nus) + 0.01 * phi1[i] + 0.01 * phi2[i];
        auto p = project_remainder(zg, m, 0.5, 2, 0.8 * nus);
        CHECK(p.ok);
        CHECK(p.nu == doctest::Approx(nus).epsilon(1e-8));
        CHECK(p.a[0] == doctest::Approx(0.01).epsilon(1e-8));
        CHECK(p.a[1] == doctest::Approx(0.01).epsilon(1e-8));
        CHECK(p.me_norm < 1e-10 * nus * nus);
        for (std::size_t i = 0; i < zg.size(); ++i) m[i] = Qexact(zg[i] / nus);
        CHECK_THROWS_AS(project_remainder(zg, m, 0.5, 2, 20 * nus), ConvergenceError);
        CHECK_THROWS_AS(project_remainder(zg, m, 0.5, 2, 1.0), ResolutionError);
    }

    TEST_CASE("subcritical data disperse") {
        RunOptions o;
        o.t_max = 1e4;
        auto f = make_initial({Preset::scaled_Q, 1.0, 0.9}, GridSpec{});
        auto r = run(f, GridSpec{}, o);
        CHECK(r.stop == StopReason::subcritical);
        CHECK(std::isnan(r.T_est));
        CHECK(r.max_u0 <= 2 * central_density(f));
        CHECK(r.final_field.m.back() == f.total);
        CHECK(r.monotonicity_violations == 0);
        for (std::size_t i = 1; i < r.series.size(); ++i) CHECK(r.series[i].t > r.series[i - 1].t);
    }

    TEST_CASE("run parameters are validated") {
        auto f = make_initial({Preset::scaled_Q, 1.0, 1.1}, GridSpec{});
        RunOptions o;
        o.cfl = 1.5;
        CHECK_THROWS_AS(run(f, GridSpec{}, o), ParameterError);
        o = RunOptions{};
        o.record_growth = 1.0;
        CHECK_THROWS_AS(run(f, GridSpec{}, o), ParameterError);
    }

    TEST_CASE("output files have fixed headers") {
        std::ostringstream a, b, c;
        write_csv(std::vector<ScaleSample>{{}}, a);
        CHECK(first_line(a.str()) == "t,u0,lambda,T_est_minus_t,lambda_sq_over_Tmt,profile_err");
        write_csv(make_initial({}, GridSpec{}), b);
        CHECK(first_line(b.str()) == "r,m");
        RemainderProjection p;
        p.nu = 0.1;
        p.a = {1.0, 2.0};
        write_csv(std::vector<RemainderProjection>{p}, c);
        CHECK(first_line(c.str()) == "t,nu,me_norm,me_norm_over_nu_sq,a1,a2");
    }
}
