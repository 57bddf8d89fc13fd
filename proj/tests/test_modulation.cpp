#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kslab/errors.hpp"
#include "kslab/modulation.hpp"
#include "kslab/specialfun.hpp"

using namespace kslab;
using namespace kslab::modulation;

namespace {

ModulationState state_at(double nu, double beta, const Mode& mode, int N) {
    ModulationState s;
    s.tau = 1.0;
    s.log_nu = std::log(nu);
    s.log_mu = -1.0;
    s.beta = beta;
    s.a.assign(static_cast<std::size_t>(N), 0.0);
    int tied = mode.stable ? 1 : mode.ell;
    s.a[static_cast<std::size_t>(tied) - 1] = 4 * nu * nu * compatibility_value(mode, s.log_nu, beta);
    return s;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST_SUITE("modulation") {
    TEST_CASE("right-hand side at reference states") {
        double L = std::log(1e-3);
        double c = 2 * std::log(2.0) - specialfun::euler_gamma - 2;
        auto d = rhs(state_at(1e-3, 0.5, Mode::make_stable(), 3), Mode::make_stable());
        CHECK(d.log_nu == doctest::Approx(0.5 * (1 / (2 * L) + c / (4 * L * L))).epsilon(1e-13));
        CHECK(d.log_nu == doctest::Approx(-0.0393186).epsilon(1e-3));
        CHECK(d.log_mu == -0.5);
        CHECK(d.beta == 0.0);
        auto u = rhs(state_at(1e-3, 0.5, Mode::make_unstable(2), 3), Mode::make_unstable(2));
        CHECK(u.log_nu == doctest::Approx(-0.5 + 1 / (2 * L)).epsilon(1e-13));
        CHECK(u.log_nu == doctest::Approx(-0.5723939).epsilon(1e-4));
    }

    TEST_CASE("compatibility relation inverts") {
        for (double beta : {0.3, 0.5, 1.7}) {
            for (double nu : {1e-2, 1e-5, 1e-20}) {
                double L = std::log(nu);
                double b = compatibility_value(Mode::make_stable(), L, beta);
                CHECK(beta_from_compatibility(L, b) == doctest::Approx(beta).epsilon(1e-9));
            }
        }
        CHECK_THROWS_AS(compatibility_value(Mode::make_stable(), 0.1, 0.5), DomainError);
    }

    TEST_CASE("initial states sit on the compatibility manifold") {
        auto s = initial_state(Mode::make_stable(), 0.5, 10.0, 3, 0.1);
        double nu2 = s.nu() * s.nu();
        CHECK(s.a[0] / (4 * nu2) == doctest::Approx(compatibility_value(Mode::make_stable(), s.log_nu, 0.5)));
        CHECK(s.a[1] == doctest::Approx(0.1 * nu2));
        CHECK(s.log_mu == doctest::Approx(-5.0));
        double centre = 0.5 * std::log(4.0) - 0.5 * (2 + specialfun::euler_gamma) - std::sqrt(5.0);
        CHECK(s.log_nu == doctest::Approx(centre));
        auto p = initial_state(Mode::make_stable(), 0.5, 10.0, 3, 0.0, InitialVariant::plain);
        CHECK(p.log_nu == doctest::Approx(-std::sqrt(5.0)));
        auto u = initial_state(Mode::make_unstable(3), 0.5, 10.0, 3);
        CHECK(u.log_nu == doctest::Approx(-10.0));
        CHECK(u.a[2] / (4 * u.nu() * u.nu()) == doctest::Approx(compatibility_value(Mode::make_unstable(3), -10.0, 0.5)));
        CHECK_THROWS_AS(initial_state(Mode::make_unstable(4), 0.5, 10.0, 3), ParameterError);
        CHECK_THROWS_AS(initial_state(Mode::make_stable(), 3.0, 10.0, 3), ParameterError);
        CHECK_THROWS_AS(initial_state(Mode::make_stable(), 0.5, 0.1, 3), ParameterError);
        CHECK_THROWS_AS(initial_state(Mode::make_stable(), 0.5, 10.0, 0), ParameterError);
    }

    TEST_CASE("stable trajectory: beta is conserved and the prefactor settles") {
        auto s0 = initial_state(Mode::make_stable(), 0.5, 10.0, 3, 0.1);
        IntegrateOptions opt;
        opt.output_points = 200;
        auto traj = integrate(s0, Mode::make_stable(), 1e5, opt);
        REQUIRE(traj.samples.size() == 200);
        CHECK(traj.samples.back().tau == doctest::Approx(1e5));
        for (const auto& s : traj.samples) CHECK(s.beta == doctest::Approx(0.5).epsilon(1e-8));
        auto law = to_physical(traj);
        double expect = std::sqrt(2 / 0.5) * std::exp(-0.5 * (2 + specialfun::euler_gamma));
        CHECK(law.prefactor.back() == doctest::Approx(expect).epsilon(0.1));
        // dt / dtau = mu^2
        for (std::size_t i = 0; i + 1 < law.samples.size(); i += 17) {
            const auto &a = law.samples[i], &b = law.samples[i + 1];
            double rate = (std::exp(a.log_T_minus_t) - std::exp(b.log_T_minus_t)) / (b.tau - a.tau);
            CHECK(rate <= std::exp(2 * a.log_mu) * (1 + 1e-9));
            CHECK(rate >= std::exp(2 * b.log_mu) * (1 - 1e-9));
        }
        CHECK(law.T - law.samples.front().t == doctest::Approx(std::exp(law.samples.front().log_T_minus_t)));
        for (const auto& s : law.samples) CHECK(s.log_lambda == doctest::Approx(s.log_mu + s.log_nu));
    }

    TEST_CASE("modulation equations are satisfied along the computed trajectory") {
        auto s0 = initial_state(Mode::make_stable(), 0.5, 10.0, 3, 0.1);
        IntegrateOptions opt;
        opt.output_points = 400;
        auto traj = integrate(s0, Mode::make_stable(), 1e4, opt);
        auto res = mod_residuals(traj, AlphaSource::predicted);
        double worst = 0;
        for (std::size_t i = 1; i + 1 < res.size(); ++i) {
            double L = traj.samples[i].log_nu, nu2 = std::exp(2 * L);
            worst = std::max(worst, std::abs(res[i][0]) * L * L / nu2);
        }
        CHECK(worst <= 10.0);

        // moving a_1 off the manifold must show up in Mod_0
        auto bent = traj;
        for (auto& s : bent.samples) s.a[0] *= 1.1;
        auto res2 = mod_residuals(bent, AlphaSource::predicted);
        double worst2 = 0;
        for (std::size_t i = 1; i + 1 < res2.size(); ++i) {
            double L = bent.samples[i].log_nu, nu2 = std::exp(2 * L);
            worst2 = std::max(worst2, std::abs(res2[i][0]) * L * L / nu2);
        }
        CHECK(worst2 >= 10 * worst);
    }

    TEST_CASE("power-law fit recovers synthetic exponents") {
        Vec x, lam;
        for (int i = 0; i < 200; ++i) {
            double e = std::pow(10.0, -1.0 - 0.05 * i);
            x.push_back(e);
            lam.push_back(0.7 * std::pow(e, 1.5) * std::pow(std::abs(std::log(e)), -0.75));
        }
        auto f = fit_power_law(x, lam);
        CHECK(f.p == doctest::Approx(1.5).epsilon(1e-6));
        CHECK(f.q == doctest::Approx(-0.75).epsilon(1e-6));
        CHECK(f.C == doctest::Approx(0.7).epsilon(1e-6));
        CHECK(f.residual < 1e-10);
        CHECK(f.samples == 200);
        Vec short_x(x.begin(), x.begin() + 20), short_l(lam.begin(), lam.begin() + 20);
        CHECK_THROWS_AS(fit_power_law(short_x, short_l), FitError);
        Vec narrow_x, narrow_l;
        for (int i = 0; i < 50; ++i) {
            narrow_x.push_back(0.1 * std::pow(10.0, -0.01 * i));
            narrow_l.push_back(narrow_x.back());
        }
        CHECK_THROWS_AS(fit_power_law(narrow_x, narrow_l), FitError);
        lam[3] = -1;
        CHECK_THROWS_AS(fit_power_law(x, lam), FitError);
    }

    TEST_CASE("unstable law exponents") {
        for (int ell : {2, 3}) {
            auto s0 = initial_state(Mode::make_unstable(ell), 0.5, 10.0, ell);
            auto traj = integrate(s0, Mode::make_unstable(ell), 1e4);
            auto f = fit_power_law(to_physical(traj), 50.0, 2000.0);
            CHECK(f.p == doctest::Approx(ell / 2.0).epsilon(0.02));
            CHECK(f.q < 0);
        }
    }

    TEST_CASE("stable law ratio of an exact sample is one") {
        PhysicalSample s;
        s.log_T_minus_t = -30.0;
        s.log_lambda = std::log(2.0) - 0.5 * (2 + specialfun::euler_gamma) - 15.0 - std::sqrt(15.0);
        CHECK(stable_law_ratio(s) == doctest::Approx(1.0).epsilon(1e-14));
    }

    TEST_CASE("integration parameters are validated") {
        auto s0 = initial_state(Mode::make_stable(), 0.5, 10.0, 2);
        CHECK_THROWS_AS(integrate(s0, Mode::make_stable(), 5.0), ParameterError);
        IntegrateOptions bad;
        bad.output_points = 1;
        CHECK_THROWS_AS(integrate(s0, Mode::make_stable(), 100.0, bad), ParameterError);
        IntegrateOptions tight;
        tight.tolerance = 1e-30;
        CHECK_THROWS_AS(integrate(s0, Mode::make_stable(), 100.0, tight), ConvergenceError);
    }

    TEST_CASE("output files have fixed headers") {
        auto s0 = initial_state(Mode::make_stable(), 0.5, 10.0, 2);
        auto traj = integrate(s0, Mode::make_stable(), 1e4);
        std::ostringstream a, b;
        write_csv(traj, a);
        write_csv(to_physical(traj), b);
        CHECK(first_line(a.str()) == "tau,nu,beta,mu,a1,a2");
        CHECK(first_line(b.str()) == "t,T_minus_t,lambda,lambda_over_law");
    }
}
