#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kslab/errors.hpp"
#include "kslab/grid.hpp"
#include "kslab/specialfun.hpp"

using namespace kslab;
using namespace kslab::specialfun;

TEST_SUITE("specialfun") {
    TEST_CASE("closed-form profiles") {
        CHECK(eval_profile(Profile::U, 1.0) == doctest::Approx(2.0));
        CHECK(eval_profile(Profile::Q, 1.0) == doctest::Approx(2.0));
        CHECK(eval_profile(Profile::T0, 1.0) == doctest::Approx(0.25));
        CHECK(eval_profile(Profile::Q, 3.0, 0.01) == doctest::Approx(eval_profile(Profile::Q, 300.0)));
        CHECK(eval_profile(Profile::U, 3e-3, 1e-3) == doctest::Approx(eval_profile(Profile::U, 3.0) * 1e6));
        CHECK(eval_profile(Profile::psitilde0, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
        CHECK_THROWS_AS(eval_profile(Profile::U, -1.0), DomainError);
        CHECK_THROWS_AS(eval_profile(Profile::Q, 1.0, 0.0), DomainError);
    }

    TEST_CASE("Q is a stationary partial mass") {
        // Q'' - Q'/r + Q Q'/r = 0, derivatives by central differences
        for (double r : {0.05, 0.3, 1.0, 2.5, 40.0}) {
            double h = 1e-4 * r;
            auto q = [](double x) { return eval_profile(Profile::Q, x); };
            double d1 = (q(r + h) - q(r - h)) / (2 * h);
            double d2 = (q(r + h) - 2 * q(r) + q(r - h)) / (h * h);
            CHECK(std::abs(d2 - d1 / r + q(r) * d1 / r) < 1e-5 * (std::abs(d2) + std::abs(d1 / r)));
        }
    }

    TEST_CASE("r derivatives agree with finite differences") {
        for (double r : {0.2, 1.0, 7.0}) {
            double h = 1e-5 * r;
            double fd = r * (eval_profile(Profile::T0, r + h) - eval_profile(Profile::T0, r - h)) / (2 * h);
            CHECK(r_dT0(r) == doctest::Approx(fd).epsilon(1e-8));
            fd = r * (eval_profile(Profile::psitilde0, r + h) - eval_profile(Profile::psitilde0, r - h)) / (2 * h);
            CHECK(r_dpsitilde0(r) == doctest::Approx(fd).epsilon(1e-7));
        }
    }

    TEST_CASE("weights") {
        CHECK(weight({WeightKind::omega_0}, 1.0) == doctest::Approx(0.5));
        CHECK(weight({WeightKind::omega_tilde, 1.0, 0.5}, 1.0) == doctest::Approx(std::exp(-0.25)));
        double nu = 1e-2, z = 0.3;
        double expect = std::pow(nu * nu + z * z, 2) / 8.0 * std::exp(-0.25 * z * z);
        CHECK(weight({WeightKind::omega_nu, nu, 0.5}, z) == doctest::Approx(expect).epsilon(1e-14));
        CHECK(weight({WeightKind::rho_0, 1.0, 0.5}, 2.0) == doctest::Approx(std::exp(-1.0)));
    }

    TEST_CASE("dhat recursion matches its closed form exactly") {
        // (-1)^j 2^{1-2j} / (j ((j-1)!)^2)
        for (int j = 1; j <= 12; ++j) {
            __int128 fact = 1;
            for (int k = 2; k < j; ++k) fact *= k;
            Rational closed{(j % 2 ? -1 : 1), (__int128(1) << (2 * j - 1)) * j * fact * fact};
            CHECK(dhat_exact(j) == closed);
        }
        CHECK(dhat(2) == doctest::Approx(1.0 / 16.0));
        CHECK(to_string(dhat_exact(1)) == "-1/2");
        CHECK_THROWS_AS(dhat_exact(0), ParameterError);
    }

    TEST_CASE("c coefficients") {
        CHECK(c_coefficient(2, 2) == 8.0);
        CHECK(c_coefficient(3, 0) == 1.0);
        CHECK(c_coefficient(3, 2) == 24.0);
        CHECK(c_coefficient(1, 2) == 0.0);
    }

    TEST_CASE("Tj table: A0 T1 = -T0 and the large-r asymptotics") {
        auto g = make_grid(1e-4, 200.0, 64, 1.0);
        auto t = build_Tj_table(3, g);
        // A0 g = g'' - g'/r + (Q g)'/r with derivatives from nonuniform stencils
        auto d1 = derivative3(g, t.T[1]);
        auto d2 = derivative3(g, d1);
        std::vector<double> qg(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) qg[i] = eval_profile(Profile::Q, g[i]) * t.T[1][i];
        auto dqg = derivative3(g, qg);
        for (std::size_t i = 10; i + 10 < g.size(); i += 13) {
            double r = g[i];
            if (r < 0.05 || r > 50) continue;
            double a0 = d2[i] - d1[i] / r + dqg[i] / r;
            CHECK(std::abs(a0 + t.T[0][i]) < 2e-3 * std::max(t.T[0][i], 1e-3));
        }
        // oracle: adaptive quadrature of the explicit inverse at r = 100
        CHECK(t.T_at(1, 100.0) == doctest::Approx(-1.8044610360621927).epsilon(1e-8));
        CHECK(std::abs(t.T_at(1, 100.0) + 0.5 * std::log(100.0) - 0.5) < 5e-3);
        for (double r : {50.0, 100.0, 150.0}) CHECK(t.Theta_at(1, r) == doctest::Approx(0.5).epsilon(0.05));
        // Theta_1 = -r T1'
        for (std::size_t i = 20; i + 20 < g.size(); i += 31)
            CHECK(std::abs(t.Theta[1][i] + g[i] * d1[i]) < 5e-4 * std::max(1.0, std::abs(t.Theta[1][i])));
        // T2 / r^2 grows like dhat_2 ln r
        double slope = (t.T_at(2, 150.0) / 22500.0 - t.T_at(2, 50.0) / 2500.0) / std::log(3.0);
        CHECK(slope == doctest::Approx(dhat(2)).epsilon(0.05));
    }

    TEST_CASE("A0 inverse against a closed form") {
        // f = r^2 (the small-r behaviour the inverse assumes): int_0^r z f = r^4/4 and
        // int z^{-1} (z^4 + 4 z^2 ln z - 1) f dz = z^6/6 + z^4 ln z - z^4/4 - z^2/2
        auto G = [](double z) {
            double z2 = z * z, z4 = z2 * z2;
            return z4 * z2 / 6 + z4 * std::log(z) - z4 / 4 - z2 / 2;
        };
        auto worst_error = [&](int ppd) {
            auto g = make_grid(1e-4, 1.0, ppd, 0.1);
            std::vector<double> f(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) f[i] = g[i] * g[i];
            auto inv = apply_A0_inverse(g, f);
            double worst = 0;
            for (std::size_t i = 1; i + 1 < g.size(); ++i) {
                double r = g[i];
                double want = 0.5 * eval_profile(Profile::psi0, r) * (G(1.0) - G(r)) +
                              0.5 * eval_profile(Profile::psitilde0, r) * r * r * r * r / 4;
                worst = std::max(worst, std::abs(inv[i] / want - 1));
            }
            return worst;
        };
        double e64 = worst_error(64), e128 = worst_error(128);
        CHECK(e64 < 1e-6);
        CHECK(e128 < e64 / 30);  // sixth order in the index coordinate
        auto g = make_grid(1e-4, 1.0, 16, 0.1);
        std::vector<double> bad(g.size(), 1.0);
        bad[3] = NAN;
        CHECK_THROWS_AS(apply_A0_inverse(g, bad), QuadratureDivergence);
    }

    TEST_CASE("Tj table CSV header") {
        auto g = make_grid(1e-2, 10.0, 16, 1.0);
        std::ostringstream out;
        write_csv(build_Tj_table(2, g), out);
        std::string header = out.str().substr(0, out.str().find('\n'));
        CHECK(header == "r,T0,T1,T2,Theta0,Theta1,Theta2");
    }
}
