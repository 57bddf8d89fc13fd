#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "kslab/errors.hpp"
#include "kslab/specialfun.hpp"
#include "kslab/spectral.hpp"

using namespace kslab;
using namespace kslab::spectral;

namespace {

Eigen::VectorXd dense_spectrum(const linalg::Pencil& p) {
    auto n = static_cast<Eigen::Index>(p.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n), M = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        K(i, i) = p.d[i];
        M(i, i) = p.m[i];
        if (i + 1 < n) K(i, i + 1) = K(i + 1, i) = p.e[i];
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, M, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

double leading_law(int n, double nu, double beta) {
    return 2 * beta * (1 - n + 1 / (2 * std::log(nu)));
}

}  // namespace

TEST_SUITE("spectral") {
    TEST_CASE("top of the discrete spectrum agrees with a dense generalized eigensolver") {
        double nu = 1e-2;
        auto g = spectral_grid(nu, 0.5, 16);
        auto form = assemble_operator(OperatorSpec::azeta(nu, 0.5), g);
        auto pairs = solve_top_spectrum(form, 5);
        auto ev = dense_spectrum(form.pencil);
        auto n = ev.size();
        for (int k = 0; k < 5; ++k) CHECK(pairs[k].alpha == doctest::Approx(ev(n - 1 - k)).epsilon(1e-7));
        for (int k = 1; k < 5; ++k) CHECK(pairs[k].alpha < pairs[k - 1].alpha);
        for (const auto& p : pairs) CHECK(p.backward_error < 1e-12);
    }

    TEST_CASE("eigenvalues follow the leading law with a log correction") {
        for (double nu : {1e-2, 1e-3}) {
            auto rep = spectrum_report(nu, 0.5, 4, 32, false);
            for (int n = 0; n < 4; ++n) {
                double L = std::log(nu);
                double scaled = std::abs(rep.computed[n].alpha - leading_law(n, nu, 0.5)) * L * L;
                CHECK(scaled <= 5.0);
                CHECK(rep.residual_scaled[n] == doctest::Approx(scaled).epsilon(1e-12));
            }
        }
    }

    TEST_CASE("predicted eigenvalues") {
        double L = std::log(1e-3);
        CHECK(predicted_alpha(0, 1e-3, 0.5, false) == doctest::Approx(leading_law(0, 1e-3, 0.5)).epsilon(1e-14));
        double c0 = std::log(2.0) - specialfun::euler_gamma - 0 - std::log(0.5);
        CHECK(predicted_alpha(0, 1e-3, 0.5, true) ==
              doctest::Approx(leading_law(0, 1e-3, 0.5) + c0 / (4 * L * L)).epsilon(1e-14));
        CHECK(predicted_alpha(0, 1e-3, 0.5, false) == doctest::Approx(0.92761).epsilon(1e-5));
        CHECK(predicted_alpha(0, 1e-3, 0.5, true) == doctest::Approx(0.93185).epsilon(1e-5));
        CHECK(predicted_alpha(1, 1e-3, 0.5, true) == doctest::Approx(-0.07339).epsilon(1e-3));
        CHECK_THROWS_AS(predicted_alpha(2, 1e-3, 0.5, true), ParameterError);
        CHECK_THROWS_AS(predicted_alpha(0, 2.0, 0.5, false), DomainError);
    }

    TEST_CASE("operator parameters are validated") {
        CHECK_THROWS_AS(spectrum_report(1e-7, 0.5, 2, 32), ParameterError);
        CHECK_THROWS_AS(spectrum_report(0.5, 0.5, 2, 32), ParameterError);
        CHECK_THROWS_AS(spectrum_report(1e-2, 5.0, 2, 32), ParameterError);
        auto g = spectral_grid(1e-2, 0.5, 16);
        auto form = assemble_operator(OperatorSpec::azeta(1e-2, 0.5), g);
        CHECK_THROWS_AS(solve_top_spectrum(form, 0), ParameterError);
    }

    TEST_CASE("eigenfunction normalization matches T0 at the core") {
        double nu = 1e-4, L = std::abs(std::log(nu));
        auto rep = spectrum_report(nu, 0.5, 2, 32, false);
        CHECK(8 * rep.computed[0].norm_sq / L == doctest::Approx(1.0).epsilon(0.2));
        CHECK(4 * rep.computed[1].norm_sq / (L * L) == doctest::Approx(1.0).epsilon(0.3));
    }

    TEST_CASE("spectral gap holds for random projected trials and is seeded") {
        double nu = 1e-3;
        auto g = spectral_grid(nu, 0.5, 32);
        auto form = assemble_operator(OperatorSpec::azeta(nu, 0.5), g);
        auto pairs = solve_top_spectrum(form, 5);
        std::vector<EigenPair> low(pairs.begin(), pairs.begin() + 4);
        double a = spectral_gap_check(form, low, 50, 1);
        CHECK(a <= pairs[4].alpha + 1e-6);
        CHECK(a == spectral_gap_check(form, low, 50, 1));
        std::vector<EigenPair> none;
        CHECK(spectral_gap_check(form, none, 10, 0) == doctest::Approx(pairs[0].alpha).epsilon(1e-9));
    }

    TEST_CASE("averaged operator is close to the original one") {
        double nu = 1e-3, L = std::abs(std::log(nu));
        auto g = spectral_grid(nu, 0.5, 32);
        auto same = eigen_stability_check(nu, nu, 0.5, g, 3);
        for (double x : same) CHECK(x < 1e-8);  // eigensolver tolerance
        auto far = eigen_stability_check(nu, nu * (1 + 0.9 / L), 0.5, g, 3);
        auto near = eigen_stability_check(nu, nu * (1 + 0.25 / L), 0.5, g, 3);
        for (int n = 0; n < 3; ++n) {
            CHECK(far[n] <= 50.0);
            CHECK(near[n] < far[n]);
        }
        CHECK_THROWS_AS(eigen_stability_check(nu, 2 * nu, 0.5, g, 3), ParameterError);
    }

    TEST_CASE("cutoff function") {
        CHECK(chi(0.0) == 1.0);
        CHECK(chi(1.0) == 1.0);
        CHECK(chi(2.0) == 0.0);
        CHECK(chi(3.0) == 0.0);
        CHECK(chi(1.5) == doctest::Approx(0.5));
        double h = 1e-5;
        for (double x : {1.0, 2.0}) {
            double left = (chi(x) - chi(x - h)) / h, right = (chi(x + h) - chi(x)) / h;
            CHECK(std::abs(left - right) < 1e-3);
        }
        for (double x = 0.9; x < 2.1; x += 0.05) CHECK(chi(x + 0.05) <= chi(x));
    }

    TEST_CASE("coercivity constants are positive and grid stable") {
        auto g32 = a0_grid(4000.0, 32), g64 = a0_grid(4000.0, 64);
        using K = CoercivityKind;
        double d0 = coercivity_check(K::delta0, g32, 20), d0b = coercivity_check(K::delta0, g64, 20);
        CHECK(d0 > 0.01);
        CHECK(std::abs(d0 - d0b) < 0.1 * d0b);
        CHECK(coercivity_check(K::delta1, g32, 20) > 0);
        double h = coercivity_check(K::hardy, g32, 20), hb = coercivity_check(K::hardy, g64, 20);
        CHECK(h >= 0.2);
        CHECK(std::abs(h - hb) < 0.05 * hb);
        CHECK_THROWS_AS(coercivity_check(K::delta0, g32, 5), ParameterError);
        CHECK_THROWS_AS(coercivity_check(K::delta0, a0_grid(500.0, 32), 20), ParameterError);
    }

    TEST_CASE("overlap constants") {
        auto t = overlap_table(1e-4, 0.5, 32);
        CHECK(t.nu_phi0 == doctest::Approx(0.125).epsilon(0.15));
        CHECK(t.nu_phi1 == doctest::Approx(-0.25).epsilon(0.2));
        CHECK(t.beta_phi1 == doctest::Approx(0.25).epsilon(0.2));
        CHECK(t.beta_phi0 < 0);
    }

    TEST_CASE("report files") {
        auto rep = spectrum_report(1e-2, 0.5, 3, 32, true);
        std::ostringstream csv;
        write_csv(rep, csv);
        std::istringstream in(csv.str());
        std::string line;
        std::getline(in, line);
        CHECK(line == "n,alpha_computed,alpha_leading,alpha_refined,residual_scaled,norm_sq");
        int rows = 0;
        while (std::getline(in, line)) {
            auto cells = std::count(line.begin(), line.end(), ',');
            CHECK(cells == 5);
            bool refined_empty = line.find(",,") != std::string::npos;
            CHECK(refined_empty == (rows >= 2));
            ++rows;
        }
        CHECK(rows == 3);
        std::ostringstream js;
        write_json(rep, js);
        auto j = nlohmann::json::parse(js.str());
        CHECK(j["nu"].get<double>() == 1e-2);
        CHECK(j["eigenvalues"].size() == 3);
    }
}
