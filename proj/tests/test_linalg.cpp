#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "kslab/linalg.hpp"

using namespace kslab::linalg;

namespace {

Pencil random_pencil(std::size_t n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Pencil p;
    p.d.resize(n);
    p.e.resize(n - 1);
    p.m.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        p.d[i] = 4.0 * u(rng);
        p.m[i] = 0.5 + std::abs(u(rng));
    }
    for (auto& x : p.e) x = u(rng);
    return p;
}

Eigen::VectorXd oracle_eigenvalues(const Pencil& p) {
    auto n = static_cast<Eigen::Index>(p.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n), M = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        K(i, i) = p.d[i];
        M(i, i) = p.m[i];
        if (i + 1 < n) K(i, i + 1) = K(i + 1, i) = p.e[i];
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, M);
    return es.eigenvalues();  // ascending
}

}  // namespace

TEST_SUITE("linalg") {
    TEST_CASE("Sturm bisection matches a dense generalized eigensolver") {
        auto p = random_pencil(40, 7);
        auto ev = oracle_eigenvalues(p);
        for (std::size_t k = 0; k < 40; k += 3) {
            double want = ev(39 - static_cast<Eigen::Index>(k));
            CHECK(kth_largest(p, k) == doctest::Approx(want).epsilon(1e-11));
        }
        CHECK(count_above(p, ev(20) - 1e-9) == 20);
        CHECK(count_above(p, ev(39) + 1e-9) == 0);
    }

    TEST_CASE("inverse iteration gives M-orthonormal eigenvectors") {
        auto p = random_pencil(30, 11);
        std::vector<Vec> prev;
        for (std::size_t k = 0; k < 4; ++k) {
            double a = kth_largest(p, k);
            double rq = 0;
            auto v = inverse_iteration(p, a, prev, 200, &rq);
            CHECK(dot_w(v, v, p.m) == doctest::Approx(1.0).epsilon(1e-12));
            for (const auto& w : prev) CHECK(std::abs(dot_w(v, w, p.m)) < 1e-10);
            auto r = p.shifted_residual(v, rq);
            long double s = 0;
            for (auto x : r) s += x * x;
            CHECK(std::sqrt(static_cast<double>(s)) < 1e-10);
            CHECK(rq == doctest::Approx(a).epsilon(1e-12));
            prev.push_back(v);
        }
    }

    TEST_CASE("tridiagonal solve agrees with a dense solve") {
        std::mt19937 rng(3);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        const int n = 25;
        Vec sub(n - 1), diag(n), sup(n - 1), rhs(n);
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd b(n);
        for (int i = 0; i < n; ++i) {
            diag[i] = u(rng);
            rhs[i] = b(i) = u(rng);
            A(i, i) = diag[i];
            if (i + 1 < n) {
                sub[i] = u(rng);
                sup[i] = u(rng);
                A(i + 1, i) = sub[i];
                A(i, i + 1) = sup[i];
            }
        }
        auto x = solve_tridiagonal(sub, diag, sup, rhs);
        Eigen::VectorXd ref = A.partialPivLu().solve(b);
        for (int i = 0; i < n; ++i) CHECK(x[i] == doctest::Approx(ref(i)).epsilon(1e-10));
    }

    TEST_CASE("band LDLT counts negative eigenvalues and solves") {
        std::mt19937 rng(5);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        const int n = 30, w = 2;
        BandSym a;
        a.band.assign(w + 1, Vec(n, 0.0));
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k <= w && k <= i; ++k) {
                double v = k == 0 ? 3.0 * u(rng) : u(rng);
                a.band[k][i] = v;
                A(i, i - k) = A(i - k, i) = v;
            }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
        std::size_t neg = 0;
        for (int i = 0; i < n; ++i) neg += es.eigenvalues()(i) < 0;
        BandLDLT f(a);
        CHECK(f.negative() == neg);
        Vec rhs(n);
        Eigen::VectorXd b(n);
        for (int i = 0; i < n; ++i) rhs[i] = b(i) = u(rng);
        auto x = f.solve(rhs);
        Eigen::VectorXd ref = A.fullPivLu().solve(b);
        for (int i = 0; i < n; ++i) CHECK(x[i] == doctest::Approx(ref(i)).epsilon(1e-8));
        auto y = a.apply(x);
        for (int i = 0; i < n; ++i) CHECK(y[i] == doctest::Approx(rhs[i]).epsilon(1e-9));
    }
}
