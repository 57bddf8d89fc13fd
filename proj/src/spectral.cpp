#include "kslab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include <json.hpp>

#include "kslab/csv.hpp"
#include "kslab/errors.hpp"
#include "kslab/specialfun.hpp"

namespace kslab::spectral {

namespace {

using specialfun::Profile;
using specialfun::euler_gamma;

struct RawForm {
    Vec c, M, V;
    double rho = 0.0;
};

// single-scale form with weight (z^2 + nu^2)^2 exp(-beta z^2 / 2) / (8 z); the
// potential is the discrete one whose Gaussian-free operator annihilates the
// sampled ground state T0(z/nu) exactly
RawForm raw_form(const RadialGrid& grid, double nu, double beta, Boundary boundary) {
    const auto& x = grid.nodes();
    std::size_t n = x.size();
    auto w0 = [nu](double z) {
        double t = z * z + nu * nu;
        return t * t / (8.0 * z);
    };
    auto gauss = [beta](double z) { return std::exp(-0.5 * beta * z * z); };
    RawForm f;
    Vec c0(n - 1);
    f.c.resize(n - 1);
    for (std::size_t e = 0; e + 1 < n; ++e) {
        double zm = std::sqrt(x[e] * x[e + 1]), h = x[e + 1] - x[e];
        c0[e] = w0(zm) / h;
        f.c[e] = c0[e] * gauss(zm);
    }
    Vec T(n);
    for (std::size_t i = 0; i < n; ++i) T[i] = specialfun::eval_profile(Profile::T0, x[i], nu);
    f.M.resize(n - 2);
    f.V.resize(n - 2);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        double hs = 0.5 * (x[i + 1] - x[i - 1]);
        double m0 = w0(x[i]) * hs;
        f.M[i - 1] = m0 * gauss(x[i]);
        double flux = c0[i] * (T[i + 1] - T[i]) - c0[i - 1] * (T[i] - T[i - 1]);
        f.V[i - 1] = -flux / (m0 * T[i]);
    }
    if (boundary == Boundary::regular_dirichlet) f.rho = T[0] / T[1];
    return f;
}

linalg::Pencil pencil_of(const RawForm& f) {
    std::size_t m = f.M.size();
    linalg::Pencil p;
    p.d.resize(m);
    p.e.resize(m - 1);
    p.m = f.M;
    for (std::size_t i = 0; i < m; ++i) p.d[i] = -(f.c[i] + f.c[i + 1]) + f.V[i] * f.M[i];
    p.d[0] += f.c[0] * f.rho;
    for (std::size_t i = 0; i + 1 < m; ++i) p.e[i] = f.c[i + 1];
    return p;
}

void check_weighted_params(double nu, double beta) {
    if (!(nu >= min_weighted_nu) || nu > 0.1) throw ParameterError("weighted operator requires 1e-6 <= nu <= 0.1");
    if (!(beta >= 0.25 && beta <= 2.0)) throw ParameterError("weighted operator requires beta in [1/4, 2]");
}

void check_grid_for(const RadialGrid& grid, double nu, double beta) {
    if (grid.size() < 8) throw ResolutionError("grid has too few nodes");
    if (grid.front() > nu / 100.0 || grid.back() < 10.0 * nu || grid.min_density_per_decade(nu / 10.0, 10.0 * nu) < 8.0)
        throw ResolutionError("grid does not resolve the concentration scale nu");
    // omega_nu / zeta mass beyond the cutoff, bounded by the z^3 / 8 tail
    double Z = grid.back();
    double tail = std::exp(-0.5 * beta * Z * Z) * (beta * Z * Z + 2.0 * (1.0 + beta * nu * nu)) / (8.0 * beta * beta);
    Vec w(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        w[i] = specialfun::weight({specialfun::WeightKind::omega_nu, nu, beta}, grid[i]) / grid[i];
    double total = grid.integrate(w) + tail;
    if (tail > 1e-12 * total) throw TruncationError("outer cutoff leaves more than 1e-12 of the weighted mass");
}

double rayleigh(const linalg::Pencil& p, const Vec& g, double shift) {
    auto r = p.shifted_residual(g, shift);
    long double num = 0, den = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        num += r[i] * static_cast<long double>(g[i]);
        den += static_cast<long double>(p.m[i]) * g[i] * g[i];
    }
    return shift + static_cast<double>(num / den);
}

void project_off(Vec& g, const std::vector<EigenPair>& pairs, const Vec& m) {
    for (int pass = 0; pass < 2; ++pass)
        for (const auto& q : pairs) {
            double c = linalg::dot_w(g, q.vector, m) / linalg::dot_w(q.vector, q.vector, m);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= c * q.vector[i];
        }
}

// rows of a (possibly nonsymmetric) tridiagonal matrix X: lo[i] = X(i, i-1),
// di[i] = X(i, i), up[i] = X(i, i+1)
struct Tri {
    Vec lo, di, up;
};

// X^T D X as a symmetric band of width 2
linalg::BandSym gram(const Tri& X, const Vec& D) {
    std::size_t n = X.di.size();
    linalg::BandSym b;
    b.band.assign(3, Vec(n, 0.0));
    auto at = [&](std::size_t l, std::size_t j) -> double {
        if (j + 1 == l) return X.lo[l];
        if (j == l) return X.di[l];
        if (j == l + 1) return X.up[l];
        return 0.0;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k <= 2 && k <= i; ++k) {
            std::size_t j = i - k;
            double s = 0;
            for (std::size_t l = (i > 0 ? i - 1 : 0); l <= std::min(n - 1, j + 1); ++l) s += at(l, i) * D[l] * at(l, j);
            b.band[k][i] = s;
        }
    return b;
}

linalg::BandSym tri_band(const Vec& d, const Vec& e, std::size_t width) {
    linalg::BandSym b;
    b.band.assign(width + 1, Vec(d.size(), 0.0));
    b.band[0] = d;
    for (std::size_t i = 1; i < d.size(); ++i) b.band[1][i] = e[i - 1];
    return b;
}

linalg::BandSym add(linalg::BandSym a, const linalg::BandSym& b, double s = 1.0) {
    if (a.band.size() < b.band.size()) a.band.resize(b.band.size(), Vec(a.size(), 0.0));
    for (std::size_t k = 0; k < b.band.size(); ++k)
        for (std::size_t i = 0; i < b.size(); ++i) a.band[k][i] += s * b.band[k][i];
    return a;
}

// number of eigenvalues below x of A f = lambda B f restricted to c^T f = 0
std::size_t count_below(const linalg::BandSym& A, const linalg::BandSym& B, const Vec* c, double x) {
    linalg::BandLDLT f(add(A, B, -x));
    std::size_t neg = f.negative();
    if (!c) return neg;
    Vec u = f.solve(*c);
    double s = linalg::dot(*c, u);
    return neg + (s > 0 ? 1 : 0) - 1;
}

double smallest_eigenvalue(const linalg::BandSym& A, const linalg::BandSym& B, const Vec* c) {
    double hi = 1.0;
    while (count_below(A, B, c, hi) == 0) {
        hi *= 2.0;
        if (hi > 1e30) throw ConvergenceError("coercivity: no upper bracket");
    }
    double lo = 0.0, step = 1.0;
    while (count_below(A, B, c, lo) > 0) {
        hi = lo;
        lo -= step;
        step *= 2.0;
        if (step > 1e30) throw ConvergenceError("coercivity: no lower bracket");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++it) {
        double mid = 0.5 * (lo + hi);
        if (count_below(A, B, c, mid) > 0)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

OperatorSpec OperatorSpec::a0(Boundary b) {
    OperatorSpec s;
    s.kind = OperatorKind::A0;
    s.nu = s.nutilde = 1.0;
    s.beta = 0.0;
    s.boundary = b;
    return s;
}

OperatorSpec OperatorSpec::azeta(double nu, double beta) {
    OperatorSpec s;
    s.kind = OperatorKind::Azeta;
    s.nu = s.nutilde = nu;
    s.beta = beta;
    return s;
}

OperatorSpec OperatorSpec::abar(double nu, double nutilde, double beta) {
    OperatorSpec s;
    s.kind = OperatorKind::Abar;
    s.nu = nu;
    s.nutilde = nutilde;
    s.beta = beta;
    return s;
}

Vec SturmLiouvilleForm::interior_nodes() const {
    const auto& x = grid.nodes();
    return Vec(x.begin() + 1, x.end() - 1);
}

Vec SturmLiouvilleForm::apply(const Vec& f) const {
    Vec k = pencil.apply_K(f);
    for (std::size_t i = 0; i < k.size(); ++i) k[i] /= mass[i];
    return k;
}

double SturmLiouvilleForm::inner(const Vec& f, const Vec& g) const { return linalg::dot_w(f, g, mass); }

RadialGrid spectral_grid(double nu, double beta, int points_per_decade) {
    check_weighted_params(nu, beta);
    return make_grid(nu * 1e-3, std::sqrt(120.0 / beta), points_per_decade, nu);
}

RadialGrid a0_grid(double cutoff, int points_per_decade) { return make_grid(1e-3, cutoff, points_per_decade, 1.0); }

SturmLiouvilleForm assemble_operator(const OperatorSpec& spec, const RadialGrid& grid) {
    SturmLiouvilleForm form;
    form.grid = grid;
    form.spec = spec;
    if (grid.size() < 4) throw ResolutionError("assemble_operator: grid too small");

    if (spec.kind == OperatorKind::A0) {
        auto raw = raw_form(grid, 1.0, 0.0, spec.boundary);
        form.conductance = raw.c;
        form.potential = raw.V;
        form.mass = raw.M;
        form.inner_ratio = raw.rho;
        form.pencil = pencil_of(raw);
        return form;
    }

    check_weighted_params(spec.nu, spec.beta);
    check_grid_for(grid, spec.nu, spec.beta);
    auto raw = raw_form(grid, spec.nu, spec.beta, spec.boundary);
    if (spec.kind == OperatorKind::Azeta) {
        form.conductance = raw.c;
        form.potential = raw.V;
        form.mass = raw.M;
        form.inner_ratio = raw.rho;
        form.pencil = pencil_of(raw);
        return form;
    }

    check_weighted_params(spec.nutilde, spec.beta);
    check_grid_for(grid, spec.nutilde, spec.beta);
    auto rawt = raw_form(grid, spec.nutilde, spec.beta, spec.boundary);
    auto p = pencil_of(raw), pt = pencil_of(rawt);
    std::size_t m = p.size();
    // average of the two operators S = M^{-1} K, then the diagonal weight that
    // makes the average symmetric
    Vec sd(m), sup(m - 1), ssub(m - 1);
    for (std::size_t i = 0; i < m; ++i) sd[i] = 0.5 * (p.d[i] / p.m[i] + pt.d[i] / pt.m[i]);
    for (std::size_t i = 0; i + 1 < m; ++i) {
        sup[i] = 0.5 * (p.e[i] / p.m[i] + pt.e[i] / pt.m[i]);
        ssub[i] = 0.5 * (p.e[i] / p.m[i + 1] + pt.e[i] / pt.m[i + 1]);
    }
    Vec mb(m);
    mb[0] = std::sqrt(p.m[0] * pt.m[0]);
    for (std::size_t i = 0; i + 1 < m; ++i) mb[i + 1] = mb[i] * sup[i] / ssub[i];
    form.mass = mb;
    form.pencil.m = mb;
    form.pencil.d.resize(m);
    form.pencil.e.resize(m - 1);
    for (std::size_t i = 0; i < m; ++i) form.pencil.d[i] = mb[i] * sd[i];
    for (std::size_t i = 0; i + 1 < m; ++i) form.pencil.e[i] = mb[i] * sup[i];
    form.conductance.resize(raw.c.size());
    form.conductance.front() = mb[0] * 0.5 * (raw.c.front() / p.m[0] + rawt.c.front() / pt.m[0]);
    for (std::size_t i = 0; i + 1 < m; ++i) form.conductance[i + 1] = form.pencil.e[i];
    form.conductance.back() = mb[m - 1] * 0.5 * (raw.c.back() / p.m[m - 1] + rawt.c.back() / pt.m[m - 1]);
    form.potential.resize(m);
    for (std::size_t i = 0; i < m; ++i) form.potential[i] = 0.5 * (raw.V[i] + rawt.V[i]);
    form.inner_ratio = 0.5 * (raw.rho + rawt.rho);
    return form;
}

std::vector<EigenPair> solve_top_spectrum(const SturmLiouvilleForm& form, int k) {
    if (k < 1 || k > 12) throw ParameterError("solve_top_spectrum: k must be in [1, 12]");
    const auto& p = form.pencil;
    if (static_cast<std::size_t>(k) > p.size()) throw ParameterError("solve_top_spectrum: k exceeds unknowns");
    std::vector<EigenPair> out;
    std::vector<Vec> previous;
    for (int j = 0; j < k; ++j) {
        EigenPair e;
        double bisected = linalg::kth_largest(p, static_cast<std::size_t>(j));
        e.vector = linalg::inverse_iteration(p, bisected, previous, 200, &e.alpha);
        if (!out.empty() && !(e.alpha < out.back().alpha))
            throw ConvergenceError("solve_top_spectrum: eigenvalues not strictly separated");
        if (e.vector.front() < 0)
            for (double& v : e.vector) v = -v;
        auto r = p.shifted_residual(e.vector, e.alpha);
        long double rn = 0, vn = 0, worst = 0;
        std::size_t m = r.size();
        for (std::size_t i = 0; i < m; ++i) {
            rn += r[i] * r[i] / p.m[i];
            vn += static_cast<long double>(p.m[i]) * e.vector[i] * e.vector[i];
            long double scale = std::abs((static_cast<long double>(p.d[i]) - e.alpha * p.m[i]) * e.vector[i]);
            if (i > 0) scale += std::abs(static_cast<long double>(p.e[i - 1]) * e.vector[i - 1]);
            if (i + 1 < m) scale += std::abs(static_cast<long double>(p.e[i]) * e.vector[i + 1]);
            if (scale > 0) worst = std::max(worst, std::abs(r[i]) / scale);
        }
        e.norm_sq = static_cast<double>(vn);
        e.residual = static_cast<double>(std::sqrt(rn / vn));
        e.backward_error = static_cast<double>(worst);
        previous.push_back(e.vector);
        out.push_back(std::move(e));
    }
    return out;
}

double predicted_alpha(int n, double nu, double beta, bool refined) {
    if (n < 0) throw ParameterError("predicted_alpha: n must be nonnegative");
    if (!(nu > 0 && nu < 1)) throw DomainError("predicted_alpha: nu must lie in (0, 1)");
    if (!(beta > 0)) throw DomainError("predicted_alpha: beta must be positive");
    double L = std::log(nu);
    double a = 2.0 * beta * (1.0 - n + 1.0 / (2.0 * L));
    if (!refined) return a;
    if (n > 1) throw ParameterError("predicted_alpha: refined constant is only available for n = 0, 1");
    return a + 2.0 * beta * (std::log(2.0) - euler_gamma - n - std::log(beta)) / (4.0 * L * L);
}

double eigenfunction_norm(const SturmLiouvilleForm& form, EigenPair& pair) {
    if (form.spec.kind == OperatorKind::A0) throw ParameterError("eigenfunction_norm: needs a weighted operator");
    double nu = form.spec.nu;
    double x1 = form.grid[1];
    double target = specialfun::eval_profile(Profile::T0, x1, nu) / (nu * nu);
    double v1 = pair.vector.front();
    if (v1 == 0.0) throw ConvergenceError("eigenfunction_norm: eigenvector vanishes at the origin");
    double s = target / v1;
    for (double& v : pair.vector) v *= s;
    pair.norm_sq = form.inner(pair.vector, pair.vector);
    return pair.norm_sq;
}

double spectral_gap_check(const SturmLiouvilleForm& form, const std::vector<EigenPair>& pairs, int trials,
                          std::uint64_t seed) {
    const auto& p = form.pencil;
    std::size_t n = p.size();
    for (std::size_t a = 0; a < pairs.size(); ++a)
        for (std::size_t b = a + 1; b < pairs.size(); ++b) {
            double g = form.inner(pairs[a].vector, pairs[b].vector) /
                       std::sqrt(form.inner(pairs[a].vector, pairs[a].vector) * form.inner(pairs[b].vector, pairs[b].vector));
            if (std::abs(g) > 1e-8) throw ParameterError("spectral_gap_check: pairs are not mass-orthogonal");
        }
    if (pairs.size() >= n) throw ParameterError("spectral_gap_check: nothing left after projection");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    double worst = -std::numeric_limits<double>::infinity();
    Vec g(n);
    for (int t = 0; t < trials; ++t) {
        double amp[8];
        for (double& a : amp) a = normal(rng);
        double noise = 0.1 * std::abs(normal(rng));
        for (std::size_t i = 0; i < n; ++i) {
            double s = static_cast<double>(i + 1) / static_cast<double>(n + 1);
            double v = 0;
            for (int k = 0; k < 8; ++k) v += amp[k] * std::sin((k + 1) * M_PI * s);
            g[i] = v + noise * normal(rng);
        }
        project_off(g, pairs, p.m);
        worst = std::max(worst, rayleigh(p, g, 0.0));
    }
    // deterministic trial: the top of the projected operator
    double next = linalg::kth_largest(p, pairs.size());
    std::vector<Vec> prev;
    for (const auto& q : pairs) {
        Vec v = q.vector;
        double s = std::sqrt(form.inner(v, v));
        for (double& x : v) x /= s;
        prev.push_back(std::move(v));
    }
    Vec top = linalg::inverse_iteration(p, next, prev);
    project_off(top, pairs, p.m);
    worst = std::max(worst, rayleigh(p, top, next));
    return worst;
}

Vec eigen_stability_check(double nu, double nutilde, double beta, const RadialGrid& grid, int k) {
    check_weighted_params(nu, beta);
    double L = std::abs(std::log(nu));
    if (std::abs(nu - nutilde) > nu / L * (1.0 + 1e-12))
        throw ParameterError("eigen_stability_check: requires |nu - nutilde| <= nu / |ln nu|");
    auto a = solve_top_spectrum(assemble_operator(OperatorSpec::azeta(nu, beta), grid), k);
    auto b = solve_top_spectrum(assemble_operator(OperatorSpec::abar(nu, nutilde, beta), grid), k);
    Vec out(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(b[i].alpha - a[i].alpha) * L * L;
    return out;
}

double chi(double x) {
    if (x <= 1.0) return 1.0;
    if (x >= 2.0) return 0.0;
    double t = x - 1.0;
    return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

double coercivity_check(CoercivityKind kind, const RadialGrid& grid, double M) {
    if (!(M >= 10.0)) throw ParameterError("coercivity_check: M must be at least 10");
    if (grid.back() < 100.0 * M) throw ParameterError("coercivity_check: outer cutoff must be at least 100 M");
    Boundary bc = kind == CoercivityKind::hardy ? Boundary::dirichlet_dirichlet : Boundary::regular_dirichlet;
    auto form = assemble_operator(OperatorSpec::a0(bc), grid);
    const auto& x = grid.nodes();
    std::size_t m = form.unknowns();
    const auto& c = form.conductance;
    double rho = form.inner_ratio;

    // gradient energy sum_e g_e (f_{e+1} - f_e)^2 with the boundary closures
    auto gradient = [&](const Vec& ge) {
        Vec d(m), e(m - 1);
        for (std::size_t i = 0; i < m; ++i) d[i] = ge[i] + ge[i + 1];
        d[0] = ge[0] * (1.0 - rho) * (1.0 - rho) + ge[1];
        for (std::size_t i = 0; i + 1 < m; ++i) e[i] = -ge[i + 1];
        return tri_band(d, e, 1);
    };
    Vec zero_order(m);

    if (kind == CoercivityKind::hardy) {
        for (std::size_t i = 0; i < m; ++i) zero_order[i] = form.mass[i] / (1.0 + x[i + 1] * x[i + 1]);
        return smallest_eigenvalue(gradient(c), tri_band(zero_order, Vec(m - 1, 0.0), 1), nullptr);
    }

    Vec constraint(m);
    std::size_t support = 0;
    for (std::size_t i = 0; i < m; ++i) {
        double r = x[i + 1];
        constraint[i] = form.mass[i] * chi(r / M) * specialfun::eval_profile(Profile::T0, r);
        if (r < 2.0 * M) ++support;
    }
    double cn = std::sqrt(linalg::dot(constraint, constraint));
    if (support < 16 || !(cn > 0) || !std::isfinite(cn))
        throw ResolutionError("coercivity_check: cutoff direction is not resolved");

    const auto& K = form.pencil;
    if (kind == CoercivityKind::delta0) {
        Vec nd(m), ne(m - 1);
        for (std::size_t i = 0; i < m; ++i) nd[i] = -K.d[i];
        for (std::size_t i = 0; i + 1 < m; ++i) ne[i] = -K.e[i];
        for (std::size_t i = 0; i < m; ++i) zero_order[i] = form.mass[i] / (1.0 + x[i + 1] * x[i + 1]);
        auto B = add(gradient(c), tri_band(zero_order, Vec(m - 1, 0.0), 1));
        return smallest_eigenvalue(tri_band(nd, ne, 1), B, &constraint);
    }

    // delta1: |A0 f|^2 against the second-order weighted norm
    Tri Kt{Vec(m, 0.0), K.d, Vec(m, 0.0)};
    for (std::size_t i = 0; i + 1 < m; ++i) {
        Kt.up[i] = K.e[i];
        Kt.lo[i + 1] = K.e[i];
    }
    Vec invM(m);
    for (std::size_t i = 0; i < m; ++i) invM[i] = 1.0 / form.mass[i];
    auto A = gram(Kt, invM);

    Tri D2{Vec(m, 0.0), Vec(m, 0.0), Vec(m, 0.0)};
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t g = i + 1;
        double hm = x[g] - x[g - 1], hp = x[g + 1] - x[g], s = 2.0 / (hm + hp);
        D2.lo[i] = s / hm;
        D2.di[i] = -s * (1.0 / hm + 1.0 / hp);
        D2.up[i] = s / hp;
    }
    D2.di[0] += D2.lo[0] * rho;
    D2.lo[0] = 0.0;
    D2.up[m - 1] = 0.0;
    auto B = gram(D2, form.mass);
    Vec ge(c.size());
    for (std::size_t e = 0; e < c.size(); ++e) {
        double rm = std::sqrt(x[e] * x[e + 1]);
        ge[e] = c[e] / (1.0 + rm * rm);
    }
    B = add(B, gradient(ge));
    for (std::size_t i = 0; i < m; ++i) {
        double r = x[i + 1], lr = 0.5 * std::log1p(r * r);
        zero_order[i] = form.mass[i] / ((1.0 + r * r * r * r) * (1.0 + lr * lr));
    }
    B = add(B, tri_band(zero_order, Vec(m - 1, 0.0), 1));
    return smallest_eigenvalue(A, B, &constraint);
}

OverlapTable overlap_table(double nu, double beta, int points_per_decade) {
    check_weighted_params(nu, beta);
    double rmax = std::sqrt(120.0 / beta) / nu;
    auto grid = make_grid(1e-3, rmax, points_per_decade, 1.0);
    auto table = specialfun::build_Tj_table(1, grid);
    std::size_t n = grid.size();
    Vec e1(n), e2(n), e3(n), e4(n);
    double nu2 = nu * nu;
    for (std::size_t i = 0; i < n; ++i) {
        double r = grid[i], t = 1.0 + r * r;
        double meas = nu2 * nu2 * t * t * std::exp(-0.5 * beta * nu2 * r * r) / (8.0 * r);
        double phi0 = table.T[0][i] / nu2;
        double phi1 = phi0 + 2.0 * beta * table.T[1][i];
        double dnu = 2.0 * beta * table.Theta[1][i];
        double dbeta = 2.0 * beta * table.T[1][i];
        e1[i] = dnu * phi0 * meas;
        e2[i] = dnu * phi1 * meas;
        e3[i] = dbeta * phi0 * meas;
        e4[i] = dbeta * phi1 * meas;
    }
    double L = std::abs(std::log(nu));
    OverlapTable o;
    o.nu_phi0 = grid.integrate(e1);
    o.nu_phi1 = grid.integrate(e2) / L;
    o.beta_phi0 = grid.integrate(e3) / L;
    o.beta_phi1 = grid.integrate(e4) / (L * L);
    return o;
}

SpectrumReport spectrum_report(double nu, double beta, int k, int points_per_decade, bool refined) {
    SpectrumReport rep;
    rep.nu = nu;
    rep.beta = beta;
    rep.points_per_decade = points_per_decade;
    rep.refined = refined;
    auto grid = spectral_grid(nu, beta, points_per_decade);
    rep.nodes = grid.size();
    auto form = assemble_operator(OperatorSpec::azeta(nu, beta), grid);
    rep.computed = solve_top_spectrum(form, k);
    double L = std::log(nu);
    for (int n = 0; n < k; ++n) {
        auto& pair = rep.computed[static_cast<std::size_t>(n)];
        eigenfunction_norm(form, pair);
        rep.predicted_leading.push_back(predicted_alpha(n, nu, beta, false));
        rep.predicted_refined.push_back(refined && n <= 1 ? predicted_alpha(n, nu, beta, true)
                                                          : std::numeric_limits<double>::quiet_NaN());
        rep.residual_scaled.push_back(std::abs(pair.alpha / (2.0 * beta) - (1.0 - n + 1.0 / (2.0 * L))) * L * L);
    }
    return rep;
}

void write_csv(const SpectrumReport& report, std::ostream& out) {
    csv::write_header(out, {"n", "alpha_computed", "alpha_leading", "alpha_refined", "residual_scaled", "norm_sq"});
    for (std::size_t n = 0; n < report.computed.size(); ++n) {
        double ref = report.predicted_refined[n];
        out << n << ',' << csv::num(report.computed[n].alpha) << ',' << csv::num(report.predicted_leading[n]) << ','
            << (std::isnan(ref) ? std::string() : csv::num(ref)) << ',' << csv::num(report.residual_scaled[n]) << ','
            << csv::num(report.computed[n].norm_sq) << '\n';
    }
}

void write_json(const SpectrumReport& report, std::ostream& out) {
    nlohmann::json j;
    j["nu"] = report.nu;
    j["beta"] = report.beta;
    j["grid"] = {{"kind", "log_graded"},
                 {"points_per_decade", report.points_per_decade},
                 {"nodes", report.nodes},
                 {"zeta_min", report.nu * 1e-3},
                 {"zeta_max", std::sqrt(120.0 / report.beta)},
                 {"cluster_scale", report.nu}};
    j["refined"] = report.refined;
    auto& arr = j["eigenvalues"] = nlohmann::json::array();
    for (std::size_t n = 0; n < report.computed.size(); ++n) {
        const auto& e = report.computed[n];
        nlohmann::json row = {{"n", n},
                              {"alpha", e.alpha},
                              {"alpha_leading", report.predicted_leading[n]},
                              {"residual_scaled", report.residual_scaled[n]},
                              {"norm_sq", e.norm_sq},
                              {"residual", e.residual},
                              {"backward_error", e.backward_error}};
        if (!std::isnan(report.predicted_refined[n])) row["alpha_refined"] = report.predicted_refined[n];
        arr.push_back(row);
    }
    out << j.dump(2) << '\n';
}

}  // namespace kslab::spectral
