#include "kslab/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "kslab/csv.hpp"
#include "kslab/errors.hpp"
#include "kslab/linalg.hpp"
#include "kslab/specialfun.hpp"

namespace kslab::pde {

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

double Q(double y) { return 4.0 * y * y / (1.0 + y * y); }

// m_0 = sum_k w_k m_k, k = 1..3, from the fit m = u0 r^2 / 2
struct Closure {
    double w[3];
    double inv_sum_r4;
};

Closure closure_of(const RadialGrid& g) {
    double s = 0;
    for (int k = 1; k <= 3; ++k) s += std::pow(g[static_cast<std::size_t>(k)], 4);
    Closure c;
    c.inv_sum_r4 = 1.0 / s;
    for (int k = 1; k <= 3; ++k) {
        double r = g[static_cast<std::size_t>(k)];
        c.w[k - 1] = g[0] * g[0] * r * r / s;
    }
    return c;
}

void apply_closure(PartialMassField& f) {
    auto c = closure_of(f.grid);
    f.m[0] = c.w[0] * f.m[1] + c.w[1] * f.m[2] + c.w[2] * f.m[3];
}

// 3-point weights in s = ln r at interior node i: first and second derivative
struct Stencil {
    double d1[3], d2[3];
};

Stencil stencil(const RadialGrid& g, std::size_t i) {
    double hm = std::log(g[i] / g[i - 1]), hp = std::log(g[i + 1] / g[i]);
    Stencil s;
    s.d1[0] = -hp / (hm * (hm + hp));
    s.d1[1] = (hp - hm) / (hm * hp);
    s.d1[2] = hm / (hp * (hm + hp));
    s.d2[0] = 2.0 / (hm * (hm + hp));
    s.d2[1] = -2.0 / (hm * hp);
    s.d2[2] = 2.0 / (hp * (hm + hp));
    return s;
}

// monotone cubic Hermite (Fritsch-Carlson) through (x, y) evaluated at t
double hermite(const Vec& x, const Vec& y, std::size_t i, double t) {
    std::size_t n = x.size();
    auto secant = [&](std::size_t k) { return (y[k + 1] - y[k]) / (x[k + 1] - x[k]); };
    auto slope = [&](std::size_t k) {
        if (k == 0) return secant(0);
        if (k == n - 1) return secant(n - 2);
        double a = secant(k - 1), b = secant(k);
        if (a * b <= 0) return 0.0;
        double h0 = x[k] - x[k - 1], h1 = x[k + 1] - x[k];
        double w1 = 2 * h1 + h0, w2 = h1 + 2 * h0;
        return (w1 + w2) / (w1 / a + w2 / b);
    };
    double h = x[i + 1] - x[i];
    double s = (t - x[i]) / h;
    double m0 = slope(i), m1 = slope(i + 1);
    double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    return h00 * y[i] + h10 * h * m0 + h01 * y[i + 1] + h11 * h * m1;
}

Vec solve_small(std::vector<Vec> A, Vec b) {
    std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(A[i][k]) > std::abs(A[p][k])) p = i;
        if (!(std::abs(A[p][k]) > 0)) throw ConvergenceError("project_remainder: singular Gram matrix");
        std::swap(A[p], A[k]);
        std::swap(b[p], b[k]);
        for (std::size_t i = k + 1; i < n; ++i) {
            double f = A[i][k] / A[k][k];
            for (std::size_t j = k; j < n; ++j) A[i][j] -= f * A[k][j];
            b[i] -= f * b[k];
        }
    }
    Vec x(n);
    for (std::size_t k = n; k-- > 0;) {
        double s = b[k];
        for (std::size_t j = k + 1; j < n; ++j) s -= A[k][j] * x[j];
        x[k] = s / A[k][k];
    }
    return x;
}

struct ProjectionAt {
    Vec a;
    Vec me;
    double f0 = 0.0;  // <m_eps, phi0> / |phi0|
    double me_norm = 0.0;
    double phi0_norm = 0.0;
    double q_norm = 0.0;
};

ProjectionAt project_at(const RadialGrid& zg, const Vec& mw, double beta, int N, double nu) {
    std::size_t n = zg.size();
    auto rgrid = zg.scaled(1.0 / nu);
    auto table = specialfun::build_Tj_table(N, rgrid);
    std::vector<Vec> phi(static_cast<std::size_t>(N) + 1, Vec(n, 0.0));
    for (int k = 0; k <= N; ++k)
        for (int j = 0; j <= k; ++j) {
            double c = specialfun::c_coefficient(k, j) * std::pow(beta, j) * std::pow(nu, 2 * j - 2);
            for (std::size_t i = 0; i < n; ++i) phi[static_cast<std::size_t>(k)][i] += c * table.T[static_cast<std::size_t>(j)][i];
        }
    Vec w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = specialfun::weight({specialfun::WeightKind::omega_nu, nu, beta}, zg[i]) / zg[i];
    auto q = zg.quadrature_weights();
    auto ip = [&](const Vec& a, const Vec& b) {
        long double s = 0;
        for (std::size_t i = 0; i < n; ++i) s += static_cast<long double>(q[i]) * w[i] * a[i] * b[i];
        return static_cast<double>(s);
    };
    Vec d(n), qn(n);
    for (std::size_t i = 0; i < n; ++i) {
        qn[i] = Q(zg[i] / nu);
        d[i] = mw[i] - qn[i];
    }
    ProjectionAt p;
    p.q_norm = std::sqrt(ip(qn, qn));
    if (N > 0) {
        std::size_t M = static_cast<std::size_t>(N);
        Vec scale(M);
        for (std::size_t k = 0; k < M; ++k) scale[k] = 1.0 / std::sqrt(ip(phi[k + 1], phi[k + 1]));
        std::vector<Vec> G(M, Vec(M));
        Vec rhs(M);
        for (std::size_t k = 0; k < M; ++k) {
            rhs[k] = ip(d, phi[k + 1]) * scale[k];
            for (std::size_t l = 0; l < M; ++l) G[k][l] = ip(phi[k + 1], phi[l + 1]) * scale[k] * scale[l];
        }
        auto y = solve_small(G, rhs);
        p.a.resize(M);
        for (std::size_t k = 0; k < M; ++k) {
            p.a[k] = y[k] * scale[k];
            for (std::size_t i = 0; i < n; ++i) d[i] -= p.a[k] * phi[k + 1][i];
        }
    }
    p.me = d;
    p.phi0_norm = std::sqrt(ip(phi[0], phi[0]));
    p.f0 = ip(d, phi[0]) / p.phi0_norm;
    p.me_norm = std::sqrt(std::max(0.0, ip(d, d)));
    return p;
}

}  // namespace

RadialGrid make_pde_grid(const GridSpec& spec, double cluster_scale) {
    if (!(spec.r_floor > 0) || !(spec.r_max > spec.r_floor)) throw ParameterError("pde grid: need 0 < r_floor < r_max");
    if (!(cluster_scale >= 100.0 * spec.r_floor)) throw ResolutionError("pde grid: scale below 100 r_floor");
    if (!(cluster_scale < spec.r_max)) throw ParameterError("pde grid: scale beyond r_max");
    auto g = make_grid(spec.r_floor, spec.r_max, spec.points_per_decade, cluster_scale);
    if (g.size() < 8) throw ResolutionError("pde grid: too few nodes");
    return g;
}

const char* to_string(Preset p) { return p == Preset::scaled_Q ? "scaled_Q" : "Q_plus_bump"; }

Preset preset_from_string(const std::string& s) {
    if (s == "scaled_Q") return Preset::scaled_Q;
    if (s == "Q_plus_bump") return Preset::Q_plus_bump;
    throw ParameterError("unknown preset '" + s + "'");
}

PartialMassField make_initial(const InitialSpec& spec, const GridSpec& gs) {
    if (!(spec.lambda0 > 0)) throw ParameterError("make_initial: lambda0 must be positive");
    if (!(spec.mass_factor > 0)) throw ParameterError("make_initial: mass_factor must be positive");
    if (spec.preset == Preset::Q_plus_bump && (!(spec.amp >= 0) || !(spec.width > 0)))
        throw ParameterError("make_initial: bump needs amp >= 0 and width > 0");
    PartialMassField f;
    f.grid = make_pde_grid(gs, spec.lambda0);
    std::size_t n = f.grid.size();
    f.m.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double r = f.grid[i], y = r / spec.lambda0;
        if (spec.preset == Preset::scaled_Q)
            f.m[i] = spec.mass_factor * Q(y);
        else
            f.m[i] = Q(y) - spec.amp * std::expm1(-(r * r) / (spec.width * spec.width));
    }
    f.total = spec.preset == Preset::scaled_Q ? 4.0 * spec.mass_factor : 4.0 + spec.amp;
    f.m[n - 1] = f.total;
    f.t = 0.0;
    return f;
}

double central_density(const PartialMassField& f) {
    auto c = closure_of(f.grid);
    double s = 0;
    for (std::size_t k = 1; k <= 3; ++k) s += f.m[k] * f.grid[k] * f.grid[k];
    return 2.0 * s * c.inv_sum_r4;
}

double flux_time_bound(const PartialMassField& f, double cfl) {
    double bound = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < f.grid.size(); ++i) {
        double h = std::min(std::log(f.grid[i] / f.grid[i - 1]), std::log(f.grid[i + 1] / f.grid[i]));
        double m = std::abs(f.m[i]);
        if (m > 0) bound = std::min(bound, f.grid[i] * f.grid[i] * h / m);
    }
    return cfl * bound;
}

bool step(PartialMassField& f, double dt, bool nonlinear) {
    std::size_t n = f.grid.size();
    if (n < 6) throw ResolutionError("step: grid too small");
    if (!(dt > 0)) throw ParameterError("step: dt must be positive");
    if (nonlinear && dt > flux_time_bound(f, 1.0)) return false;
    std::size_t u = n - 2;  // unknowns at nodes 1..n-2
    Vec sub(u - 1), diag(u), sup(u - 1), rhs(u);
    double lower0 = 0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        auto s = stencil(f.grid, i);
        double r2 = f.grid[i] * f.grid[i];
        double l = (s.d2[0] - 2.0 * s.d1[0]) / r2, d = (s.d2[1] - 2.0 * s.d1[1]) / r2, p = (s.d2[2] - 2.0 * s.d1[2]) / r2;
        std::size_t k = i - 1;
        double b = f.m[i];
        if (nonlinear) b += dt * f.m[i] * (s.d1[0] * f.m[i - 1] + s.d1[1] * f.m[i] + s.d1[2] * f.m[i + 1]) / r2;
        diag[k] = 1.0 - dt * d;
        if (k > 0) sub[k - 1] = -dt * l;
        else lower0 = -dt * l;
        if (k + 1 < u) sup[k] = -dt * p;
        else b += dt * p * f.total;
        rhs[k] = b;
    }
    // node 0 is sum w_k m_k: fold it into row 1, then clear the m_3 entry with row 2
    auto c = closure_of(f.grid);
    diag[0] += lower0 * c.w[0];
    sup[0] += lower0 * c.w[1];
    double a13 = lower0 * c.w[2];
    double factor = a13 / sup[1];
    diag[0] -= factor * sub[0];
    sup[0] -= factor * diag[1];
    rhs[0] -= factor * rhs[1];
    auto x = linalg::solve_tridiagonal(sub, diag, sup, rhs);
    for (std::size_t k = 0; k < u; ++k) f.m[k + 1] = x[k];
    f.m[n - 1] = f.total;
    apply_closure(f);
    f.t += dt;
    return true;
}

Scale extract_scale(const PartialMassField& f) {
    Scale s;
    double acc = 0;
    for (std::size_t i = 0; i < 3; ++i) acc += 2.0 * f.m[i] / (f.grid[i] * f.grid[i]);
    s.u0 = acc / 3.0;
    s.lambda = kNaN;
    for (std::size_t i = 0; i + 1 < f.grid.size(); ++i) {
        if (f.m[i] < 2.0 && f.m[i + 1] >= 2.0) {
            double th = (2.0 - f.m[i]) / (f.m[i + 1] - f.m[i]);
            s.lambda = f.grid[i] + th * (f.grid[i + 1] - f.grid[i]);
            s.concentrated = true;
            break;
        }
    }
    return s;
}

double profile_error(const PartialMassField& f, double lambda) {
    if (!(lambda > 0)) return kNaN;
    double e = 0;
    for (std::size_t i = 0; i < f.grid.size() && f.grid[i] <= 10.0 * lambda; ++i)
        e = std::max(e, std::abs(f.m[i] / Q(f.grid[i] / lambda) - 1.0));
    return e;
}

bool needs_regrid(const PartialMassField& f, double lambda) {
    const auto& x = f.grid.nodes();
    if (!(lambda > x.front() && lambda < x.back())) return true;
    auto it = std::upper_bound(x.begin(), x.end(), lambda);
    std::size_t i = static_cast<std::size_t>(it - x.begin()) - 1;
    return lambda < 20.0 * (x[i + 1] - x[i]);
}

PartialMassField regrid(const PartialMassField& f, const RadialGrid& g) {
    if (std::abs(g.front() - f.grid.front()) > 1e-14 * f.grid.front() ||
        std::abs(g.back() - f.grid.back()) > 1e-14 * f.grid.back())
        throw ParameterError("regrid: the new grid must keep both end points");
    std::size_t n = f.grid.size();
    Vec lr(n), lm(n);
    bool positive = true;
    for (std::size_t i = 0; i < n; ++i) {
        lr[i] = std::log(f.grid[i]);
        positive = positive && f.m[i] > 0;
        lm[i] = positive ? std::log(f.m[i]) : 0.0;
    }
    const auto& x = f.grid.nodes();
    PartialMassField out;
    out.grid = g;
    out.t = f.t;
    out.total = f.total;
    out.m.resize(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) {
        double r = g[j];
        long hit = f.grid.find_node(r);
        if (hit >= 0) {
            out.m[j] = f.m[static_cast<std::size_t>(hit)];
            continue;
        }
        auto it = std::upper_bound(x.begin(), x.end(), r);
        std::size_t i = std::min(static_cast<std::size_t>(it - x.begin()) - 1, n - 2);
        double lo = std::min(f.m[i], f.m[i + 1]), hi = std::max(f.m[i], f.m[i + 1]);
        double v = kNaN;
        if (positive) v = std::exp(f.grid.interpolate(lm, r));
        if (!(v >= lo && v <= hi)) v = positive ? std::exp(hermite(lr, lm, i, std::log(r))) : hermite(lr, f.m, i, std::log(r));
        out.m[j] = std::clamp(v, lo, hi);
    }
    out.m.back() = f.total;
    return out;
}

PartialMassField adapt(const PartialMassField& f, double lambda, const GridSpec& spec) {
    return regrid(f, make_pde_grid(spec, lambda / 4.0));
}

Vec leading_eigenfunction(const RadialGrid& zg, int n, double nu, double beta) {
    if (n < 0) throw ParameterError("leading_eigenfunction: n must be nonnegative");
    auto table = specialfun::build_Tj_table(n, zg.scaled(1.0 / nu));
    Vec phi(zg.size(), 0.0);
    for (int j = 0; j <= n; ++j) {
        double c = specialfun::c_coefficient(n, j) * std::pow(beta, j) * std::pow(nu, 2 * j - 2);
        for (std::size_t i = 0; i < zg.size(); ++i) phi[i] += c * table.T[static_cast<std::size_t>(j)][i];
    }
    return phi;
}

RemainderProjection project_remainder(const RadialGrid& zg, const Vec& mw, double beta, int N, double nu_guess) {
    if (mw.size() != zg.size()) throw ParameterError("project_remainder: size mismatch");
    if (N < 0) throw ParameterError("project_remainder: N must be nonnegative");
    if (!(beta > 0)) throw ParameterError("project_remainder: beta must be positive");
    if (!(nu_guess > 0)) throw ParameterError("project_remainder: nu guess must be positive");
    double lo = std::log(nu_guess / 4.0), hi = std::log(4.0 * nu_guess);
    if (!(std::exp(lo) > 10.0 * zg.front() && std::exp(hi) < zg.back() / 10.0))
        throw ResolutionError("project_remainder: zeta grid does not bracket the search interval");
    // the functional can have several roots in the interval, so scan it and
    // bisect the sign change closest to the guess
    const int scan = 24;
    double centre = std::log(nu_guess);
    Vec xs(scan + 1), fs(scan + 1);
    for (int k = 0; k <= scan; ++k) {
        xs[k] = lo + (hi - lo) * k / scan;
        fs[k] = project_at(zg, mw, beta, N, std::exp(xs[k])).f0;
    }
    int best = -1;
    double best_dist = 0.0;
    for (int k = 0; k <= scan; ++k) {
        bool root = fs[k] == 0.0;
        bool change = k < scan && fs[k] != 0.0 && fs[k + 1] != 0.0 && (fs[k] > 0) != (fs[k + 1] > 0);
        if (!root && !change) continue;
        double x = root ? xs[k] : 0.5 * (xs[k] + xs[k + 1]);
        if (best < 0 || std::abs(x - centre) < best_dist) {
            best = k;
            best_dist = std::abs(x - centre);
        }
    }
    if (best < 0)
        throw ConvergenceError("project_remainder: no sign change of the orthogonality functional in [nu/4, 4 nu]");
    lo = xs[best];
    hi = fs[best] == 0.0 ? lo : xs[best + 1];
    bool lo_pos = fs[best] > 0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::abs(lo); ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        auto fm = project_at(zg, mw, beta, N, std::exp(mid));
        if (fm.f0 == 0.0) {
            lo = hi = mid;
            break;
        }
        if ((fm.f0 > 0) == lo_pos) lo = mid;
        else hi = mid;
    }
    double nu = std::exp(0.5 * (lo + hi));
    auto p = project_at(zg, mw, beta, N, nu);
    RemainderProjection r;
    r.nu = nu;
    r.a = p.a;
    r.me_norm = p.me_norm;
    // a remainder at rounding level has no meaningful direction
    r.orthogonality = p.me_norm > 1e-12 * p.q_norm ? std::abs(p.f0) / p.me_norm : 0.0;
    return r;
}

RemainderProjection project_remainder(const PartialMassField& f, double T_est, double beta, int N) {
    if (!(T_est > f.t)) throw ParameterError("project_remainder: T_est must lie after the field time");
    auto sc = extract_scale(f);
    if (!sc.concentrated) throw ParameterError("project_remainder: field is not concentrated");
    double mu = std::sqrt(2.0 * beta * (T_est - f.t));
    auto r = project_remainder(f.grid.scaled(1.0 / mu), f.m, beta, N, sc.lambda / mu);
    r.t = f.t;
    return r;
}

const char* to_string(StopReason s) {
    switch (s) {
        case StopReason::blowup_resolved: return "blowup-resolved";
        case StopReason::horizon: return "horizon";
        case StopReason::subcritical: return "subcritical";
    }
    return "";
}

double estimate_blowup_time(const std::vector<ScaleSample>& series) {
    if (series.size() < 2) return kNaN;
    std::size_t i0 = series.size() - 1;
    const auto& a = series[i0 - 1];
    const auto& b = series[i0];
    double slope = (1.0 / b.u0 - 1.0 / a.u0) / (b.t - a.t);
    if (!(slope < 0)) return kNaN;
    double linear = b.t + (1.0 / b.u0) / -slope;

    // records where u0 was half and a quarter of its last value
    auto back_by_half = [&](std::size_t i) {
        std::size_t j = i;
        while (j > 0 && series[j].u0 > series[i].u0 / 2.0) --j;
        return j;
    };
    std::size_t i1 = back_by_half(i0), i2 = back_by_half(i1);
    if (i2 == i1 || i1 == i0 || !(series[i2].u0 <= series[i1].u0 / 2.0)) return linear;
    auto mismatch = [&](double T) {
        auto log_slope = [&](std::size_t p, std::size_t q) {
            return (std::log(series[q].u0) - std::log(series[p].u0)) /
                   (std::log(T - series[p].t) - std::log(T - series[q].t));
        };
        return log_slope(i2, i1) - log_slope(i1, i0);
    };
    double lin_gap = linear - b.t;
    double lo = b.t + 1e-3 * lin_gap, hi = b.t + 10.0 * lin_gap;
    double flo = mismatch(lo);
    if (!(flo * mismatch(hi) < 0)) return linear;
    for (int k = 0; k < 200 && hi - lo > 1e-15 * hi; ++k) {
        double mid = 0.5 * (lo + hi);
        double fm = mismatch(mid);
        if (flo * fm <= 0) {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    return 0.5 * (lo + hi);
}

RunResult run(const PartialMassField& initial, const GridSpec& gs, const RunOptions& o) {
    if (!(o.cfl > 0 && o.cfl <= 1)) throw ParameterError("run: cfl must lie in (0, 1]");
    if (!(o.t_max > initial.t)) throw ParameterError("run: t_max must exceed the initial time");
    if (!(o.record_growth > 1)) throw ParameterError("run: record_growth must exceed 1");
    RunResult res;
    PartialMassField f = initial;
    apply_closure(f);
    double u0_init = central_density(f);
    double last_rec_u0 = 0, last_rec_t = -1e300;
    double next_snapshot = u0_init * o.snapshot_factor;
    auto record = [&](const Scale& sc) {
        ScaleSample s;
        s.t = f.t;
        s.u0 = sc.u0;
        s.lambda = sc.lambda;
        s.profile_err = sc.concentrated ? profile_error(f, sc.lambda) : kNaN;
        res.series.push_back(s);
        last_rec_u0 = sc.u0;
        last_rec_t = f.t;
    };
    while (true) {
        auto sc = extract_scale(f);
        res.max_u0 = std::max(res.max_u0, sc.u0);
        bool rec = sc.u0 >= last_rec_u0 * o.record_growth || sc.u0 <= last_rec_u0 / o.record_growth ||
                   f.t - last_rec_t >= o.record_dt;
        if (sc.u0 >= o.u0_cap || (sc.concentrated && sc.lambda < 100.0 * gs.r_floor)) {
            record(sc);
            res.stop = StopReason::blowup_resolved;
            break;
        }
        if (f.t >= o.t_max) {
            record(sc);
            res.stop = StopReason::horizon;
            break;
        }
        if (sc.u0 < o.decay_stop * u0_init) {
            record(sc);
            res.stop = StopReason::subcritical;
            break;
        }
        if (rec) record(sc);
        if (sc.u0 >= next_snapshot && sc.concentrated) {
            res.snapshots.push_back({sc.u0, sc.lambda, f});
            while (next_snapshot <= sc.u0) next_snapshot *= o.snapshot_factor;
        }
        if (sc.concentrated && needs_regrid(f, sc.lambda) && sc.lambda / 4.0 >= 100.0 * gs.r_floor) {
            f = adapt(f, sc.lambda, gs);
            ++res.regrids;
        }
        double dt = std::min(flux_time_bound(f, o.cfl), o.dt_u0 / std::max(sc.u0, 1e-300));
        dt = std::min(dt, o.t_max - f.t);
        if (!step(f, dt, o.nonlinear)) throw ConvergenceError("run: step rejected at the flux bound");
        ++res.steps;
        for (std::size_t i = 0; i + 1 < f.m.size(); ++i)
            if (f.m[i + 1] < f.m[i]) {
                ++res.monotonicity_violations;
                break;
            }
    }
    res.T_est = kNaN;
    if (res.stop == StopReason::blowup_resolved) {
        res.T_est = estimate_blowup_time(res.series);
        for (auto& s : res.series) {
            s.T_est_minus_t = res.T_est - s.t;
            s.lambda_sq_over_Tmt = s.lambda * s.lambda / s.T_est_minus_t;
        }
        for (const auto& snap : res.snapshots) {
            RemainderProjection p;
            try {
                p = project_remainder(snap.field, res.T_est, o.projection_beta, o.projection_modes);
            } catch (const Error&) {
                p.t = snap.field.t;
                p.nu = kNaN;
                p.me_norm = kNaN;
                p.ok = false;
            }
            res.projections.push_back(p);
        }
    } else {
        for (auto& s : res.series) s.T_est_minus_t = s.lambda_sq_over_Tmt = kNaN;
    }
    res.final_field = f;
    return res;
}

namespace {

std::string cell(double v) { return std::isnan(v) ? std::string() : csv::num(v); }

}  // namespace

void write_csv(const std::vector<ScaleSample>& series, std::ostream& out) {
    csv::write_header(out, {"t", "u0", "lambda", "T_est_minus_t", "lambda_sq_over_Tmt", "profile_err"});
    for (const auto& s : series)
        out << cell(s.t) << ',' << cell(s.u0) << ',' << cell(s.lambda) << ',' << cell(s.T_est_minus_t) << ','
            << cell(s.lambda_sq_over_Tmt) << ',' << cell(s.profile_err) << '\n';
}

void write_csv(const PartialMassField& f, std::ostream& out) {
    csv::write_header(out, {"r", "m"});
    for (std::size_t i = 0; i < f.grid.size(); ++i) csv::write_row(out, {f.grid[i], f.m[i]});
}

void write_csv(const std::vector<RemainderProjection>& projections, std::ostream& out) {
    std::size_t N = 0;
    for (const auto& p : projections) N = std::max(N, p.a.size());
    std::vector<std::string> head{"t", "nu", "me_norm", "me_norm_over_nu_sq"};
    for (std::size_t k = 0; k < N; ++k) head.push_back("a" + std::to_string(k + 1));
    csv::write_header(out, head);
    for (const auto& p : projections) {
        out << cell(p.t) << ',' << cell(p.nu) << ',' << cell(p.me_norm) << ',' << cell(p.me_norm / (p.nu * p.nu));
        for (std::size_t k = 0; k < N; ++k) out << ',' << (k < p.a.size() ? cell(p.a[k]) : std::string());
        out << '\n';
    }
}

}  // namespace kslab::pde
