#include "kslab/modulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <ostream>

#include "kslab/csv.hpp"
#include "kslab/errors.hpp"
#include "kslab/spectral.hpp"
#include "kslab/specialfun.hpp"

namespace kslab::modulation {

namespace {

using specialfun::euler_gamma;
const double kLn2 = std::log(2.0);

// d/dL of compatibility_value at frozen beta
double compatibility_slope(const Mode& mode, double L, double beta) {
    if (!mode.stable) return -1.0 / (2.0 * L * L);
    double c = kLn2 - euler_gamma - 1.0 - std::log(beta);
    return -1.0 / (2.0 * L * L) - c / (2.0 * L * L * L);
}

int tied_mode(const Mode& mode) { return mode.stable ? 1 : mode.ell; }

void check_mode(const Mode& mode, std::size_t N) {
    if (!mode.stable && mode.ell < 2) throw ParameterError("unstable mode needs ell >= 2");
    if (static_cast<std::size_t>(tied_mode(mode)) > N) throw ParameterError("state must carry a_ell");
}

// internal vector: [ln nu, ln mu, b = a_tied / (4 nu^2), free a_n...]
struct Packed {
    Vec y;
    std::vector<int> free;  // mode numbers of the free amplitudes
};

Packed pack(const ModulationState& s, const Mode& mode) {
    Packed p;
    int tied = tied_mode(mode);
    p.y = {s.log_nu, s.log_mu, compatibility_value(mode, s.log_nu, s.beta)};
    for (std::size_t i = 0; i < s.a.size(); ++i) {
        int n = static_cast<int>(i) + 1;
        if (n == tied) continue;
        p.free.push_back(n);
        p.y.push_back(s.a[i]);
    }
    return p;
}

Vec derivative(const Vec& y, const std::vector<int>& free, const Mode& mode, double beta) {
    double L = y[0];
    if (!(L < 0)) throw DomainError("modulation rhs: nu >= 1 makes ln nu singular");
    Vec dy(y.size());
    if (mode.stable)
        dy[0] = beta * (1.0 / (2.0 * L) + (kLn2 - euler_gamma - 2.0 - std::log(beta)) / (4.0 * L * L));
    else
        dy[0] = beta * (1.0 - mode.ell) + beta * mode.ell / (2.0 * L);
    dy[1] = -beta;
    dy[2] = compatibility_slope(mode, L, beta) * dy[0];
    for (std::size_t k = 0; k < free.size(); ++k) dy[3 + k] = alpha_closure(free[k], L, beta) * y[3 + k];
    return dy;
}

Vec rk4(const Vec& y, double h, const std::vector<int>& free, const Mode& mode, double beta) {
    auto axpy = [](const Vec& a, double s, const Vec& b) {
        Vec r(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + s * b[i];
        return r;
    };
    Vec k1 = derivative(y, free, mode, beta);
    Vec k2 = derivative(axpy(y, 0.5 * h, k1), free, mode, beta);
    Vec k3 = derivative(axpy(y, 0.5 * h, k2), free, mode, beta);
    Vec k4 = derivative(axpy(y, h, k3), free, mode, beta);
    Vec r(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return r;
}

ModulationState unpack(const Vec& y, const std::vector<int>& free, const Mode& mode, double tau, double beta,
                       std::size_t N) {
    ModulationState s;
    s.tau = tau;
    s.log_nu = y[0];
    s.log_mu = y[1];
    double b = y[2];
    if (mode.stable) {
        s.beta = beta_from_compatibility(y[0], b);
    } else {
        s.beta = beta;
        b = compatibility_value(mode, y[0], beta);
    }
    s.a.assign(N, 0.0);
    s.a[static_cast<std::size_t>(tied_mode(mode)) - 1] = 4.0 * std::exp(2.0 * y[0]) * b;
    for (std::size_t k = 0; k < free.size(); ++k) s.a[static_cast<std::size_t>(free[k]) - 1] = y[3 + k];
    return s;
}

// derivative of samples v at index i from the 3-point nonuniform stencil
double d3(const Vec& t, const Vec& v, std::size_t i) {
    std::size_t n = t.size();
    std::size_t j = i == 0 ? 1 : (i + 1 == n ? n - 2 : i);
    double h0 = t[j] - t[j - 1], h1 = t[j + 1] - t[j];
    double x = t[i] - t[j];
    // derivative of the quadratic through (t[j-1], t[j], t[j+1]) at t[i]
    double c0 = (2.0 * x - h1) / (h0 * (h0 + h1));
    double c1 = (h1 - h0 - 2.0 * x) / (h0 * h1);
    double c2 = (2.0 * x + h0) / (h1 * (h0 + h1));
    return c0 * v[j - 1] + c1 * v[j] + c2 * v[j + 1];
}

}  // namespace

double ModulationState::nu() const { return std::exp(log_nu); }
double ModulationState::mu() const { return std::exp(log_mu); }

double compatibility_value(const Mode& mode, double log_nu, double beta) {
    double L = log_nu;
    if (!(L < 0)) throw DomainError("compatibility: nu must be below 1");
    double v = -1.0 + 1.0 / (2.0 * L);
    if (mode.stable) v += (kLn2 - euler_gamma - 1.0 - std::log(beta)) / (4.0 * L * L);
    return v;
}

double beta_from_compatibility(double log_nu, double b1) {
    double L = log_nu;
    return std::exp(kLn2 - euler_gamma - 1.0 - 4.0 * L * L * (b1 + 1.0 - 1.0 / (2.0 * L)));
}

double alpha_closure(int n, double L, double beta) {
    double a = 2.0 * beta * (1.0 - n + 1.0 / (2.0 * L));
    if (n <= 1) a += 2.0 * beta * (kLn2 - euler_gamma - n - std::log(beta)) / (4.0 * L * L);
    return a;
}

Derivatives rhs(const ModulationState& state, const Mode& mode) {
    check_mode(mode, state.a.size());
    if (!(state.log_nu < 0)) throw DomainError("modulation rhs: nu >= 1 makes ln nu singular");
    if (!(state.beta >= 0.25 && state.beta <= 2.0)) throw ParameterError("modulation rhs: beta outside [1/4, 2]");
    Packed p = pack(state, mode);
    Vec dy = derivative(p.y, p.free, mode, state.beta);
    Derivatives d;
    d.log_nu = dy[0];
    d.log_mu = dy[1];
    d.beta = 0.0;
    d.a.assign(state.a.size(), 0.0);
    int tied = tied_mode(mode);
    double a_tied = state.a[static_cast<std::size_t>(tied) - 1];
    d.a[static_cast<std::size_t>(tied) - 1] = 2.0 * dy[0] * a_tied + 4.0 * std::exp(2.0 * state.log_nu) * dy[2];
    for (std::size_t k = 0; k < p.free.size(); ++k) d.a[static_cast<std::size_t>(p.free[k]) - 1] = dy[3 + k];
    return d;
}

ModulationState initial_state(const Mode& mode, double beta0, double tau0, int N, double amplitude,
                              InitialVariant variant) {
    if (N < 1) throw ParameterError("initial_state: N must be at least 1");
    check_mode(mode, static_cast<std::size_t>(N));
    if (!(beta0 >= 0.25 && beta0 <= 2.0)) throw ParameterError("initial_state: beta0 outside [1/4, 2]");
    if (!(tau0 > 0)) throw ParameterError("initial_state: tau0 must be positive");
    ModulationState s;
    s.tau = tau0;
    s.beta = beta0;
    s.log_mu = -beta0 * tau0;
    if (mode.stable) {
        s.log_nu = -std::sqrt(beta0 * tau0);
        if (variant == InitialVariant::centered) s.log_nu += 0.5 * std::log(2.0 / beta0) - 0.5 * (2.0 + euler_gamma);
    } else {
        s.log_nu = -beta0 * (mode.ell - 1) * tau0;
    }
    if (!(s.log_nu < std::log(0.2))) throw ParameterError("initial_state: nu0 must be below 0.2");
    double nu2 = std::exp(2.0 * s.log_nu);
    s.a.assign(static_cast<std::size_t>(N), amplitude * nu2);
    s.a[static_cast<std::size_t>(tied_mode(mode)) - 1] = 4.0 * nu2 * compatibility_value(mode, s.log_nu, beta0);
    return s;
}

ModulationTrajectory integrate(const ModulationState& initial, const Mode& mode, double tau_end,
                               const IntegrateOptions& options) {
    std::size_t N = initial.a.size();
    check_mode(mode, N);
    if (!(tau_end > initial.tau)) throw ParameterError("integrate: tau_end must exceed the initial time");
    if (options.output_points < 2) throw ParameterError("integrate: need at least 2 output points");
    if (!(options.tolerance > 0)) throw ParameterError("integrate: tolerance must be positive");
    double tied_a = initial.a[static_cast<std::size_t>(tied_mode(mode)) - 1];
    double expected = compatibility_value(mode, initial.log_nu, initial.beta);
    double got = tied_a / (4.0 * std::exp(2.0 * initial.log_nu));
    if (std::abs(got - expected) > 1e-10 * std::max(1.0, std::abs(expected)))
        throw ParameterError("integrate: initial state violates the compatibility condition");

    ModulationTrajectory traj;
    traj.mode = mode;
    Packed p = pack(initial, mode);
    Vec y = p.y;
    double beta = initial.beta;
    double tau = initial.tau;
    traj.samples.push_back(unpack(y, p.free, mode, tau, beta, N));

    std::vector<double> outs(static_cast<std::size_t>(options.output_points));
    double l0 = std::log(initial.tau), l1 = std::log(tau_end);
    for (std::size_t i = 0; i < outs.size(); ++i)
        outs[i] = std::exp(l0 + (l1 - l0) * static_cast<double>(i) / static_cast<double>(outs.size() - 1));
    outs.back() = tau_end;

    double h = 1e-2;
    const double tol = options.tolerance;
    for (std::size_t oi = 1; oi < outs.size(); ++oi) {
        double target = outs[oi];
        while (tau < target) {
            bool last = false;
            if (tau + h >= target) {
                h = target - tau;
                last = true;
            }
            if (!last && h < options.min_step) {
                char msg[96];
                std::snprintf(msg, sizeof msg, "integrate: step size underflow at tau=%g, nu=%g", tau, std::exp(y[0]));
                throw ConvergenceError(msg);
            }
            Vec big = rk4(y, h, p.free, mode, beta);
            Vec half = rk4(y, 0.5 * h, p.free, mode, beta);
            Vec small = rk4(half, 0.5 * h, p.free, mode, beta);
            double ratio = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) {
                double err = std::abs(small[i] - big[i]) / 15.0;
                double scale = i < 3 ? tol : tol * std::max(std::abs(small[i]), 1e-300);
                ratio = std::max(ratio, err / scale);
            }
            if (!std::isfinite(ratio)) ratio = 1e10;
            if (ratio <= 1.0) {
                for (std::size_t i = 0; i < y.size(); ++i) y[i] = small[i] + (small[i] - big[i]) / 15.0;
                tau = last ? target : tau + h;
                ++traj.accepted_steps;
                if (mode.stable) beta = beta_from_compatibility(y[0], y[2]);
                double grow = ratio > 0 ? 0.9 * std::pow(ratio, -0.2) : 4.0;
                if (!last) h *= std::clamp(grow, 0.1, 4.0);
            } else {
                ++traj.rejected_steps;
                h *= std::clamp(0.9 * std::pow(ratio, -0.2), 0.1, 0.9);
            }
        }
        traj.samples.push_back(unpack(y, p.free, mode, tau, beta, N));
        h = std::max(h, 1e-2);
    }
    return traj;
}

PhysicalLaw to_physical(const ModulationTrajectory& traj, double t0) {
    const auto& s = traj.samples;
    std::size_t n = s.size();
    if (n < 2) throw ParameterError("to_physical: trajectory too short");
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (!(s[i + 1].log_mu < s[i].log_mu)) throw ParameterError("to_physical: mu is not decreasing");
    if (2.0 * (s.back().log_mu - s.front().log_mu) > std::log(1e-12))
        throw ParameterError("to_physical: trajectory too short for the closed-form tail");

    // rho_i = (T - t_i) / mu_i^2, exact for piecewise exponential mu^2
    Vec rho(n), step(n, 0.0);
    rho[n - 1] = 1.0 / (2.0 * s.back().beta);
    for (std::size_t i = n - 1; i-- > 0;) {
        double dl = 2.0 * (s[i + 1].log_mu - s[i].log_mu);
        double q = std::exp(dl);
        double k = -dl / (s[i + 1].tau - s[i].tau);
        double seg = -std::expm1(dl) / k;  // integral of mu^2 / mu_i^2 over the step
        rho[i] = rho[i + 1] * q + seg;
        step[i] = seg;
    }
    PhysicalLaw law;
    law.mode = traj.mode;
    double T_minus_t0 = rho[0] * std::exp(2.0 * s[0].log_mu);
    law.T = t0 + T_minus_t0;
    for (std::size_t i = 0; i < n; ++i) {
        PhysicalSample p;
        p.tau = s[i].tau;
        p.log_mu = s[i].log_mu;
        p.log_nu = s[i].log_nu;
        p.log_lambda = s[i].log_mu + s[i].log_nu;
        p.beta = s[i].beta;
        p.log_T_minus_t = std::log(rho[i]) + 2.0 * s[i].log_mu;
        p.t = law.T - std::exp(p.log_T_minus_t);
        law.samples.push_back(p);
        law.prefactor.push_back(std::exp(s[i].log_nu + std::sqrt(s[i].beta * s[i].tau)));
    }
    return law;
}

double stable_law_ratio(const PhysicalSample& s) {
    double x = s.log_T_minus_t;
    double log_law = kLn2 - 0.5 * (2.0 + euler_gamma) + 0.5 * x - std::sqrt(std::abs(x) / 2.0);
    return std::exp(s.log_lambda - log_law);
}

std::vector<Vec> mod_residuals(const ModulationTrajectory& traj, const AlphaFunction& alpha) {
    const auto& s = traj.samples;
    std::size_t n = s.size();
    if (n < 3) throw SamplingError("mod_residuals: need at least 3 samples");
    std::size_t N = s.front().a.size();
    Vec t(n), ln(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = s[i].tau;
        ln[i] = s[i].log_nu;
    }
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (!(t[i + 1] > t[i])) throw SamplingError("mod_residuals: tau must be strictly increasing");

    // a_{n,tau}: through ln|a_n| where the sign is constant, directly otherwise
    std::vector<Vec> da(N, Vec(n));
    for (std::size_t k = 0; k < N; ++k) {
        Vec a(n), la(n);
        for (std::size_t i = 0; i < n; ++i) a[i] = s[i].a[k];
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t j = i == 0 ? 1 : (i + 1 == n ? n - 2 : i);
            bool logs = true;
            for (std::size_t q = j - 1; q <= j + 1; ++q)
                if (!(a[q] != 0.0) || (a[q] > 0) != (a[j] > 0) || !std::isnormal(a[q])) logs = false;
            if (logs) {
                for (std::size_t q = j - 1; q <= j + 1; ++q) la[q] = std::log(std::abs(a[q]));
                da[k][i] = a[i] * d3(t, la, i);
            } else {
                da[k][i] = d3(t, a, i);
            }
        }
    }
    std::vector<Vec> out(n, Vec(N + 1));
    for (std::size_t i = 0; i < n; ++i) {
        double L = s[i].log_nu, beta = s[i].beta;
        double nu2 = std::exp(2.0 * L);
        double a1 = N >= 1 ? s[i].a[0] : 0.0;
        double da1 = N >= 1 ? da[0][i] : 0.0;
        out[i][0] = 8.0 * nu2 * (d3(t, ln, i) - beta) + da1 - alpha(0, L, beta) * a1;
        for (std::size_t k = 0; k < N; ++k) {
            int m = static_cast<int>(k) + 1;
            out[i][k + 1] = -(da[k][i] - alpha(m, L, beta) * s[i].a[k]);
        }
    }
    return out;
}

AlphaFunction spectral_alpha(double log_nu_min, double log_nu_max, int N, double beta, int points_per_decade) {
    if (!(log_nu_min <= log_nu_max) || log_nu_max > std::log(0.1) || log_nu_min < std::log(spectral::min_weighted_nu))
        throw ParameterError("spectral_alpha: scales must lie in [1e-6, 0.1]");
    if (N + 1 > 12) throw ParameterError("spectral_alpha: at most 12 modes");
    // Chebyshev nodes in x = 1/ln nu
    const int m = 7;
    double x0 = 1.0 / log_nu_min, x1 = 1.0 / log_nu_max;
    auto xs = std::make_shared<Vec>(m);
    auto table = std::make_shared<std::vector<Vec>>(m);
    for (int j = 0; j < m; ++j) {
        double c = std::cos(std::numbers::pi * (j + 0.5) / m);
        double x = x1 == x0 ? x0 : 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * c;
        (*xs)[static_cast<std::size_t>(j)] = x;
        double nu = std::exp(1.0 / x);
        auto grid = spectral::spectral_grid(nu, beta, points_per_decade);
        auto pairs = spectral::solve_top_spectrum(spectral::assemble_operator(spectral::OperatorSpec::azeta(nu, beta), grid),
                                                  N + 1);
        Vec row;
        for (const auto& pr : pairs) row.push_back(pr.alpha);
        (*table)[static_cast<std::size_t>(j)] = row;
    }
    // beta is frozen at construction; the stable closure keeps it constant to rounding
    return [xs, table, N](int n, double log_nu, double b) {
        if (n > N) return alpha_closure(n, log_nu, b);
        double x = 1.0 / log_nu;
        double v = 0.0;
        for (std::size_t j = 0; j < xs->size(); ++j) {
            double l = 1.0;
            for (std::size_t k = 0; k < xs->size(); ++k)
                if (k != j) l *= (x - (*xs)[k]) / ((*xs)[j] - (*xs)[k]);
            v += l * (*table)[j][static_cast<std::size_t>(n)];
        }
        return v;
    };
}

std::vector<Vec> mod_residuals(const ModulationTrajectory& traj, AlphaSource source) {
    if (source == AlphaSource::predicted) return mod_residuals(traj, alpha_closure);
    double lo = traj.samples.front().log_nu, hi = lo;
    for (const auto& s : traj.samples) {
        lo = std::min(lo, s.log_nu);
        hi = std::max(hi, s.log_nu);
    }
    return mod_residuals(traj, spectral_alpha(lo, hi, static_cast<int>(traj.samples.front().a.size()),
                                              traj.samples.front().beta));
}

PowerFit fit_power_law(const Vec& T_minus_t, const Vec& lambda) {
    if (lambda.size() != T_minus_t.size()) throw ParameterError("fit_power_law: size mismatch");
    PhysicalLaw law;
    for (std::size_t i = 0; i < T_minus_t.size(); ++i) {
        if (!(T_minus_t[i] > 0 && lambda[i] > 0)) throw FitError("fit_power_law: samples must be positive");
        PhysicalSample s;
        s.log_T_minus_t = std::log(T_minus_t[i]);
        s.log_lambda = std::log(lambda[i]);
        law.samples.push_back(s);
    }
    return fit_power_law(law);
}

PowerFit fit_power_law(const PhysicalLaw& law, double tau_lo, double tau_hi) {
    std::vector<std::array<double, 3>> rows;
    Vec rhs;
    double xmin = 1e300, xmax = -1e300;
    for (const auto& s : law.samples) {
        if (s.tau < tau_lo || s.tau > tau_hi) continue;
        double x = s.log_T_minus_t;
        if (!(x < 0)) continue;
        rows.push_back({1.0, x, std::log(-x)});
        rhs.push_back(s.log_lambda);
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
    }
    std::size_t n = rows.size();
    if (n < 30) throw FitError("fit_power_law: need at least 30 samples");
    if (xmax - xmin < 6.0 * std::log(10.0)) throw FitError("fit_power_law: T - t must span at least 6 decades");

    // Householder QR of the n x 3 design matrix
    std::vector<std::array<double, 3>> A = rows;
    Vec b = rhs;
    std::array<double, 3> diag{};
    for (std::size_t k = 0; k < 3; ++k) {
        double norm = 0;
        for (std::size_t i = k; i < n; ++i) norm += A[i][k] * A[i][k];
        norm = std::sqrt(norm);
        if (!(norm > 0)) throw FitError("fit_power_law: degenerate design");
        double alpha = A[k][k] > 0 ? -norm : norm;
        Vec v(n, 0.0);
        for (std::size_t i = k; i < n; ++i) v[i] = A[i][k];
        v[k] -= alpha;
        double vn = 0;
        for (std::size_t i = k; i < n; ++i) vn += v[i] * v[i];
        for (std::size_t j = k; j < 3; ++j) {
            double s = 0;
            for (std::size_t i = k; i < n; ++i) s += v[i] * A[i][j];
            for (std::size_t i = k; i < n; ++i) A[i][j] -= 2.0 * s / vn * v[i];
        }
        double s = 0;
        for (std::size_t i = k; i < n; ++i) s += v[i] * b[i];
        for (std::size_t i = k; i < n; ++i) b[i] -= 2.0 * s / vn * v[i];
        diag[k] = A[k][k];
    }
    double scale = std::max({std::abs(diag[0]), std::abs(diag[1]), std::abs(diag[2])});
    for (double d : diag)
        if (std::abs(d) < 1e-10 * scale) throw FitError("fit_power_law: degenerate design");
    std::array<double, 3> c{};
    for (std::size_t kk = 3; kk-- > 0;) {
        double s = b[kk];
        for (std::size_t j = kk + 1; j < 3; ++j) s -= A[kk][j] * c[j];
        c[kk] = s / A[kk][kk];
    }
    PowerFit f;
    f.C = std::exp(c[0]);
    f.p = c[1];
    f.q = c[2];
    f.samples = static_cast<int>(n);
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = rhs[i] - (c[0] + c[1] * rows[i][1] + c[2] * rows[i][2]);
        ss += r * r;
    }
    f.residual = std::sqrt(ss / static_cast<double>(n));
    return f;
}

void write_csv(const ModulationTrajectory& traj, std::ostream& out) {
    std::vector<std::string> head{"tau", "nu", "beta", "mu"};
    std::size_t N = traj.samples.empty() ? 0 : traj.samples.front().a.size();
    for (std::size_t k = 0; k < N; ++k) head.push_back("a" + std::to_string(k + 1));
    csv::write_header(out, head);
    for (const auto& s : traj.samples) {
        Vec row{s.tau, s.nu(), s.beta, s.mu()};
        row.insert(row.end(), s.a.begin(), s.a.end());
        csv::write_row(out, row);
    }
}

void write_csv(const PhysicalLaw& law, std::ostream& out) {
    csv::write_header(out, {"t", "T_minus_t", "lambda", "lambda_over_law"});
    for (const auto& s : law.samples) {
        double ratio;
        if (law.mode.stable) {
            ratio = stable_law_ratio(s);
        } else {
            double l = law.mode.ell, x = s.log_T_minus_t;
            ratio = std::exp(s.log_lambda - 0.5 * l * x + l / (2.0 * (l - 1.0)) * std::log(std::abs(x)));
        }
        csv::write_row(out, {s.t, std::exp(s.log_T_minus_t), std::exp(s.log_lambda), ratio});
    }
}

}  // namespace kslab::modulation
