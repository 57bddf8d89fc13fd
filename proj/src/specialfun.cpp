#include "kslab/specialfun.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "kslab/csv.hpp"
#include "kslab/errors.hpp"

namespace kslab::specialfun {

namespace {

void check_point(double r) {
    if (!(r > 0) || !std::isfinite(r)) throw DomainError("profile argument must be a positive finite number");
}

double U(double r) {
    double t = 1.0 + r * r;
    return 8.0 / (t * t);
}

double Q(double r) {
    if (r <= 1.0) return 4.0 * r * r / (1.0 + r * r);
    return 4.0 / (1.0 + 1.0 / (r * r));
}

double T0(double r) {
    if (r <= 1.0) {
        double t = 1.0 + r * r;
        return r * r / (t * t);
    }
    double s = r + 1.0 / r;
    return 1.0 / (s * s);
}

double psitilde0(double r) {
    if (r <= 1.0) {
        double t = 1.0 + r * r;
        return (r * r * r * r + 4.0 * r * r * std::log(r) - 1.0) / (t * t);
    }
    double u = 1.0 / (r * r), t = 1.0 + u;
    return ((1.0 - u * u) + 4.0 * u * std::log(r)) / (t * t);
}

__int128 gcd128(__int128 a, __int128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        __int128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

}  // namespace

double eval_profile(Profile kind, double r) {
    check_point(r);
    switch (kind) {
        case Profile::U: return U(r);
        case Profile::Q: return Q(r);
        case Profile::T0:
        case Profile::psi0: return T0(r);
        case Profile::psitilde0: return psitilde0(r);
    }
    return 0.0;
}

double eval_profile(Profile kind, double r, double nu) {
    if (!(nu > 0) || !std::isfinite(nu)) throw DomainError("scale nu must be positive");
    check_point(r);
    double y = r / nu;
    if (kind == Profile::U) {
        double t = nu * nu + r * r;
        return 8.0 * nu * nu / (t * t);
    }
    return eval_profile(kind, y);
}

double r_dT0(double r) {
    check_point(r);
    double c = r <= 1.0 ? (1.0 - r * r) / (1.0 + r * r) : (1.0 / (r * r) - 1.0) / (1.0 / (r * r) + 1.0);
    return 2.0 * T0(r) * c;
}

double r_dpsi0(double r) { return r_dT0(r); }

double r_dpsitilde0(double r) {
    check_point(r);
    double c;
    if (r <= 1.0) {
        c = (1.0 + r * r + (1.0 - r * r) * std::log(r)) / (1.0 + r * r);
    } else {
        double u = 1.0 / (r * r);
        c = 1.0 + (u - 1.0) / (u + 1.0) * std::log(r);
    }
    return 8.0 * T0(r) * c;
}

double weight(const WeightSpec& spec, double point) {
    check_point(point);
    if (!(spec.nu > 0)) throw DomainError("weight: nu must be positive");
    if (!(spec.beta >= 0)) throw DomainError("weight: beta must be nonnegative");
    double z = point, b = spec.beta, nu = spec.nu;
    switch (spec.kind) {
        case WeightKind::omega_nu: {
            double t = nu * nu + z * z;
            return t * t / 8.0 * std::exp(-0.5 * b * z * z);
        }
        case WeightKind::omega_0: return 1.0 / U(z);
        case WeightKind::omega_tilde: return z * z * z * std::exp(-0.5 * b * z * z);
        case WeightKind::rho: return std::exp(-0.5 * b * nu * nu * z * z);
        case WeightKind::rho_0: return std::exp(-0.5 * b * z * z);
    }
    return 0.0;
}

std::string to_string(const Rational& q) {
    auto str = [](__int128 v) {
        if (v == 0) return std::string("0");
        bool neg = v < 0;
        unsigned __int128 u = neg ? static_cast<unsigned __int128>(-v) : static_cast<unsigned __int128>(v);
        std::string s;
        while (u > 0) {
            s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(u % 10)));
            u /= 10;
        }
        return neg ? "-" + s : s;
    };
    return str(q.num) + "/" + str(q.den);
}

Rational dhat_exact(int j) {
    if (j < 1) throw ParameterError("dhat is defined for j >= 1");
    if (j > 17) throw RangeError("dhat_exact: denominator exceeds 128-bit range beyond j = 17");
    Rational d{-1, 2};
    for (int k = 1; k < j; ++k) {
        d.num = -d.num;
        d.den *= static_cast<__int128>(4) * k * (k + 1);
        __int128 g = gcd128(d.num, d.den);
        d.num /= g;
        d.den /= g;
    }
    return d;
}

double dhat(int j) {
    if (j < 1) throw ParameterError("dhat is defined for j >= 1");
    double d = -0.5;
    for (int k = 1; k < j; ++k) d = -d / (4.0 * k * (k + 1));
    return d;
}

double c_coefficient(int n, int j) {
    if (n < 0 || j < 0) throw ParameterError("c_coefficient: indices must be nonnegative");
    if (j > n) return 0.0;
    double c = std::ldexp(1.0, j);
    for (int k = n - j + 1; k <= n; ++k) c *= k;
    return c;
}

A0Inverse apply_A0_inverse_full(const RadialGrid& grid, const std::vector<double>& f) {
    std::size_t n = grid.size();
    if (f.size() != n) throw ParameterError("apply_A0_inverse: sample count does not match grid");
    if (n < 3) throw RefinementError("apply_A0_inverse: grid too small");
    for (double v : f)
        if (!std::isfinite(v)) throw QuadratureDivergence("apply_A0_inverse: non-finite samples");
    const auto& x = grid.nodes();
    if (f[0] != 0.0 && f[1] != 0.0 && (f[0] > 0) == (f[1] > 0)) {
        double p = std::log(std::abs(f[1] / f[0])) / std::log(x[1] / x[0]);
        if (p <= -2.0) throw QuadratureDivergence("apply_A0_inverse: z f is not integrable at the origin");
    }

    std::vector<double> kf(n), zf(n);
    for (std::size_t i = 0; i < n; ++i) {
        double z = x[i];
        kf[i] = (z * z * z + 4.0 * z * std::log(z) - 1.0 / z) * f[i];
        zf[i] = z * f[i];
    }
    auto ck = grid.cumulative(kf);
    auto cz = grid.cumulative(zf);
    // below the first node f is continued as f(x0) (z/x0)^2
    double inner = 0.25 * f[0] * x[0] * x[0];

    double ck1;
    long pivot = grid.find_node(1.0);
    if (pivot >= 0) {
        ck1 = ck[static_cast<std::size_t>(pivot)];
    } else if (grid.front() < 1.0 && grid.back() > 1.0) {
        ck1 = grid.integrate_to(kf, 1.0);
    } else {
        throw RefinementError("apply_A0_inverse: grid does not bracket r = 1");
    }

    A0Inverse out;
    out.g.resize(n);
    out.r_dg.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double a = 0.5 * (ck1 - ck[i]), b = 0.5 * (cz[i] + inner);
        out.g[i] = eval_profile(Profile::psi0, x[i]) * a + eval_profile(Profile::psitilde0, x[i]) * b;
        out.r_dg[i] = r_dpsi0(x[i]) * a + r_dpsitilde0(x[i]) * b;
    }
    return out;
}

std::vector<double> apply_A0_inverse(const RadialGrid& grid, const std::vector<double>& f) {
    return apply_A0_inverse_full(grid, f).g;
}

double TjTable::leading(int j, double r) const {
    if (j == 0) return 1.0 / (r * r);
    return dhat.at(static_cast<std::size_t>(j)) * std::pow(r, 2 * j - 2) * std::log(r);
}

TjTable build_Tj_table(int jmax, const RadialGrid& grid) {
    if (jmax < 0) throw ParameterError("build_Tj_table: jmax must be nonnegative");
    double rmax = grid.back();
    if (jmax >= 2 && rmax > 1.0 &&
        (2.0 * jmax - 2.0) * std::log(rmax) + std::log(std::log(rmax)) > 0.9 * std::log(std::numeric_limits<double>::max()))
        throw RangeError("build_Tj_table: r^(2j-2) overflows at the outer node");

    TjTable t;
    t.grid = grid;
    t.jmax = jmax;
    std::size_t n = grid.size();
    t.T.assign(static_cast<std::size_t>(jmax) + 1, std::vector<double>(n));
    t.Theta.assign(static_cast<std::size_t>(jmax) + 1, std::vector<double>(n));
    t.dhat.assign(static_cast<std::size_t>(jmax) + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double r = grid[i];
        t.T[0][i] = eval_profile(Profile::T0, r);
        t.Theta[0][i] = -2.0 * t.T[0][i] - r_dT0(r);
    }
    for (int j = 0; j < jmax; ++j) {
        auto inv = apply_A0_inverse_full(grid, t.T[static_cast<std::size_t>(j)]);
        auto& Tn = t.T[static_cast<std::size_t>(j) + 1];
        auto& Th = t.Theta[static_cast<std::size_t>(j) + 1];
        for (std::size_t i = 0; i < n; ++i) {
            Tn[i] = -inv.g[i];
            Th[i] = 2.0 * j * Tn[i] + inv.r_dg[i];
        }
        t.dhat[static_cast<std::size_t>(j) + 1] = dhat(j + 1);
    }
    return t;
}

void write_csv(const TjTable& table, std::ostream& out) {
    std::vector<std::string> head{"r"};
    for (int j = 0; j <= table.jmax; ++j) head.push_back("T" + std::to_string(j));
    for (int j = 0; j <= table.jmax; ++j) head.push_back("Theta" + std::to_string(j));
    csv::write_header(out, head);
    std::vector<double> row;
    for (std::size_t i = 0; i < table.grid.size(); ++i) {
        row.assign(1, table.grid[i]);
        for (const auto& v : table.T) row.push_back(v[i]);
        for (const auto& v : table.Theta) row.push_back(v[i]);
        csv::write_row(out, row);
    }
}

}  // namespace kslab::specialfun
