#include "kslab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kslab/errors.hpp"

namespace kslab::linalg {

double dot(const Vec& a, const Vec& b) {
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
    return static_cast<double>(s);
}

double dot_w(const Vec& a, const Vec& b, const Vec& w) {
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i] * w[i];
    return static_cast<double>(s);
}

Vec Pencil::apply_K(const Vec& v) const {
    std::size_t n = size();
    Vec out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = d[i] * v[i];
        if (i > 0) s += e[i - 1] * v[i - 1];
        if (i + 1 < n) s += e[i] * v[i + 1];
        out[i] = s;
    }
    return out;
}

std::vector<long double> Pencil::shifted_residual(const Vec& v, double x) const {
    std::size_t n = size();
    std::vector<long double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        long double s = (static_cast<long double>(d[i]) - static_cast<long double>(x) * m[i]) * v[i];
        if (i > 0) s += static_cast<long double>(e[i - 1]) * v[i - 1];
        if (i + 1 < n) s += static_cast<long double>(e[i]) * v[i + 1];
        out[i] = s;
    }
    return out;
}

std::size_t count_above(const Pencil& p, double x) {
    std::size_t n = p.size(), cnt = 0;
    double piv = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        double a = p.d[i] - x * p.m[i];
        if (i > 0) {
            double scale = std::abs(a) + std::abs(p.e[i - 1]);
            if (std::abs(piv) < std::numeric_limits<double>::min() * (1.0 + scale)) piv = -std::numeric_limits<double>::min();
            a -= p.e[i - 1] * (p.e[i - 1] / piv);
        }
        piv = a;
        if (piv > 0) ++cnt;
    }
    return cnt;
}

double kth_largest(const Pencil& p, std::size_t k) {
    std::size_t n = p.size();
    if (k >= n) throw ParameterError("kth_largest: index exceeds pencil size");
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        double r = std::abs(p.d[i]);
        if (i > 0) r += std::abs(p.e[i - 1]);
        if (i + 1 < n) r += std::abs(p.e[i]);
        hi = std::max(hi, (p.d[i] + r - std::abs(p.d[i])) / p.m[i]);
    }
    hi = hi * (1 + 1e-12) + 1e-300;
    double step = 1.0, lo = hi - step;
    while (count_above(p, lo) < k + 1) {
        hi = lo;
        step *= 2.0;
        lo -= step;
        if (!std::isfinite(lo)) throw ConvergenceError("kth_largest: no lower bracket");
    }
    for (int it = 0; it < 400; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (count_above(p, mid) >= k + 1)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

namespace {

template <class T>
std::vector<T> solve_tri(const std::vector<T>& sub, const std::vector<T>& diag, const std::vector<T>& sup,
                         std::vector<T> b) {
    std::size_t n = diag.size();
    if (n == 0) return {};
    // rows hold up to three entries after pivoting: u0 (diag), u1, u2
    std::vector<T> u0(n), u1(n, 0), u2(n, 0);
    T norm = 0;
    for (std::size_t i = 0; i < n; ++i) norm = std::max<T>(norm, std::abs(diag[i]));
    for (T v : sub) norm = std::max<T>(norm, std::abs(v));
    for (T v : sup) norm = std::max<T>(norm, std::abs(v));
    const T tiny = std::max<T>(norm, T(1e-300)) * std::numeric_limits<T>::epsilon();

    T a0 = diag[0], a1 = n > 1 ? sup[0] : T(0), a2 = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        T c0 = sub[i], c1 = diag[i + 1], c2 = i + 2 < n ? sup[i + 1] : T(0);
        if (std::abs(c0) > std::abs(a0)) {
            std::swap(a0, c0);
            std::swap(a1, c1);
            std::swap(a2, c2);
            std::swap(b[i], b[i + 1]);
        }
        if (a0 == 0) a0 = tiny;
        T f = c0 / a0;
        u0[i] = a0;
        u1[i] = a1;
        u2[i] = a2;
        b[i + 1] -= f * b[i];
        a0 = c1 - f * a1;
        a1 = c2 - f * a2;
        a2 = 0;
    }
    if (a0 == 0) a0 = tiny;
    u0[n - 1] = a0;
    std::vector<T> x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        T s = b[ii];
        if (ii + 1 < n) s -= u1[ii] * x[ii + 1];
        if (ii + 2 < n) s -= u2[ii] * x[ii + 2];
        x[ii] = s / u0[ii];
    }
    return x;
}

}  // namespace

Vec solve_tridiagonal(const Vec& sub, const Vec& diag, const Vec& sup, const Vec& rhs) {
    return solve_tri(sub, diag, sup, rhs);
}

Vec inverse_iteration(const Pencil& p, double alpha, const std::vector<Vec>& previous, int max_steps,
                      double* rayleigh) {
    using LD = long double;
    using LVec = std::vector<LD>;
    std::size_t n = p.size();
    LVec sub(n > 0 ? n - 1 : 0), diag(n), sup(n > 0 ? n - 1 : 0), m(p.m.begin(), p.m.end());
    LD shift = alpha;
    auto set_shift = [&] {
        for (std::size_t i = 0; i < n; ++i) diag[i] = p.d[i] - shift * m[i];
    };
    set_shift();
    for (std::size_t i = 0; i + 1 < n; ++i) sub[i] = sup[i] = p.e[i];

    auto wdot = [&](const LVec& a, const LVec& b) {
        LD s = 0;
        for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i] * m[i];
        return s;
    };
    std::vector<LVec> prev;
    for (const auto& q : previous) {
        LVec v(q.begin(), q.end());
        LD s = std::sqrt(wdot(v, v));
        for (auto& x : v) x /= s;
        prev.push_back(std::move(v));
    }
    auto project = [&](LVec& v) {
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : prev) {
                LD c = wdot(v, q);
                for (std::size_t i = 0; i < n; ++i) v[i] -= c * q[i];
            }
    };
    auto normalize = [&](LVec& v) {
        LD s = std::sqrt(wdot(v, v));
        if (!(s > 0) || !std::isfinite(static_cast<double>(s)))
            throw ConvergenceError("inverse_iteration: iterate vanished");
        for (auto& x : v) x /= s;
    };
    auto quotient = [&](const LVec& v) {
        LD num = 0;
        for (std::size_t i = 0; i < n; ++i) {
            LD t = p.d[i] * v[i];
            if (i > 0) t += p.e[i - 1] * v[i - 1];
            if (i + 1 < n) t += p.e[i] * v[i + 1];
            num += t * v[i];
        }
        return num / wdot(v, v);
    };

    LVec v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = 1.0L + 0.25L * std::sin(0.37L * static_cast<LD>(i) + 0.1L);
    project(v);
    normalize(v);
    // a few extra sweeps after convergence with the Rayleigh quotient as shift
    int polish = -1;
    for (int step = 0; step < max_steps; ++step) {
        LVec rhs(n);
        for (std::size_t i = 0; i < n; ++i) rhs[i] = m[i] * v[i];
        LVec y = solve_tri(sub, diag, sup, rhs);
        project(y);
        normalize(y);
        LD c = wdot(y, v);
        if (c < 0)
            for (auto& x : y) x = -x;
        LD change = 0;
        for (std::size_t i = 0; i < n; ++i) change += m[i] * (y[i] - v[i]) * (y[i] - v[i]);
        v = std::move(y);
        if (polish < 0 && change < 1e-18L && step >= 1) polish = 0;
        if (polish >= 0) {
            if (++polish > 2) {
                if (rayleigh) *rayleigh = static_cast<double>(quotient(v));
                return Vec(v.begin(), v.end());
            }
            shift = quotient(v);
            set_shift();
        }
    }
    throw ConvergenceError("inverse_iteration: no convergence within the step limit");
}

Vec BandSym::apply(const Vec& v) const {
    std::size_t n = size(), w = width();
    Vec out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] += band[0][i] * v[i];
        for (std::size_t k = 1; k <= w && k <= i; ++k) {
            out[i] += band[k][i] * v[i - k];
            out[i - k] += band[k][i] * v[i];
        }
    }
    return out;
}

BandLDLT::BandLDLT(BandSym a) : f_(std::move(a)) {
    std::size_t n = f_.size(), w = f_.width();
    auto& L = f_.band;
    double scale = 0;
    for (double v : L[0]) scale = std::max(scale, std::abs(v));
    const double tiny = std::max(scale, 1e-300) * 1e-300;
    // L[0] holds D, L[k][i] holds the unit lower factor entry (i, i-k)
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = std::min(w, i); k >= 1; --k) {
            std::size_t j = i - k;
            double s = L[k][i];
            for (std::size_t t = 1; t + k <= w && t <= j; ++t) s -= L[k + t][i] * L[t][j] * L[0][j - t];
            L[k][i] = s / L[0][j];
        }
        double s = L[0][i];
        for (std::size_t k = 1; k <= std::min(w, i); ++k) s -= L[k][i] * L[k][i] * L[0][i - k];
        if (s == 0.0) s = -tiny;
        L[0][i] = s;
        if (s < 0) ++negative_;
    }
}

Vec BandLDLT::solve(const Vec& rhs) const {
    std::size_t n = f_.size(), w = f_.width();
    const auto& L = f_.band;
    Vec y(rhs);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 1; k <= std::min(w, i); ++k) y[i] -= L[k][i] * y[i - k];
    for (std::size_t i = 0; i < n; ++i) y[i] /= L[0][i];
    for (std::size_t ii = n; ii-- > 0;)
        for (std::size_t k = 1; k <= w && ii + k < n; ++k) y[ii] -= L[k][ii + k] * y[ii + k];
    return y;
}

}  // namespace kslab::linalg
