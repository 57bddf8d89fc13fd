#include "kslab/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "kslab/errors.hpp"

namespace kslab {

namespace {

constexpr double kBumpWidth = 0.15;
constexpr double kLn10 = 2.302585092994045684;

// 8-point Gauss-Legendre on [-1, 1]
constexpr std::array<double, 8> kGLx = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                        -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                        0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGLw = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                        0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                        0.2223810344533745, 0.1012285362903763};

template <class F>
double gauss8(F&& f, double a, double b) {
    double mid = 0.5 * (a + b), half = 0.5 * (b - a), s = 0.0;
    for (int j = 0; j < 8; ++j) s += kGLw[j] * f(mid + half * kGLx[j]);
    return s * half;
}

template <class F>
double gauss_composite(F&& f, double a, double b, double panel) {
    int n = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / panel)));
    double h = (b - a) / n, s = 0.0;
    for (int i = 0; i < n; ++i) s += gauss8(f, a + i * h, a + (i + 1) * h);
    return s;
}

// doubled density on [-1, 1] in decades around the cluster scale
double bump(double s) {
    return 0.5 * (std::tanh((s + 1.0) / kBumpWidth) - std::tanh((s - 1.0) / kBumpWidth));
}

constexpr int kStencil = 6;

// window of kStencil nodes used for the interval [i, i+1]
std::size_t window_start(std::size_t i, std::size_t n) {
    std::size_t m = std::min<std::size_t>(kStencil, n);
    std::size_t s = i >= 2 ? i - 2 : 0;
    return std::min(s, n - m);
}

std::vector<double> offsets(std::size_t s, std::size_t i, std::size_t m) {
    std::vector<double> xs(m);
    for (std::size_t j = 0; j < m; ++j) xs[j] = static_cast<double>(s + j) - static_cast<double>(i);
    return xs;
}

// full-interval weights, cached by window offset
const std::vector<double>& unit_interval_weights(std::size_t s, std::size_t i, std::size_t m) {
    static const auto table = [] {
        std::array<std::array<std::vector<double>, kStencil>, kStencil + 1> t;
        for (std::size_t mm = 1; mm <= kStencil; ++mm)
            for (std::size_t off = 0; off < mm; ++off) {
                std::vector<double> xs(mm);
                for (std::size_t j = 0; j < mm; ++j) xs[j] = static_cast<double>(j) - static_cast<double>(off);
                t[mm][off] = lagrange_integral_weights(xs, 1.0);
            }
        return t;
    }();
    return table[m][i - s];
}

std::vector<double> lagrange_basis(const std::vector<double>& xs, double t) {
    std::vector<double> l(xs.size(), 1.0);
    for (std::size_t j = 0; j < xs.size(); ++j)
        for (std::size_t k = 0; k < xs.size(); ++k)
            if (k != j) l[j] *= (t - xs[k]) / (xs[j] - xs[k]);
    return l;
}

std::vector<double> lagrange_derivative(const std::vector<double>& xs, double t) {
    std::size_t m = xs.size();
    std::vector<double> d(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        double denom = 1.0;
        for (std::size_t k = 0; k < m; ++k)
            if (k != j) denom *= xs[j] - xs[k];
        double sum = 0.0;
        for (std::size_t skip = 0; skip < m; ++skip) {
            if (skip == j) continue;
            double prod = 1.0;
            for (std::size_t k = 0; k < m; ++k)
                if (k != j && k != skip) prod *= t - xs[k];
            sum += prod;
        }
        d[j] = sum / denom;
    }
    return d;
}

}  // namespace

const char* to_string(GridKind kind) {
    switch (kind) {
        case GridKind::log_graded: return "log-graded";
        case GridKind::uniform: return "uniform";
        case GridKind::composite: return "composite";
    }
    return "?";
}

std::vector<double> lagrange_integral_weights(const std::vector<double>& xs, double t) {
    // moment equations sum_j w_j x_j^p = t^{p+1}/(p+1), solved in extended precision
    std::size_t m = xs.size();
    std::vector<std::vector<long double>> a(m, std::vector<long double>(m + 1));
    for (std::size_t p = 0; p < m; ++p) {
        for (std::size_t j = 0; j < m; ++j) a[p][j] = std::pow(static_cast<long double>(xs[j]), static_cast<int>(p));
        a[p][m] = std::pow(static_cast<long double>(t), static_cast<int>(p + 1)) / static_cast<long double>(p + 1);
    }
    for (std::size_t c = 0; c < m; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < m; ++r)
            if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        for (std::size_t r = c + 1; r < m; ++r) {
            long double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k <= m; ++k) a[r][k] -= f * a[c][k];
        }
    }
    std::vector<double> w(m);
    for (std::size_t c = m; c-- > 0;) {
        long double s = a[c][m];
        for (std::size_t k = c + 1; k < m; ++k) s -= a[c][k] * static_cast<long double>(w[k]);
        w[c] = static_cast<double>(s / a[c][c]);
    }
    return w;
}

RadialGrid RadialGrid::uniform(double a, double b, std::size_t n) {
    if (!(b > a) || n < 2) throw ParameterError("uniform grid: need a < b and at least 2 nodes");
    RadialGrid g;
    g.kind_ = GridKind::uniform;
    double h = (b - a) / static_cast<double>(n - 1);
    g.x_.resize(n);
    for (std::size_t i = 0; i < n; ++i) g.x_[i] = a + h * static_cast<double>(i);
    g.x_.back() = b;
    g.jac_.assign(n, h);
    g.cluster_ = 0.5 * (a + b);
    return g;
}

RadialGrid RadialGrid::from_nodes(std::vector<double> nodes, double cluster_scale) {
    if (nodes.size() < 2) throw ParameterError("grid needs at least 2 nodes");
    for (std::size_t i = 1; i < nodes.size(); ++i)
        if (!(nodes[i] > nodes[i - 1])) throw ParameterError("grid nodes must be strictly increasing");
    RadialGrid g;
    g.kind_ = GridKind::composite;
    g.cluster_ = cluster_scale;
    g.x_ = std::move(nodes);
    std::size_t n = g.x_.size(), m = std::min<std::size_t>(kStencil, n);
    g.jac_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t s = i >= m / 2 ? std::min(i - m / 2, n - m) : 0;
        auto d = lagrange_derivative(offsets(s, i, m), 0.0);
        double v = 0.0;
        for (std::size_t j = 0; j < m; ++j) v += d[j] * g.x_[s + j];
        g.jac_[i] = v;
    }
    return g;
}

double RadialGrid::density(double sigma) const {
    return ppd_ * (1.0 + bump(sigma)) * (1.0 + p_ * sigma + q_ * sigma * sigma);
}

double RadialGrid::density_integral(double s0, double s1) const {
    return gauss8([this](double s) { return density(s); }, s0, s1);
}

double RadialGrid::index_of(double x) const {
    std::size_t n = x_.size();
    if (!(x >= x_.front() * (1 - 1e-15)) || !(x <= x_.back() * (1 + 1e-15)))
        throw DomainError("point " + std::to_string(x) + " outside the grid");
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    if (i >= n - 1) return static_cast<double>(n - 1);
    if (x == x_[i]) return static_cast<double>(i);
    switch (kind_) {
        case GridKind::uniform: return static_cast<double>(i) + (x - x_[i]) / (x_[i + 1] - x_[i]);
        case GridKind::log_graded: {
            double s = std::log10(x / cluster_);
            double k = static_cast<double>(i) + density_integral(sigma_[i], s);
            return std::clamp(k, static_cast<double>(i), static_cast<double>(i + 1));
        }
        case GridKind::composite: {
            std::size_t s = window_start(i, n), m = std::min<std::size_t>(kStencil, n);
            auto xs = offsets(s, i, m);
            double t = (x - x_[i]) / (x_[i + 1] - x_[i]);
            for (int it2 = 0; it2 < 50; ++it2) {
                auto l = lagrange_basis(xs, t);
                auto d = lagrange_derivative(xs, t);
                double v = 0.0, dv = 0.0;
                for (std::size_t j = 0; j < m; ++j) {
                    v += l[j] * x_[s + j];
                    dv += d[j] * x_[s + j];
                }
                double step = (v - x) / dv;
                t -= step;
                if (std::abs(step) < 1e-15) break;
            }
            return static_cast<double>(i) + std::clamp(t, 0.0, 1.0);
        }
    }
    return static_cast<double>(i);
}

long RadialGrid::find_node(double x, double rel_tol) const {
    auto it = std::lower_bound(x_.begin(), x_.end(), x * (1 - rel_tol));
    if (it != x_.end() && std::abs(*it - x) <= rel_tol * std::abs(x)) return static_cast<long>(it - x_.begin());
    return -1;
}

RadialGrid RadialGrid::scaled(double factor) const {
    if (!(factor > 0)) throw ParameterError("grid scale factor must be positive");
    RadialGrid g = *this;
    for (auto& v : g.x_) v *= factor;
    for (auto& v : g.jac_) v *= factor;
    g.cluster_ *= factor;
    return g;
}

std::vector<double> RadialGrid::cumulative(const std::vector<double>& f) const {
    std::size_t n = x_.size();
    if (f.size() != n) throw ParameterError("cumulative: sample count does not match grid");
    std::vector<double> g(n), c(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) g[i] = f[i] * jac_[i];
    std::size_t m = std::min<std::size_t>(kStencil, n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        std::size_t s = window_start(i, n);
        const auto& w = unit_interval_weights(s, i, m);
        double v = 0.0;
        for (std::size_t j = 0; j < m; ++j) v += w[j] * g[s + j];
        c[i + 1] = c[i] + v;
    }
    return c;
}

double RadialGrid::integrate(const std::vector<double>& f) const { return cumulative(f).back(); }

double RadialGrid::integrate_to(const std::vector<double>& f, double x) const {
    std::size_t n = x_.size();
    double k = index_of(x);
    std::size_t i = std::min(static_cast<std::size_t>(std::floor(k)), n - 2);
    double t = k - static_cast<double>(i);
    auto c = cumulative(f);
    if (t == 0.0) return c[i];
    std::size_t s = window_start(i, n), m = std::min<std::size_t>(kStencil, n);
    auto w = lagrange_integral_weights(offsets(s, i, m), t);
    double v = 0.0;
    for (std::size_t j = 0; j < m; ++j) v += w[j] * f[s + j] * jac_[s + j];
    return c[i] + v;
}

std::vector<double> RadialGrid::quadrature_weights() const {
    std::size_t n = x_.size(), m = std::min<std::size_t>(kStencil, n);
    std::vector<double> q(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        std::size_t s = window_start(i, n);
        const auto& w = unit_interval_weights(s, i, m);
        for (std::size_t j = 0; j < m; ++j) q[s + j] += w[j];
    }
    for (std::size_t i = 0; i < n; ++i) q[i] *= jac_[i];
    return q;
}

double RadialGrid::interpolate(const std::vector<double>& f, double x) const {
    std::size_t n = x_.size();
    double k = index_of(x);
    std::size_t i = std::min(static_cast<std::size_t>(std::floor(k)), n - 2);
    double t = k - static_cast<double>(i);
    if (t == 0.0) return f[i];
    std::size_t s = window_start(i, n), m = std::min<std::size_t>(kStencil, n);
    auto l = lagrange_basis(offsets(s, i, m), t);
    double v = 0.0;
    for (std::size_t j = 0; j < m; ++j) v += l[j] * f[s + j];
    return v;
}

double RadialGrid::min_density_per_decade(double lo, double hi) const {
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
        if (x_[i + 1] <= lo || x_[i] >= hi) continue;
        worst = std::max(worst, std::log10(x_[i + 1] / x_[i]));
    }
    return worst > 0 ? 1.0 / worst : std::numeric_limits<double>::infinity();
}

RadialGrid make_grid(double zeta_min, double zeta_max, int points_per_decade, double cluster_scale) {
    if (!(zeta_min > 0) || !(zeta_min < cluster_scale) || !(cluster_scale < zeta_max))
        throw ParameterError("make_grid: need 0 < zeta_min < cluster_scale < zeta_max");
    if (points_per_decade < 8) throw ParameterError("make_grid: points_per_decade must be at least 8");

    RadialGrid g;
    g.kind_ = GridKind::log_graded;
    g.cluster_ = cluster_scale;
    g.ppd_ = points_per_decade;
    const double n = points_per_decade;
    const double s_lo = std::log10(zeta_min / cluster_scale), s_hi = std::log10(zeta_max / cluster_scale);

    // moments of the unstretched density on each side of the anchor
    auto moment = [](int j, double end) {
        return gauss_composite([j](double s) { return std::pow(s, j) * (1.0 + bump(s)); }, 0.0, end, 0.02);
    };
    double mp[3], mm[3];
    for (int j = 0; j < 3; ++j) {
        mp[j] = moment(j, s_hi);
        mm[j] = moment(j, s_lo);
    }
    // stretch so that both endpoints fall on integer indices
    double kp = std::ceil(n * mp[0] - 1e-9), km = std::ceil(-n * mm[0] - 1e-9);
    kp = std::max(kp, 1.0);
    km = std::max(km, 1.0);
    double r1 = kp / n - mp[0], r2 = -km / n - mm[0];
    double det = mp[1] * mm[2] - mp[2] * mm[1];
    g.p_ = (r1 * mm[2] - r2 * mp[2]) / det;
    g.q_ = (mp[1] * r2 - mm[1] * r1) / det;
    for (int i = 0; i <= 200; ++i) {
        double s = s_lo + (s_hi - s_lo) * i / 200.0;
        if (1.0 + g.p_ * s + g.q_ * s * s < 0.5) throw ParameterError("make_grid: range too short for the requested density");
    }

    auto advance = [&g](double s0, double dir) {
        double s = s0 + dir / g.density(s0);
        for (int it = 0; it < 60; ++it) {
            double r = dir * g.density_integral(s0, s) - 1.0;
            double step = dir * r / g.density(s);
            s -= step;
            if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(s))) break;
        }
        return s;
    };
    std::size_t nk = static_cast<std::size_t>(kp + km) + 1;
    std::size_t anchor = static_cast<std::size_t>(km);
    g.sigma_.assign(nk, 0.0);
    for (std::size_t k = anchor + 1; k < nk; ++k) g.sigma_[k] = advance(g.sigma_[k - 1], 1.0);
    for (std::size_t k = anchor; k-- > 0;) g.sigma_[k] = advance(g.sigma_[k + 1], -1.0);
    g.sigma_.front() = s_lo;
    g.sigma_.back() = s_hi;

    g.x_.resize(nk);
    g.jac_.resize(nk);
    for (std::size_t k = 0; k < nk; ++k) {
        g.x_[k] = k == anchor ? cluster_scale : cluster_scale * std::pow(10.0, g.sigma_[k]);
        g.jac_[k] = g.x_[k] * kLn10 / g.density(g.sigma_[k]);
    }
    g.x_.front() = zeta_min;
    g.x_.back() = zeta_max;
    return g;
}

std::vector<double> derivative3(const RadialGrid& grid, const std::vector<double>& f) {
    std::size_t n = grid.size();
    std::vector<double> d(n);
    const auto& x = grid.nodes();
    if (n < 3) throw ParameterError("derivative3 needs at least 3 nodes");
    for (std::size_t i = 1; i + 1 < n; ++i) {
        double h1 = x[i] - x[i - 1], h2 = x[i + 1] - x[i];
        d[i] = -h2 / (h1 * (h1 + h2)) * f[i - 1] + (h2 - h1) / (h1 * h2) * f[i] + h1 / (h2 * (h1 + h2)) * f[i + 1];
    }
    {
        double h1 = x[1] - x[0], h2 = x[2] - x[1];
        d[0] = -(2 * h1 + h2) / (h1 * (h1 + h2)) * f[0] + (h1 + h2) / (h1 * h2) * f[1] - h1 / (h2 * (h1 + h2)) * f[2];
    }
    {
        std::size_t i = n - 1;
        double h1 = x[i - 1] - x[i - 2], h2 = x[i] - x[i - 1];
        d[i] = h2 / (h1 * (h1 + h2)) * f[i - 2] - (h1 + h2) / (h1 * h2) * f[i - 1] + (2 * h2 + h1) / (h2 * (h1 + h2)) * f[i];
    }
    return d;
}

}  // namespace kslab
