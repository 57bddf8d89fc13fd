#pragma once

#include <cstddef>
#include <vector>

namespace kslab {

enum class GridKind { log_graded, uniform, composite };

const char* to_string(GridKind kind);

// One-dimensional radial mesh. Every grid carries a smooth index map k -> x, so
// integrals and interpolation are done in the index coordinate, where the
// sampled integrands are smooth even when the nodes span many decades.
class RadialGrid {
public:
    RadialGrid() = default;

    static RadialGrid uniform(double a, double b, std::size_t n);
    // arbitrary increasing nodes; the index map is recovered by finite differences
    static RadialGrid from_nodes(std::vector<double> nodes, double cluster_scale);

    std::size_t size() const { return x_.size(); }
    double operator[](std::size_t i) const { return x_[i]; }
    const std::vector<double>& nodes() const { return x_; }
    double front() const { return x_.front(); }
    double back() const { return x_.back(); }

    GridKind kind() const { return kind_; }
    double cluster_scale() const { return cluster_; }
    int points_per_decade() const { return ppd_; }

    // dx/dk at node i
    double jacobian(std::size_t i) const { return jac_[i]; }
    const std::vector<double>& jacobians() const { return jac_; }

    // fractional index of a point inside [front, back]
    double index_of(double x) const;
    // index of the node equal to x, or -1
    long find_node(double x, double rel_tol = 1e-14) const;

    // same map with every coordinate multiplied by factor
    RadialGrid scaled(double factor) const;

    // C_i = integral from front() to x_i
    std::vector<double> cumulative(const std::vector<double>& f) const;
    double integrate(const std::vector<double>& f) const;
    // integral from front() to an arbitrary x
    double integrate_to(const std::vector<double>& f, double x) const;
    // weights q with integrate(f) == sum q_i f_i
    std::vector<double> quadrature_weights() const;

    // local 6-point Lagrange interpolation in the index coordinate
    double interpolate(const std::vector<double>& f, double x) const;

    // minimum number of nodes per decade over [lo, hi]
    double min_density_per_decade(double lo, double hi) const;

private:
    friend RadialGrid make_grid(double, double, int, double);

    // index-map integral of the log-graded density between two log-offsets
    double density(double sigma) const;
    double density_integral(double s0, double s1) const;

    std::vector<double> x_;
    std::vector<double> jac_;
    GridKind kind_ = GridKind::composite;
    double cluster_ = 1.0;
    int ppd_ = 0;

    // log-graded map: sigma = log10(x/cluster), nodes at integer values of
    // F(sigma) = int_0^sigma n(1 + bump)(1 + p s + q s^2) ds
    std::vector<double> sigma_;
    double p_ = 0.0, q_ = 0.0;
};

// Log-graded grid from zeta_min to zeta_max (both exact nodes) with doubled
// density on [cluster/10, 10 cluster] and an exact node at cluster_scale.
RadialGrid make_grid(double zeta_min, double zeta_max, int points_per_decade, double cluster_scale);

// derivative on the nodes from the 3-point nonuniform stencil (one-sided at the ends)
std::vector<double> derivative3(const RadialGrid& grid, const std::vector<double>& f);

// weights w with sum_j w_j g(x_j) == integral_0^t of the interpolating polynomial
std::vector<double> lagrange_integral_weights(const std::vector<double>& xs, double t);

}  // namespace kslab
