#pragma once

#include <cstddef>
#include <vector>

namespace kslab::linalg {

using Vec = std::vector<double>;

// Symmetric tridiagonal pencil K v = alpha M v with diagonal positive M.
// K has diagonal d and off-diagonal e (e[i] couples i and i+1).
struct Pencil {
    Vec d, e, m;
    std::size_t size() const { return d.size(); }
    Vec apply_K(const Vec& v) const;
    // (K - x M) v evaluated in extended precision
    std::vector<long double> shifted_residual(const Vec& v, double x) const;
};

// number of eigenvalues of the pencil strictly greater than x (Sturm count of
// the LDL^T pivots of K - x M)
std::size_t count_above(const Pencil& p, double x);

// k-th largest eigenvalue (k = 0 is the top) by bisection on the Sturm count
double kth_largest(const Pencil& p, std::size_t k);

// eigenvector for a converged eigenvalue by shifted inverse iteration in
// extended precision, M-orthogonal to `previous`; normalized to (v, M v) = 1.
// The final Rayleigh quotient is stored in *rayleigh when given.
Vec inverse_iteration(const Pencil& p, double alpha, const std::vector<Vec>& previous, int max_steps = 200,
                      double* rayleigh = nullptr);

// general tridiagonal solve with partial pivoting: sub[i] = A(i+1, i),
// sup[i] = A(i, i+1)
Vec solve_tridiagonal(const Vec& sub, const Vec& diag, const Vec& sup, const Vec& rhs);

// symmetric band matrix, lower storage: band[k][i] = A(i, i-k)
struct BandSym {
    std::vector<Vec> band;
    std::size_t size() const { return band.empty() ? 0 : band[0].size(); }
    std::size_t width() const { return band.size() - 1; }
    Vec apply(const Vec& v) const;
};

// LDL^T of a symmetric band matrix without pivoting; the count of negative
// pivots is the number of negative eigenvalues (Sylvester)
class BandLDLT {
public:
    explicit BandLDLT(BandSym a);
    std::size_t negative() const { return negative_; }
    Vec solve(const Vec& rhs) const;

private:
    BandSym f_;
    std::size_t negative_ = 0;
};

double dot(const Vec& a, const Vec& b);
double dot_w(const Vec& a, const Vec& b, const Vec& w);

}  // namespace kslab::linalg
