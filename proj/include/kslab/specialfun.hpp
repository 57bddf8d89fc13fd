#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "kslab/grid.hpp"

namespace kslab::specialfun {

constexpr double euler_gamma = 0.57721566490153286061;

enum class Profile { U, Q, T0, psi0, psitilde0 };

// closed forms at r > 0; the scaled variant evaluates U_nu = U(r/nu)/nu^2 and
// Q_nu = Q(r/nu) (T0, psi0, psitilde0 are evaluated at r/nu)
double eval_profile(Profile kind, double r);
double eval_profile(Profile kind, double r, double nu);

// r d/dr of the profiles
double r_dT0(double r);
double r_dpsi0(double r);
double r_dpsitilde0(double r);

enum class WeightKind { omega_nu, omega_0, omega_tilde, rho, rho_0 };

struct WeightSpec {
    WeightKind kind = WeightKind::omega_0;
    double nu = 1.0;
    double beta = 0.5;
};

double weight(const WeightSpec& spec, double point);

struct Rational {
    __int128 num = 0;
    __int128 den = 1;
    bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};
std::string to_string(const Rational& q);

// leading coefficients of T_j ~ dhat_j r^{2j-2} ln r, from the recursion
Rational dhat_exact(int j);
double dhat(int j);
// c_{n,j} = 2^j n!/(n-j)!
double c_coefficient(int n, int j);

struct A0Inverse {
    std::vector<double> g;     // A0^{-1} f
    std::vector<double> r_dg;  // r d/dr of g, from the same integrals
};

// g = psi0/2 int_r^1 (z^4 + 4 z^2 ln z - 1) z^{-1} f dz + psitilde0/2 int_0^r z f dz
A0Inverse apply_A0_inverse_full(const RadialGrid& grid, const std::vector<double>& f);
std::vector<double> apply_A0_inverse(const RadialGrid& grid, const std::vector<double>& f);

struct TjTable {
    RadialGrid grid;
    int jmax = 0;
    std::vector<std::vector<double>> T;      // T[j][i]
    std::vector<std::vector<double>> Theta;  // (2j-2) T_j - r dT_j/dr
    std::vector<double> dhat;

    double leading(int j, double r) const;
    double T_at(int j, double r) const { return grid.interpolate(T.at(j), r); }
    double Theta_at(int j, double r) const { return grid.interpolate(Theta.at(j), r); }
};

TjTable build_Tj_table(int jmax, const RadialGrid& grid);

void write_csv(const TjTable& table, std::ostream& out);

}  // namespace kslab::specialfun
