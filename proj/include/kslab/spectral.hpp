#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "kslab/grid.hpp"
#include "kslab/linalg.hpp"

namespace kslab::spectral {

using Vec = std::vector<double>;

// below this the O(1) eigenvalues sit under the double rounding of the
// 1/(nu h)^2 stiffness at the core and the Sturm counts stop being reliable
constexpr double min_weighted_nu = 1e-6;

enum class OperatorKind { A0, Azeta, Abar };
enum class Boundary { dirichlet_dirichlet, regular_dirichlet };

struct OperatorSpec {
    OperatorKind kind = OperatorKind::Azeta;
    double nu = 1e-2;
    double nutilde = 1e-2;
    double beta = 0.5;
    Boundary boundary = Boundary::regular_dirichlet;

    static OperatorSpec a0(Boundary b = Boundary::regular_dirichlet);
    static OperatorSpec azeta(double nu, double beta);
    static OperatorSpec abar(double nu, double nutilde, double beta);
};

// Finite-volume Sturm-Liouville form (1/w)(p f')' + V f. Unknowns live on the
// interior nodes 1..n-2; the outer node is Dirichlet, and the inner node is
// either Dirichlet or tied to node 1 through f(x0) = inner_ratio f(x1).
struct SturmLiouvilleForm {
    RadialGrid grid;
    OperatorSpec spec;
    Vec conductance;  // edge i joins nodes i and i+1
    Vec potential;    // interior nodes
    Vec mass;         // interior nodes: w(x_i) times the dual cell width
    double inner_ratio = 0.0;
    linalg::Pencil pencil;  // K v = alpha M v on the interior unknowns

    std::size_t unknowns() const { return mass.size(); }
    Vec interior_nodes() const;
    // S f = M^{-1} K f
    Vec apply(const Vec& f) const;
    double inner(const Vec& f, const Vec& g) const;
};

// grid used for the weighted problems: zeta from nu 1e-3 to sqrt(120/beta)
RadialGrid spectral_grid(double nu, double beta, int points_per_decade);
// grid in r for A0: from 1e-3 to cutoff, exact node at r = 1
RadialGrid a0_grid(double cutoff, int points_per_decade);

SturmLiouvilleForm assemble_operator(const OperatorSpec& spec, const RadialGrid& grid);

struct EigenPair {
    double alpha = 0.0;
    Vec vector;            // interior-node values
    double norm_sq = 1.0;  // (v, v)_w
    double residual = 0.0;        // ||(S - alpha) v||_w / ||v||_w
    double backward_error = 0.0;  // max_i |r_i| / (|K - alpha M| |v|)_i
};

std::vector<EigenPair> solve_top_spectrum(const SturmLiouvilleForm& form, int k);

double predicted_alpha(int n, double nu, double beta, bool refined);

// rescales pair.vector so that it matches nu^-2 T0(zeta/nu) at the innermost
// node and returns the new norm_sq
double eigenfunction_norm(const SturmLiouvilleForm& form, EigenPair& pair);

// largest Rayleigh quotient over `trials` random functions projected off the
// pairs, together with the top of the projected operator found by inverse
// iteration; the contract is that it does not exceed the next eigenvalue
double spectral_gap_check(const SturmLiouvilleForm& form, const std::vector<EigenPair>& pairs, int trials,
                          std::uint64_t seed = 0);

// |alphabar_n - alpha_n| ln^2 nu for n < k
Vec eigen_stability_check(double nu, double nutilde, double beta, const RadialGrid& grid, int k);

enum class CoercivityKind { delta0, delta1, hardy };
// smooth cutoff: 1 on [0, 1], 0 beyond 2, C^2 in between
double chi(double x);
double coercivity_check(CoercivityKind kind, const RadialGrid& grid, double M);

struct OverlapTable {
    double nu_phi0 = 0.0;    // <nu d_nu (phi1 - phi0), phi0>
    double nu_phi1 = 0.0;    // <nu d_nu (phi1 - phi0), phi1> / |ln nu|
    double beta_phi0 = 0.0;  // <beta d_beta (phi1 - phi0), phi0> / |ln nu|
    double beta_phi1 = 0.0;  // <beta d_beta (phi1 - phi0), phi1> / ln^2 nu
};
OverlapTable overlap_table(double nu, double beta, int points_per_decade = 64);

struct SpectrumReport {
    double nu = 0.0, beta = 0.0;
    int points_per_decade = 0;
    std::size_t nodes = 0;
    bool refined = true;
    std::vector<EigenPair> computed;
    Vec predicted_leading;
    Vec predicted_refined;  // NaN where no refined constant exists
    Vec residual_scaled;
};

SpectrumReport spectrum_report(double nu, double beta, int k, int points_per_decade, bool refined = true);
void write_csv(const SpectrumReport& report, std::ostream& out);
void write_json(const SpectrumReport& report, std::ostream& out);

}  // namespace kslab::spectral
