#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "kslab/grid.hpp"

namespace kslab::pde {

using Vec = std::vector<double>;

// partial mass m(r, t) = (1/2pi) int_{|x| <= r} u, on a log-graded grid in r
struct PartialMassField {
    RadialGrid grid;
    Vec m;
    double t = 0.0;
    double total = 0.0;  // Dirichlet value at the outer node
};

struct GridSpec {
    double r_floor = 1e-8;
    double r_max = 1e4;
    int points_per_decade = 32;
};

RadialGrid make_pde_grid(const GridSpec& spec, double cluster_scale);

enum class Preset { scaled_Q, Q_plus_bump };
const char* to_string(Preset p);
Preset preset_from_string(const std::string& s);

// scaled_Q: m0 = 4 mass_factor r^2 / (r^2 + lambda0^2)
// Q_plus_bump: m0 = 4 r^2 / (r^2 + lambda0^2) + amp (1 - e^{-r^2 / width^2})
struct InitialSpec {
    Preset preset = Preset::scaled_Q;
    double lambda0 = 1.0;
    double mass_factor = 1.0;
    double amp = 0.2;
    double width = 5.0;
};

PartialMassField make_initial(const InitialSpec& spec, const GridSpec& grid);

// u0 from the least-squares fit m = u0 r^2 / 2 on nodes 1..3
double central_density(const PartialMassField& f);

// largest dt the explicit flux m m_r / r tolerates at the given Courant number
double flux_time_bound(const PartialMassField& f, double cfl);

// one IMEX Euler step of m_t = m_rr - m_r / r + m m_r / r: the linear part is
// implicit, the flux explicit. Returns false (field untouched) if dt exceeds
// flux_time_bound(f, 1).
bool step(PartialMassField& f, double dt, bool nonlinear = true);

struct Scale {
    double lambda = 0.0;  // smallest r with m(r) = 2; NaN if m never reaches 2
    double u0 = 0.0;      // mean of 2 m / r^2 over the three innermost nodes
    bool concentrated = false;
};

Scale extract_scale(const PartialMassField& f);

// sup over r <= 10 lambda of |m(r) / Q(r / lambda) - 1|
double profile_error(const PartialMassField& f, double lambda);

// true when lambda is resolved by fewer than 20 local cells
bool needs_regrid(const PartialMassField& f, double lambda);

// values on new_grid: 6-point interpolation of ln m in the index coordinate,
// replaced by the monotone cubic Hermite value wherever it leaves the bracket
// of the two neighbouring old values
PartialMassField regrid(const PartialMassField& f, const RadialGrid& new_grid);

// regrid onto make_pde_grid(spec, lambda / 4)
PartialMassField adapt(const PartialMassField& f, double lambda, const GridSpec& spec);

// eigenfunction with the leading-order profile
// sum_j c_{n,j} beta^j nu^{2j-2} T_j(zeta / nu), sampled on a zeta grid
Vec leading_eigenfunction(const RadialGrid& zeta_grid, int n, double nu, double beta);

struct RemainderProjection {
    double t = 0.0;
    double nu = 0.0;
    Vec a;  // a[0] = a_1, ..., a[N-1] = a_N
    double me_norm = 0.0;
    double orthogonality = 0.0;  // |<m_eps, phi0>| / (|m_eps| |phi0|)
    bool ok = true;
};

// m_w sampled on zeta_grid; nu is the root in [nu_guess / 4, 4 nu_guess]
// closest to the guess of <m_w - Q_nu - sum a_n phi_n, phi_0> = 0, with the
// a_n solving the Gram system of phi_1..phi_N, all in L^2(omega_nu / zeta)
RemainderProjection project_remainder(const RadialGrid& zeta_grid, const Vec& m_w, double beta, int N,
                                      double nu_guess);
// physical field mapped to zeta = r / mu, mu = sqrt(2 beta (T_est - t)); the
// guess is lambda / mu
RemainderProjection project_remainder(const PartialMassField& f, double T_est, double beta, int N);

enum class StopReason { blowup_resolved, horizon, subcritical };
const char* to_string(StopReason s);

struct RunOptions {
    double u0_cap = 1e10;
    double t_max = 1e3;
    double cfl = 0.5;
    double dt_u0 = 0.1;          // dt <= dt_u0 / u0
    double record_growth = 1.02;  // record when u0 moves by this factor
    double record_dt = 0.05;      // or when t advances this much
    double snapshot_factor = 10.0;
    double decay_stop = 1e-2;  // subcritical once u0 < decay_stop * u0(0)
    int projection_modes = 2;
    double projection_beta = 0.5;
    bool nonlinear = true;
};

struct ScaleSample {
    double t = 0.0;
    double u0 = 0.0;
    double lambda = 0.0;
    double T_est_minus_t = 0.0;
    double lambda_sq_over_Tmt = 0.0;
    double profile_err = 0.0;
};

struct Snapshot {
    double u0 = 0.0;
    double lambda = 0.0;
    PartialMassField field;
};

struct RunResult {
    std::vector<ScaleSample> series;
    std::vector<Snapshot> snapshots;
    std::vector<RemainderProjection> projections;
    StopReason stop = StopReason::horizon;
    double T_est = 0.0;  // NaN unless the run ends in blow-up
    long steps = 0;
    int regrids = 0;
    long monotonicity_violations = 0;
    double max_u0 = 0.0;
    PartialMassField final_field;
};

// T_est from the last records: 1/u0 = c (T - t)^p through three records a
// factor 2 apart in u0. The two-point value t + (1/u0) / |d(1/u0)/dt| is the
// p = 1 special case and the fallback; it runs short by d ln g / d ln(T-t)
// when 1/u0 = (T-t) g(T-t) with a slowly varying g. A heuristic either way.
double estimate_blowup_time(const std::vector<ScaleSample>& series);

RunResult run(const PartialMassField& initial, const GridSpec& grid, const RunOptions& options = {});

void write_csv(const std::vector<ScaleSample>& series, std::ostream& out);
void write_csv(const PartialMassField& f, std::ostream& out);
void write_csv(const std::vector<RemainderProjection>& projections, std::ostream& out);

}  // namespace kslab::pde
