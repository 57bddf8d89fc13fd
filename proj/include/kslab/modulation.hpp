#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <vector>

namespace kslab::modulation {

using Vec = std::vector<double>;

struct Mode {
    bool stable = true;
    int ell = 1;  // unstable sector index, >= 2 when !stable

    static Mode make_stable() { return {true, 1}; }
    static Mode make_unstable(int ell) { return {false, ell}; }
};

// nu and mu underflow long before the runs end, so their logarithms are the
// primary variables and nu, mu are derived
struct ModulationState {
    double tau = 0.0;
    double log_nu = 0.0;
    double log_mu = 0.0;
    double beta = 0.5;
    Vec a;  // a[0] = a_1, ..., a[N-1] = a_N

    double nu() const;
    double mu() const;
};

struct Derivatives {
    double log_nu = 0.0;  // nu_tau / nu
    double beta = 0.0;
    double log_mu = 0.0;  // mu_tau / mu = -beta
    Vec a;
};

// a_1 / (4 nu^2) in the stable mode and a_ell / (4 nu^2) in the unstable mode
double compatibility_value(const Mode& mode, double log_nu, double beta);
// beta solving the stable compatibility relation for given (nu, a_1 / (4 nu^2))
double beta_from_compatibility(double log_nu, double b1);

// closure coefficients: refined for n <= 1, leading otherwise
double alpha_closure(int n, double nu_log, double beta);

Derivatives rhs(const ModulationState& state, const Mode& mode);

struct IntegrateOptions {
    double tolerance = 1e-10;
    int output_points = 400;  // log-spaced in tau between the ends
    double min_step = 1e-12;
};

struct ModulationTrajectory {
    Mode mode;
    std::vector<ModulationState> samples;
    int accepted_steps = 0;
    int rejected_steps = 0;
};

// initial state on the compatibility manifold. The stable default centres
// nu0 on the asymptote, nu0 = sqrt(2/beta) e^{-(2+gamma)/2} e^{-sqrt(beta tau0)};
// `plain` uses |ln nu0| = sqrt(beta tau0). Unstable: nu0 = e^{-beta (ell-1) tau0}.
// mu0 = e^{-beta tau0}. a_n for the free modes start at `amplitude` nu0^2.
enum class InitialVariant { centered, plain };
ModulationState initial_state(const Mode& mode, double beta0, double tau0, int N, double amplitude = 0.0,
                              InitialVariant variant = InitialVariant::centered);

ModulationTrajectory integrate(const ModulationState& initial, const Mode& mode, double tau_end,
                               const IntegrateOptions& options = {});

struct PhysicalSample {
    double tau = 0.0;
    double t = 0.0;
    double log_T_minus_t = 0.0;
    double log_mu = 0.0;
    double log_nu = 0.0;
    double log_lambda = 0.0;
    double beta = 0.0;
};

struct PhysicalLaw {
    double T = 0.0;
    Mode mode;
    std::vector<PhysicalSample> samples;
    Vec prefactor;  // nu e^{sqrt(beta tau)} per sample
};

PhysicalLaw to_physical(const ModulationTrajectory& traj, double t0 = 0.0);

// lambda / (2 e^{-(2+gamma)/2} sqrt(T-t) e^{-sqrt(|ln(T-t)| / 2)}), evaluated in logs
double stable_law_ratio(const PhysicalSample& s);

enum class AlphaSource { predicted, spectral };
using AlphaFunction = std::function<double(int n, double log_nu, double beta)>;

// Mod_0 = 8 nu^2 (nu_tau/nu - beta) + a_{1,tau} - alpha_0 a_1,
// Mod_n = -(a_{n,tau} - alpha_n a_n); row i holds Mod_0..Mod_N at sample i
std::vector<Vec> mod_residuals(const ModulationTrajectory& traj, const AlphaFunction& alpha);
std::vector<Vec> mod_residuals(const ModulationTrajectory& traj, AlphaSource source);

// alpha_n from the discrete spectrum at a few scales in [nu_min, nu_max]
// (inside [min_weighted_nu, 0.1]),
// interpolated in 1/ln nu
AlphaFunction spectral_alpha(double log_nu_min, double log_nu_max, int N, double beta, int points_per_decade = 32);

struct PowerFit {
    double C = 0.0, p = 0.0, q = 0.0;
    double residual = 0.0;  // rms of the log misfit
    int samples = 0;
};

// least squares ln lambda = ln C + p ln(T-t) + q ln|ln(T-t)| over samples with
// tau in [tau_lo, tau_hi]
PowerFit fit_power_law(const PhysicalLaw& law, double tau_lo = -std::numeric_limits<double>::infinity(),
                       double tau_hi = std::numeric_limits<double>::infinity());
PowerFit fit_power_law(const Vec& T_minus_t, const Vec& lambda);

void write_csv(const ModulationTrajectory& traj, std::ostream& out);
void write_csv(const PhysicalLaw& law, std::ostream& out);

}  // namespace kslab::modulation
