#pragma once

#include "refract/errors.hpp"
#include "refract/payoff.hpp"

#include <complex>
#include <functional>
#include <string>
#include <vector>

namespace refract {

enum class LevyFamily {
    brownian_drift,      ///< X(t) = gamma*t + sigma*B(t), unbounded variation
    cramer_lundberg_exp, ///< X(t) = c*t - compound Poisson(lambda) with Exp(mu) claims
    general_numeric,     ///< user-supplied jump density, scale functions via Laplace inversion
};

/// Which process a fluctuation quantity refers to: the surplus X itself or the
/// refracted process Y = X - delta*t (drift reduced by the maximal dividend rate).
enum class Proc { base, refracted };

/// One spectrally negative Levy process together with its Laplace exponent.
struct LevyModel {
    LevyFamily family = LevyFamily::brownian_drift;
    double gamma = 0.0;           ///< drift; for bounded-variation families this is the premium rate c
    double sigma = 0.0;           ///< Gaussian coefficient, >= 0
    double jump_rate = 0.0;       ///< lambda, compound-Poisson intensity
    double jump_mean_param = 0.0; ///< mu, exponential claim-size rate (cramer_lundberg_exp)

    /// Density of the Levy measure on (-inf, 0); general_numeric only.
    std::function<double(double)> levy_density;
    /// Quadrature cutoff for the numeric jump integrals; density mass below is ignored.
    double density_support_lower = -30.0;

    static LevyModel brownian(double gamma, double sigma);
    static LevyModel cramer_lundberg(double c, double lambda, double mu);
    static LevyModel numeric(double gamma, double sigma, std::function<double(double)> density,
                             double support_lower = -30.0);

    bool bounded_variation() const;
    /// Premium rate c = gamma - int_{(-1,0)} z Pi(dz); bounded-variation families only.
    double effective_drift() const;
    /// E[X(1)] = psi'(0+).
    double mean() const;
    /// Throws AssumptionError if the model is malformed or has monotone paths.
    void validate() const;
};

/// psi_X(theta) for theta >= 0; negative theta is a domain error.
double laplace_exponent(const LevyModel& model, double theta);

/// Analytic continuation used by the numeric inversion path (Re theta unrestricted
/// within the strip of convergence; callers keep Re theta above the largest root).
std::complex<double> laplace_exponent(const LevyModel& model, std::complex<double> theta);

/// psi_Y(theta) = psi_X(theta) - delta*theta. Bounded-variation models require c > delta.
double laplace_exponent_refracted(const LevyModel& model, double delta, double theta);

/// Right inverse of the Laplace exponent at level q > 0:
/// Phi(q) for Proc::base, varphi(q) for Proc::refracted.
double right_inverse(const LevyModel& model, double delta, double q, Proc which);

/// Distribution of the non-positive regime-switch jump J_ij.
struct JumpLaw {
    enum class Kind { zero, point_mass, exponential };
    Kind kind = Kind::zero;
    double m = 0.0;   ///< point mass at -m, m >= 0
    double eta = 0.0; ///< -J ~ Exp(eta) for the exponential kind

    static JumpLaw none() { return {}; }
    static JumpLaw point(double m);
    static JumpLaw exponential(double eta);

    /// E[-J], finite for all supported kinds (Assumption on switch jumps).
    double mean_abs() const;
};

/// Regime-switching problem data: chain generator, per-state Levy model,
/// dividend caps, discount rates, switch jumps and the injection cost.
struct RegimeModel {
    std::vector<std::string> names;           ///< optional state labels
    std::vector<std::vector<double>> Q;       ///< generator matrix
    std::vector<LevyModel> levy;              ///< per-state process
    std::vector<double> delta;                ///< max dividend rate per state
    std::vector<double> discount;             ///< r(i) > 0 per state
    std::vector<std::vector<JumpLaw>> switch_jumps;
    double beta = 0.0;                        ///< cost per unit injected, > 1

    std::size_t n_states() const { return levy.size(); }
    /// q_i = sum_{j != i} q_ij.
    double rate_out(std::size_t i) const;
    std::string state_name(std::size_t i) const;
};

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string reason;
};

struct ValidationReport {
    std::vector<CheckResult> checks;

    bool all_pass() const;
    std::string summary() const;
    /// Throws AssumptionError naming the first failing check.
    void require() const;
};

/// Runs every standing-assumption check; reports, never throws.
ValidationReport validate(const RegimeModel& regime);

/// Auxiliary single-model problem: bail-out dividends with payoff w at an
/// independent exponential terminal time of rate r, discounted at q.
struct AuxiliaryProblem {
    LevyModel model;
    double delta = 0.0; ///< refraction rate, > 0
    double beta = 0.0;  ///< injection cost, > 1
    double q = 0.0;     ///< discount rate, > 0
    double r = 0.0;     ///< terminal-time rate; 0 removes the payoff entirely
    PayoffFunction payoff = PayoffFunction::zero();

    double alpha() const { return q + r; }

    ValidationReport validate() const;
    void require_valid() const { validate().require(); }
};

/// Smallest admissible refraction rate; delta below this makes varphi(alpha)
/// collide with Phi(alpha) and breaks the tail integrals.
inline constexpr double min_refraction_rate = 1e-8;

} // namespace refract
