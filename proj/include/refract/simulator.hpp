#pragma once

#include "refract/levy_model.hpp"
#include "refract/parallel.hpp"

#include <cstdint>
#include <vector>

namespace refract {

struct PathConfig {
    double dt = 1e-3;              ///< Euler step for the Gaussian part
    double horizon = 0.0;          ///< time cap; 0 derives it from discount_cutoff
    long n_paths = 100000;
    std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
    bool antithetic = false;
    bool exact_reflection = true;  ///< bridge-sampled reflection step for diffusive states
    double discount_cutoff = 1e-9; ///< a path stops once its discount factor falls below
    Exec exec = Exec::parallel;
    int epoch_record_limit = 0;    ///< > 0: record per-regime-epoch discounted injections
};

struct NPVEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long n_paths = 0;
    double dividends = 0.0;  ///< mean discounted dividends
    double injections = 0.0; ///< mean discounted injection cost (beta-weighted)
    double payoff = 0.0;     ///< mean discounted terminal payoff
    std::vector<double> epoch_injections; ///< optional per-epoch means (regime runs)

    double half_width(double k = 3.0) const { return k * std_error; }
};

/// Simulates the refracted-reflected surplus under the threshold b and
/// estimates the auxiliary-problem NPV at x: discounted dividends minus
/// beta-weighted injections plus the payoff at the exponential kill time.
/// Independent of all scale-function analytics.
NPVEstimate simulate_single_regime(const AuxiliaryProblem& prob, double b, double x,
                                   const PathConfig& cfg);

/// Simulates the Markov-modulated refracted-reflected surplus under the
/// per-state thresholds b from (x, i) and estimates V_{pi^b}(x, i).
NPVEstimate simulate_regime(const RegimeModel& regime, const std::vector<double>& b, double x,
                            std::size_t i, const PathConfig& cfg);

} // namespace refract
