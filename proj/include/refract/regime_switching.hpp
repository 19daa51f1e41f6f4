#pragma once

#include "refract/levy_model.hpp"
#include "refract/parallel.hpp"
#include "refract/payoff.hpp"
#include "refract/single_regime.hpp"

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace refract {

/// Per-state grid function with linear interpolation on a shared x-grid and a
/// linear tail beyond the last knot; the object iterated by the Theta operator.
class ValueFunction {
public:
    ValueFunction(std::vector<double> grid, std::size_t n_states, double constant = 0.0);

    std::size_t n_states() const { return values_.size(); }
    const std::vector<double>& grid() const { return grid_; }
    double x_max() const { return grid_.back(); }

    double operator()(std::size_t state, double x) const;
    double tail_slope(std::size_t state) const { return tail_slopes_[state]; }

    std::span<const double> values(std::size_t state) const { return values_[state]; }
    void set_values(std::size_t state, std::vector<double> v, double tail_slope);

    /// max_i sup_grid |f(x,i)|
    double sup_norm() const;
    static double sup_distance(const ValueFunction& a, const ValueFunction& b);

    /// Re-interpolates onto a new grid (linear tail used beyond the old span).
    ValueFunction resampled(std::vector<double> new_grid) const;

private:
    std::vector<double> grid_;
    std::vector<std::vector<double>> values_;
    std::vector<double> tail_slopes_;
};

struct ThresholdVector {
    std::vector<double> b;
};

struct RegimeSolveOptions {
    double tol = 1e-6;
    int max_iter = 500;
    std::size_t grid_points = 801;
    double x_max = 0.0; ///< 0 picks 6 * max b of the payoff-free per-state problems
    Exec exec = Exec::parallel;
    bool start_from_upper_bound = false; ///< initialize at the constant V_+ instead of 0
    double concavify_tolerance = 1e-10;
};

struct IterationRecord {
    int n = 0;
    double diff = 0.0;
    std::vector<double> thresholds;
};

struct RegimeSolution {
    ValueFunction V;
    ThresholdVector b_star;
    std::vector<IterationRecord> trace;
    double rho = 0.0;        ///< contraction factor max_i q_i/(q_i + r(i))
    double final_diff = 0.0;
    double fixed_point_residual = 0.0; ///< ||T_{b*} V - V||
    double V_minus = 0.0, V_plus = 0.0;
    std::vector<std::size_t> absorbing_states; ///< q_i = 0, solved as pure single-regime
    int grid_expansions = 0;
    double x_max = 0.0;
};

/// Lifted payoff f~(., i): the expected continuation value across the switch
/// jump out of state i, with the below-zero branch priced at the injection
/// cost. Analytic for the supported jump laws against piecewise-linear f,
/// projected onto the concave cone when grid roundoff breaks concavity.
/// Absorbing states (q_i = 0) lift to the zero payoff.
PayoffFunction lift_payoff(const RegimeModel& regime, const ValueFunction& f, std::size_t i,
                           double concavify_tol = 1e-10);

/// The auxiliary problem solved within state i: the single-model problem with
/// discount q -> r(i) and terminal rate r -> q_i (the first regime switch).
AuxiliaryProblem state_problem(const RegimeModel& regime, const ValueFunction& f, std::size_t i,
                               double concavify_tol = 1e-10);

/// One application of the evaluation operator T_b: per state, the NPV of the
/// refraction-reflection strategy at b(i) with the lifted payoff.
ValueFunction apply_T(const RegimeModel& regime, const ThresholdVector& b, const ValueFunction& f,
                      Exec exec = Exec::parallel, double concavify_tol = 1e-10);

/// One application of Theta: per state, the optimal threshold of the lifted
/// problem and its value; returns the new iterate and the threshold vector.
std::pair<ValueFunction, ThresholdVector> apply_Theta(const RegimeModel& regime,
                                                      const ValueFunction& f,
                                                      Exec exec = Exec::parallel,
                                                      double concavify_tol = 1e-10);

/// Value iteration v_{n+1} = Theta v_n with the a-posteriori contraction
/// stopping rule ||v_{n+1} - v_n|| < tol (1 - rho)/rho, which guarantees
/// ||v - V|| < tol at exit.
RegimeSolution solve(const RegimeModel& regime, const RegimeSolveOptions& options = {});

/// (V_minus, V_plus): V_+ = max delta / min r; V_- from the expected discounted
/// reflection cost of the per-state drift-dominating processes, widened by a
/// safety margin.
std::pair<double, double> value_bounds(const RegimeModel& regime);

} // namespace refract
