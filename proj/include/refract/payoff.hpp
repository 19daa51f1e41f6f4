#pragma once

#include <cstddef>
#include <vector>

namespace refract {

/// One interval of constant right-derivative of a payoff function.
/// hi may be +infinity (the tail piece).
struct SlopePiece {
    double lo = 0.0;
    double hi = 0.0;
    double slope = 0.0;
};

/// Concave piecewise-linear function on [0, x_max] with a constant tail slope
/// beyond the last knot. Houses the terminal payoff w of the auxiliary problem
/// and the lifted payoffs produced by the regime-switching iteration.
class PayoffFunction {
public:
    /// knots must start at 0 and be strictly increasing; slopes must be
    /// nonnegative, nonincreasing, and end no lower than tail_slope in [0, 1].
    PayoffFunction(std::vector<double> knots, std::vector<double> values, double tail_slope);

    static PayoffFunction zero(double x_max = 1.0);
    /// Builds from knot values, projecting onto the concave cone if the data
    /// violates concavity by more than `tolerance` (least concave majorant,
    /// slopes clipped into [0, slope_cap]).
    static PayoffFunction from_samples(std::vector<double> knots, std::vector<double> values,
                                       double tail_slope, double slope_cap,
                                       double tolerance = 1e-10);

    double value(double x) const;
    /// Right derivative w'_+(x); defined for x >= 0.
    double right_slope(double x) const;

    double x_max() const { return knots_.back(); }
    double tail_slope() const { return tail_slope_; }
    double slope_at_zero() const { return slopes_.empty() ? tail_slope_ : slopes_.front(); }
    bool is_zero() const;

    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& values() const { return values_; }
    const std::vector<double>& slopes() const { return slopes_; }

    /// Constant-slope pieces covering (lo, hi) intersected with (0, inf),
    /// including the tail piece; zero-slope pieces are skipped.
    std::vector<SlopePiece> pieces(double lo, double hi) const;

private:
    PayoffFunction() = default;

    std::vector<double> knots_;
    std::vector<double> values_;
    std::vector<double> slopes_; ///< per-interval chord slopes
    double tail_slope_ = 0.0;
};

/// Least concave majorant of the samples (x strictly increasing): the upper
/// hull values at the same abscissae.
std::vector<double> least_concave_majorant(const std::vector<double>& x,
                                           const std::vector<double>& y);

} // namespace refract
