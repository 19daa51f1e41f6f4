#include "refract/payoff.hpp"

#include "refract/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace refract {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> chord_slopes(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> s(x.size() - 1);
    for (std::size_t k = 0; k + 1 < x.size(); ++k) {
        s[k] = (y[k + 1] - y[k]) / (x[k + 1] - x[k]);
    }
    return s;
}

} // namespace

PayoffFunction::PayoffFunction(std::vector<double> knots, std::vector<double> values,
                               double tail_slope)
    : knots_(std::move(knots)), values_(std::move(values)), tail_slope_(tail_slope) {
    if (knots_.size() < 2 || knots_.size() != values_.size()) {
        throw AssumptionError("payoff shape", "need matching knots/values with at least two knots");
    }
    if (knots_.front() != 0.0) {
        throw AssumptionError("payoff shape", "first knot must be 0");
    }
    for (std::size_t k = 0; k + 1 < knots_.size(); ++k) {
        if (!(knots_[k + 1] > knots_[k])) {
            throw AssumptionError("payoff shape", "knots must be strictly increasing");
        }
    }
    if (!(tail_slope_ >= 0.0 && tail_slope_ <= 1.0)) {
        throw AssumptionError("payoff shape", "tail slope must lie in [0, 1]");
    }
    slopes_ = chord_slopes(knots_, values_);
    constexpr double tol = 1e-9;
    for (std::size_t k = 0; k < slopes_.size(); ++k) {
        if (slopes_[k] < -tol) {
            throw AssumptionError("payoff shape", "slopes must be nonnegative (w nondecreasing)");
        }
        if (k > 0 && slopes_[k] > slopes_[k - 1] + tol) {
            throw AssumptionError("payoff shape", "slopes must be nonincreasing (w concave)");
        }
    }
    if (!slopes_.empty() && tail_slope_ > slopes_.back() + tol) {
        throw AssumptionError("payoff shape", "tail slope exceeds last interior slope");
    }
}

PayoffFunction PayoffFunction::zero(double x_max) {
    return PayoffFunction({0.0, x_max}, {0.0, 0.0}, 0.0);
}

PayoffFunction PayoffFunction::from_samples(std::vector<double> knots, std::vector<double> values,
                                            double tail_slope, double slope_cap, double tolerance) {
    auto slopes = chord_slopes(knots, values);
    double worst = 0.0;
    for (std::size_t k = 1; k < slopes.size(); ++k) {
        worst = std::max(worst, slopes[k] - slopes[k - 1]);
    }
    bool needs_cap = !slopes.empty() &&
                     (slopes.front() > slope_cap + tolerance || slopes.back() < -tolerance);
    if (worst > tolerance || needs_cap) {
        values = least_concave_majorant(knots, values);
        slopes = chord_slopes(knots, values);
        // clip slopes into [0, slope_cap] and rebuild values from the origin
        for (auto& s : slopes) s = std::clamp(s, 0.0, slope_cap);
        for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
            values[k + 1] = values[k] + slopes[k] * (knots[k + 1] - knots[k]);
        }
    }
    double ts = std::clamp(tail_slope, 0.0, 1.0);
    if (!slopes.empty()) ts = std::min(ts, std::max(slopes.back(), 0.0));
    return PayoffFunction(std::move(knots), std::move(values), ts);
}

double PayoffFunction::value(double x) const {
    if (x <= 0.0) return values_.front();
    if (x >= knots_.back()) return values_.back() + tail_slope_ * (x - knots_.back());
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - knots_.begin()) - 1;
    return values_[k] + slopes_[k] * (x - knots_[k]);
}

double PayoffFunction::right_slope(double x) const {
    if (x >= knots_.back()) return tail_slope_;
    if (x <= 0.0) return slopes_.front();
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - knots_.begin()) - 1;
    return slopes_[k];
}

bool PayoffFunction::is_zero() const {
    if (tail_slope_ != 0.0) return false;
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

std::vector<SlopePiece> PayoffFunction::pieces(double lo, double hi) const {
    std::vector<SlopePiece> out;
    lo = std::max(lo, 0.0);
    if (!(hi > lo)) return out;
    for (std::size_t k = 0; k < slopes_.size(); ++k) {
        const double a = std::max(lo, knots_[k]);
        const double b = std::min(hi, knots_[k + 1]);
        if (b > a && slopes_[k] != 0.0) out.push_back({a, b, slopes_[k]});
    }
    if (hi > knots_.back() && tail_slope_ != 0.0) {
        out.push_back({std::max(lo, knots_.back()), hi == kInf ? kInf : hi, tail_slope_});
    }
    return out;
}

std::vector<double> least_concave_majorant(const std::vector<double>& x,
                                           const std::vector<double>& y) {
    const std::size_t n = x.size();
    // upper hull of the points (monotone chain)
    std::vector<std::size_t> hull;
    for (std::size_t i = 0; i < n; ++i) {
        while (hull.size() >= 2) {
            const std::size_t a = hull[hull.size() - 2];
            const std::size_t b = hull[hull.size() - 1];
            const double cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a]);
            if (cross >= 0.0) {
                hull.pop_back();
            } else {
                break;
            }
        }
        hull.push_back(i);
    }
    std::vector<double> out(n);
    std::size_t seg = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (seg + 1 < hull.size() && x[hull[seg + 1]] <= x[i]) ++seg;
        if (seg + 1 < hull.size()) {
            const std::size_t a = hull[seg], b = hull[seg + 1];
            const double t = (x[i] - x[a]) / (x[b] - x[a]);
            out[i] = y[a] + t * (y[b] - y[a]);
        } else {
            out[i] = y[hull[seg]];
        }
    }
    return out;
}

} // namespace refract
