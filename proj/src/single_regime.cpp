#include "refract/single_regime.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace refract {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double exp_gap(double phi, double z, double b) {
    // e^{-phi (z - b)}, with z possibly +inf
    if (z == kInf) return 0.0;
    return std::exp(-phi * (z - b));
}

} // namespace

RefractionKernel::RefractionKernel(std::shared_ptr<const ScaleFunctionSet> scales,
                                   AuxiliaryProblem prob, double b)
    : scales_(std::move(scales)), prob_(std::move(prob)), b_(b) {
    const auto& S = *scales_;
    alpha_ = prob_.alpha();
    phi_ = S.phi(Proc::refracted);
    mean_ = prob_.model.mean();

    below_ = prob_.payoff.pieces(0.0, b_);
    above_ = prob_.payoff.pieces(b_, kInf);

    Wb_ = S.W(Proc::base, b_);
    Zb_ = S.Z(Proc::base, b_);
    IW_ = S.exp_tail_integral(b_, ScaleMode::W);
    IWp_ = S.exp_tail_integral(b_, ScaleMode::Wprime);
    h_ = IWp_ / (phi_ * IW_);
    const double N = prob_.beta * Zb_ - 1.0 + prob_.beta * alpha_ * IW_;
    Ktil_ = N / (phi_ * IW_);

    cLam_ = 0.0;
    izW_ = 0.0;
    for (const auto& p : below_) {
        cLam_ += p.slope * S.exp_tail_integral_z_avg(b_, p.lo, p.hi) / IW_;
        izW_ += p.slope * (S.Wbar(Proc::base, b_ - p.lo) - S.Wbar(Proc::base, b_ - p.hi));
    }
    cM_ = 0.0;
    for (const auto& p : above_) {
        cM_ += p.slope * (exp_gap(phi_, p.lo, b_) - exp_gap(phi_, p.hi, b_)) / phi_;
    }
    cM_ /= phi_ * prob_.delta * IW_;

    ce_ = 0.0;
    for (const auto& p : prob_.payoff.pieces(0.0, kInf)) {
        ce_ += p.slope * (exp_gap(phi_, p.lo, 0.0) - exp_gap(phi_, p.hi, 0.0)) / phi_;
    }

    const double zblocks = cLam_ * Wb_ - izW_ + cM_ * Wb_;
    g_ = prob_.beta * Zb_ - 1.0 - Ktil_ * Wb_ + prob_.r * zblocks;
    Rb_ = zblocks * phi_ * IW_ / IWp_;
}

double RefractionKernel::below_blocks(double x, ScaleMode mode) const {
    // mode W:      sum over (0,b) pieces of w' * [ Wbarbar(x-z) diff + delta * conv_z ]
    // mode Wprime: same with Wbar(x-z) and the W' convolution
    const auto& S = *scales_;
    double acc = 0.0;
    for (const auto& p : below_) {
        double direct = 0.0;
        if (mode == ScaleMode::W) {
            direct = S.Wbarbar(Proc::base, x - p.lo) - S.Wbarbar(Proc::base, x - p.hi);
        } else {
            direct = S.Wbar(Proc::base, x - p.lo) - S.Wbar(Proc::base, x - p.hi);
        }
        const double conv = S.refracted_convolution_z_avg(x, b_, p.lo, p.hi, mode);
        acc += p.slope * (direct + prob_.delta * conv);
    }
    return acc;
}

double RefractionKernel::above_blocks(double x, ScaleMode mode) const {
    // mode W: sum over (b,inf) pieces of w' * Wbarbar_Y(x-z) diff; Wprime uses Wbar_Y
    const auto& S = *scales_;
    double acc = 0.0;
    for (const auto& p : above_) {
        if (p.lo >= x) break;
        double direct = 0.0;
        if (mode == ScaleMode::W) {
            direct = S.Wbarbar(Proc::refracted, x - p.lo) -
                     (p.hi == kInf ? 0.0 : S.Wbarbar(Proc::refracted, x - p.hi));
        } else {
            direct = S.Wbar(Proc::refracted, x - p.lo) -
                     (p.hi == kInf ? 0.0 : S.Wbar(Proc::refracted, x - p.hi));
        }
        acc += p.slope * direct;
    }
    return acc;
}

double RefractionKernel::value(double x) const {
    const auto& S = *scales_;
    const double beta = prob_.beta, delta = prob_.delta, r = prob_.r;
    const double D = S.Z(Proc::base, x) + alpha_ * delta * S.refracted_convolution(x, b_, ScaleMode::W);
    double v = -delta * S.Wbar(Proc::refracted, x - b_);
    v += beta * (S.Zbar(Proc::base, x) + mean_ / alpha_);
    v += beta * delta * S.refracted_convolution(x, b_, ScaleMode::Z);
    v += (-Ktil_ / alpha_ + (r / alpha_) * (cLam_ + cM_)) * D;
    v += r * prob_.payoff.value(0.0) / alpha_;
    v -= r * below_blocks(x, ScaleMode::W);
    v -= r * above_blocks(x, ScaleMode::W);
    return v;
}

double RefractionKernel::derivative_common(double x) const {
    const auto& S = *scales_;
    const double beta = prob_.beta, delta = prob_.delta, r = prob_.r;
    const double E = S.W(Proc::base, x) + delta * S.refracted_convolution(x, b_, ScaleMode::Wprime);
    double dv = beta * S.Z(Proc::base, x) +
                beta * delta * alpha_ * S.refracted_convolution(x, b_, ScaleMode::W);
    dv += (-Ktil_ + r * (cLam_ + cM_)) * E;
    dv -= r * below_blocks(x, ScaleMode::Wprime);
    dv -= r * above_blocks(x, ScaleMode::Wprime);
    return dv;
}

double RefractionKernel::derivative(double x) const {
    if (x == b_ || x <= 0.0) {
        throw std::domain_error("derivative: one-sided limits required at x in {0, b}");
    }
    // W_Y(x - b) vanishes below b and carries the jump delta*W_Y(0)*g at b
    return derivative_common(x) + prob_.delta * scales_->W(Proc::refracted, x - b_) * g_;
}

double RefractionKernel::derivative_one_sided(double x, Side side) const {
    if (x < 0.0 || (x == 0.0 && side == Side::left)) return prob_.beta;
    if (x == b_) {
        const double common = derivative_common(x);
        if (side == Side::right) {
            return common + prob_.delta * scales_->W0(Proc::refracted) * g_;
        }
        return common;
    }
    if (x == 0.0) return derivative_common(0.0); // right limit; below-b terms vanish
    return derivative(x);
}

double RefractionKernel::optimal_value_derivative(double x) const {
    const auto& S = *scales_;
    const double beta = prob_.beta, delta = prob_.delta, r = prob_.r;
    if (b_ > 0.0) {
        const double E =
            S.W(Proc::base, x) + delta * S.refracted_convolution(x, b_, ScaleMode::Wprime);
        const double coef =
            -beta * alpha_ * IW_ / IWp_ + r * Rb_ / (phi_ * IW_) + r * (cLam_ + cM_);
        double dv = beta * S.Z(Proc::base, x) +
                    beta * delta * alpha_ * S.refracted_convolution(x, b_, ScaleMode::W);
        dv += coef * E;
        dv -= r * below_blocks(x, ScaleMode::Wprime);
        dv -= r * above_blocks(x, ScaleMode::Wprime);
        return dv;
    }
    // threshold at zero: resolvent identities of the refracted process alone
    double dv = beta * (S.Z(Proc::refracted, x) - (alpha_ / phi_) * S.W(Proc::refracted, x));
    dv += r * (ce_ * S.W(Proc::refracted, x) - above_blocks(x, ScaleMode::Wprime));
    return dv;
}

double RefractionKernel::g_simplified() const {
    return (prob_.beta * Zb_ - 1.0) * h_ + prob_.r * h_ * Rb_ -
           prob_.beta * alpha_ * Wb_ / phi_;
}

double RefractionKernel::smooth_fit_ratio() const {
    const double exit_lt = Zb_ - alpha_ * IW_ * Wb_ / IWp_; // E_b[e^{-alpha kappa}]
    return prob_.beta * exit_lt - 1.0 + prob_.r * Rb_;
}

// ---------------------------------------------------------------------------

SingleRegimeSolver::SingleRegimeSolver(AuxiliaryProblem prob) : prob_(std::move(prob)) {
    prob_.require_valid();
    scales_ = std::make_shared<const ScaleFunctionSet>(prob_.model, prob_.delta, prob_.alpha());
}

std::vector<double> SingleRegimeSolver::npv_grid(double b, std::span<const double> xs,
                                                 Exec exec) const {
    const RefractionKernel k = kernel(b);
    std::vector<double> out(xs.size());
    parallel_for(exec, static_cast<std::ptrdiff_t>(xs.size()),
                 [&](std::size_t i) { out[i] = k.value(xs[i]); });
    return out;
}

BarrierScore SingleRegimeSolver::barrier_score(double b) const {
    const RefractionKernel k = kernel(b);
    return {k.g(), k.h()};
}

SingleRegimeSolution SingleRegimeSolver::optimal_threshold() const {
    auto make = [&](double b, bool at_zero) {
        SingleRegimeSolution sol;
        sol.kernel = std::make_shared<const RefractionKernel>(scales_, prob_, b);
        sol.b_star = b;
        sol.threshold_at_zero = at_zero;
        sol.g_residual = at_zero ? 0.0 : std::abs(sol.kernel->g());
        return sol;
    };

    const double g0 = kernel(0.0).g();
    if (g0 <= 0.0) return make(0.0, true);

    // the limit of g is negative, so a sign change exists; cap the bracket where
    // e^{Phi b} growth exhausts double precision
    const double cap = std::max(1e3, 60.0 / scales_->phi(Proc::base));
    double lo = 0.0, g_lo = g0;
    double hi = 1.0, g_hi = kernel(hi).g();
    std::ostringstream trace;
    trace << "(0," << g0 << ")";
    while (g_hi >= 0.0) {
        trace << " (" << hi << "," << g_hi << ")";
        lo = hi;
        g_lo = g_hi;
        hi *= 2.0;
        if (hi > cap) {
            throw NumericalError("optimal_threshold: no sign change of g up to b=" +
                                 std::to_string(hi) + "; g-trace: " + trace.str());
        }
        g_hi = kernel(hi).g();
    }
    for (int it = 0; it < 200 && hi - lo > 1e-11 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gm = kernel(mid).g();
        if (gm < 0.0) {
            hi = mid;
            g_hi = gm;
        } else {
            lo = mid;
            g_lo = gm;
        }
    }
    // secant polish inside the bracket
    double b = (g_lo - g_hi) > 0.0 ? lo + g_lo * (hi - lo) / (g_lo - g_hi) : 0.5 * (lo + hi);
    for (int it = 0; it < 4; ++it) {
        const double gb = kernel(b).g();
        if (gb > 0.0) {
            lo = b;
            g_lo = gb;
        } else {
            hi = b;
            g_hi = gb;
        }
        if (!((g_lo - g_hi) > 0.0)) break;
        b = lo + g_lo * (hi - lo) / (g_lo - g_hi);
        b = std::clamp(b, lo, hi);
    }
    return make(b, false);
}

// ---------------------------------------------------------------------------

double npv(const AuxiliaryProblem& prob, double b, double x) {
    return SingleRegimeSolver(prob).npv(b, x);
}

double npv_derivative(const AuxiliaryProblem& prob, double b, double x) {
    return SingleRegimeSolver(prob).npv_derivative(b, x);
}

double npv_derivative_one_sided(const AuxiliaryProblem& prob, double b, double x, Side side) {
    return SingleRegimeSolver(prob).kernel(b).derivative_one_sided(x, side);
}

BarrierScore barrier_score(const AuxiliaryProblem& prob, double b) {
    return SingleRegimeSolver(prob).barrier_score(b);
}

SingleRegimeSolution optimal_threshold(const AuxiliaryProblem& prob) {
    return SingleRegimeSolver(prob).optimal_threshold();
}

double optimal_derivative(const AuxiliaryProblem&, const SingleRegimeSolution& sol, double x) {
    return sol.kernel->optimal_value_derivative(x);
}

bool OptimalityReport::pass(double tol) const {
    return smooth_fit_residual <= tol && below_min_margin >= -tol && below_max_margin >= -tol &&
           above_lower_margin >= -tol && above_upper_margin >= -tol && monotone_margin >= -tol &&
           slope_at_zero_excess <= tol && lower_bound_margin >= -tol && hjb_certified;
}

std::string OptimalityReport::summary() const {
    std::ostringstream os;
    os << "b*                      " << b_star << '\n'
       << "smooth-fit |v'(b*)-1|   " << smooth_fit_residual << '\n'
       << "min (v'-1) on (0,b*)    " << below_min_margin << '\n'
       << "min (beta-v') on (0,b*) " << below_max_margin << '\n'
       << "min v' on (b*,xmax)     " << above_lower_margin << '\n'
       << "min (1-v') on (b*,xmax) " << above_upper_margin << '\n'
       << "v' monotone margin      " << monotone_margin << '\n'
       << "v'(0+)-beta             " << slope_at_zero_excess << '\n'
       << "min v - v(0)            " << lower_bound_margin << '\n'
       << "HJB certified           " << (hjb_certified ? "yes" : "no") << '\n';
    return os.str();
}

OptimalityReport verify_optimality(const AuxiliaryProblem& prob, const SingleRegimeSolution& sol,
                                   std::size_t grid_points, double x_max) {
    const auto& k = *sol.kernel;
    const double b = sol.b_star;
    if (x_max <= 0.0) {
        x_max = std::max({6.0 * b, 5.0, b + 10.0 / k.scales().phi(Proc::refracted)});
    }
    OptimalityReport rep;
    rep.b_star = b;
    rep.below_min_margin = kInf;
    rep.below_max_margin = kInf;
    rep.above_lower_margin = kInf;
    rep.above_upper_margin = kInf;
    rep.monotone_margin = kInf;
    rep.lower_bound_margin = kInf;

    if (b > 0.0) {
        const double right = k.derivative_one_sided(b, Side::right);
        const double left = k.derivative_one_sided(b, Side::left);
        rep.smooth_fit_residual = std::max(std::abs(right - 1.0), std::abs(left - 1.0));
    }
    rep.slope_at_zero_excess = k.derivative_one_sided(0.0, Side::right) - prob.beta;

    const double v0 = k.value(0.0);
    double prev_slope = kInf;
    for (std::size_t i = 1; i <= grid_points; ++i) {
        const double x = x_max * static_cast<double>(i) / static_cast<double>(grid_points);
        if (x == b) continue;
        const double d = k.derivative(x);
        if (x < b) {
            rep.below_min_margin = std::min(rep.below_min_margin, d - 1.0);
            rep.below_max_margin = std::min(rep.below_max_margin, prob.beta - d);
        } else {
            rep.above_lower_margin = std::min(rep.above_lower_margin, d);
            rep.above_upper_margin = std::min(rep.above_upper_margin, 1.0 - d);
        }
        if (prev_slope != kInf) rep.monotone_margin = std::min(rep.monotone_margin, prev_slope - d);
        prev_slope = d;
        rep.lower_bound_margin = std::min(rep.lower_bound_margin, k.value(x) - v0);
    }
    const double tol = 1e-7;
    rep.hjb_certified = rep.below_min_margin >= -tol && rep.above_upper_margin >= -tol;
    return rep;
}

} // namespace refract
