#pragma once

#include "refract/levy_model.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace refract {

enum class ScaleMode { W, Wprime, Z };

/// sum_k coef_k * e^{rho_k x} on [0, inf); the closed-form scale-function
/// representation for the exponential-sum families (coefficients are the
/// partial-fraction residues of 1/(psi(theta) - q)).
struct ExponentialSum {
    std::vector<double> rho;
    std::vector<double> coef;

    double eval(double x) const;
    double eval_derivative(double x) const;
    /// int_0^x of the sum (raw antiderivative; the set applies the half-line cut)
    double integral(double x) const;
    /// int_0^x int_0^s of the sum
    double double_integral(double x) const;
};

struct SelfCheckReport {
    double laplace_residual = 0.0;   ///< worst |LT(W) - 1/(psi - q)| over probed theta, both processes
    double identity_residual = 0.0;  ///< worst residual of the two refraction convolution identities
    double boundary_residual = 0.0;  ///< worst violation of the x <= 0 conventions and W(0) limits

    double max_residual() const;
    std::string summary() const;
};

/// Evaluates the scale functions of X and of the refracted process Y = X - delta*t
/// at a fixed level q, together with the derived integrals and convolutions used
/// by the threshold formulas. Immutable after construction; all evaluations are
/// pure and safe to call concurrently.
class ScaleFunctionSet {
public:
    /// Builds at level q > 0. Closed-form exponential sums for the
    /// brownian_drift / cramer_lundberg_exp families; numeric Laplace inversion
    /// (experimental) for general_numeric.
    ScaleFunctionSet(LevyModel model, double delta, double q);

    /// Custom representation; also how tests inject corrupted coefficients.
    static ScaleFunctionSet from_exponential_sums(LevyModel model, double delta, double q,
                                                  ExponentialSum base, ExponentialSum refracted);

    const LevyModel& model() const { return model_; }
    double delta() const { return delta_; }
    double q() const { return q_; }
    bool closed_form() const { return closed_form_; }

    /// Phi(q) (Proc::base) or varphi(q) (Proc::refracted).
    double phi(Proc p) const { return p == Proc::base ? phi_x_ : phi_y_; }

    /// W^{(q)}(x) or its refracted analogue; 0 for x < 0, right limit at x = 0.
    double W(Proc p, double x) const;
    /// dW/dx for x > 0; domain error at x <= 0.
    double W_prime(Proc p, double x) const;
    /// Wbar(x) = int_0^x W
    double Wbar(Proc p, double x) const;
    /// int_0^x Wbar
    double Wbarbar(Proc p, double x) const;
    /// Z(x) = 1 + q*Wbar(x); equals 1 for x <= 0
    double Z(Proc p, double x) const;
    /// Zbar(x) = int_0^x Z; equals x for x <= 0
    double Zbar(Proc p, double x) const;

    /// Right limit W(0+): 1/c for bounded variation, 0 otherwise.
    double W0(Proc p) const;
    /// Right limit W'(0+): 2/sigma^2 when sigma > 0, (q + Pi(-inf,0))/c^2 for
    /// finite-activity bounded variation.
    double Wprime0(Proc p) const;

    /// int_0^inf e^{-varphi(q) y} W(y + b) dy of the base process
    /// (mode Wprime integrates W' instead).
    double exp_tail_integral(double b, ScaleMode mode) const;
    /// int_{z1}^{z2} [ int_0^inf e^{-varphi(q) y} W(y + b - z) dy ] dz,  0 <= z1 <= z2 <= b
    double exp_tail_integral_z_avg(double b, double z1, double z2) const;

    /// int_b^x W_Y(x - y) * {W, W', Z}(y) dy of the base process; 0 when x <= b.
    double refracted_convolution(double x, double b, ScaleMode mode) const;
    /// int_{z1}^{z2} int_b^x W_Y(x - y) {W, W'}(y - z) dy dz,  0 <= z1 <= z2 <= b
    double refracted_convolution_z_avg(double x, double b, double z1, double z2,
                                       ScaleMode mode) const;

    /// Laplace-transform residuals, convolution identities and boundary values.
    SelfCheckReport self_check(std::span<const double> grid) const;

    /// Closed-form representation access (throws NumericalError on the numeric path).
    const ExponentialSum& sum(Proc p) const;

private:
    ScaleFunctionSet() = default;
    void init_closed_form();
    void init_numeric();

    LevyModel model_;
    double delta_ = 0.0;
    double q_ = 0.0;
    double phi_x_ = 0.0;
    double phi_y_ = 0.0;
    bool closed_form_ = true;

    ExponentialSum base_;
    ExponentialSum refr_;

    struct NumericTable;
    std::shared_ptr<const NumericTable> numeric_; // inversion cache, general_numeric only
};

} // namespace refract
