#include "refract/scale_functions.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

namespace refract {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// (e^t - 1)/t, stable near 0
double phi1(double t) {
    if (t == 0.0) return 1.0;
    return std::expm1(t) / t;
}

// int_b^x e^{eta (x-y)} e^{rho y} dy for x > b; 0 otherwise
double conv_term(double eta, double rho, double x, double b) {
    const double len = x - b;
    if (!(len > 0.0)) return 0.0;
    return len * std::exp(rho * b + eta * len) * phi1((rho - eta) * len);
}

double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                            double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
        return left + right + (left + right - whole) / 15.0;
    }
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int depth = 40) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

// 32-point Gauss-Legendre on [-1,1] (upper half; symmetric)
constexpr double gl32_x[16] = {
    0.0483076656877383, 0.1444719615827965, 0.2392873622521371, 0.3318686022821277,
    0.4213512761306353, 0.5068999089322294, 0.5877157572407623, 0.6630442669302152,
    0.7321821187402897, 0.7944837959679424, 0.8493676137325700, 0.8963211557660521,
    0.9349060759377397, 0.9647622555875064, 0.9856115115452684, 0.9972638618494816};
constexpr double gl32_w[16] = {
    0.0965400885147278, 0.0956387200792749, 0.0938443990808046, 0.0911738786957639,
    0.0876520930044038, 0.0833119242269467, 0.0781938957870703, 0.0723457941088485,
    0.0658222227763618, 0.0586840934785355, 0.0509980592623762, 0.0428358980222267,
    0.0342738629130214, 0.0253920653092621, 0.0162743947309057, 0.0070186100094701};

template <typename F>
double gl32(F&& f, double a, double b) {
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double acc = 0.0;
    for (int k = 0; k < 16; ++k) {
        acc += gl32_w[k] * (f(mid + half * gl32_x[k]) + f(mid - half * gl32_x[k]));
    }
    return acc * half;
}

double psi_of(const LevyModel& m, double delta, double theta) {
    return laplace_exponent(m, theta) - delta * theta;
}

// analytic psi' for the closed-form families
double psi_prime(const LevyModel& m, double delta, double theta) {
    switch (m.family) {
        case LevyFamily::brownian_drift:
            return (m.gamma - delta) + m.sigma * m.sigma * theta;
        case LevyFamily::cramer_lundberg_exp: {
            const double mu = m.jump_mean_param;
            return (m.gamma - delta) - m.jump_rate * mu / ((mu + theta) * (mu + theta));
        }
        case LevyFamily::general_numeric: {
            const double h = 1e-6 * std::max(1.0, std::abs(theta));
            return (psi_of(m, delta, theta + h) - psi_of(m, delta, theta - h)) / (2.0 * h);
        }
    }
    return 0.0;
}

// both real roots of psi_delta(theta) = q for the closed-form families
std::pair<double, double> family_roots(const LevyModel& m, double delta, double q) {
    if (m.family == LevyFamily::brownian_drift) {
        const double g = m.gamma - delta;
        const double s2 = m.sigma * m.sigma;
        const double disc = std::sqrt(g * g + 2.0 * s2 * q);
        return {(-g + disc) / s2, (-g - disc) / s2};
    }
    const double c = m.gamma - delta;
    const double mu = m.jump_mean_param;
    const double B = c * mu - m.jump_rate - q;
    const double disc = std::sqrt(B * B + 4.0 * c * q * mu);
    return {(-B + disc) / (2.0 * c), (-B - disc) / (2.0 * c)};
}

using cd = std::complex<double>;

// Abate-Whitt Euler inversion of fhat at t > 0
double euler_invert(const std::function<cd(cd)>& fhat, double t, double A = 18.4, int M = 21,
                    int E = 12) {
    const double pref = std::exp(0.5 * A) / t;
    double sum = 0.5 * fhat(cd(0.5 * A / t, 0.0)).real();
    double sign = -1.0;
    std::vector<double> partial;
    partial.reserve(E + 1);
    for (int k = 1; k <= M + E; ++k) {
        sum += sign * fhat(cd(0.5 * A / t, k * M_PI / t)).real();
        sign = -sign;
        if (k >= M) partial.push_back(sum);
    }
    // binomial (Euler) smoothing of the last E+1 partial sums
    double acc = 0.0, binom = 1.0, total_w = 0.0;
    for (int k = 0; k <= E; ++k) {
        acc += binom * partial[static_cast<std::size_t>(k)];
        total_w += binom;
        binom *= static_cast<double>(E - k) / (k + 1.0);
    }
    return pref * acc / total_w;
}

} // namespace

double ExponentialSum::eval(double x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < rho.size(); ++k) s += coef[k] * std::exp(rho[k] * x);
    return s;
}

double ExponentialSum::eval_derivative(double x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < rho.size(); ++k) s += coef[k] * rho[k] * std::exp(rho[k] * x);
    return s;
}

double ExponentialSum::integral(double x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < rho.size(); ++k) s += coef[k] * std::expm1(rho[k] * x) / rho[k];
    return s;
}

double ExponentialSum::double_integral(double x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < rho.size(); ++k) {
        s += coef[k] * (std::expm1(rho[k] * x) - rho[k] * x) / (rho[k] * rho[k]);
    }
    return s;
}

double SelfCheckReport::max_residual() const {
    return std::max({laplace_residual, identity_residual, boundary_residual});
}

std::string SelfCheckReport::summary() const {
    std::ostringstream os;
    os << "laplace residual  " << laplace_residual << '\n'
       << "identity residual " << identity_residual << '\n'
       << "boundary residual " << boundary_residual << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// numeric-inversion fallback (general_numeric family; experimental)
// ---------------------------------------------------------------------------

struct ScaleFunctionSet::NumericTable {
    // density samples shared by both processes; the complex jump integral is
    // evaluated cell-analytically against the linear interpolant so that the
    // oscillatory inversion contours stay resolved
    std::vector<double> dens;
    double zmin = 0.0, dzz = 0.0, mass = 0.0, comp1 = 0.0;

    void sample_density(const LevyModel& m, int cells = 2048) {
        zmin = m.density_support_lower;
        dzz = -zmin / cells;
        dens.resize(static_cast<std::size_t>(cells) + 1);
        for (int j = 0; j <= cells; ++j) {
            dens[static_cast<std::size_t>(j)] = m.levy_density(std::min(zmin + j * dzz, 0.0));
        }
        mass = 0.0;
        comp1 = 0.0;
        for (int j = 0; j < cells; ++j) {
            const double zj = zmin + j * dzz;
            const double a = dens[static_cast<std::size_t>(j)];
            const double bnext = dens[static_cast<std::size_t>(j) + 1];
            mass += 0.5 * (a + bnext) * dzz;
            if (zj + dzz > -1.0) {
                const double lo = std::max(zj, -1.0);
                const double va = a + (bnext - a) / dzz * (lo - zj);
                comp1 += 0.5 * (va * lo + bnext * (zj + dzz)) * (zj + dzz - lo);
            }
        }
    }

    cd psi_complex(const LevyModel& m, double delta, cd s) const {
        cd I0, I1;
        const cd u = s * dzz;
        const cd E = std::exp(u);
        if (std::abs(u) < 1e-5) {
            I0 = dzz * (1.0 + u / 2.0 + u * u / 6.0);
            I1 = dzz * dzz * (0.5 + u / 3.0 + u * u / 8.0);
        } else {
            I0 = (E - 1.0) / s;
            I1 = (dzz * E - I0) / s;
        }
        // walk cells from 0 downward so the phase decays instead of underflowing
        cd acc{};
        const cd E_inv = std::exp(-u);
        cd phase = E_inv;
        for (std::size_t j = dens.size() - 1; j-- > 0;) {
            const double a = dens[j];
            const double b = (dens[j + 1] - a) / dzz;
            acc += phase * (a * I0 + b * I1);
            if (std::abs(phase.real()) + std::abs(phase.imag()) < 1e-300) break;
            phase *= E_inv;
        }
        const cd jump = acc - mass - s * comp1;
        return (m.gamma - delta) * s + 0.5 * m.sigma * m.sigma * s * s + jump;
    }

    struct ProcTable {
        double delta = 0.0;
        double phi = 0.0;      // right inverse at q
        double psip_phi = 0.0; // psi'(phi)
        double w0 = 0.0;
        double x_cap = 0.0, dx = 0.0;
        std::vector<double> w, wbar, wbarbar; // uniform samples on [0, x_cap]

        double interp(const std::vector<double>& tab, double x) const {
            const double s = x / dx;
            const auto i = static_cast<std::size_t>(s);
            if (i + 1 >= tab.size()) return tab.back();
            const double t = s - static_cast<double>(i);
            return tab[i] * (1.0 - t) + tab[i + 1] * t;
        }
        // asymptotic continuation e^{phi x}/psi'(phi) beyond the table
        double W_at(double x) const {
            if (x <= 0.0) return 0.0;
            if (x <= x_cap) return interp(w, x);
            return std::exp(phi * x) / psip_phi;
        }
        double Wbar_at(double x) const {
            if (x <= 0.0) return 0.0;
            if (x <= x_cap) return interp(wbar, x);
            return wbar.back() + (std::exp(phi * x) - std::exp(phi * x_cap)) / (phi * psip_phi);
        }
        double Wbarbar_at(double x) const {
            if (x <= 0.0) return 0.0;
            if (x <= x_cap) return interp(wbarbar, x);
            const double ex = (std::exp(phi * x) - std::exp(phi * x_cap)) / (phi * phi * psip_phi) -
                              (x - x_cap) * std::exp(phi * x_cap) / (phi * psip_phi);
            return wbarbar.back() + wbar.back() * (x - x_cap) + ex;
        }
    };

    LevyModel model;
    double q = 0.0;
    ProcTable base, refr;

    double invert_W(const ProcTable& pt, double x) const {
        if (x <= 0.0) return 0.0;
        // tilted transform 1/(psi(s + phi) - q) keeps the Bromwich contour at Re > 0
        auto fhat = [&](cd s) -> cd {
            return 1.0 / (psi_complex(model, pt.delta, s + pt.phi) - q);
        };
        const double g = euler_invert(fhat, x);
        if (!std::isfinite(g)) {
            std::ostringstream os;
            os << "numeric scale-function inversion failed at x=" << x << " (contour Re="
               << pt.phi << ", q=" << q << ")";
            throw NumericalError(os.str());
        }
        return std::exp(pt.phi * x) * g;
    }

    void build(ProcTable& pt, double delta_in) {
        pt.delta = delta_in;
        pt.phi = right_inverse(model, delta_in, q, delta_in > 0.0 ? Proc::refracted : Proc::base);
        pt.psip_phi = psi_prime(model, delta_in, pt.phi);
        if (model.sigma > 0.0) {
            pt.w0 = 0.0;
        } else {
            double c = model.effective_drift() - delta_in;
            pt.w0 = 1.0 / c;
        }
        pt.x_cap = std::clamp(40.0 / pt.phi, 20.0, 100.0);
        const std::size_t n = 1536;
        pt.dx = pt.x_cap / static_cast<double>(n - 1);
        pt.w.resize(n);
        pt.wbar.resize(n);
        pt.wbarbar.resize(n);
        pt.w[0] = pt.w0;
        for (std::size_t i = 1; i < n; ++i) pt.w[i] = invert_W(pt, static_cast<double>(i) * pt.dx);
        pt.wbar[0] = 0.0;
        pt.wbarbar[0] = 0.0;
        for (std::size_t i = 1; i < n; ++i) {
            pt.wbar[i] = pt.wbar[i - 1] + 0.5 * pt.dx * (pt.w[i - 1] + pt.w[i]);
            pt.wbarbar[i] = pt.wbarbar[i - 1] + 0.5 * pt.dx * (pt.wbar[i - 1] + pt.wbar[i]);
        }
    }
};

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

ScaleFunctionSet::ScaleFunctionSet(LevyModel model, double delta, double q)
    : model_(std::move(model)), delta_(delta), q_(q) {
    if (!(q > 0.0)) throw std::domain_error("ScaleFunctionSet: q must be positive");
    if (delta < 0.0) throw std::domain_error("ScaleFunctionSet: delta must be nonnegative");
    model_.validate();
    if (model_.bounded_variation() && delta_ > 0.0 && !(model_.effective_drift() > delta_)) {
        throw AssumptionError("c > delta", "refracted process would have monotone paths");
    }
    if (model_.family == LevyFamily::general_numeric) {
        closed_form_ = false;
        init_numeric();
    } else {
        init_closed_form();
    }
}

void ScaleFunctionSet::init_closed_form() {
    auto build = [&](double d) {
        ExponentialSum s;
        const auto [top, bottom] = family_roots(model_, d, q_);
        s.rho = {top, bottom};
        s.coef = {1.0 / psi_prime(model_, d, top), 1.0 / psi_prime(model_, d, bottom)};
        return s;
    };
    base_ = build(0.0);
    refr_ = build(delta_);
    phi_x_ = base_.rho.front();
    phi_y_ = refr_.rho.front();
}

void ScaleFunctionSet::init_numeric() {
    auto tab = std::make_shared<NumericTable>();
    tab->model = model_;
    tab->q = q_;
    tab->sample_density(model_);
    tab->build(tab->base, 0.0);
    tab->build(tab->refr, delta_);
    phi_x_ = tab->base.phi;
    phi_y_ = tab->refr.phi;
    numeric_ = std::move(tab);
}

ScaleFunctionSet ScaleFunctionSet::from_exponential_sums(LevyModel model, double delta, double q,
                                                         ExponentialSum base,
                                                         ExponentialSum refracted) {
    ScaleFunctionSet s;
    s.model_ = std::move(model);
    s.delta_ = delta;
    s.q_ = q;
    s.base_ = std::move(base);
    s.refr_ = std::move(refracted);
    s.phi_x_ = *std::max_element(s.base_.rho.begin(), s.base_.rho.end());
    s.phi_y_ = *std::max_element(s.refr_.rho.begin(), s.refr_.rho.end());
    s.closed_form_ = true;
    return s;
}

const ExponentialSum& ScaleFunctionSet::sum(Proc p) const {
    if (!closed_form_) {
        throw NumericalError("exponential-sum representation unavailable on the numeric path");
    }
    return p == Proc::base ? base_ : refr_;
}

// ---------------------------------------------------------------------------
// point evaluations
// ---------------------------------------------------------------------------

double ScaleFunctionSet::W(Proc p, double x) const {
    if (x < 0.0) return 0.0;
    if (closed_form_) return (p == Proc::base ? base_ : refr_).eval(x);
    const auto& pt = (p == Proc::base) ? numeric_->base : numeric_->refr;
    if (x == 0.0) return pt.w0;
    return numeric_->invert_W(pt, x);
}

double ScaleFunctionSet::W_prime(Proc p, double x) const {
    if (!(x > 0.0)) throw std::domain_error("W_prime: x must be positive");
    if (closed_form_) return (p == Proc::base ? base_ : refr_).eval_derivative(x);
    const double h = 1e-5 * std::max(1.0, x);
    const double lo = std::max(0.5 * x, x - h);
    return (W(p, x + h) - W(p, lo)) / (x + h - lo);
}

double ScaleFunctionSet::Wbar(Proc p, double x) const {
    if (x <= 0.0) return 0.0;
    if (closed_form_) return (p == Proc::base ? base_ : refr_).integral(x);
    return (p == Proc::base ? numeric_->base : numeric_->refr).Wbar_at(x);
}

double ScaleFunctionSet::Wbarbar(Proc p, double x) const {
    if (x <= 0.0) return 0.0;
    if (closed_form_) return (p == Proc::base ? base_ : refr_).double_integral(x);
    return (p == Proc::base ? numeric_->base : numeric_->refr).Wbarbar_at(x);
}

double ScaleFunctionSet::Z(Proc p, double x) const { return 1.0 + q_ * Wbar(p, x); }

double ScaleFunctionSet::Zbar(Proc p, double x) const {
    if (x <= 0.0) return x;
    return x + q_ * Wbarbar(p, x);
}

double ScaleFunctionSet::W0(Proc p) const {
    if (closed_form_) {
        const auto& s = (p == Proc::base ? base_ : refr_);
        double acc = 0.0;
        for (double c : s.coef) acc += c;
        return acc;
    }
    return (p == Proc::base ? numeric_->base : numeric_->refr).w0;
}

double ScaleFunctionSet::Wprime0(Proc p) const {
    if (closed_form_) return (p == Proc::base ? base_ : refr_).eval_derivative(0.0);
    if (model_.sigma > 0.0) return 2.0 / (model_.sigma * model_.sigma);
    // finite-activity bounded variation: (q + total jump mass)/c^2
    const double d = (p == Proc::refracted) ? delta_ : 0.0;
    const double c = model_.effective_drift() - d;
    double mass = gl32([&](double z) { return model_.levy_density(z); },
                       model_.density_support_lower, 0.0);
    return (q_ + mass) / (c * c);
}

// ---------------------------------------------------------------------------
// tail integrals and convolutions
// ---------------------------------------------------------------------------

double ScaleFunctionSet::exp_tail_integral(double b, ScaleMode mode) const {
    if (mode == ScaleMode::Z) throw std::domain_error("exp_tail_integral: mode must be W or Wprime");
    if (closed_form_) {
        double acc = 0.0;
        for (std::size_t k = 0; k < base_.rho.size(); ++k) {
            const double rho = base_.rho[k];
            const double gap = phi_y_ - rho;
            if (!(gap > 0.0)) {
                std::ostringstream os;
                os << "exp_tail_integral: varphi(q)=" << phi_y_
                   << " does not dominate scale growth rate " << rho
                   << " (needs delta > 0)";
                throw NumericalError(os.str());
            }
            const double c = (mode == ScaleMode::Wprime) ? base_.coef[k] * rho : base_.coef[k];
            acc += c * std::exp(rho * b) / gap;
        }
        return acc;
    }
    // numeric: integrate the table, then add the asymptotic tail analytically
    const auto& pt = numeric_->base;
    const double gap = phi_y_ - phi_x_;
    if (!(gap > 0.0)) throw NumericalError("exp_tail_integral: varphi(q) <= Phi(q)");
    if (mode == ScaleMode::Wprime) {
        // integration by parts: int e^{-phi y} W'(y+b) dy = phi*I_W(b) - W(b)
        return phi_y_ * exp_tail_integral(b, ScaleMode::W) - W(Proc::base, b);
    }
    const double y_hi = std::max(0.0, std::min(pt.x_cap - b, 60.0 / gap));
    double acc = 0.0;
    if (y_hi > 0.0) {
        const int panels = 16;
        for (int i = 0; i < panels; ++i) {
            const double a = y_hi * i / panels, bb = y_hi * (i + 1) / panels;
            acc += gl32([&](double y) { return std::exp(-phi_y_ * y) * pt.W_at(y + b); }, a, bb);
        }
    }
    acc += std::exp(phi_x_ * b - gap * y_hi) / (pt.psip_phi * gap);
    return acc;
}

double ScaleFunctionSet::exp_tail_integral_z_avg(double b, double z1, double z2) const {
    if (closed_form_) {
        double acc = 0.0;
        for (std::size_t k = 0; k < base_.rho.size(); ++k) {
            const double rho = base_.rho[k];
            const double gap = phi_y_ - rho;
            const double zpart = (std::exp(-rho * z1) - std::exp(-rho * z2)) / rho;
            acc += base_.coef[k] * std::exp(rho * b) * zpart / gap;
        }
        return acc;
    }
    return gl32([&](double z) { return exp_tail_integral(b - z, ScaleMode::W); }, z1, z2);
}

namespace {

// decomposition of {W, W', Z} of the base process as c0 + sum c_k e^{rho_k y}
struct SumDecomp {
    double c0 = 0.0;
    std::vector<double> c;
};

SumDecomp decompose(const ExponentialSum& s, double q, ScaleMode mode) {
    SumDecomp d;
    d.c.resize(s.rho.size());
    switch (mode) {
        case ScaleMode::W:
            d.c = s.coef;
            break;
        case ScaleMode::Wprime:
            for (std::size_t k = 0; k < s.rho.size(); ++k) d.c[k] = s.coef[k] * s.rho[k];
            break;
        case ScaleMode::Z: {
            double c0 = 1.0;
            for (std::size_t k = 0; k < s.rho.size(); ++k) {
                d.c[k] = q * s.coef[k] / s.rho[k];
                c0 -= d.c[k];
            }
            d.c0 = c0;
            break;
        }
    }
    return d;
}

} // namespace

double ScaleFunctionSet::refracted_convolution(double x, double b, ScaleMode mode) const {
    if (!(x > b)) return 0.0;
    if (closed_form_) {
        const auto d = decompose(base_, q_, mode);
        double acc = 0.0;
        for (std::size_t j = 0; j < refr_.rho.size(); ++j) {
            const double eta = refr_.rho[j], Bj = refr_.coef[j];
            if (d.c0 != 0.0) acc += d.c0 * Bj * conv_term(eta, 0.0, x, b);
            for (std::size_t k = 0; k < base_.rho.size(); ++k) {
                acc += d.c[k] * Bj * conv_term(eta, base_.rho[k], x, b);
            }
        }
        return acc;
    }
    auto f = [&](double y) -> double {
        double v = 0.0;
        switch (mode) {
            case ScaleMode::W: v = W(Proc::base, y); break;
            case ScaleMode::Wprime: v = W_prime(Proc::base, y); break;
            case ScaleMode::Z: v = Z(Proc::base, y); break;
        }
        return W(Proc::refracted, x - y) * v;
    };
    const int panels = 8;
    double acc = 0.0;
    for (int i = 0; i < panels; ++i) {
        acc += gl32(f, b + (x - b) * i / panels, b + (x - b) * (i + 1) / panels);
    }
    return acc;
}

double ScaleFunctionSet::refracted_convolution_z_avg(double x, double b, double z1, double z2,
                                                     ScaleMode mode) const {
    if (mode == ScaleMode::Z) throw std::domain_error("refracted_convolution_z_avg: W/Wprime only");
    if (!(x > b)) return 0.0;
    if (closed_form_) {
        double acc = 0.0;
        for (std::size_t k = 0; k < base_.rho.size(); ++k) {
            const double rho = base_.rho[k];
            const double ck =
                (mode == ScaleMode::Wprime) ? base_.coef[k] * rho : base_.coef[k];
            const double zpart = (std::exp(-rho * z1) - std::exp(-rho * z2)) / rho;
            double ct = 0.0;
            for (std::size_t j = 0; j < refr_.rho.size(); ++j) {
                ct += refr_.coef[j] * conv_term(refr_.rho[j], rho, x, b);
            }
            acc += ck * zpart * ct;
        }
        return acc;
    }
    // z-integral collapses to scale-function differences; single quadrature in y
    auto inner = [&](double y) -> double {
        if (mode == ScaleMode::W) return Wbar(Proc::base, y - z1) - Wbar(Proc::base, y - z2);
        return W(Proc::base, y - z1) - W(Proc::base, y - z2);
    };
    const int panels = 8;
    double acc = 0.0;
    for (int i = 0; i < panels; ++i) {
        const double a = b + (x - b) * i / panels, bb = b + (x - b) * (i + 1) / panels;
        acc += gl32([&](double y) { return W(Proc::refracted, x - y) * inner(y); }, a, bb);
    }
    return acc;
}

// ---------------------------------------------------------------------------
// self check
// ---------------------------------------------------------------------------

SelfCheckReport ScaleFunctionSet::self_check(std::span<const double> grid) const {
    SelfCheckReport rep;

    for (Proc p : {Proc::base, Proc::refracted}) {
        const double d = (p == Proc::refracted) ? delta_ : 0.0;
        const double ph = phi(p);
        const double psip = closed_form_ ? 1.0 / sum(p).coef.front()
                                         : (p == Proc::base ? numeric_->base.psip_phi
                                                            : numeric_->refr.psip_phi);
        for (double off : {1.0, 2.0}) {
            const double theta = phi_y_ + off;
            const double gap = theta - ph;
            double T = std::log(std::max(1.0, 1.0 / (1e-10 * psip * gap))) / gap;
            T = std::clamp(T, 10.0, 400.0);
            auto f = [&](double x) { return std::exp(-theta * x) * W(p, x); };
            const double lhs = adaptive_simpson(f, 0.0, T, 1e-11);
            const double rhs = 1.0 / (psi_of(model_, d, theta) - q_);
            rep.laplace_residual = std::max(rep.laplace_residual, std::abs(lhs - rhs));
        }
    }

    for (double x : grid) {
        if (!(x > 0.0)) continue;
        const double lhs1 = delta_ * refracted_convolution(x, 0.0, ScaleMode::W);
        const double rhs1 = Wbar(Proc::refracted, x) - Wbar(Proc::base, x);
        rep.identity_residual = std::max(rep.identity_residual, std::abs(lhs1 - rhs1));

        const double lhs2 = delta_ * refracted_convolution(x, 0.0, ScaleMode::Wprime);
        const double rhs2 =
            (1.0 - delta_ * W0(Proc::base)) * W(Proc::refracted, x) - W(Proc::base, x);
        rep.identity_residual = std::max(rep.identity_residual, std::abs(lhs2 - rhs2));
    }

    for (Proc p : {Proc::base, Proc::refracted}) {
        const double d = (p == Proc::refracted) ? delta_ : 0.0;
        double expected0 = 0.0;
        if (model_.bounded_variation()) expected0 = 1.0 / (model_.effective_drift() - d);
        rep.boundary_residual = std::max({rep.boundary_residual, std::abs(W(p, -1.0)),
                                          std::abs(Z(p, -0.5) - 1.0), std::abs(Zbar(p, -0.5) + 0.5),
                                          std::abs(W0(p) - expected0)});
    }
    return rep;
}

} // namespace refract
