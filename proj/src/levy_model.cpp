#include "refract/levy_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace refract {

namespace {

// 16-point Gauss-Legendre nodes/weights on [-1, 1]
constexpr std::array<double, 8> gl_x = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274, 0.6178762444026438,
    0.7554044083550030, 0.8656312023878318, 0.9445750230732326, 0.9894009349916499};
constexpr std::array<double, 8> gl_w = {
    0.1894506104550686, 0.1826034150449236, 0.1691565193950026, 0.1495959888165768,
    0.1246289712555340, 0.0951585116824926, 0.0622535239386477, 0.0271524594117540};

// integrates f over [a, b] with composite 16-pt Gauss-Legendre
template <typename T, typename F>
T gl_integrate(F&& f, double a, double b, int panels = 24) {
    T total{};
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * h;
        const double half = 0.5 * h;
        T acc{};
        for (std::size_t k = 0; k < gl_x.size(); ++k) {
            acc += gl_w[k] * (f(mid + half * gl_x[k]) + f(mid - half * gl_x[k]));
        }
        total += acc * half;
    }
    return total;
}

template <typename T>
T jump_integral(const LevyModel& m, T theta) {
    // int_{(-inf,0)} (e^{theta z} - 1 - theta z 1{z > -1}) Pi(dz), truncated at the
    // configured support cutoff
    auto f = [&](double z) -> T {
        const T base = std::exp(theta * z) - 1.0;
        const T comp = (z > -1.0) ? theta * z : T{};
        return (base - comp) * m.levy_density(z);
    };
    const double zmin = m.density_support_lower;
    if (zmin < -1.0) { // split at the compensator kink
        return gl_integrate<T>(f, zmin, -1.0) + gl_integrate<T>(f, -1.0, 0.0);
    }
    return gl_integrate<T>(f, zmin, 0.0);
}

// complex contours oscillate too fast for fixed-node quadrature; integrate
// e^{sz} against a piecewise-linear interpolant of the density instead (exact
// in s, error only from the interpolation)
std::complex<double> jump_integral_oscillatory(const LevyModel& m, std::complex<double> s,
                                               int cells = 2048) {
    using C = std::complex<double>;
    const double zmin = m.density_support_lower;
    const double dz = -zmin / cells;
    C I0, I1;
    const C u = s * dz;
    const C E = std::exp(u);
    if (std::abs(u) < 1e-5) {
        I0 = dz * (1.0 + u / 2.0 + u * u / 6.0);
        I1 = dz * dz * (0.5 + u / 3.0 + u * u / 8.0);
    } else {
        I0 = (E - 1.0) / s;
        I1 = (dz * E - I0) / s;
    }
    double mass = 0.0, comp1 = 0.0; // total mass; int_{(-1,0)} z Pi(dz)
    for (int j = 0; j < cells; ++j) {
        const double zj = zmin + j * dz;
        const double a = m.levy_density(zj);
        const double next = m.levy_density(std::min(zj + dz, 0.0));
        const double b = (next - a) / dz;
        mass += (a + 0.5 * b * dz) * dz;
        if (zj + dz > -1.0) {
            const double lo = std::max(zj, -1.0);
            const double va = a + b * (lo - zj);
            comp1 += 0.5 * (va * lo + next * (zj + dz)) * (zj + dz - lo);
        }
    }
    // walk cells from 0 downward so the phase decays instead of underflowing
    C acc{};
    const C E_inv = std::exp(-u);
    C phase = E_inv; // e^{s z_j} at the top cell's lower edge z = -dz
    for (int j = cells - 1; j >= 0; --j) {
        const double zj = zmin + j * dz;
        const double a = m.levy_density(zj);
        const double next = m.levy_density(std::min(zj + dz, 0.0));
        const double b = (next - a) / dz;
        acc += phase * (a * I0 + b * I1);
        if (std::abs(phase.real()) + std::abs(phase.imag()) < 1e-300) break;
        phase *= E_inv;
    }
    return acc - mass - s * comp1;
}

} // namespace

LevyModel LevyModel::brownian(double gamma, double sigma) {
    LevyModel m;
    m.family = LevyFamily::brownian_drift;
    m.gamma = gamma;
    m.sigma = sigma;
    return m;
}

LevyModel LevyModel::cramer_lundberg(double c, double lambda, double mu) {
    LevyModel m;
    m.family = LevyFamily::cramer_lundberg_exp;
    m.gamma = c;
    m.jump_rate = lambda;
    m.jump_mean_param = mu;
    return m;
}

LevyModel LevyModel::numeric(double gamma, double sigma, std::function<double(double)> density,
                             double support_lower) {
    LevyModel m;
    m.family = LevyFamily::general_numeric;
    m.gamma = gamma;
    m.sigma = sigma;
    m.levy_density = std::move(density);
    m.density_support_lower = support_lower;
    return m;
}

bool LevyModel::bounded_variation() const {
    switch (family) {
        case LevyFamily::brownian_drift: return false;
        case LevyFamily::cramer_lundberg_exp: return true;
        case LevyFamily::general_numeric: return sigma == 0.0;
    }
    return false;
}

double LevyModel::effective_drift() const {
    switch (family) {
        case LevyFamily::brownian_drift:
            throw AssumptionError("bounded variation", "effective drift c undefined for Brownian paths");
        case LevyFamily::cramer_lundberg_exp:
            return gamma;
        case LevyFamily::general_numeric: {
            auto f = [&](double z) { return -z * levy_density(z); };
            const double comp = gl_integrate<double>(f, std::max(density_support_lower, -1.0), 0.0);
            return gamma + comp;
        }
    }
    return 0.0;
}

double LevyModel::mean() const {
    switch (family) {
        case LevyFamily::brownian_drift:
            return gamma;
        case LevyFamily::cramer_lundberg_exp:
            return gamma - jump_rate / jump_mean_param;
        case LevyFamily::general_numeric: {
            // psi'(0+) = gamma + int_{(-inf,-1]} z Pi(dz)
            if (density_support_lower >= -1.0) return gamma;
            auto f = [&](double z) { return z * levy_density(z); };
            return gamma + gl_integrate<double>(f, density_support_lower, -1.0);
        }
    }
    return 0.0;
}

void LevyModel::validate() const {
    switch (family) {
        case LevyFamily::brownian_drift:
            if (!(sigma > 0.0))
                throw AssumptionError("model shape", "brownian_drift requires sigma > 0");
            if (jump_rate != 0.0)
                throw AssumptionError("model shape", "brownian_drift has no jump component");
            break;
        case LevyFamily::cramer_lundberg_exp:
            if (!(gamma > 0.0))
                throw AssumptionError("non-monotone paths", "premium rate c must be positive");
            if (!(jump_rate > 0.0))
                throw AssumptionError("non-monotone paths",
                                      "cramer_lundberg_exp without claims has monotone paths");
            if (!(jump_mean_param > 0.0))
                throw AssumptionError("model shape", "claim-size rate mu must be positive");
            break;
        case LevyFamily::general_numeric:
            if (!levy_density)
                throw AssumptionError("model shape", "general_numeric requires a jump density");
            if (sigma < 0.0) throw AssumptionError("model shape", "sigma must be nonnegative");
            if (!(density_support_lower < 0.0))
                throw AssumptionError("model shape", "density support cutoff must be negative");
            if (sigma == 0.0 && !(effective_drift() > 0.0))
                throw AssumptionError("non-monotone paths",
                                      "bounded variation requires effective drift c > 0");
            break;
    }
    if (!std::isfinite(mean())) {
        throw AssumptionError("finite mean", "psi'(0+) must be finite");
    }
}

double laplace_exponent(const LevyModel& model, double theta) {
    if (theta < 0.0) throw std::domain_error("laplace_exponent: theta must be nonnegative");
    switch (model.family) {
        case LevyFamily::brownian_drift:
            return model.gamma * theta + 0.5 * model.sigma * model.sigma * theta * theta;
        case LevyFamily::cramer_lundberg_exp:
            // c*theta - lambda*theta/(mu + theta)
            return model.gamma * theta -
                   model.jump_rate * theta / (model.jump_mean_param + theta);
        case LevyFamily::general_numeric:
            return model.gamma * theta + 0.5 * model.sigma * model.sigma * theta * theta +
                   jump_integral<double>(model, theta);
    }
    return 0.0;
}

std::complex<double> laplace_exponent(const LevyModel& model, std::complex<double> theta) {
    using C = std::complex<double>;
    switch (model.family) {
        case LevyFamily::brownian_drift:
            return model.gamma * theta + 0.5 * model.sigma * model.sigma * theta * theta;
        case LevyFamily::cramer_lundberg_exp:
            return model.gamma * theta -
                   model.jump_rate * theta / (model.jump_mean_param + theta);
        case LevyFamily::general_numeric:
            return model.gamma * theta + 0.5 * model.sigma * model.sigma * theta * theta +
                   jump_integral_oscillatory(model, theta);
    }
    return C{};
}

double laplace_exponent_refracted(const LevyModel& model, double delta, double theta) {
    if (delta < 0.0) throw std::domain_error("laplace_exponent_refracted: delta must be nonnegative");
    if (model.bounded_variation() && delta > 0.0 && !(model.effective_drift() > delta)) {
        throw AssumptionError("c > delta", "refracted process has monotone paths");
    }
    return laplace_exponent(model, theta) - delta * theta;
}

namespace {

double right_inverse_numeric(const LevyModel& model, double delta, double q) {
    auto psi = [&](double t) { return laplace_exponent(model, t) - delta * t; };
    double hi = 1.0;
    int grow = 0;
    while (psi(hi) < q) {
        hi *= 2.0;
        if (++grow > 200) {
            std::ostringstream os;
            os << "right_inverse: bracket growth exhausted at theta=" << hi
               << " (psi=" << psi(hi) << ", target q=" << q << ")";
            throw NumericalError(os.str());
        }
    }
    double lo = hi * 0.5;
    while (lo > 0.0 && psi(lo) > q) lo *= 0.5;
    // Newton with bisection fallback on [lo, hi]
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double f = psi(x) - q;
        if (f > 0.0) hi = x; else lo = x;
        const double h = std::max(1e-7, 1e-7 * std::abs(x));
        const double dpsi = (psi(x + h) - psi(x - h)) / (2.0 * h);
        double next = (dpsi > 0.0) ? x - f / dpsi : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-12 * std::max(1.0, std::abs(x))) return next;
        x = next;
    }
    return x;
}

} // namespace

double right_inverse(const LevyModel& model, double delta, double q, Proc which) {
    if (!(q > 0.0)) throw std::domain_error("right_inverse: q must be positive");
    const double d = (which == Proc::refracted) ? delta : 0.0;
    switch (model.family) {
        case LevyFamily::brownian_drift: {
            const double g = model.gamma - d;
            const double s2 = model.sigma * model.sigma;
            return (-g + std::sqrt(g * g + 2.0 * s2 * q)) / s2;
        }
        case LevyFamily::cramer_lundberg_exp: {
            const double c = model.gamma - d;
            const double mu = model.jump_mean_param;
            const double B = c * mu - model.jump_rate - q;
            return (-B + std::sqrt(B * B + 4.0 * c * q * mu)) / (2.0 * c);
        }
        case LevyFamily::general_numeric:
            return right_inverse_numeric(model, d, q);
    }
    return 0.0;
}

JumpLaw JumpLaw::point(double m) {
    if (m < 0.0) throw AssumptionError("switch jumps", "point mass must sit at -m with m >= 0");
    JumpLaw j;
    j.kind = Kind::point_mass;
    j.m = m;
    return j;
}

JumpLaw JumpLaw::exponential(double eta) {
    if (!(eta > 0.0)) throw AssumptionError("switch jumps", "exponential rate must be positive");
    JumpLaw j;
    j.kind = Kind::exponential;
    j.eta = eta;
    return j;
}

double JumpLaw::mean_abs() const {
    switch (kind) {
        case Kind::zero: return 0.0;
        case Kind::point_mass: return m;
        case Kind::exponential: return 1.0 / eta;
    }
    return 0.0;
}

double RegimeModel::rate_out(std::size_t i) const {
    double q = 0.0;
    for (std::size_t j = 0; j < n_states(); ++j) {
        if (j != i) q += Q[i][j];
    }
    return q;
}

std::string RegimeModel::state_name(std::size_t i) const {
    if (i < names.size() && !names[i].empty()) return names[i];
    return "state " + std::to_string(i);
}

bool ValidationReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& c : checks) {
        os << (c.pass ? "pass" : "FAIL") << "  " << c.name;
        if (!c.reason.empty()) os << " - " << c.reason;
        os << '\n';
    }
    return os.str();
}

void ValidationReport::require() const {
    for (const auto& c : checks) {
        if (!c.pass) throw AssumptionError(c.name, c.reason);
    }
}

namespace {

CheckResult check(std::string name, bool pass, std::string reason_if_fail) {
    return {std::move(name), pass, pass ? std::string{} : std::move(reason_if_fail)};
}

void append_model_checks(ValidationReport& rep, const LevyModel& m, const std::string& tag) {
    try {
        m.validate();
        rep.checks.push_back({tag + " model", true, {}});
    } catch (const AssumptionError& e) {
        rep.checks.push_back({tag + " model", false, e.what()});
    }
    bool finite = false;
    try {
        finite = std::isfinite(m.mean());
    } catch (...) {
    }
    rep.checks.push_back(check(tag + " finite mean", finite, "psi'(0+) must exceed -infinity"));
}

} // namespace

ValidationReport validate(const RegimeModel& regime) {
    ValidationReport rep;
    const std::size_t n = regime.n_states();

    rep.checks.push_back(check("state set", n >= 1 && regime.delta.size() == n &&
                                                regime.discount.size() == n && regime.Q.size() == n,
                               "per-state vectors must share one size >= 1"));
    if (!rep.checks.back().pass) return rep;

    rep.checks.push_back(
        check("beta > 1", regime.beta > 1.0, "beta must exceed 1 (injection cost per unit)"));

    bool q_ok = true;
    std::string q_why;
    for (std::size_t i = 0; i < n && q_ok; ++i) {
        if (regime.Q[i].size() != n) {
            q_ok = false;
            q_why = "row " + std::to_string(i) + " has wrong length";
            break;
        }
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row += regime.Q[i][j];
            if (j != i && regime.Q[i][j] < 0.0) {
                q_ok = false;
                q_why = "off-diagonal q_" + std::to_string(i) + std::to_string(j) + " negative";
            }
        }
        if (q_ok && std::abs(row) > 1e-10) {
            q_ok = false;
            q_why = "row " + std::to_string(i) + " does not sum to 0";
        }
    }
    rep.checks.push_back(check("generator matrix", q_ok, q_why));

    for (std::size_t i = 0; i < n; ++i) {
        const std::string tag = regime.state_name(i);
        append_model_checks(rep, regime.levy[i], tag);
        rep.checks.push_back(check(tag + " discount r > 0", regime.discount[i] > 0.0,
                                   "discount rate must be positive"));
        rep.checks.push_back(check(tag + " delta >= min", regime.delta[i] >= min_refraction_rate,
                                   "dividend rate below the minimum refraction rate"));
        if (regime.levy[i].bounded_variation()) {
            bool ok = false;
            try {
                ok = regime.levy[i].effective_drift() > regime.delta[i];
            } catch (...) {
            }
            rep.checks.push_back(
                check(tag + " c > delta", ok, "bounded variation requires c(i) > delta(i)"));
        }
    }

    bool jumps_sized = regime.switch_jumps.size() == n;
    for (const auto& row : regime.switch_jumps) jumps_sized = jumps_sized && row.size() == n;
    rep.checks.push_back(check("switch-jump matrix", jumps_sized, "needs one law per state pair"));
    if (jumps_sized) {
        bool finite = true;
        for (const auto& row : regime.switch_jumps) {
            for (const auto& law : row) finite = finite && std::isfinite(law.mean_abs());
        }
        rep.checks.push_back(
            check("finite E[-J_ij]", finite, "switch jumps must have finite mean"));
    }
    return rep;
}

ValidationReport AuxiliaryProblem::validate() const {
    ValidationReport rep;
    try {
        model.validate();
        rep.checks.push_back({"model", true, {}});
    } catch (const AssumptionError& e) {
        rep.checks.push_back({"model", false, e.what()});
    }
    rep.checks.push_back(check("beta > 1", beta > 1.0, "beta must exceed 1"));
    rep.checks.push_back(check("q > 0", q > 0.0, "discount rate must be positive"));
    rep.checks.push_back(check("r >= 0", r >= 0.0, "terminal-time rate must be nonnegative"));
    rep.checks.push_back(check("delta >= min", delta >= min_refraction_rate,
                               "refraction rate below the minimum"));
    if (model.bounded_variation()) {
        bool ok = false;
        try {
            ok = model.effective_drift() > delta;
        } catch (...) {
        }
        rep.checks.push_back(check("c > delta", ok, "bounded variation requires c > delta"));
    }
    // payoff shape (concavity and slope box are PayoffFunction invariants already)
    rep.checks.push_back(check("w'(0+) <= beta", payoff.slope_at_zero() <= beta + 1e-12,
                               "payoff slope at 0+ exceeds beta"));
    return rep;
}

} // namespace refract
