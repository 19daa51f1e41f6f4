#include "refract/scale_functions.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace refract;

namespace {

ScaleFunctionSet brownian_set(double q = 0.6) {
    return {LevyModel::brownian(1.0, std::sqrt(2.0)), 0.5, q};
}

ScaleFunctionSet cl_set(double q = 0.6) {
    return {LevyModel::cramer_lundberg(2.0, 1.0, 1.0), 0.5, q};
}

// quadrature of the Laplace transform of W against the exponent identity
double laplace_residual(const ScaleFunctionSet& s, Proc p, double theta) {
    const double d = (p == Proc::refracted) ? s.delta() : 0.0;
    const double gap = theta - s.phi(p);
    REQUIRE(gap > 0.0);
    const double T = std::max(20.0, 40.0 / gap);
    const double lhs =
        oracle::integrate([&](double x) { return std::exp(-theta * x) * s.W(p, x); }, 0.0, T);
    const double rhs =
        1.0 / (laplace_exponent_refracted(s.model(), d, theta) - s.q());
    return std::abs(lhs - rhs);
}

} // namespace

TEST_CASE("scale function boundary values") {
    const auto bs = brownian_set();
    const auto cs = cl_set();
    // zero on the negative half-line
    CHECK(bs.W(Proc::base, -1.0) == 0.0);
    CHECK(cs.W(Proc::refracted, -0.3) == 0.0);
    // right limits at zero
    CHECK(bs.W0(Proc::base) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cs.W0(Proc::base) == doctest::Approx(0.5).epsilon(1e-12));        // 1/c
    CHECK(cs.W0(Proc::refracted) == doctest::Approx(1.0 / 1.5).epsilon(1e-12)); // 1/(c-delta)
    // x <= 0 conventions
    CHECK(bs.Z(Proc::base, -0.5) == 1.0);
    CHECK(bs.Wbar(Proc::base, -0.5) == 0.0);
    CHECK(bs.Zbar(Proc::base, -0.5) == -0.5);
    CHECK(bs.Z(Proc::base, 0.0) == 1.0);
    CHECK(bs.Zbar(Proc::base, 0.0) == 0.0);
    // W'(0+) limits: 2/sigma^2 for the Gaussian case, (q + lambda)/c^2 for CL
    CHECK(bs.Wprime0(Proc::base) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cs.Wprime0(Proc::base) == doctest::Approx((0.6 + 1.0) / 4.0).epsilon(1e-12));
}

TEST_CASE("laplace transform identity via quadrature") {
    for (const auto& s : {brownian_set(), cl_set()}) {
        for (Proc p : {Proc::base, Proc::refracted}) {
            const double theta = s.phi(Proc::refracted) + 1.0;
            CHECK(laplace_residual(s, p, theta) < 1e-8);
            CHECK(laplace_residual(s, p, theta + 1.0) < 1e-8);
        }
    }
}

TEST_CASE("W' matches central finite differences and W increases") {
    oracle::Rand rnd;
    for (const auto& s : {brownian_set(), cl_set()}) {
        for (Proc p : {Proc::base, Proc::refracted}) {
            for (int it = 0; it < 30; ++it) {
                const double x = rnd.uniform(0.1, 6.0);
                const double fd =
                    oracle::central_diff([&](double t) { return s.W(p, t); }, x, 1e-6);
                CHECK(s.W_prime(p, x) == doctest::Approx(fd).epsilon(1e-7));
                CHECK(s.W_prime(p, x) > 0.0);
            }
        }
    }
    CHECK_THROWS_AS(brownian_set().W_prime(Proc::base, -0.1), std::domain_error);
}

TEST_CASE("Z definition and monotonicity invariants") {
    oracle::Rand rnd;
    for (const auto& s : {brownian_set(), cl_set()}) {
        double prev_w = 0.0, prev_z = 0.0;
        for (int k = 1; k <= 100; ++k) {
            const double x = 0.08 * k;
            CHECK(s.Z(Proc::base, x) - 1.0 - s.q() * s.Wbar(Proc::base, x) ==
                  doctest::Approx(0.0).epsilon(1e-12));
            CHECK(s.W(Proc::base, x) >= prev_w);
            CHECK(s.Z(Proc::base, x) >= 1.0);
            CHECK(s.Z(Proc::base, x) >= prev_z); // Zbar convex
            prev_w = s.W(Proc::base, x);
            prev_z = s.Z(Proc::base, x);
        }
    }
}

TEST_CASE("integral helpers match quadrature") {
    for (const auto& s : {brownian_set(), cl_set()}) {
        for (double x : {0.7, 2.3, 5.0}) {
            const double wbar =
                oracle::integrate([&](double t) { return s.W(Proc::base, t); }, 0.0, x);
            CHECK(s.Wbar(Proc::base, x) == doctest::Approx(wbar).epsilon(1e-10));
            const double wbarbar =
                oracle::integrate([&](double t) { return s.Wbar(Proc::base, t); }, 0.0, x);
            CHECK(s.Wbarbar(Proc::base, x) == doctest::Approx(wbarbar).epsilon(1e-10));
            const double zbar =
                oracle::integrate([&](double t) { return s.Z(Proc::base, t); }, 0.0, x);
            CHECK(s.Zbar(Proc::base, x) == doctest::Approx(zbar).epsilon(1e-10));
        }
    }
}

TEST_CASE("exponential tail integral") {
    for (const auto& s : {brownian_set(), cl_set()}) {
        const double phi = s.phi(Proc::refracted);
        for (double b : {0.0, 0.8, 2.5}) {
            // quadrature oracle with analytic tail remainder made negligible
            const double T = 200.0;
            const double quad = oracle::integrate(
                [&](double y) { return std::exp(-phi * y) * s.W(Proc::base, y + b); }, 0.0, T,
                1e-12);
            CHECK(s.exp_tail_integral(b, ScaleMode::W) == doctest::Approx(quad).epsilon(1e-9));
            // integration by parts: phi * I_W(b) = W(b) + I_{W'}(b)
            CHECK(phi * s.exp_tail_integral(b, ScaleMode::W) ==
                  doctest::Approx(s.W(Proc::base, b) + s.exp_tail_integral(b, ScaleMode::Wprime))
                      .epsilon(1e-11));
        }
        // I_W(0) = 1/(delta varphi) and the integral increases in b
        CHECK(s.exp_tail_integral(0.0, ScaleMode::W) ==
              doctest::Approx(1.0 / (s.delta() * phi)).epsilon(1e-12));
        CHECK(s.exp_tail_integral(1.0, ScaleMode::W) > s.exp_tail_integral(0.3, ScaleMode::W));
        // z-averaged variant against quadrature
        const double b = 1.2, z1 = 0.2, z2 = 0.9;
        const double quad_z = oracle::integrate(
            [&](double z) { return s.exp_tail_integral(b - z, ScaleMode::W); }, z1, z2, 1e-12);
        CHECK(s.exp_tail_integral_z_avg(b, z1, z2) == doctest::Approx(quad_z).epsilon(1e-10));
    }
}

TEST_CASE("refracted convolutions: identities and quadrature") {
    oracle::Rand rnd;
    for (const auto& s : {brownian_set(), cl_set()}) {
        const double d = s.delta();
        CHECK(s.refracted_convolution(0.5, 0.8, ScaleMode::W) == 0.0); // x <= b
        for (int it = 0; it < 50; ++it) {
            const double x = rnd.uniform(1e-3, 10.0);
            // identity (3.5)
            const double lhs1 = d * s.refracted_convolution(x, 0.0, ScaleMode::W);
            const double rhs1 = s.Wbar(Proc::refracted, x) - s.Wbar(Proc::base, x);
            CHECK(std::abs(lhs1 - rhs1) < 1e-9 * std::max(1.0, std::abs(rhs1)));
            // identity (3.6)
            const double lhs2 = d * s.refracted_convolution(x, 0.0, ScaleMode::Wprime);
            const double rhs2 = (1.0 - d * s.W0(Proc::base)) * s.W(Proc::refracted, x) -
                                s.W(Proc::base, x);
            CHECK(std::abs(lhs2 - rhs2) < 1e-9 * std::max(1.0, std::abs(rhs2)));
        }
        // generic (x, b) convolutions against quadrature
        for (double b : {0.4, 1.1}) {
            for (double x : {1.7, 3.2}) {
                for (ScaleMode mode : {ScaleMode::W, ScaleMode::Wprime, ScaleMode::Z}) {
                    auto f = [&](double y) {
                        double v = 0.0;
                        if (mode == ScaleMode::W) v = s.W(Proc::base, y);
                        if (mode == ScaleMode::Wprime) v = s.W_prime(Proc::base, y);
                        if (mode == ScaleMode::Z) v = s.Z(Proc::base, y);
                        return s.W(Proc::refracted, x - y) * v;
                    };
                    const double quad = oracle::integrate(f, b, x, 1e-12);
                    CHECK(s.refracted_convolution(x, b, mode) ==
                          doctest::Approx(quad).epsilon(1e-9));
                }
                // z-averaged variant
                const double z1 = 0.05, z2 = 0.35;
                const double quad_z = oracle::integrate(
                    [&](double z) {
                        return oracle::integrate(
                            [&](double y) {
                                return s.W(Proc::refracted, x - y) * s.W(Proc::base, y - z);
                            },
                            b, x, 1e-12);
                    },
                    z1, z2, 1e-11);
                CHECK(s.refracted_convolution_z_avg(x, b, z1, z2, ScaleMode::W) ==
                      doctest::Approx(quad_z).epsilon(1e-8));
            }
        }
    }
}

TEST_CASE("self check passes for both families and flags corruption") {
    std::vector<double> grid;
    for (int k = 1; k <= 20; ++k) grid.push_back(0.4 * k);
    for (const auto& s : {brownian_set(), cl_set()}) {
        const auto rep = s.self_check(grid);
        CHECK(rep.max_residual() < 1e-8);
    }
    // test of the test: a corrupted coefficient must blow up the residuals
    const auto good = cl_set();
    auto base = good.sum(Proc::base);
    base.coef[0] *= 1.001;
    const auto bad = ScaleFunctionSet::from_exponential_sums(good.model(), good.delta(), good.q(),
                                                             base, good.sum(Proc::refracted));
    CHECK(bad.self_check(grid).max_residual() > 1e-3);
}

TEST_CASE("numeric inversion path reproduces the closed form (experimental)") {
    const double lambda = 1.0, mu = 1.0;
    // LK drift matching cramer_lundberg(2, 1, 1)
    const double gamma_lk = 2.0 - lambda * (1.0 - std::exp(-mu) * (1.0 + mu)) / mu;
    const auto numeric_model = LevyModel::numeric(
        gamma_lk, 0.0, [=](double z) { return lambda * mu * std::exp(mu * z); }, -40.0);
    const ScaleFunctionSet num(numeric_model, 0.5, 0.6);
    const auto ref = cl_set(0.6);
    CHECK_FALSE(num.closed_form());
    CHECK(num.phi(Proc::base) == doctest::Approx(ref.phi(Proc::base)).epsilon(1e-8));
    CHECK(num.phi(Proc::refracted) == doctest::Approx(ref.phi(Proc::refracted)).epsilon(1e-8));
    for (double x : {0.5, 1.0, 2.0, 4.0}) {
        CHECK(num.W(Proc::base, x) == doctest::Approx(ref.W(Proc::base, x)).epsilon(5e-4));
        CHECK(num.W(Proc::refracted, x) ==
              doctest::Approx(ref.W(Proc::refracted, x)).epsilon(5e-4));
        CHECK(num.Wbar(Proc::base, x) == doctest::Approx(ref.Wbar(Proc::base, x)).epsilon(2e-3));
        CHECK(num.Z(Proc::base, x) == doctest::Approx(ref.Z(Proc::base, x)).epsilon(2e-3));
    }
    CHECK(num.exp_tail_integral(0.7, ScaleMode::W) ==
          doctest::Approx(ref.exp_tail_integral(0.7, ScaleMode::W)).epsilon(2e-3));
    CHECK(num.refracted_convolution(2.0, 0.5, ScaleMode::W) ==
          doctest::Approx(ref.refracted_convolution(2.0, 0.5, ScaleMode::W)).epsilon(5e-3));
}
