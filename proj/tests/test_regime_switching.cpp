#include "refract/regime_switching.hpp"

#include "refract/simulator.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace refract;

namespace {

RegimeModel mixed_regime() {
    RegimeModel rm;
    rm.beta = 1.4;
    rm.Q = {{-0.6, 0.6}, {0.8, -0.8}};
    rm.levy = {LevyModel::brownian(1.0, std::sqrt(2.0)),
               LevyModel::cramer_lundberg(2.0, 1.0, 1.5)};
    rm.delta = {0.5, 0.6};
    rm.discount = {0.4, 0.5};
    rm.switch_jumps = {{JumpLaw::none(), JumpLaw::point(0.2)},
                       {JumpLaw::exponential(3.0), JumpLaw::none()}};
    return rm;
}

RegimeModel symmetric_regime() {
    RegimeModel rm;
    rm.beta = 1.4;
    rm.Q = {{-0.6, 0.6}, {0.6, -0.6}};
    rm.levy = {LevyModel::brownian(1.0, std::sqrt(2.0)), LevyModel::brownian(1.0, std::sqrt(2.0))};
    rm.delta = {0.5, 0.5};
    rm.discount = {0.4, 0.4};
    rm.switch_jumps = {{JumpLaw::none(), JumpLaw::none()},
                       {JumpLaw::none(), JumpLaw::none()}};
    return rm;
}

std::vector<double> test_grid(double x_max = 8.0, std::size_t n = 201) {
    std::vector<double> g(n);
    for (std::size_t k = 0; k < n; ++k) g[k] = x_max * double(k) / double(n - 1);
    return g;
}

// random bounded concave nondecreasing grid function with zero tail slope
ValueFunction random_concave(const RegimeModel& rm, oracle::Rand& rnd,
                             const std::vector<double>& grid) {
    ValueFunction f(grid, rm.n_states());
    for (std::size_t i = 0; i < rm.n_states(); ++i) {
        std::vector<double> v(grid.size());
        double slope = rnd.uniform(0.3, 1.0) * rm.beta;
        const double decay = rnd.uniform(0.3, 0.9);
        v[0] = rnd.uniform(-1.0, 1.0);
        for (std::size_t k = 1; k < grid.size(); ++k) {
            v[k] = v[k - 1] + slope * (grid[k] - grid[k - 1]);
            slope *= decay;
        }
        f.set_values(i, std::move(v), 0.0);
    }
    return f;
}

double contraction_factor(const RegimeModel& rm) {
    double rho = 0.0;
    for (std::size_t i = 0; i < rm.n_states(); ++i) {
        rho = std::max(rho, rm.rate_out(i) / (rm.rate_out(i) + rm.discount[i]));
    }
    return rho;
}

} // namespace

TEST_CASE("degenerate zero jumps lift to the neighbour state's values") {
    auto rm = mixed_regime();
    rm.switch_jumps = {{JumpLaw::none(), JumpLaw::none()},
                       {JumpLaw::none(), JumpLaw::none()}};
    oracle::Rand rnd;
    const auto grid = test_grid();
    const auto f = random_concave(rm, rnd, grid);
    const auto lifted = lift_payoff(rm, f, 0);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        CHECK(lifted.value(grid[k]) == doctest::Approx(f(1, grid[k])).epsilon(1e-12));
    }
}

TEST_CASE("lift of the zero function under a point-mass jump") {
    auto rm = mixed_regime();
    const double m = 1.37;
    rm.switch_jumps = {{JumpLaw::none(), JumpLaw::point(m)},
                       {JumpLaw::none(), JumpLaw::none()}};
    const auto grid = test_grid();
    const ValueFunction zero(grid, rm.n_states());
    const auto lifted = lift_payoff(rm, zero, 0);
    for (double x : grid) {
        const double expected = x < m ? rm.beta * (x - m) : 0.0;
        CHECK(lifted.value(x) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("lifted payoff obeys the mixture bound") {
    const auto rm = mixed_regime();
    oracle::Rand rnd;
    const auto grid = test_grid();
    for (int it = 0; it < 5; ++it) {
        const auto f = random_concave(rm, rnd, grid);
        for (std::size_t i = 0; i < rm.n_states(); ++i) {
            const double qi = rm.rate_out(i);
            double bound = 0.0;
            for (std::size_t j = 0; j < rm.n_states(); ++j) {
                if (j == i) continue;
                bound += rm.Q[i][j] / qi *
                         (rm.beta * rm.switch_jumps[i][j].mean_abs() + f.sup_norm());
            }
            const auto lifted = lift_payoff(rm, f, i);
            for (double x : grid) {
                CHECK(std::abs(lifted.value(x)) <= bound + 1e-9);
            }
        }
    }
}

TEST_CASE("exponential-jump lift matches quadrature") {
    const auto rm = mixed_regime();
    oracle::Rand rnd;
    const auto grid = test_grid();
    const auto f = random_concave(rm, rnd, grid);
    const auto lifted = lift_payoff(rm, f, 1); // jump law exp(3.0) toward state 0
    const double eta = 3.0;
    // compare at grid knots, where the lifted payoff is exact (between knots it
    // is the linear interpolant by construction)
    for (double x : {0.0, 0.4, 1.92, 6.32}) {
        auto integrand = [&](double u) {
            const double val = u > x ? rm.beta * (x - u) + f(0, 0.0) : f(0, x - u);
            return eta * std::exp(-eta * u) * val;
        };
        const double quad = oracle::integrate(integrand, 0.0, x + 40.0 / eta, 1e-12);
        CHECK(lifted.value(x) == doctest::Approx(quad).epsilon(5e-7));
    }
}

TEST_CASE("T_b of the zero function without jumps is the payoff-free NPV") {
    auto rm = mixed_regime();
    rm.switch_jumps = {{JumpLaw::none(), JumpLaw::none()},
                       {JumpLaw::none(), JumpLaw::none()}};
    const auto grid = test_grid();
    const ValueFunction zero(grid, rm.n_states());
    ThresholdVector b{{0.8, 0.5}};
    const auto Tf = apply_T(rm, b, zero);
    for (std::size_t i = 0; i < rm.n_states(); ++i) {
        AuxiliaryProblem prob;
        prob.model = rm.levy[i];
        prob.delta = rm.delta[i];
        prob.beta = rm.beta;
        prob.q = rm.discount[i];
        prob.r = rm.rate_out(i);
        prob.payoff = PayoffFunction::zero();
        SingleRegimeSolver solver(prob);
        for (std::size_t k = 0; k < grid.size(); k += 10) {
            CHECK(Tf.values(i)[k] ==
                  doctest::Approx(solver.npv(b.b[i], grid[k])).epsilon(1e-12));
        }
    }
}

TEST_CASE("T_b is a contraction with the epoch factor") {
    const auto rm = mixed_regime();
    const double rho = contraction_factor(rm);
    oracle::Rand rnd;
    const auto grid = test_grid();
    ThresholdVector b{{0.8, 1.1}};
    for (int it = 0; it < 8; ++it) {
        const auto f = random_concave(rm, rnd, grid);
        const auto g = random_concave(rm, rnd, grid);
        const auto Tf = apply_T(rm, b, f);
        const auto Tg = apply_T(rm, b, g);
        const double num = ValueFunction::sup_distance(Tf, Tg);
        const double den = ValueFunction::sup_distance(f, g);
        CHECK(num <= rho * den + 1e-9);
    }
}

TEST_CASE("iterating T_b converges geometrically") {
    const auto rm = mixed_regime();
    const auto grid = test_grid();
    ThresholdVector b{{0.9, 0.7}};
    ValueFunction f(grid, rm.n_states());
    double prev = 0.0;
    const double rho = contraction_factor(rm);
    for (int n = 0; n < 12; ++n) {
        auto next = apply_T(rm, b, f);
        const double diff = ValueFunction::sup_distance(next, f);
        // the iterates carry nonzero linear tails beyond x_max, which admits a
        // small slack on top of the epoch contraction factor
        if (n > 0) CHECK(diff <= rho * prev * 1.01 + 1e-9);
        prev = diff;
        f = std::move(next);
    }
    CHECK(prev < 1e-2);
}

TEST_CASE("Theta dominates any fixed-threshold operator and contracts") {
    const auto rm = mixed_regime();
    const double rho = contraction_factor(rm);
    oracle::Rand rnd;
    const auto grid = test_grid();
    for (int it = 0; it < 5; ++it) {
        const auto f = random_concave(rm, rnd, grid);
        const auto [Tf, bf] = apply_Theta(rm, f);
        ThresholdVector b{{rnd.uniform(0.0, 3.0), rnd.uniform(0.0, 3.0)}};
        const auto fixed = apply_T(rm, b, f);
        for (std::size_t i = 0; i < rm.n_states(); ++i) {
            for (std::size_t k = 0; k < grid.size(); ++k) {
                CHECK(Tf.values(i)[k] >= fixed.values(i)[k] - 1e-9);
            }
        }
        const auto g = random_concave(rm, rnd, grid);
        const auto [Tg, bg] = apply_Theta(rm, g);
        CHECK(ValueFunction::sup_distance(Tf, Tg) <=
              rho * ValueFunction::sup_distance(f, g) + 1e-9);
    }
}

TEST_CASE("single-state chain reduces to the auxiliary solver") {
    RegimeModel rm;
    rm.beta = 1.5;
    rm.Q = {{0.0}};
    rm.levy = {LevyModel::brownian(1.0, std::sqrt(2.0))};
    rm.delta = {0.5};
    rm.discount = {0.6};
    rm.switch_jumps = {{JumpLaw::none()}};

    const auto grid = test_grid();
    ValueFunction f(grid, 1, 0.3); // payoff is irrelevant for an absorbing state
    const auto [Tf, b] = apply_Theta(rm, f);

    AuxiliaryProblem prob;
    prob.model = rm.levy[0];
    prob.delta = 0.5;
    prob.beta = 1.5;
    prob.q = 0.6;
    prob.r = 0.0;
    const auto sol = optimal_threshold(prob);
    CHECK(b.b[0] == doctest::Approx(sol.b_star).epsilon(1e-10));
    for (std::size_t k = 0; k < grid.size(); ++k) {
        CHECK(Tf.values(0)[k] == doctest::Approx(sol.value(grid[k])).epsilon(1e-12));
    }

    RegimeSolveOptions opt;
    opt.grid_points = 201;
    const auto full = solve(rm, opt);
    REQUIRE(full.absorbing_states.size() == 1);
    CHECK(full.b_star.b[0] == doctest::Approx(sol.b_star).epsilon(1e-10));
}

TEST_CASE("value bounds") {
    auto rm = symmetric_regime();
    rm.discount = {0.1, 0.1};
    const auto [lo, hi] = value_bounds(rm);
    CHECK(hi == doctest::Approx(5.0)); // delta_+ / r_-
    CHECK(lo < 0.0);
}

TEST_CASE("solve reaches the fixed point with certified distance") {
    const auto rm = mixed_regime();
    RegimeSolveOptions opt;
    opt.tol = 1e-5;
    opt.grid_points = 201;
    const auto sol = solve(rm, opt);

    CHECK(sol.rho == doctest::Approx(contraction_factor(rm)));
    CHECK(sol.fixed_point_residual < opt.tol);
    REQUIRE(sol.trace.size() >= 2);
    CHECK(sol.trace.back().diff < sol.trace.front().diff);

    // bounds, monotonicity, Lipschitz and concavity of the solved values
    const auto& grid = sol.V.grid();
    for (std::size_t i = 0; i < rm.n_states(); ++i) {
        const auto v = sol.V.values(i);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            CHECK(v[k] > sol.V_minus);
            CHECK(v[k] < sol.V_plus);
            if (k > 0) {
                const double dv = v[k] - v[k - 1];
                const double dx = grid[k] - grid[k - 1];
                CHECK(dv >= -1e-8);
                CHECK(dv <= rm.beta * dx + 1e-8);
                if (k + 1 < grid.size()) {
                    const double next = v[k + 1] - v[k];
                    CHECK(next - dv <= 1e-8); // concave second differences
                }
            }
        }
        CHECK(sol.b_star.b[i] >= 0.0);
        CHECK(sol.b_star.b[i] < sol.x_max);
    }

    // one more Theta step stays within the stopping band
    const auto [again, b2] = apply_Theta(rm, sol.V);
    CHECK(ValueFunction::sup_distance(again, sol.V) < opt.tol);
}

TEST_CASE("identical states collapse to the single-regime answer") {
    const auto rm = symmetric_regime();
    RegimeSolveOptions opt;
    opt.tol = 1e-7;
    opt.grid_points = 201;
    const auto sol = solve(rm, opt);
    CHECK(sol.b_star.b[0] == doctest::Approx(sol.b_star.b[1]).epsilon(1e-12));
    double dist = 0.0;
    for (std::size_t k = 0; k < sol.V.grid().size(); ++k) {
        dist = std::max(dist, std::abs(sol.V.values(0)[k] - sol.V.values(1)[k]));
    }
    CHECK(dist < 1e-8);
}

TEST_CASE("initialization independence and the envelope property") {
    const auto rm = mixed_regime();
    RegimeSolveOptions low;
    low.tol = 1e-6;
    low.grid_points = 201;
    const auto from_zero = solve(rm, low);
    auto high = low;
    high.start_from_upper_bound = true;
    const auto from_plus = solve(rm, high);
    CHECK(ValueFunction::sup_distance(from_zero.V, from_plus.V) < 2.0 * low.tol);

    // envelope: iterates from below stay below iterates from above
    const auto grid = from_zero.V.grid();
    ValueFunction lo_it(grid, rm.n_states(), 0.0);
    ValueFunction hi_it(grid, rm.n_states(), from_zero.V_plus);
    for (int n = 0; n < 6; ++n) {
        lo_it = apply_Theta(rm, lo_it).first;
        hi_it = apply_Theta(rm, hi_it).first;
        for (std::size_t i = 0; i < rm.n_states(); ++i) {
            for (std::size_t k = 0; k < grid.size(); ++k) {
                CHECK(lo_it.values(i)[k] <= hi_it.values(i)[k] + 1e-9);
            }
        }
    }
    // the solved V sits inside the envelope
    for (std::size_t i = 0; i < rm.n_states(); ++i) {
        for (std::size_t k = 0; k < grid.size(); ++k) {
            CHECK(from_zero.V.values(i)[k] <= hi_it.values(i)[k] + 1e-6);
            CHECK(from_zero.V.values(i)[k] >= lo_it.values(i)[k] - 1e-6);
        }
    }
}

TEST_CASE("solved value agrees with the simulator at the optimum") {
    const auto rm = mixed_regime();
    RegimeSolveOptions opt;
    opt.tol = 1e-6;
    opt.grid_points = 201;
    const auto sol = solve(rm, opt);

    PathConfig cfg;
    cfg.n_paths = 8000;
    cfg.seed = 2024;
    cfg.dt = 2e-3;
    cfg.discount_cutoff = 1e-6;
    const auto est = simulate_regime(rm, sol.b_star.b, 1.0, 0, cfg);
    INFO("analytic ", sol.V(0, 1.0), " mc ", est.mean, " se ", est.std_error);
    CHECK(std::abs(est.mean - sol.V(0, 1.0)) < 3.5 * est.std_error);
}

TEST_CASE("grid auto-expansion keeps thresholds inside the span") {
    auto rm = mixed_regime();
    RegimeSolveOptions opt;
    opt.tol = 1e-5;
    opt.grid_points = 201;
    const auto wide = solve(rm, opt);
    const double b_max = *std::max_element(wide.b_star.b.begin(), wide.b_star.b.end());
    REQUIRE(b_max > 0.0);

    auto tight = opt;
    tight.x_max = 1.2 * b_max; // thresholds land beyond half the span
    const auto sol = solve(rm, tight);
    CHECK(sol.grid_expansions > 0);
    CHECK(sol.x_max > tight.x_max);
    for (double b : sol.b_star.b) CHECK(b <= 0.5 * sol.x_max);
    // expansion converges to the same thresholds at grid accuracy
    for (std::size_t i = 0; i < rm.n_states(); ++i) {
        CHECK(sol.b_star.b[i] == doctest::Approx(wide.b_star.b[i]).epsilon(5e-3));
    }
}

TEST_CASE("three-state chain with an absorbing state") {
    RegimeModel rm;
    rm.beta = 1.3;
    rm.Q = {{-0.7, 0.5, 0.2}, {0.6, -0.9, 0.3}, {0.0, 0.0, 0.0}};
    rm.levy = {LevyModel::brownian(1.0, std::sqrt(2.0)),
               LevyModel::cramer_lundberg(2.0, 1.0, 1.5),
               LevyModel::cramer_lundberg(1.5, 0.8, 2.0)};
    rm.delta = {0.5, 0.6, 0.3};
    rm.discount = {0.4, 0.5, 0.35};
    rm.switch_jumps = {{JumpLaw::none(), JumpLaw::point(0.2), JumpLaw::exponential(4.0)},
                       {JumpLaw::exponential(3.0), JumpLaw::none(), JumpLaw::none()},
                       {JumpLaw::none(), JumpLaw::none(), JumpLaw::none()}};
    REQUIRE(validate(rm).all_pass());

    RegimeSolveOptions opt;
    opt.tol = 1e-6;
    opt.grid_points = 201;
    const auto sol = solve(rm, opt);
    REQUIRE(sol.absorbing_states == std::vector<std::size_t>{2});
    CHECK(sol.fixed_point_residual < opt.tol);

    // the absorbing state decouples into a pure single-model problem
    AuxiliaryProblem prob;
    prob.model = rm.levy[2];
    prob.delta = rm.delta[2];
    prob.beta = rm.beta;
    prob.q = rm.discount[2];
    prob.r = 0.0;
    const auto alone = optimal_threshold(prob);
    CHECK(sol.b_star.b[2] == doctest::Approx(alone.b_star).epsilon(1e-9));
    for (std::size_t k = 0; k < sol.V.grid().size(); k += 20) {
        CHECK(sol.V.values(2)[k] ==
              doctest::Approx(alone.value(sol.V.grid()[k])).epsilon(1e-9));
    }

    // simulator cross-check from the transient state
    PathConfig cfg;
    cfg.n_paths = 6000;
    cfg.seed = 555;
    cfg.dt = 3e-3;
    cfg.discount_cutoff = 1e-5;
    const auto est = simulate_regime(rm, sol.b_star.b, 1.0, 0, cfg);
    INFO("analytic ", sol.V(0, 1.0), " mc ", est.mean, " se ", est.std_error);
    CHECK(std::abs(est.mean - sol.V(0, 1.0)) < 3.5 * est.std_error);
}
