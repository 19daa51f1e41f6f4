// Benchmarks the OpenMP kernels against their serial reference implementations
// and verifies the outputs agree bit for bit.

#include "refract/regime_switching.hpp"
#include "refract/simulator.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

using namespace refract;

namespace {

double seconds(auto fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
}

AuxiliaryProblem demo_problem() {
    AuxiliaryProblem p;
    p.model = LevyModel::brownian(1.0, std::sqrt(2.0));
    p.delta = 0.5;
    p.beta = 1.5;
    p.q = 0.1;
    p.r = 0.5;
    p.payoff = PayoffFunction({0.0, 1.0, 3.0}, {0.0, 0.8, 1.6}, 0.2);
    return p;
}

} // namespace

int main() {
    std::printf("threads available: %d\n\n", max_threads());

    {
        const SingleRegimeSolver solver(demo_problem());
        for (std::size_t n : {801u, 3201u, 12801u}) {
            std::vector<double> xs(n);
            for (std::size_t k = 0; k < n; ++k) xs[k] = 8.0 * double(k) / double(n - 1);
            std::vector<double> serial_out, parallel_out;
            const double ts =
                seconds([&] { serial_out = solver.npv_grid(1.0, xs, Exec::serial); });
            const double tp =
                seconds([&] { parallel_out = solver.npv_grid(1.0, xs, Exec::parallel); });
            double max_diff = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                max_diff = std::max(max_diff, std::abs(serial_out[k] - parallel_out[k]));
            }
            std::printf("npv grid %6zu pts   serial %8.1f ms   openmp %8.1f ms   x%.2f   "
                        "max|diff| %.1e\n",
                        n, ts * 1e3, tp * 1e3, ts / tp, max_diff);
        }
    }

    {
        const auto prob = demo_problem();
        PathConfig cfg;
        cfg.seed = 7;
        for (long paths : {20000L, 80000L}) {
            cfg.n_paths = paths;
            NPVEstimate se, pe;
            cfg.exec = Exec::serial;
            const double ts = seconds([&] { se = simulate_single_regime(prob, 1.0, 2.0, cfg); });
            cfg.exec = Exec::parallel;
            const double tp = seconds([&] { pe = simulate_single_regime(prob, 1.0, 2.0, cfg); });
            std::printf("mc paths %8ld      serial %8.1f ms   openmp %8.1f ms   x%.2f   "
                        "max|diff| %.1e\n",
                        paths, ts * 1e3, tp * 1e3, ts / tp, std::abs(se.mean - pe.mean));
        }
    }

    {
        RegimeModel rm;
        rm.beta = 1.4;
        rm.Q = {{-0.6, 0.6}, {0.8, -0.8}};
        rm.levy = {LevyModel::brownian(1.0, std::sqrt(2.0)),
                   LevyModel::cramer_lundberg(2.0, 1.0, 1.5)};
        rm.delta = {0.5, 0.6};
        rm.discount = {0.4, 0.5};
        rm.switch_jumps = {{JumpLaw::none(), JumpLaw::point(0.2)},
                           {JumpLaw::exponential(3.0), JumpLaw::none()}};
        RegimeSolveOptions opt;
        opt.tol = 1e-6;
        opt.grid_points = 801;
        opt.exec = Exec::serial;
        double ts = 0.0, tp = 0.0, diff = 0.0;
        {
            const auto t0 = std::chrono::steady_clock::now();
            const auto rs = solve(rm, opt);
            ts = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            opt.exec = Exec::parallel;
            const auto t1 = std::chrono::steady_clock::now();
            const auto rp = solve(rm, opt);
            tp = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
            diff = ValueFunction::sup_distance(rs.V, rp.V);
        }
        std::printf("regime solve 801 pts  serial %8.1f ms   openmp %8.1f ms   x%.2f   "
                    "max|diff| %.1e\n",
                    ts * 1e3, tp * 1e3, ts / tp, diff);
    }
    return 0;
}
