#include "refract/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace refract {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-seeded xoshiro256++ stream; each path owns one, so path sets are
/// identical regardless of thread count. The mirror flag produces the
/// antithetic twin (sign-flipped normals, reflected uniforms for sizes).
class RngStream {
public:
    RngStream(std::uint64_t root, std::uint64_t index, bool mirror) : mirror_(mirror) {
        std::uint64_t s = root ^ (0xd1342543de82ef95ULL * (index + 1));
        for (auto& word : state_) word = splitmix64(s);
    }

    double uniform() { // in (0, 1)
        const std::uint64_t bits = next() >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    /// Exp(1) draw used for event TIMES (shared between antithetic twins).
    double exp_time() { return -std::log(uniform()); }

    /// Exp(1) draw used for SIZES (mirrored in the antithetic twin).
    double exp_size() {
        const double u = uniform();
        return -std::log(mirror_ ? 1.0 - u : u);
    }

    double normal() {
        const double u1 = uniform();
        double u2 = uniform();
        if (mirror_) u2 = u2 + 0.5 - std::floor(u2 + 0.5); // flips the cosine sign
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4] = {};
    bool mirror_ = false;
};

struct Accum {
    double dividends = 0.0;
    double injections = 0.0; // beta-weighted
    double payoff = 0.0;

    double npv() const { return dividends - injections + payoff; }
};

struct EpochSink {
    std::vector<double>* sums = nullptr; // length limit; per-path row accumulated by caller
    int epoch = 0;

    void record(double amount) {
        if (sums && epoch < static_cast<int>(sums->size())) (*sums)[epoch] += amount;
    }
};

/// Evolves the surplus over local time [0, span] within one regime epoch.
/// Discounting inside the epoch: D0 * e^{-q s}. Returns false once the path's
/// discount falls below the cutoff (nothing left to accrue).
bool evolve_brownian(RngStream& rng, const LevyModel& m, double delta, double b, double q,
                     double beta, double D0, double span, const PathConfig& cfg, double& u,
                     Accum& acc, EpochSink& sink) {
    const double sigma = m.sigma;
    double s = 0.0;
    while (s < span) {
        if (D0 * std::exp(-q * s) < cfg.discount_cutoff) return false;
        const double h = std::min(cfg.dt, span - s);
        const bool refracting = u > b;
        const double drift = refracting ? m.gamma - delta : m.gamma;
        if (refracting) {
            // exact discounted dividend accrual over the step
            acc.dividends += delta * D0 * (std::exp(-q * s) - std::exp(-q * (s + h))) / q;
        }
        const double z = rng.normal();
        double end = u + drift * h + sigma * std::sqrt(h) * z;
        if (cfg.exact_reflection) {
            // minimum of the Brownian bridge between u and end (drift-free law)
            const double lnu = std::log(rng.uniform());
            const double gap = u - end;
            const double min_free =
                0.5 * (u + end - std::sqrt(gap * gap - 2.0 * sigma * sigma * h * lnu));
            if (min_free < 0.0) {
                const double inj = -min_free;
                const double cost = beta * inj * D0 * std::exp(-q * (s + h));
                acc.injections += cost;
                sink.record(cost);
                end += inj; // Skorokhod map over the step
            }
        } else if (end < 0.0) {
            const double cost = beta * (-end) * D0 * std::exp(-q * (s + h));
            acc.injections += cost;
            sink.record(cost);
            end = 0.0;
        }
        u = end;
        s += h;
    }
    return true;
}

bool evolve_cramer_lundberg(RngStream& rng, const LevyModel& m, double delta, double b, double q,
                            double beta, double D0, double span, const PathConfig& cfg, double& u,
                            Accum& acc, EpochSink& sink) {
    const double c = m.gamma;
    double s = 0.0;
    double next_claim = rng.exp_time() / m.jump_rate;
    while (s < span) {
        if (D0 * std::exp(-q * s) < cfg.discount_cutoff) return false;
        const double target = std::min(next_claim, span);
        // piecewise-deterministic drift up to the next event, split at b
        while (s < target) {
            if (u < b) {
                const double t_cross = s + (b - u) / c;
                if (t_cross >= target) {
                    u += c * (target - s);
                    s = target;
                } else {
                    u = b;
                    s = t_cross;
                }
            } else {
                // above b the net drift c - delta > 0 keeps the path there
                acc.dividends += delta * D0 * (std::exp(-q * s) - std::exp(-q * target)) / q;
                u += (c - delta) * (target - s);
                s = target;
            }
        }
        if (next_claim <= span) {
            u -= rng.exp_size() / m.jump_mean_param;
            if (u < 0.0) {
                const double cost = beta * (-u) * D0 * std::exp(-q * s);
                acc.injections += cost;
                sink.record(cost);
                u = 0.0;
            }
            next_claim = s + rng.exp_time() / m.jump_rate;
        }
    }
    return true;
}

bool evolve_state(RngStream& rng, const LevyModel& m, double delta, double b, double q, double beta,
                  double D0, double span, const PathConfig& cfg, double& u, Accum& acc,
                  EpochSink& sink) {
    switch (m.family) {
        case LevyFamily::brownian_drift:
            return evolve_brownian(rng, m, delta, b, q, beta, D0, span, cfg, u, acc, sink);
        case LevyFamily::cramer_lundberg_exp:
            return evolve_cramer_lundberg(rng, m, delta, b, q, beta, D0, span, cfg, u, acc, sink);
        case LevyFamily::general_numeric:
            throw NumericalError("simulation supports the closed-form families only");
    }
    return false;
}

NPVEstimate reduce_paths(const std::vector<Accum>& results, bool antithetic) {
    NPVEstimate est;
    const long n = static_cast<long>(results.size());
    double sum = 0.0, sumsq = 0.0;
    if (antithetic) {
        for (long k = 0; k + 1 < n; k += 2) {
            const double pair_mean =
                0.5 * (results[static_cast<std::size_t>(k)].npv() +
                       results[static_cast<std::size_t>(k + 1)].npv());
            sum += pair_mean;
            sumsq += pair_mean * pair_mean;
        }
        const long pairs = n / 2;
        est.mean = sum / static_cast<double>(pairs);
        const double var =
            std::max(0.0, sumsq / static_cast<double>(pairs) - est.mean * est.mean);
        est.std_error = std::sqrt(var / static_cast<double>(pairs));
    } else {
        for (const auto& r : results) {
            sum += r.npv();
            sumsq += r.npv() * r.npv();
        }
        est.mean = sum / static_cast<double>(n);
        const double var = std::max(0.0, sumsq / static_cast<double>(n) - est.mean * est.mean);
        est.std_error = std::sqrt(var / static_cast<double>(n));
    }
    est.n_paths = n;
    double div = 0.0, inj = 0.0, pay = 0.0;
    for (const auto& r : results) {
        div += r.dividends;
        inj += r.injections;
        pay += r.payoff;
    }
    est.dividends = div / static_cast<double>(n);
    est.injections = inj / static_cast<double>(n);
    est.payoff = pay / static_cast<double>(n);
    if (!std::isfinite(est.mean)) throw NumericalError("simulation produced non-finite estimate");
    return est;
}

} // namespace

namespace {

// exceptions cannot cross the parallel region; refuse unsupported families up front
void require_simulable(const LevyModel& m) {
    if (m.family == LevyFamily::general_numeric) {
        throw NumericalError("simulation supports the closed-form families only");
    }
}

} // namespace

NPVEstimate simulate_single_regime(const AuxiliaryProblem& prob, double b, double x,
                                   const PathConfig& cfg) {
    prob.require_valid();
    require_simulable(prob.model);
    const double q = prob.q, r = prob.r, beta = prob.beta;
    const double horizon =
        cfg.horizon > 0.0 ? cfg.horizon : std::log(1.0 / cfg.discount_cutoff) / q;

    std::vector<Accum> results(static_cast<std::size_t>(cfg.n_paths));
    parallel_for(cfg.exec, cfg.n_paths, [&](std::size_t p) {
        const bool mirror = cfg.antithetic && (p % 2 == 1);
        const std::uint64_t stream = cfg.antithetic ? p / 2 : p;
        RngStream rng(cfg.seed, stream, mirror);
        Accum acc;
        EpochSink sink; // unused in the single-regime run
        double u = x;
        if (u < 0.0) {
            acc.injections += beta * (-u);
            u = 0.0;
        }
        const double zeta = r > 0.0 ? rng.exp_time() / r : kInf;
        const double span = std::min(zeta, horizon);
        const bool alive =
            evolve_state(rng, prob.model, prob.delta, b, q, beta, 1.0, span, cfg, u, acc, sink);
        if (alive && r > 0.0 && zeta <= horizon) {
            acc.payoff = std::exp(-q * zeta) * prob.payoff.value(u);
        }
        results[p] = acc;
    });
    return reduce_paths(results, cfg.antithetic);
}

NPVEstimate simulate_regime(const RegimeModel& regime, const std::vector<double>& b, double x,
                            std::size_t i0, const PathConfig& cfg) {
    validate(regime).require();
    for (const auto& m : regime.levy) require_simulable(m);
    if (b.size() != regime.n_states()) {
        throw std::invalid_argument("simulate_regime: one threshold per state required");
    }
    const double beta = regime.beta;
    const double r_min = *std::min_element(regime.discount.begin(), regime.discount.end());
    const double horizon =
        cfg.horizon > 0.0 ? cfg.horizon : std::log(1.0 / cfg.discount_cutoff) / r_min;

    const int epochs = cfg.epoch_record_limit;
    std::vector<Accum> results(static_cast<std::size_t>(cfg.n_paths));
    std::vector<double> epoch_sums(static_cast<std::size_t>(std::max(0, epochs)), 0.0);
    std::vector<std::vector<double>> epoch_rows;
    if (epochs > 0) {
        epoch_rows.assign(static_cast<std::size_t>(cfg.n_paths),
                          std::vector<double>(static_cast<std::size_t>(epochs), 0.0));
    }

    parallel_for(cfg.exec, cfg.n_paths, [&](std::size_t p) {
        const bool mirror = cfg.antithetic && (p % 2 == 1);
        const std::uint64_t stream = cfg.antithetic ? p / 2 : p;
        RngStream rng(cfg.seed, stream, mirror);
        Accum acc;
        EpochSink sink;
        if (epochs > 0) sink.sums = &epoch_rows[p];
        double u = x;
        std::size_t i = i0;
        double t = 0.0, D = 1.0;
        if (u < 0.0) {
            acc.injections += beta * (-u);
            sink.record(beta * (-u));
            u = 0.0;
        }
        while (t < horizon && D >= cfg.discount_cutoff) {
            const double qi = regime.rate_out(i);
            const double ri = regime.discount[i];
            const double tau = qi > 0.0 ? rng.exp_time() / qi : kInf;
            const double remaining = horizon - t;
            const double span = std::min(tau, remaining);
            const bool switched = tau <= remaining;
            const bool alive = evolve_state(rng, regime.levy[i], regime.delta[i], b[i], ri, beta,
                                            D, span, cfg, u, acc, sink);
            D *= std::exp(-ri * span);
            t += span;
            if (!alive || !switched) break; // discount cutoff or horizon hit
            // regime switch: sample the embedded chain, apply the switch jump
            double pick = rng.uniform() * qi;
            std::size_t j = i;
            for (std::size_t cand = 0; cand < regime.n_states(); ++cand) {
                if (cand == i) continue;
                pick -= regime.Q[i][cand];
                if (pick <= 0.0) {
                    j = cand;
                    break;
                }
            }
            const JumpLaw& law = regime.switch_jumps[i][j];
            double y = 0.0;
            if (law.kind == JumpLaw::Kind::point_mass) y = -law.m;
            if (law.kind == JumpLaw::Kind::exponential) y = -rng.exp_size() / law.eta;
            u += y;
            if (u < 0.0) {
                const double cost = beta * (-u) * D;
                acc.injections += cost;
                sink.record(cost);
                u = 0.0;
            }
            i = j;
            ++sink.epoch;
        }
        results[p] = acc;
    });

    NPVEstimate est = reduce_paths(results, cfg.antithetic);
    if (epochs > 0) {
        for (const auto& row : epoch_rows) {
            for (std::size_t e = 0; e < row.size(); ++e) epoch_sums[e] += row[e];
        }
        est.epoch_injections.resize(epoch_sums.size());
        for (std::size_t e = 0; e < epoch_sums.size(); ++e) {
            est.epoch_injections[e] = epoch_sums[e] / static_cast<double>(cfg.n_paths);
        }
    }
    return est;
}

} // namespace refract
