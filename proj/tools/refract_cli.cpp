// Batch front door: ingests JSON model documents, dispatches the solvers and
// the simulator, and writes CSV/JSON artifacts with a full config echo.

#include "refract/model_io.hpp"
#include "refract/regime_switching.hpp"
#include "refract/simulator.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

using namespace refract;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RunSpec {
    std::string command;
    std::string model_file;
    std::string output_dir;
    std::vector<std::string> overrides;
    double tol = 1e-6;
    std::size_t grid_points = 801;
    double x_max = 0.0;
    long paths = 100000;
    std::uint64_t seed = 42;
    double dt = 1e-3;
    std::vector<double> thresholds; // simulate
    double x0 = 1.0;                // simulate
    std::size_t state = 0;          // simulate
    bool serial = false;
};

json config_echo(const ModelDocument& doc, const RunSpec& spec) {
    json cfg = json::parse(document_to_json(doc));
    cfg["run"] = {{"command", spec.command},
                  {"tol", spec.tol},
                  {"grid_points", spec.grid_points},
                  {"x_max", spec.x_max},
                  {"paths", spec.paths},
                  {"seed", spec.seed},
                  {"dt", spec.dt},
                  {"serial", spec.serial}};
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw NumericalError("cannot write artifact '" + path.string() + "'");
    out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string csv_row(const std::vector<double>& vals) {
    std::string row;
    for (std::size_t k = 0; k < vals.size(); ++k) {
        if (k) row += ',';
        row += format_full(vals[k]);
    }
    row += '\n';
    return row;
}

std::vector<double> make_grid(double x_max, std::size_t n) {
    std::vector<double> g(n);
    for (std::size_t k = 0; k < n; ++k) g[k] = x_max * double(k) / double(n - 1);
    return g;
}

int run_check(const ModelDocument& doc, const RunSpec& spec, const fs::path& out) {
    ValidationReport rep;
    if (doc.regime) {
        rep = validate(*doc.regime);
    } else {
        rep = doc.single->validate();
    }
    json j;
    j["all_pass"] = rep.all_pass();
    j["checks"] = json::array();
    for (const auto& c : rep.checks) {
        j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"reason", c.reason}});
    }
    j["config"] = config_echo(doc, spec);
    write_json(out / "validation_report.json", j);
    std::cout << rep.summary();
    if (!rep.all_pass()) rep.require(); // exit 3 via AssumptionError
    return 0;
}

int run_scale(const ModelDocument& doc, const RunSpec& spec, const fs::path& out) {
    if (!doc.single) throw SchemaError("$", "scale requires a 'single' document");
    const auto& p = *doc.single;
    p.require_valid();
    const ScaleFunctionSet set(p.model, p.delta, p.alpha());

    const double x_max = spec.x_max > 0.0 ? spec.x_max : 10.0 / set.phi(Proc::refracted);
    const auto grid = make_grid(x_max, spec.grid_points);
    std::string csv = "x,W,W_prime,Z,W_bar,Z_bar,W_refr,W_bar_refr\n";
    for (double x : grid) {
        csv += csv_row({x, set.W(Proc::base, x), x > 0.0 ? set.W_prime(Proc::base, x) : 0.0,
                        set.Z(Proc::base, x), set.Wbar(Proc::base, x), set.Zbar(Proc::base, x),
                        set.W(Proc::refracted, x), set.Wbar(Proc::refracted, x)});
    }
    write_text(out / "scale_table.csv", csv);

    const auto rep = set.self_check(grid);
    json j;
    j["laplace_residual"] = rep.laplace_residual;
    j["identity_residual"] = rep.identity_residual;
    j["boundary_residual"] = rep.boundary_residual;
    j["max_residual"] = rep.max_residual();
    j["alpha"] = p.alpha();
    j["phi_base"] = set.phi(Proc::base);
    j["phi_refracted"] = set.phi(Proc::refracted);
    j["config"] = config_echo(doc, spec);
    write_json(out / "self_check.json", j);
    std::cout << rep.summary();
    return 0;
}

int run_solve_single(const ModelDocument& doc, const RunSpec& spec, const fs::path& out) {
    if (!doc.single) throw SchemaError("$", "solve-single requires a 'single' document");
    const auto& p = *doc.single;
    SingleRegimeSolver solver(p);
    const auto sol = solver.optimal_threshold();
    const auto rep = verify_optimality(p, sol, spec.grid_points, spec.x_max);

    const double x_max =
        spec.x_max > 0.0
            ? spec.x_max
            : std::max({6.0 * sol.b_star, 5.0,
                        sol.b_star + 10.0 / solver.scales()->phi(Proc::refracted)});
    const auto grid = make_grid(x_max, spec.grid_points);
    const auto values =
        solver.npv_grid(sol.b_star, grid, spec.serial ? Exec::serial : Exec::parallel);
    std::string csv = "x,value,value_prime\n";
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double x = grid[k];
        double dv;
        if (x == 0.0 || x == sol.b_star) {
            dv = sol.kernel->derivative_one_sided(x, Side::right);
        } else {
            dv = sol.derivative(x);
        }
        csv += csv_row({x, values[k], dv});
    }
    write_text(out / "solution.csv", csv);

    json j;
    j["b_star"] = sol.b_star;
    j["threshold_at_zero"] = sol.threshold_at_zero;
    j["g_residual"] = sol.g_residual;
    j["smooth_fit_residual"] = rep.smooth_fit_residual;
    j["slope_margins"] = {{"below_min", rep.below_min_margin},
                          {"below_max", rep.below_max_margin},
                          {"above_lower", rep.above_lower_margin},
                          {"above_upper", rep.above_upper_margin},
                          {"monotone", rep.monotone_margin}};
    j["optimality_pass"] = rep.pass();
    // rate mapping as used by the auxiliary problem
    j["rates"] = {{"q_discount", p.q}, {"r_terminal", p.r}, {"alpha", p.alpha()}};
    j["config"] = config_echo(doc, spec);
    write_json(out / "diagnostics.json", j);
    std::cout << "b* = " << format_full(sol.b_star) << ", |g(b*)| = " << sol.g_residual
              << ", optimality " << (rep.pass() ? "pass" : "FAIL") << "\n";
    return 0;
}

int run_solve_regime(const ModelDocument& doc, const RunSpec& spec, const fs::path& out) {
    if (!doc.regime) throw SchemaError("$", "solve-regime requires a 'regime' document");
    const auto& rm = *doc.regime;
    RegimeSolveOptions opt;
    opt.tol = spec.tol;
    opt.grid_points = spec.grid_points;
    opt.x_max = spec.x_max;
    opt.exec = spec.serial ? Exec::serial : Exec::parallel;
    const auto sol = solve(rm, opt);

    for (std::size_t i = 0; i < rm.n_states(); ++i) {
        // per-state value and derivative at the solved thresholds
        SingleRegimeSolver state_solver(state_problem(rm, sol.V, i));
        const auto kernel = state_solver.kernel(sol.b_star.b[i]);
        std::string csv = "x,V,V_prime\n";
        for (double x : sol.V.grid()) {
            const double dv = (x == 0.0 || x == sol.b_star.b[i])
                                  ? kernel.derivative_one_sided(x, Side::right)
                                  : kernel.derivative(x);
            csv += csv_row({x, sol.V(i, x), dv});
        }
        write_text(out / ("value_state_" + std::to_string(i) + ".csv"), csv);
    }

    std::string trace = "n,diff";
    for (std::size_t i = 0; i < rm.n_states(); ++i) trace += ",b_" + std::to_string(i);
    trace += '\n';
    for (const auto& rec : sol.trace) {
        std::vector<double> row{double(rec.n), rec.diff};
        row.insert(row.end(), rec.thresholds.begin(), rec.thresholds.end());
        trace += csv_row(row);
    }
    write_text(out / "iteration_trace.csv", trace);

    json j;
    j["thresholds"] = sol.b_star.b;
    j["rho"] = sol.rho;
    j["iterations"] = sol.trace.size();
    j["final_diff"] = sol.final_diff;
    j["fixed_point_residual"] = sol.fixed_point_residual;
    j["bounds"] = {{"V_minus", sol.V_minus}, {"V_plus", sol.V_plus}};
    j["absorbing_states"] = sol.absorbing_states;
    j["grid_expansions"] = sol.grid_expansions;
    j["x_max"] = sol.x_max;
    // per state, the (q, r) mapping of the embedded auxiliary problem
    json mapping = json::array();
    for (std::size_t i = 0; i < rm.n_states(); ++i) {
        mapping.push_back({{"state", rm.state_name(i)},
                           {"q_discount", rm.discount[i]},
                           {"r_terminal", rm.rate_out(i)},
                           {"alpha", rm.discount[i] + rm.rate_out(i)}});
    }
    j["rate_mapping"] = mapping;
    j["config"] = config_echo(doc, spec);
    write_json(out / "diagnostics.json", j);

    std::cout << "b* =";
    for (double b : sol.b_star.b) std::cout << ' ' << format_full(b);
    std::cout << "\nfixed-point residual = " << sol.fixed_point_residual << "\n";
    return 0;
}

int run_simulate(const ModelDocument& doc, const RunSpec& spec, const fs::path& out) {
    PathConfig cfg;
    cfg.n_paths = spec.paths;
    cfg.seed = spec.seed;
    cfg.dt = spec.dt;
    cfg.exec = spec.serial ? Exec::serial : Exec::parallel;

    NPVEstimate est;
    if (doc.single) {
        if (spec.thresholds.size() != 1) {
            throw SchemaError("--b", "single-model simulation needs exactly one threshold");
        }
        est = simulate_single_regime(*doc.single, spec.thresholds[0], spec.x0, cfg);
    } else {
        if (spec.thresholds.size() != doc.regime->n_states()) {
            throw SchemaError("--b", "one threshold per state required");
        }
        if (spec.state >= doc.regime->n_states()) {
            throw SchemaError("--state", "state index out of range");
        }
        est = simulate_regime(*doc.regime, spec.thresholds, spec.x0, spec.state, cfg);
    }
    json j;
    j["mean"] = est.mean;
    j["std_error"] = est.std_error;
    j["n_paths"] = est.n_paths;
    j["components"] = {{"dividends", est.dividends},
                       {"injections", est.injections},
                       {"payoff", est.payoff}};
    j["x"] = spec.x0;
    j["state"] = spec.state;
    j["thresholds"] = spec.thresholds;
    j["config"] = config_echo(doc, spec);
    write_json(out / "estimate.json", j);
    std::cout << "mean = " << format_full(est.mean) << " +/- " << format_full(est.std_error)
              << " (" << est.n_paths << " paths)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bail-out dividend solver for regime-switching surplus models"};
    app.require_subcommand(1);

    RunSpec spec;
    app.add_option("--model,-m", spec.model_file, "JSON model document")->required();
    app.add_option("--out,-o", spec.output_dir, "output directory (default $REFRACT_OUT_DIR or .)");
    app.add_option("--tol", spec.tol, "fixed-point tolerance");
    app.add_option("--grid-points", spec.grid_points, "grid resolution");
    app.add_option("--x-max", spec.x_max, "grid span (0 = auto)");
    app.add_option("--paths", spec.paths, "monte-carlo path count");
    app.add_option("--seed", spec.seed, "root seed");
    app.add_option("--dt", spec.dt, "euler step");
    app.add_option("--set", spec.overrides, "key=value parameter override (repeatable)");
    app.add_option("--b", spec.thresholds, "threshold(s) for simulate");
    app.add_option("--x", spec.x0, "initial surplus for simulate");
    app.add_option("--state", spec.state, "initial state for simulate");
    app.add_flag("--serial", spec.serial, "disable the OpenMP kernels");

    // options stay on the parent; subcommands pass unmatched flags up
    app.add_subcommand("check", "validate the model assumptions")->fallthrough();
    app.add_subcommand("scale", "tabulate the scale functions and self-check")->fallthrough();
    app.add_subcommand("solve-single", "solve the auxiliary single-model problem")->fallthrough();
    app.add_subcommand("solve-regime", "solve the regime-switching problem")->fallthrough();
    app.add_subcommand("simulate", "monte-carlo estimate under given thresholds")->fallthrough();

    try {
        app.parse(argc, argv);
        spec.command = app.get_subcommands().front()->get_name();

        ModelDocument doc = load_model_document(spec.model_file);
        for (const auto& kv : spec.overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw SchemaError("--set " + kv, "expected key=value");
            apply_override(doc, kv.substr(0, eq), kv.substr(eq + 1));
        }

        fs::path out = spec.output_dir;
        if (out.empty()) {
            const char* env = std::getenv("REFRACT_OUT_DIR");
            out = env ? env : ".";
        }
        fs::create_directories(out);

        if (spec.command == "check") return run_check(doc, spec, out);
        if (spec.command == "scale") return run_scale(doc, spec, out);
        if (spec.command == "solve-single") return run_solve_single(doc, spec, out);
        if (spec.command == "solve-regime") return run_solve_regime(doc, spec, out);
        if (spec.command == "simulate") return run_simulate(doc, spec, out);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const SchemaError& e) {
        std::cerr << "schema error at " << e.path() << ": " << e.what() << "\n";
        return 2;
    } catch (const AssumptionError& e) {
        std::cerr << "assumption violation: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
