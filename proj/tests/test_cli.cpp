// End-to-end checks of the command-line tool: exit codes, artifacts, and the
// reproducibility of runs driven by a config echo.

#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string cli = REFRACT_CLI_PATH;
const fs::path models = REFRACT_MODELS_DIR;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("refract_cli_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

int run(const std::string& args) {
    const int status = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    json j;
    in >> j;
    return j;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

} // namespace

TEST_CASE("check command validates the demo models") {
    TempDir tmp;
    CHECK(run("check -m " + (models / "two_state_demo.json").string() + " -o " +
              tmp.path.string()) == 0);
    const auto rep = read_json(tmp.path / "validation_report.json");
    CHECK(rep.at("all_pass").get<bool>());

    // beta = 1 must fail with the assumption exit code
    CHECK(run("check -m " + (models / "two_state_demo.json").string() + " -o " +
              tmp.path.string() + " --set beta=1.0") == 3);
}

TEST_CASE("schema violations exit with code 2") {
    TempDir tmp;
    const fs::path bad = tmp.path / "bad.json";
    std::ofstream(bad) << "{\"single\": {\"delta\": 0.5}}";
    CHECK(run("check -m " + bad.string() + " -o " + tmp.path.string()) == 2);
    CHECK(run("check -m " + (tmp.path / "missing.json").string() + " -o " + tmp.path.string()) ==
          2);
}

TEST_CASE("scale command emits the table and self-check") {
    TempDir tmp;
    CHECK(run("scale -m " + (models / "single_cl.json").string() + " -o " + tmp.path.string() +
              " --grid-points 101") == 0);
    const auto rep = read_json(tmp.path / "self_check.json");
    CHECK(rep.at("max_residual").get<double>() < 1e-8);
    const auto table = slurp(tmp.path / "scale_table.csv");
    CHECK(table.rfind("x,W,W_prime,Z,W_bar,Z_bar,W_refr,W_bar_refr\n", 0) == 0);
    CHECK(std::count(table.begin(), table.end(), '\n') == 102);
}

TEST_CASE("solve-single reports the threshold and optimality") {
    TempDir tmp;
    CHECK(run("solve-single -m " + (models / "single_brownian.json").string() + " -o " +
              tmp.path.string() + " --grid-points 201") == 0);
    const auto diag = read_json(tmp.path / "diagnostics.json");
    CHECK(diag.at("b_star").get<double>() > 0.0);
    CHECK(diag.at("g_residual").get<double>() < 1e-9);
    CHECK(diag.at("optimality_pass").get<bool>());
    CHECK(fs::exists(tmp.path / "solution.csv"));
}

TEST_CASE("solve-regime then simulate agree within the monte-carlo band") {
    TempDir tmp;
    CHECK(run("solve-regime -m " + (models / "two_state_demo.json").string() + " -o " +
              tmp.path.string() + " --grid-points 201 --tol 1e-5") == 0);
    const auto diag = read_json(tmp.path / "diagnostics.json");
    CHECK(diag.at("fixed_point_residual").get<double>() < 1e-5);
    const auto thresholds = diag.at("thresholds").get<std::vector<double>>();
    REQUIRE(thresholds.size() == 2);

    // pick the grid point nearest x = 1 from the written artifact and compare
    // the simulator against the tabulated value there
    const auto csv = slurp(tmp.path / "value_state_0.csv");
    double x_probe = 0.0, v_probe = 0.0;
    {
        std::istringstream lines(csv);
        std::string line;
        std::getline(lines, line); // header
        double best = 1e300;
        while (std::getline(lines, line)) {
            std::istringstream row(line);
            std::string xs, vs;
            std::getline(row, xs, ',');
            std::getline(row, vs, ',');
            const double x = std::stod(xs);
            if (std::abs(x - 1.0) < best) {
                best = std::abs(x - 1.0);
                x_probe = x;
                v_probe = std::stod(vs);
            }
        }
        REQUIRE(best < 0.2);
    }

    std::ostringstream args;
    args.precision(17);
    args << " --b " << thresholds[0] << " --b " << thresholds[1] << " --x " << x_probe
         << " --state 0 --paths 6000 --dt 0.002 --seed 11";
    CHECK(run("simulate -m " + (models / "two_state_demo.json").string() + " -o " +
              tmp.path.string() + args.str()) == 0);
    const auto est = read_json(tmp.path / "estimate.json");
    const double mean = est.at("mean").get<double>();
    const double se = est.at("std_error").get<double>();
    CHECK(std::abs(mean - v_probe) < 3.5 * se);
}

TEST_CASE("config echo reproduces a run bit for bit") {
    TempDir tmp;
    const std::string common = " --grid-points 101 --paths 2000 --seed 5 --x 1.5 --b 0.8";
    CHECK(run("simulate -m " + (models / "single_cl.json").string() + " -o " +
              (tmp.path / "a").string() + common) == 0);
    // feed the artifact itself back as the model document
    CHECK(run("simulate -m " + (tmp.path / "a" / "estimate.json").string() + " -o " +
              (tmp.path / "b").string() + common) == 0);
    const auto first = read_json(tmp.path / "a" / "estimate.json");
    const auto second = read_json(tmp.path / "b" / "estimate.json");
    CHECK(first.at("mean").get<double>() == second.at("mean").get<double>());
    CHECK(first.at("std_error").get<double>() == second.at("std_error").get<double>());
}

TEST_CASE("simulate argument validation") {
    TempDir tmp;
    CHECK(run("simulate -m " + (models / "two_state_demo.json").string() + " -o " +
              tmp.path.string() + " --b 0.5 --paths 10") == 2); // one threshold per state
    CHECK(run("simulate -m " + (models / "two_state_demo.json").string() + " -o " +
              tmp.path.string() + " --b 0.5 --b 0.5 --state 7 --paths 10") == 2);
}
