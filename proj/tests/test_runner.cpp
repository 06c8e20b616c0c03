#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mfdelay/runner.hpp"

using namespace mfdelay;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "mfdelay_runner_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("fubini-only run produces only its CSV and finishes fast") {
    const fs::path dir = fresh_dir("fubini_only");
    ExperimentConfig cfg = *parse_config_text("model = recursive_utility\n").config;
    cfg.checks = {"fubini"};
    cfg.out_dir = dir.string();

    const auto start = std::chrono::steady_clock::now();
    const int code = run_experiment(cfg);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    CHECK(code == kExitAllPass);
    CHECK(seconds < 1.0);
    CHECK(fs::exists(dir / "fubini_gap.csv"));
    CHECK(fs::exists(dir / "report.txt"));
    CHECK(fs::exists(dir / "manifest.json"));
    // no simulation ran, so no other CSV appears
    CHECK_FALSE(fs::exists(dir / "forward_mean.csv"));
    CHECK_FALSE(fs::exists(dir / "lambda.csv"));
    CHECK_FALSE(fs::exists(dir / "residual.csv"));
}

TEST_CASE("identical config and seed give byte-identical CSVs") {
    ExperimentConfig cfg = *parse_config_text("model = recursive_utility\n"
                                              "T = 1\nn_particles = 300\nsigma0 = 0.2\n"
                                              "checks = lambda, residual\n")
                                .config;
    const fs::path a = fresh_dir("repro_a");
    const fs::path b = fresh_dir("repro_b");
    cfg.out_dir = a.string();
    REQUIRE(run_experiment(cfg) == kExitAllPass);
    cfg.out_dir = b.string();
    REQUIRE(run_experiment(cfg) == kExitAllPass);
    for (const char* name : {"forward_mean.csv", "lambda.csv", "residual.csv"}) {
        const std::string fa = slurp(a / name);
        REQUIRE_FALSE(fa.empty());
        CHECK(fa == slurp(b / name));
    }
}

TEST_CASE("check failures exit with code 4 and keep artifacts") {
    ExperimentConfig cfg = *parse_config_text("model = recursive_utility\n"
                                              "T = 1\nn_particles = 100\ncontrol = 2.0\n"
                                              "checks = residual\n")
                                .config;
    const fs::path dir = fresh_dir("resfail");
    cfg.out_dir = dir.string();
    CHECK(run_experiment(cfg) == kExitCheckFailure);
    const std::string report = slurp(dir / "report.txt");
    CHECK(report.find("[FAIL] residual") != std::string::npos);
    CHECK(fs::exists(dir / "residual.csv"));
}

TEST_CASE("numerical failures exit with code 3 and mark the failure point") {
    // exploding drift: the forward simulation overflows
    ExperimentConfig cfg = *parse_config_text("model = linear_toy\n"
                                              "T = 10\ndt = 0.5\nc1 = 60\nx0 = 1e300\n"
                                              "sigma0 = 0\ncu = 0\nn_particles = 4\n"
                                              "checks = bsde\n")
                                .config;
    const fs::path dir = fresh_dir("numfail");
    cfg.out_dir = dir.string();
    CHECK(run_experiment(cfg) == kExitNumerical);
    const std::string manifest = slurp(dir / "manifest.json");
    CHECK(manifest.find("failure_point") != std::string::npos);
}

TEST_CASE("transversality divergence detection keeps the run green") {
    ExperimentConfig cfg = *parse_config_text("model = recursive_utility\n"
                                              "c = 0.5\nT = 3\nn_particles = 64\n"
                                              "checks = transversality\n")
                                .config;
    const fs::path dir = fresh_dir("divergence");
    cfg.out_dir = dir.string();
    CHECK(run_experiment(cfg) == kExitAllPass);
    const std::string report = slurp(dir / "report.txt");
    CHECK(report.find("decay condition violated") != std::string::npos);
}
