#include "helpers.hpp"

#include "swingid/analysis.hpp"
#include "swingid/cli.hpp"
#include "swingid/errors.hpp"
#include "swingid/fixture.hpp"
#include "swingid/io.hpp"
#include "swingid/pipeline.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace swingid;
using testing::Matrix;

namespace {

const std::filesystem::path kFixture = std::filesystem::path(SWINGID_FIXTURE_DIR) / "ten_generator.model";

std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "swingid_test_pipeline" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

int cli(const std::vector<std::string>& args, std::string* out_text = nullptr) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (out_text) *out_text = out.str();
    return code;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("shipped fixture regenerates from its documented recipe") {
    FixtureSpec spec;
    spec.n_gen = 10;
    spec.radius = 0.3;
    spec.inertia_min = 3.0;
    spec.inertia_max = 5.0;
    spec.damping_min = 0.5;
    spec.damping_max = 1.0;
    spec.beta_min = 2.0;
    spec.beta_max = 4.0;
    spec.sigma_p = 0.01;
    spec.seed = 3;
    const GridModel generated = random_geometric_fixture(spec);
    const GridModel shipped = load_model(kFixture);
    CHECK(shipped.n_gen() == 10);
    CHECK(build_continuous(shipped).a_d == build_continuous(generated).a_d);
    for (const auto& g : shipped.generators) CHECK(g.sigma_p == 0.01);
}

TEST_CASE("ten minutes at 60 Hz give 36000 samples") {
    const PreparedModel prepared = prepare_model(load_model(kFixture), 1.0 / 60.0);
    const Trajectory traj = generate_trajectory(prepared, samples_at_base(600.0, 1.0 / 60.0), -1, 1);
    CHECK(traj.length() == 36000);
    CHECK(traj.n_gen == 10);
}

TEST_CASE("estimator run applies stride, threshold and error") {
    const PreparedModel prepared = prepare_model(testing::small_network(3, 4), 1.0 / 60.0);
    const Trajectory traj = generate_trajectory(prepared, 6000, -1, 2);
    EstimationConfig settings;
    settings.stride = 3;
    settings.estimate_b = true;
    const EstimateRun uml = run_estimator(traj, EstimatorKind::Uml, settings, &prepared.continuous.a_d);
    CHECK(uml.n_samples == 2000);
    CHECK(uml.dt == doctest::Approx(3.0 / 60.0).epsilon(1e-15));
    CHECK(uml.result.a_hat == threshold_structure(uml.result.a_hat, 3));
    CHECK(uml.result.b_hat);
    REQUIRE(uml.error);
    CHECK(*uml.error == relative_error(uml.a_hat_d, prepared.continuous.a_d));
    CHECK(*uml.error == *run_estimator(traj, EstimatorKind::Uml, settings, &prepared.continuous.a_d).error);

    settings.threshold = false;
    const EstimateRun raw = run_estimator(traj, EstimatorKind::Uml, settings);
    CHECK(raw.result.a_hat != uml.result.a_hat);
    CHECK_FALSE(raw.error);
}

TEST_CASE("estimator run reports a sample deficit") {
    const PreparedModel prepared = prepare_model(testing::small_network(3, 4), 1.0 / 60.0);
    const Trajectory traj = generate_trajectory(prepared, 60, -1, 2);
    EstimationConfig settings;
    settings.stride = 10;
    CHECK_THROWS_WITH_AS(run_estimator(traj, EstimatorKind::Uml, settings), doctest::Contains("sample deficit"),
                         ValidationError);
}

TEST_CASE("sweep is deterministic, sorted and independent of thread count") {
    const PreparedModel prepared = prepare_model(testing::small_network(3, 4), 1.0 / 60.0);
    ExperimentConfig config;
    config.generation.t_obs = 60.0;
    config.generation.seeds = {3, 1, 2};
    config.sweep = SweepConfig{SweepVariable::Stride, {3, 1, 600}};
    const auto serial = run_sweep(prepared, config, nullptr, 1);
    const auto parallel = run_sweep(prepared, config, nullptr, 4);
    REQUIRE(serial.size() == 3 * 2 * 3);
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].axis_value == parallel[i].axis_value);
        CHECK(serial[i].seed == parallel[i].seed);
        CHECK(serial[i].failed == parallel[i].failed);
        if (!serial[i].failed) CHECK(serial[i].eps == parallel[i].eps);
    }
    CHECK(serial.front().axis_value == 1.0);
    CHECK(serial.front().estimator == EstimatorKind::Cml);
    CHECK(serial.front().seed == 1);
    for (const auto& cell : serial) CHECK(cell.failed == (cell.axis_value == 600.0));

    const auto means = summarize(serial);
    REQUIRE(means.size() == 6);
    CHECK(means.back().n_failed == 3);
    CHECK(means.front().n_ok == 3);
}

TEST_CASE("single-cell sweep gives one data row") {
    const PreparedModel prepared = prepare_model(testing::small_network(2, 4), 1.0 / 60.0);
    ExperimentConfig config;
    config.generation.t_obs = 30.0;
    config.generation.seeds = {5};
    config.estimation.estimators = {EstimatorKind::Cml};
    config.sweep = SweepConfig{SweepVariable::TObs, {30.0}};
    std::ostringstream table;
    write_sweep_table(table, run_sweep(prepared, config));
    std::istringstream lines(table.str());
    std::string line;
    int rows = 0;
    std::getline(lines, line);
    CHECK(line == "axis_value,estimator,seed,eps");
    while (std::getline(lines, line)) ++rows;
    CHECK(rows == 1);
}

TEST_CASE("cli simulate writes one reproducible file per seed") {
    const auto dir = scratch_dir("simulate");
    const std::vector<std::string> args{"simulate", "--model", kFixture.string(), "--t-obs", "10",
                                        "--seed",   "1,2,3",   "--out",           dir.string()};
    REQUIRE(cli(args) == kExitOk);
    const std::string first = slurp(dir / "trajectory_seed1.csv");
    const std::string manifest = slurp(dir / "simulate_manifest.txt");
    CHECK(first != slurp(dir / "trajectory_seed2.csv"));
    CHECK(slurp(dir / "trajectory_seed2.csv") != slurp(dir / "trajectory_seed3.csv"));
    CHECK(load_trajectory(dir / "trajectory_seed1.csv").length() == 600);
    REQUIRE(cli(args) == kExitOk);
    CHECK(slurp(dir / "trajectory_seed1.csv") == first);
    CHECK(slurp(dir / "simulate_manifest.txt") == manifest);
    CHECK(manifest.find("model_digest=" + file_digest(kFixture)) != std::string::npos);
}

TEST_CASE("cli exit codes") {
    const auto dir = scratch_dir("codes");
    CHECK(cli({"simulate", "--model", kFixture.string(), "--t-obs", "0", "--out", dir.string()}) ==
          kExitValidation);
    CHECK(cli({"simulate", "--model", (dir / "missing.model").string(), "--out", dir.string()}) ==
          kExitValidation);
    CHECK(cli({"frobnicate"}) == kExitUsage);
    CHECK(cli({"--help"}) == kExitOk);

    REQUIRE(cli({"simulate", "--model", kFixture.string(), "--t-obs", "1", "--seed", "1", "--out",
                 dir.string()}) == kExitOk);
    CHECK(cli({"estimate", (dir / "trajectory_seed1.csv").string(), "--stride", "30", "--out", dir.string()}) ==
          kExitValidation);
    CHECK(cli({"estimate", (dir / "trajectory_seed1.csv").string(), "--stride", "1", "--estimator", "lasso",
               "--lambda", "1", "--max-iterations", "1", "--out", dir.string()}) == kExitNumerical);
}

TEST_CASE("cli estimate is reproducible and CML beats UML on the fixture") {
    const auto dir = scratch_dir("estimate");
    REQUIRE(cli({"simulate", "--model", kFixture.string(), "--t-obs", "600", "--seed", "1", "--out",
                 dir.string()}) == kExitOk);
    const std::string traj = (dir / "trajectory_seed1.csv").string();
    std::string first, second;
    REQUIRE(cli({"estimate", traj, "--model", kFixture.string(), "--stride", "3", "--out", dir.string()}, &first) ==
            kExitOk);
    REQUIRE(cli({"estimate", traj, "--model", kFixture.string(), "--stride", "3", "--out", dir.string()}, &second) ==
            kExitOk);
    CHECK(first == second);
    const KeyValues cml = load_key_values(metadata_path(dir / "trajectory_seed1.CML.a_d.csv"));
    const KeyValues uml = load_key_values(metadata_path(dir / "trajectory_seed1.UML.a_d.csv"));
    const double eps_cml = parse_double(cml.at("relative_error"), "cml", 0);
    const double eps_uml = parse_double(uml.at("relative_error"), "uml", 0);
    CHECK(eps_cml < 0.1);
    CHECK(eps_cml <= eps_uml);
    CHECK(cml.at("T") == "12000");
}

TEST_CASE("cli eigen") {
    const auto dir = scratch_dir("eigen");
    std::string text;
    REQUIRE(cli({"eigen", "--model", kFixture.string()}, &text) == kExitOk);
    CHECK(text.find("re,im,source") != std::string::npos);
    CHECK(text.find("critical=") != std::string::npos);

    const Matrix a_d = build_continuous(load_model(kFixture)).a_d;
    save_matrix(dir / "truth.csv", a_d);
    REQUIRE(cli({"eigen", "--matrix", (dir / "truth.csv").string(), "--against", (dir / "truth.csv").string()},
                &text) == kExitOk);
    CHECK(text.find("spectral_distance=0\n") != std::string::npos);

    save_matrix(dir / "small.csv", Matrix::Identity(4, 4));
    CHECK(cli({"eigen", "--matrix", (dir / "small.csv").string(), "--model", kFixture.string()}) ==
          kExitValidation);
}

TEST_CASE("cli kron and bound") {
    const auto dir = scratch_dir("kron");
    {
        std::ofstream model(dir / "star.model");
        model << "[nodes]\n0,1,1,1,0.01\n1,1,1,1,0.01\n2,1,1,1,0.01\n3,0,,,\n[lines]\n3,0,1\n3,1,1\n3,2,1\n";
    }
    REQUIRE(cli({"kron", "--model", (dir / "star.model").string(), "--out", (dir / "reduced.csv").string()}) ==
            kExitOk);
    const Matrix reduced = load_matrix(dir / "reduced.csv");
    CHECK(reduced(0, 1) == doctest::Approx(-1.0 / 3.0).epsilon(1e-14));

    std::string text;
    REQUIRE(cli({"bound", "--model", (dir / "star.model").string(), "--samples", "200", "--trials", "5",
                 "--out", (dir / "bound.txt").string()},
                &text) == kExitOk);
    const BoundReport report = bound_report_from_key_values(load_key_values(dir / "bound.txt"));
    CHECK(report.n_trials == 5);
    CHECK(report.rhs > 0.0);
    REQUIRE(cli({"bound", "--model", (dir / "star.model").string(), "--kind", "continuous", "--samples", "200",
                 "--trials", "5"},
                &text) == kExitOk);
    CHECK(text.find("which=CONTINUOUS") != std::string::npos);
}
