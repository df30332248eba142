#include "helpers.hpp"

#include "swingid/config.hpp"
#include "swingid/errors.hpp"
#include "swingid/io.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

using namespace swingid;
using testing::Matrix;
using testing::Vector;

namespace {

GridModel parse_model(const std::string& text) {
    std::istringstream in(text);
    return read_model(in);
}

Trajectory parse_trajectory(const std::string& text) {
    std::istringstream in(text);
    return read_trajectory(in);
}

ExperimentConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in, "/base");
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "swingid_test_io";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("doubles round-trip through text") {
    for (double v : {0.0, -0.0, 1.0 / 3.0, 1e-300, 5e-324, 1.7976931348623157e308, -2.5, 0.1}) {
        const double back = parse_double(format_double(v), "x", 1);
        CHECK(std::signbit(back) == std::signbit(v));
        CHECK(back == v);
    }
    CHECK_THROWS_AS(parse_double("nan", "x", 1), ValidationError);
    CHECK_THROWS_AS(parse_double("inf", "x", 1), ValidationError);
    CHECK_THROWS_AS(parse_double("1.5x", "x", 1), ValidationError);
    CHECK_THROWS_AS(parse_double("", "x", 1), ValidationError);
}

TEST_CASE("minimal two-generator model file") {
    const GridModel model = parse_model(
        "# two machines\n"
        "[nodes]\n"
        "id,is_generator,M,D,sigma_P\n"
        "1,1,2.5,1.0,0.01\n"
        "2,1,3.0,0.5,0.02\n"
        "[lines]\n"
        "i,j,beta,gamma\n"
        "1,2,7.5\n");
    CHECK(model.n_nodes == 2);
    CHECK(model.n_gen() == 2);
    REQUIRE(model.lines.size() == 1);
    CHECK(model.lines[0].beta == 7.5);
    CHECK(model.lines[0].gamma == 0.0);
    CHECK(model.generators[1].sigma_p == 0.02);
}

TEST_CASE("model files with loads keep empty generator columns") {
    const GridModel model = parse_model(
        "[nodes]\n10,1,1,1,0.01\n20,0,,,\n30,1,2,1,0.01\n"
        "[lines]\n10,20,1\n20,30,2,0.1\n");
    CHECK(model.n_nodes == 3);
    CHECK(model.generator_ids() == std::vector<int>{0, 2});
    CHECK(model.lines[1].gamma == 0.1);
}

TEST_CASE("model file errors name the problem") {
    CHECK_THROWS_WITH_AS(parse_model("[nodes]\n1,1,1,1,0\n2,1,1,1,0\n[lines]\n1,2,-1\n"),
                         doctest::Contains("beta must be positive"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_model("[nodes]\n1,1,1,1,0\n2,1,1,1,0\n[lines]\n1,2,1\n2,1,3\n"),
                         doctest::Contains("duplicate line"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_model("[nodes]\n1,1,1,1,0\n2,1,1,1,0\n[lines]\n1,2,abc\n"),
                         doctest::Contains("line 5"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_model("[nodes]\n1,1,1,1,0\n2,1,1,1,0\n[lines]\n1,3,1\n"),
                         doctest::Contains("unknown node id 3"), ValidationError);
    CHECK_THROWS_AS(parse_model("[nodes]\n1,1,0,1,0\n"), ValidationError);
    CHECK_THROWS_AS(parse_model("[nodes]\n1,2,1,1,0\n"), ValidationError);
    CHECK_THROWS_AS(parse_model("[nodes]\n1,0,1,1,0\n2,1,1,1,0\n[lines]\n1,2,1\n"), ValidationError);
    CHECK_THROWS_AS(parse_model("[branches]\n"), ValidationError);
    CHECK_THROWS_AS(parse_model("[lines]\n"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_model("[nodes]\n1,1,1,1,0\n2,1,1,1,0\n"), doctest::Contains("not connected"),
                         ValidationError);
}

TEST_CASE("model round trip") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        GridModel model = testing::small_network(6, seed);
        model.lines[0].gamma = 0.125;
        std::stringstream text;
        write_model(text, model);
        const GridModel back = read_model(text);
        REQUIRE(back.n_nodes == model.n_nodes);
        REQUIRE(back.lines.size() == model.lines.size());
        for (std::size_t i = 0; i < model.lines.size(); ++i) {
            CHECK(back.lines[i].from == model.lines[i].from);
            CHECK(back.lines[i].to == model.lines[i].to);
            CHECK(back.lines[i].beta == model.lines[i].beta);
            CHECK(back.lines[i].gamma == model.lines[i].gamma);
        }
        for (int i = 0; i < model.n_gen(); ++i) {
            CHECK(back.generators[i].node == model.generators[i].node);
            CHECK(back.generators[i].inertia == model.generators[i].inertia);
            CHECK(back.generators[i].damping == model.generators[i].damping);
            CHECK(back.generators[i].sigma_p == model.generators[i].sigma_p);
        }
        CHECK(build_continuous(back).a_d == build_continuous(model).a_d);
    }
}

TEST_CASE("trajectory round trip is bit-exact") {
    const auto sys = testing::discrete(testing::small_network(3, 1));
    const Trajectory traj = simulate_stationary(sys, 500, 300, 9);
    const auto path = scratch("round_trip.csv");
    save_trajectory(path, traj);
    const Trajectory back = load_trajectory(path);
    CHECK(back.states == traj.states);
    CHECK(back.n_gen == 3);
    CHECK(back.dt == traj.dt);
    CHECK(back.seed == traj.seed);
    std::stringstream a, b;
    write_trajectory(a, traj);
    write_trajectory(b, back);
    CHECK(a.str() == b.str());
}

TEST_CASE("trajectory reader infers dt from the time column") {
    const Trajectory traj = parse_trajectory("t,delta_1,omega_1\n0,0.5,1\n0.05,0.25,-1\n");
    CHECK(traj.length() == 2);
    CHECK(traj.n_gen == 1);
    CHECK(traj.dt == 0.05);
    CHECK(traj.states(1, 1) == -1.0);
    CHECK_FALSE(traj.seed);
}

TEST_CASE("trajectory reader rejects malformed files") {
    CHECK_THROWS_WITH_AS(parse_trajectory("t,delta_1,delta_2,omega_1\n0,1,2,3\n1,1,2,3\n"),
                         doctest::Contains("dimension"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_trajectory("t,delta_1,omega_1\n0,1,2\n1,1\n"), doctest::Contains("ragged"),
                         ValidationError);
    CHECK_THROWS_WITH_AS(parse_trajectory("t,delta_1,omega_1\n0,1,2\n1,1,2\n2.5,1,2\n"),
                         doctest::Contains("non-uniform"), ValidationError);
    CHECK_THROWS_AS(parse_trajectory("t,delta_1,omega_1\n0,1,2\n1,nan,2\n"), ValidationError);
    CHECK_THROWS_AS(parse_trajectory("t,delta_1,omega_1\n0,1,2\n"), ValidationError);
    CHECK_THROWS_AS(parse_trajectory("time,delta_1,omega_1\n0,1,2\n1,1,2\n"), ValidationError);
    CHECK_THROWS_AS(parse_trajectory("t,delta_1,omega_1\n1,1,2\n0,1,2\n"), ValidationError);
}

TEST_CASE("matrix and metadata round trips") {
    const Matrix m = testing::random_matrix(5, 3, 2) * 1e-7;
    std::stringstream text;
    write_matrix(text, m);
    CHECK(read_matrix(text) == m);

    EstimationResult result;
    result.a_hat = m;
    result.estimator = EstimatorKind::Lasso;
    result.hyperparams["lambda"] = 0.3;
    result.objective = 1.0 / 7.0;
    result.b_hat = Vector::Constant(2, 0.25);
    const auto path = scratch("result.csv");
    save_result(path, m, result, {{"T", "1000"}, {"dt", "0.05"}});
    CHECK(load_matrix(path) == m);
    const KeyValues meta = load_key_values(metadata_path(path));
    CHECK(meta.at("estimator") == "LASSO");
    CHECK(parse_double(meta.at("objective"), "objective", 0) == result.objective);
    CHECK(meta.at("hyper.lambda") == "0.3");
    CHECK(meta.at("T") == "1000");
    CHECK(meta.at("b_hat") == "0.25,0.25");
}

TEST_CASE("bound report and eigenvalue table round trips") {
    BoundReport report;
    report.which = BoundKind::Continuous;
    report.epsilon = 0.1;
    report.rhs = 1.0 / 3.0;
    report.trace_sigma0_mean = 2.0 / 7.0;
    report.inv_norm_mean = 1e9 / 3.0;
    report.n_trials = 200;
    report.discarded_trials = 2;
    report.n_samples = 1000;
    report.dt = 0.05;
    const BoundReport back = bound_report_from_key_values(bound_report_to_key_values(report));
    CHECK(back.which == report.which);
    CHECK(back.rhs == report.rhs);
    CHECK(back.trace_sigma0_mean == report.trace_sigma0_mean);
    CHECK(back.inv_norm_mean == report.inv_norm_mean);
    CHECK(back.n_trials == 200);
    CHECK(back.discarded_trials == 2);
    CHECK(back.n_samples == 1000);
    CHECK(back.dt == report.dt);

    const std::vector<EigenRow> rows{{{-0.5, std::sqrt(7.0) / 2.0}, "truth"}, {{0.0, 0.0}, "estimate"}};
    std::stringstream text;
    write_eigen_table(text, rows);
    const auto parsed = read_eigen_table(text);
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0].value == rows[0].value);
    CHECK(parsed[1].source == "estimate");
}

TEST_CASE("file digest is stable and content-sensitive") {
    const auto a = scratch("digest_a.txt");
    const auto b = scratch("digest_b.txt");
    save_key_values(a, {{"x", "1"}});
    save_key_values(b, {{"x", "2"}});
    CHECK(file_digest(a) == file_digest(a));
    CHECK(file_digest(a) != file_digest(b));
    CHECK(file_digest(a).size() == 16);
}

TEST_CASE("experiment config") {
    const ExperimentConfig config = parse(
        "[model]\npath = grid.model\n"
        "[generation]\ndt_base = 1/60\nt_obs = 600\nseeds = 1-3, 7\n"
        "[estimation]\nstride = 3\nestimators = cml, uml\nthreshold = true\nlambda = 0.5\n"
        "[outputs]\ndirectory = results\n"
        "[sweep]\nvariable = t_obs\nvalues = 60, 300, 600\n");
    CHECK(config.model_path == std::filesystem::path("/base/grid.model"));
    CHECK(config.generation.dt_base == 1.0 / 60.0);
    CHECK(config.generation.seeds == std::vector<std::uint64_t>{1, 2, 3, 7});
    CHECK(config.estimation.estimators == std::vector<EstimatorKind>{EstimatorKind::Cml, EstimatorKind::Uml});
    CHECK(config.estimation.lambda == 0.5);
    CHECK(config.output_dir == std::filesystem::path("/base/results"));
    REQUIRE(config.sweep);
    CHECK(config.sweep->variable == SweepVariable::TObs);
    CHECK(config.sweep->values == std::vector<double>{60, 300, 600});
    CHECK(samples_at_base(600, 1.0 / 60.0) == 36000);
    CHECK(samples_after_stride(36000, 3) == 12000);
}

TEST_CASE("experiment config validation") {
    CHECK_THROWS_WITH_AS(parse("[generation]\nt_obs = 0\n"), doctest::Contains("t_obs"), ValidationError);
    CHECK_THROWS_AS(parse("[generation]\nseeds = 3-1\n"), ValidationError);
    CHECK_THROWS_WITH_AS(parse("[generation]\nspeed = 3\n"), doctest::Contains("unknown key"), ValidationError);
    CHECK_THROWS_AS(parse("[plots]\nx = 1\n"), ValidationError);
    CHECK_THROWS_AS(parse("[estimation]\nestimators = ridge\n"), ValidationError);
    CHECK_THROWS_AS(parse("[estimation]\nstride = 0\n"), ValidationError);
    CHECK_THROWS_AS(parse("[estimation]\nlambda = -1\n"), ValidationError);
    CHECK_THROWS_AS(parse("[sweep]\nvariable = stride\nvalues = 1.5\n"), ValidationError);
    CHECK_THROWS_AS(parse("[generation]\nt_obs = 0.001\n"), ValidationError);

    ExperimentConfig tight;
    tight.generation.t_obs = 1.0;
    tight.estimation.stride = 3;
    CHECK(validate(tight, 10).size() == 1);
    CHECK(validate(tight, 2).empty());
}
