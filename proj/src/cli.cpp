#include "swingid/cli.hpp"

#include "swingid/analysis.hpp"
#include "swingid/config.hpp"
#include "swingid/errors.hpp"
#include "swingid/fixture.hpp"
#include "swingid/io.hpp"
#include "swingid/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace swingid {

namespace {

namespace fs = std::filesystem;

// Flags shared by the config-driven subcommands; unset flags leave the
// config value alone.
struct Overrides {
    std::string config;
    std::string model;
    std::string out;
    std::string seeds;
    std::optional<std::string> dt_base;
    std::optional<std::string> t_obs;
    std::optional<long long> burn_in;
    std::optional<long long> stride;
    std::vector<std::string> estimators;
    std::optional<std::string> nu;
    std::optional<std::string> lambda;
    std::optional<std::string> eta;
    std::string a_prev;
    std::optional<bool> threshold;
    bool estimate_b = false;
    bool pseudo_inverse = false;
    std::optional<std::string> tolerance;
    std::optional<int> max_iterations;
    std::optional<std::string> condition_threshold;
    std::optional<std::string> sweep_variable;
    std::optional<std::string> sweep_values;
};

void add_generation_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "Experiment config file");
    cmd->add_option("--model", o.model, "Model file");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--seed,--seeds", o.seeds, "Seed list, e.g. 1,2,3 or 1-50");
    cmd->add_option("--dt-base", o.dt_base, "Simulation step in seconds (fractions allowed)");
    cmd->add_option("--t-obs", o.t_obs, "Observation window in seconds");
    cmd->add_option("--burn-in", o.burn_in, "Burn-in steps (negative: automatic)");
}

void add_estimation_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--stride", o.stride, "Keep every k-th sample");
    cmd->add_option("--estimator", o.estimators, "uml, cml, tikhonov, lasso or sparse_low_rank (repeatable)");
    cmd->add_option("--nu", o.nu, "Tikhonov weight (multiplies the raw sum over samples)");
    cmd->add_option("--lambda", o.lambda, "l1 weight (multiplies the raw sum over samples)");
    cmd->add_option("--eta", o.eta, "Nuclear-norm weight (multiplies the raw sum over samples)");
    cmd->add_option("--a-prev", o.a_prev, "Tikhonov prior matrix file");
    cmd->add_flag("--threshold,!--no-threshold", o.threshold, "Zero the lower-right off-diagonals of UML");
    cmd->add_flag("--estimate-b", o.estimate_b, "Also estimate the noise scale");
    cmd->add_flag("--pseudo-inverse", o.pseudo_inverse, "Pseudo-invert ill-conditioned sigma0");
    cmd->add_option("--tolerance", o.tolerance, "Iterative solver tolerance");
    cmd->add_option("--max-iterations", o.max_iterations, "Iterative solver iteration cap");
    cmd->add_option("--condition-threshold", o.condition_threshold, "Largest accepted sigma0 condition number");
}

ExperimentConfig resolve_config(const Overrides& o) {
    ExperimentConfig config = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
    if (!o.model.empty()) config.model_path = o.model;
    if (!o.out.empty()) config.output_dir = o.out;
    if (!o.seeds.empty()) config.generation.seeds = parse_seed_list(o.seeds, "--seed");
    if (o.dt_base) config.generation.dt_base = parse_number(*o.dt_base, "--dt-base");
    if (o.t_obs) config.generation.t_obs = parse_number(*o.t_obs, "--t-obs");
    if (o.burn_in) config.generation.burn_in = *o.burn_in;
    auto& est = config.estimation;
    if (o.stride) est.stride = *o.stride;
    if (!o.estimators.empty()) {
        est.estimators.clear();
        for (const auto& tag : o.estimators) est.estimators.push_back(parse_estimator(tag));
    }
    if (o.nu) est.nu = parse_number(*o.nu, "--nu");
    if (o.lambda) est.lambda = parse_number(*o.lambda, "--lambda");
    if (o.eta) est.eta = parse_number(*o.eta, "--eta");
    if (!o.a_prev.empty()) est.a_prev_path = o.a_prev;
    if (o.threshold) est.threshold = *o.threshold;
    if (o.estimate_b) est.estimate_b = true;
    if (o.pseudo_inverse) est.solver.pseudo_inverse = true;
    if (o.tolerance) est.solver.tolerance = parse_number(*o.tolerance, "--tolerance");
    if (o.max_iterations) est.solver.max_iterations = *o.max_iterations;
    if (o.condition_threshold)
        est.solver.condition_threshold = parse_number(*o.condition_threshold, "--condition-threshold");
    if (o.sweep_variable || o.sweep_values) {
        SweepConfig sweep = config.sweep.value_or(SweepConfig{});
        if (o.sweep_variable) {
            if (*o.sweep_variable == "stride")
                sweep.variable = SweepVariable::Stride;
            else if (*o.sweep_variable == "t_obs")
                sweep.variable = SweepVariable::TObs;
            else
                throw ValidationError("expected stride or t_obs", "--variable");
        }
        if (o.sweep_values) sweep.values = parse_number_list(*o.sweep_values, "--values");
        config.sweep = sweep;
    }
    return config;
}

GridModel require_model(const ExperimentConfig& config) {
    if (config.model_path.empty()) throw ValidationError("no model file given", "model.path");
    return load_model(config.model_path);
}

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
    std::string s;
    for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? "," : "") + std::to_string(seeds[i]);
    return s;
}

std::string join_estimators(const std::vector<EstimatorKind>& kinds) {
    std::string s;
    for (std::size_t i = 0; i < kinds.size(); ++i) s += (i ? "," : "") + std::string(to_string(kinds[i]));
    return s;
}

KeyValues base_manifest(const std::string& command, const ExperimentConfig& config) {
    return {
        {"command", command},
        {"model", config.model_path.string()},
        {"model_digest", file_digest(config.model_path)},
        {"dt_base", format_double(config.generation.dt_base)},
        {"t_obs", format_double(config.generation.t_obs)},
        {"seeds", join_seeds(config.generation.seeds)},
    };
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
    for (const auto& w : warnings) err << "warning: " << w << '\n';
}

std::string complex_text(Complex z) { return format_double(z.real()) + ',' + format_double(z.imag()); }

int cmd_simulate(const Overrides& o, std::ostream& out, std::ostream& err) {
    const ExperimentConfig config = resolve_config(o);
    const GridModel model = require_model(config);
    print_warnings(validate(config, model.n_gen()), err);
    const PreparedModel prepared = prepare_model(model, config.generation.dt_base);
    const Eigen::Index n_samples = samples_at_base(config.generation.t_obs, config.generation.dt_base);
    const Eigen::Index burn_in = config.generation.burn_in < 0 ? prepared.default_burn_in : config.generation.burn_in;

    KeyValues manifest = base_manifest("simulate", config);
    manifest["burn_in"] = std::to_string(burn_in);
    manifest["samples"] = std::to_string(n_samples);
    for (const auto seed : config.generation.seeds) {
        const Trajectory traj = generate_trajectory(prepared, n_samples, burn_in, seed);
        const fs::path path = config.output_dir / ("trajectory_seed" + std::to_string(seed) + ".csv");
        save_trajectory(path, traj);
        manifest["file.seed" + std::to_string(seed)] = path.filename().string();
        out << path.string() << '\n';
    }
    save_key_values(config.output_dir / "simulate_manifest.txt", manifest);
    return kExitOk;
}

int cmd_estimate(const Overrides& o, const std::string& trajectory_path, std::ostream& out, std::ostream& err) {
    const ExperimentConfig config = resolve_config(o);
    const Trajectory traj = load_trajectory(trajectory_path);
    std::optional<Matrix> truth;
    if (!config.model_path.empty()) {
        const GridModel model = load_model(config.model_path);
        if (model.n_gen() != traj.n_gen)
            throw ValidationError("model has " + std::to_string(model.n_gen()) + " generators, trajectory has " +
                                      std::to_string(traj.n_gen),
                                  "model");
        truth = build_continuous(model).a_d;
    }
    std::optional<Matrix> a_prev;
    if (!config.estimation.a_prev_path.empty()) a_prev = load_matrix(config.estimation.a_prev_path);
    if (config.estimation.stride < 1) throw ValidationError("must be at least 1", "estimation.stride");

    const std::string stem = fs::path(trajectory_path).stem().string();
    for (const auto kind : config.estimation.estimators) {
        const EstimateRun run = run_estimator(traj, kind, config.estimation, truth ? &*truth : nullptr,
                                              a_prev ? &*a_prev : nullptr);
        const std::string tag(to_string(kind));
        const fs::path a_d_path = config.output_dir / (stem + "." + tag + ".a_d.csv");
        KeyValues meta = run_metadata(run);
        meta["trajectory"] = fs::path(trajectory_path).filename().string();
        save_result(a_d_path, run.a_hat_d, run.result, meta);
        save_matrix(config.output_dir / (stem + "." + tag + ".a.csv"), run.result.a_hat);
        if (run.result.l_hat) save_matrix(config.output_dir / (stem + "." + tag + ".l.csv"), *run.result.l_hat);
        out << tag << " T=" << run.n_samples << " dt=" << format_double(run.dt);
        if (run.error) out << " eps=" << format_double(*run.error);
        out << " -> " << a_d_path.string() << '\n';
    }
    (void)err;
    return kExitOk;
}

int cmd_sweep(const Overrides& o, unsigned threads, std::ostream& out, std::ostream& err) {
    ExperimentConfig config = resolve_config(o);
    if (!config.sweep) config.sweep = SweepConfig{};
    const GridModel model = require_model(config);
    print_warnings(validate(config, model.n_gen()), err);
    const PreparedModel prepared = prepare_model(model, config.generation.dt_base);
    std::optional<Matrix> a_prev;
    if (!config.estimation.a_prev_path.empty()) a_prev = load_matrix(config.estimation.a_prev_path);

    const auto cells = run_sweep(prepared, config, a_prev ? &*a_prev : nullptr, threads);
    const auto means = summarize(cells);
    fs::create_directories(config.output_dir);
    {
        std::ofstream table(config.output_dir / "sweep.csv");
        write_sweep_table(table, cells);
        std::ofstream mean_table(config.output_dir / "sweep_mean.csv");
        write_mean_table(mean_table, means);
    }
    int failed = 0;
    for (const auto& cell : cells) {
        if (!cell.failed) continue;
        ++failed;
        err << "cell failed: axis_value=" << format_double(cell.axis_value) << " estimator="
            << to_string(cell.estimator) << " seed=" << cell.seed << ": " << cell.message << '\n';
    }
    KeyValues manifest = base_manifest("sweep", config);
    manifest["variable"] = config.sweep->variable == SweepVariable::Stride ? "stride" : "t_obs";
    std::string values;
    for (std::size_t i = 0; i < config.sweep->values.size(); ++i)
        values += (i ? "," : "") + format_double(config.sweep->values[i]);
    manifest["values"] = values;
    manifest["stride"] = std::to_string(config.estimation.stride);
    manifest["estimators"] = join_estimators(config.estimation.estimators);
    manifest["threshold"] = config.estimation.threshold ? "true" : "false";
    manifest["burn_in"] = std::to_string(config.generation.burn_in < 0 ? prepared.default_burn_in
                                                                       : config.generation.burn_in);
    manifest["failed_cells"] = std::to_string(failed);
    save_key_values(config.output_dir / "sweep_manifest.txt", manifest);
    write_mean_table(out, means);
    return kExitOk;
}

int cmd_eigen(const std::string& matrix_path, const std::string& model_path, const std::string& against_path,
              const std::string& out_path, double zero_tol, std::ostream& out) {
    if (matrix_path.empty() && model_path.empty()) throw ValidationError("give --matrix and/or --model", "eigen");
    std::optional<Matrix> estimate;
    if (!matrix_path.empty()) estimate = load_matrix(matrix_path);
    std::optional<Matrix> truth;
    if (!model_path.empty()) truth = build_continuous(load_model(model_path)).a_d;
    else if (!against_path.empty()) truth = load_matrix(against_path);

    std::ostringstream table;
    if (estimate && truth) {
        if (estimate->rows() != truth->rows() || estimate->cols() != truth->cols())
            throw ValidationError("estimate is " + std::to_string(estimate->rows()) + "x" +
                                      std::to_string(estimate->cols()) + " but truth is " +
                                      std::to_string(truth->rows()) + "x" + std::to_string(truth->cols()),
                                  "dimension");
        const SpectralReport est = spectrum(*estimate, zero_tol);
        const SpectralReport tru = spectrum(*truth, zero_tol);
        const auto n = static_cast<Eigen::Index>(tru.eigenvalues.size());
        Matrix cost(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                cost(i, j) = std::abs(tru.eigenvalues[static_cast<std::size_t>(i)] -
                                      est.eigenvalues[static_cast<std::size_t>(j)]);
        const auto match = min_cost_assignment(cost);
        table << "true_re,true_im,est_re,est_im,distance\n";
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto j = static_cast<std::size_t>(match[static_cast<std::size_t>(i)]);
            table << complex_text(tru.eigenvalues[static_cast<std::size_t>(i)]) << ','
                  << complex_text(est.eigenvalues[j]) << ',' << format_double(cost(i, static_cast<Eigen::Index>(j)))
                  << '\n';
        }
        double radius = 0.0;
        for (const auto& z : tru.eigenvalues) radius = std::max(radius, std::abs(z));
        const double distance = spectral_distance(est.eigenvalues, tru.eigenvalues);
        out << "spectral_distance=" << format_double(distance) << '\n';
        out << "relative_spectral_distance=" << format_double(distance / radius) << '\n';
        for (const auto& z : tru.critical) out << "critical_true=" << complex_text(z) << '\n';
        for (const auto& z : est.critical) out << "critical_estimate=" << complex_text(z) << '\n';
    } else {
        const Matrix& m = estimate ? *estimate : *truth;
        const SpectralReport report = spectrum(m, zero_tol);
        std::vector<EigenRow> rows;
        for (const auto& z : report.eigenvalues) rows.push_back({z, estimate ? "estimate" : "truth"});
        write_eigen_table(table, rows);
        for (const auto& z : report.critical) out << "critical=" << complex_text(z) << '\n';
    }
    if (out_path.empty()) {
        out << table.str();
    } else {
        const fs::path p(out_path);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        std::ofstream(p) << table.str();
    }
    return kExitOk;
}

struct BoundArgs {
    std::string model;
    std::string kind = "discrete";
    std::string dt_base = "1/60";
    long long stride = 3;
    std::optional<std::string> t_obs;
    std::optional<long long> samples;
    double epsilon = 0.1;
    int trials = 200;
    std::uint64_t seed = 1;
    long long burn_in = -1;
    std::string out;
};

int cmd_bound(const BoundArgs& a, std::ostream& out) {
    if (a.model.empty()) throw ValidationError("no model file given", "--model");
    const GridModel model = load_model(a.model);
    const double dt_base = parse_number(a.dt_base, "--dt-base");
    if (a.stride < 1) throw ValidationError("must be at least 1", "--stride");
    const double dt = dt_base * static_cast<double>(a.stride);
    Eigen::Index n_samples = 0;
    if (a.samples) n_samples = *a.samples;
    else if (a.t_obs) n_samples = samples_after_stride(samples_at_base(parse_number(*a.t_obs, "--t-obs"), dt_base), a.stride);
    else throw ValidationError("give --samples or --t-obs", "bound");

    const ContinuousSystem continuous = build_continuous(model);
    const DiscreteSystem sys = build_discrete(continuous, dt);
    MonteCarloOptions mc;
    mc.n_trials = a.trials;
    mc.seed = a.seed;
    mc.burn_in = a.burn_in;
    BoundReport report = theorem1_bound(sys, n_samples, a.epsilon, mc);
    if (a.kind == "continuous") {
        std::vector<double> sigma, inertia;
        for (const auto& g : model.generators) {
            sigma.push_back(g.sigma_p);
            inertia.push_back(g.inertia);
        }
        const int discarded = report.discarded_trials;
        report = corollary2_bound(sigma, inertia, dt, n_samples, a.epsilon, report.trace_sigma0_mean,
                                  report.inv_norm_mean, report.n_trials);
        report.discarded_trials = discarded;
    } else if (a.kind != "discrete") {
        throw ValidationError("expected discrete or continuous", "--kind");
    }
    const KeyValues kv = bound_report_to_key_values(report);
    write_key_values(out, kv);
    if (!a.out.empty()) save_key_values(a.out, kv);
    return kExitOk;
}

int cmd_kron(const std::string& model_path, const std::string& out_path, std::ostream& out) {
    const GridModel model = load_model(model_path);
    const Matrix reduced = kron_reduce(build_laplacian(model), model.generator_ids());
    if (out_path.empty()) write_matrix(out, reduced);
    else save_matrix(out_path, reduced);
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Identification of swing-equation dynamics from ambient fluctuation data", "swingid"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "swingid 1.0");

    Overrides sim_o;
    auto* sim = app.add_subcommand("simulate", "Simulate one trajectory file per seed");
    add_generation_flags(sim, sim_o);

    Overrides est_o;
    std::string trajectory_path;
    auto* est = app.add_subcommand("estimate", "Estimate the dynamic state matrix from a trajectory file");
    est->add_option("trajectory", trajectory_path, "Trajectory file")->required();
    est->add_option("--config", est_o.config, "Experiment config file");
    est->add_option("--model", est_o.model, "Ground-truth model for the relative error");
    est->add_option("--out", est_o.out, "Output directory");
    add_estimation_flags(est, est_o);
    est->footer("Penalty weights multiply the unnormalized sum over samples; re-tune them when T changes.");

    Overrides sweep_o;
    unsigned threads = 0;
    auto* sweep = app.add_subcommand("sweep", "Error table over a stride or t_obs axis");
    add_generation_flags(sweep, sweep_o);
    add_estimation_flags(sweep, sweep_o);
    sweep->add_option("--variable", sweep_o.sweep_variable, "stride or t_obs");
    sweep->add_option("--values", sweep_o.sweep_values, "Comma-separated axis values");
    sweep->add_option("--threads", threads, "Worker threads (0: all cores)");

    std::string eig_matrix, eig_model, eig_against, eig_out;
    double zero_tol = -1.0;
    auto* eig = app.add_subcommand("eigen", "Eigenvalues of an estimate and/or a model");
    eig->add_option("--matrix", eig_matrix, "Continuous-time estimate (matrix file)");
    eig->add_option("--model", eig_model, "Ground-truth model");
    eig->add_option("--against", eig_against, "Compare with another matrix file instead of a model");
    eig->add_option("--out", eig_out, "Table output file (default stdout)");
    eig->add_option("--zero-tol", zero_tol, "Zero-mode tolerance (negative: 1e-6 times the spectral radius)");

    BoundArgs bound_args;
    auto* bound = app.add_subcommand("bound", "Monte Carlo error bound for the ML estimator");
    bound->add_option("--model", bound_args.model, "Model file")->required();
    bound->add_option("--kind", bound_args.kind, "discrete or continuous");
    bound->add_option("--dt-base", bound_args.dt_base, "Base step in seconds");
    bound->add_option("--stride", bound_args.stride, "Sampling stride");
    bound->add_option("--t-obs", bound_args.t_obs, "Observation window in seconds");
    bound->add_option("--samples", bound_args.samples, "Number of samples T");
    bound->add_option("--epsilon", bound_args.epsilon, "Confidence parameter in (0, 1)");
    bound->add_option("--trials", bound_args.trials, "Monte Carlo trials");
    bound->add_option("--seed", bound_args.seed, "First Monte Carlo seed");
    bound->add_option("--burn-in", bound_args.burn_in, "Burn-in steps (negative: automatic)");
    bound->add_option("--out", bound_args.out, "Report file");

    std::string kron_model, kron_out;
    auto* kron = app.add_subcommand("kron", "Kron-reduced Laplacian of a model");
    kron->add_option("--model", kron_model, "Model file")->required();
    kron->add_option("--out", kron_out, "Matrix output file (default stdout)");

    FixtureSpec fixture_spec;
    std::string fixture_out;
    auto* fixture = app.add_subcommand("fixture", "Random geometric generator-only test model");
    fixture->add_option("--n-gen", fixture_spec.n_gen, "Generators");
    fixture->add_option("--radius", fixture_spec.radius, "Connection radius in the unit square");
    fixture->add_option("--inertia-min", fixture_spec.inertia_min);
    fixture->add_option("--inertia-max", fixture_spec.inertia_max);
    fixture->add_option("--damping-min", fixture_spec.damping_min);
    fixture->add_option("--damping-max", fixture_spec.damping_max);
    fixture->add_option("--beta-min", fixture_spec.beta_min);
    fixture->add_option("--beta-max", fixture_spec.beta_max);
    fixture->add_option("--sigma-p", fixture_spec.sigma_p);
    fixture->add_option("--seed", fixture_spec.seed);
    fixture->add_option("--out", fixture_out, "Model output file (default stdout)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << "swingid 1.0\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (*sim) return cmd_simulate(sim_o, out, err);
        if (*est) return cmd_estimate(est_o, trajectory_path, out, err);
        if (*sweep) return cmd_sweep(sweep_o, threads, out, err);
        if (*eig) return cmd_eigen(eig_matrix, eig_model, eig_against, eig_out, zero_tol, out);
        if (*bound) return cmd_bound(bound_args, out);
        if (*kron) return cmd_kron(kron_model, kron_out, out);
        if (*fixture) {
            const GridModel model = random_geometric_fixture(fixture_spec);
            if (fixture_out.empty()) write_model(out, model);
            else save_model(fixture_out, model);
            return kExitOk;
        }
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    }
    return kExitUsage;
}

}  // namespace swingid
