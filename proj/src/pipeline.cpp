#include "swingid/pipeline.hpp"

#include "swingid/analysis.hpp"
#include "swingid/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <thread>

namespace swingid {

PreparedModel prepare_model(const GridModel& model, double dt_base) {
    PreparedModel prepared;
    prepared.model = model;
    prepared.continuous = build_continuous(model);
    prepared.base = build_discrete(prepared.continuous, dt_base);
    prepared.default_burn_in = default_burn_in(prepared.continuous, dt_base);
    return prepared;
}

Trajectory generate_trajectory(const PreparedModel& prepared, Eigen::Index n_samples, Eigen::Index burn_in,
                               std::uint64_t seed) {
    if (n_samples < 2) throw ValidationError("need at least 2 samples", "n_samples");
    return simulate_stationary(prepared.base, n_samples, burn_in < 0 ? prepared.default_burn_in : burn_in, seed);
}

EstimateRun run_estimator(const Trajectory& trajectory, EstimatorKind kind, const EstimationConfig& settings,
                          const Matrix* truth_a_d, const Matrix* a_prev) {
    EstimateRun run;
    run.stride = settings.stride;
    const Trajectory strided = settings.stride == 1 ? trajectory : subsample(trajectory, settings.stride);
    const int n = strided.n_gen;
    run.n_samples = strided.length();
    run.dt = strided.dt;
    if (run.n_samples <= 2 * n + 2)
        throw ValidationError("sample deficit: " + std::to_string(run.n_samples) + " samples after stride " +
                                  std::to_string(settings.stride) + ", need more than 2N + 2 = " +
                                  std::to_string(2 * n + 2),
                              "estimation.stride");

    const CovariancePair cov = covariances(strided);
    switch (kind) {
        case EstimatorKind::Uml:
            run.result = estimate_uml(strided, settings.solver);
            break;
        case EstimatorKind::Cml:
            run.result = estimate_cml(strided, settings.solver);
            break;
        case EstimatorKind::Tikhonov: {
            const Matrix prior = a_prev != nullptr ? *a_prev : Matrix::Identity(2 * n, 2 * n);
            if (prior.rows() != 2 * n || prior.cols() != 2 * n)
                throw ValidationError("prior has the wrong dimensions", "estimation.a_prev");
            run.result = estimate_tikhonov(cov, prior, settings.nu, settings.solver);
            break;
        }
        case EstimatorKind::Lasso:
            run.result = estimate_lasso(cov, settings.lambda, settings.solver);
            break;
        case EstimatorKind::SparseLowRank:
            run.result = estimate_sparse_low_rank(cov, settings.lambda, settings.eta, settings.solver);
            break;
    }
    if (kind == EstimatorKind::Uml && settings.threshold) run.result.a_hat = threshold_structure(run.result.a_hat, n);
    if (settings.estimate_b) run.result.b_hat = estimate_b(strided, run.result.a_hat);
    run.a_hat_d = to_continuous(run.result.a_hat, run.dt);
    if (truth_a_d != nullptr) run.error = relative_error(run.a_hat_d, *truth_a_d);
    return run;
}

KeyValues run_metadata(const EstimateRun& run) {
    KeyValues meta{
        {"T", std::to_string(run.n_samples)},
        {"dt", format_double(run.dt)},
        {"stride", std::to_string(run.stride)},
    };
    if (run.error) meta["relative_error"] = format_double(*run.error);
    return meta;
}

std::vector<SweepCell> run_sweep(const PreparedModel& prepared, const ExperimentConfig& config,
                                 const Matrix* a_prev, unsigned threads) {
    const SweepConfig sweep = config.sweep.value_or(SweepConfig{});
    const auto& seeds = config.generation.seeds;
    const auto& estimators = config.estimation.estimators;
    const std::size_t n_tasks = sweep.values.size() * seeds.size();
    std::vector<SweepCell> cells(n_tasks * estimators.size());

    const auto run_task = [&](std::size_t task) {
        const double value = sweep.values[task / seeds.size()];
        const std::uint64_t seed = seeds[task % seeds.size()];
        EstimationConfig settings = config.estimation;
        double t_obs = config.generation.t_obs;
        if (sweep.variable == SweepVariable::Stride)
            settings.stride = static_cast<Eigen::Index>(value);
        else
            t_obs = value;

        std::optional<Trajectory> traj;
        std::string traj_error;
        try {
            traj = generate_trajectory(prepared, samples_at_base(t_obs, config.generation.dt_base),
                                       config.generation.burn_in, seed);
        } catch (const std::exception& e) {
            traj_error = e.what();
        }
        for (std::size_t e = 0; e < estimators.size(); ++e) {
            SweepCell& cell = cells[task * estimators.size() + e];
            cell.axis_value = value;
            cell.estimator = estimators[e];
            cell.seed = seed;
            if (!traj) {
                cell.failed = true;
                cell.message = traj_error;
                continue;
            }
            try {
                cell.eps = *run_estimator(*traj, estimators[e], settings, &prepared.continuous.a_d, a_prev).error;
            } catch (const std::exception& ex) {
                cell.failed = true;
                cell.message = ex.what();
            }
        }
    };

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n_tasks, 1)));
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t task = next++; task < n_tasks; task = next++) run_task(task);
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::stable_sort(cells.begin(), cells.end(), [](const SweepCell& a, const SweepCell& b) {
        if (a.axis_value != b.axis_value) return a.axis_value < b.axis_value;
        if (a.estimator != b.estimator) return to_string(a.estimator) < to_string(b.estimator);
        return a.seed < b.seed;
    });
    return cells;
}

std::vector<SweepMean> summarize(const std::vector<SweepCell>& cells) {
    std::vector<SweepMean> means;
    std::vector<CompensatedSum> sums;
    for (const auto& cell : cells) {
        auto it = std::find_if(means.begin(), means.end(), [&](const SweepMean& m) {
            return m.axis_value == cell.axis_value && m.estimator == cell.estimator;
        });
        if (it == means.end()) {
            means.push_back({cell.axis_value, cell.estimator, 0.0, 0, 0});
            sums.emplace_back();
            it = std::prev(means.end());
        }
        const auto idx = static_cast<std::size_t>(it - means.begin());
        if (cell.failed) {
            ++it->n_failed;
        } else {
            ++it->n_ok;
            sums[idx].add(cell.eps);
        }
    }
    for (std::size_t i = 0; i < means.size(); ++i)
        means[i].mean_eps = means[i].n_ok > 0 ? sums[i].value() / means[i].n_ok : std::nan("");
    return means;
}

void write_sweep_table(std::ostream& out, const std::vector<SweepCell>& cells) {
    out << "axis_value,estimator,seed,eps\n";
    for (const auto& cell : cells)
        out << format_double(cell.axis_value) << ',' << to_string(cell.estimator) << ',' << cell.seed << ','
            << (cell.failed ? std::string("failed") : format_double(cell.eps)) << '\n';
}

void write_mean_table(std::ostream& out, const std::vector<SweepMean>& means) {
    out << "axis_value,estimator,mean_eps,n_ok,n_failed\n";
    for (const auto& m : means)
        out << format_double(m.axis_value) << ',' << to_string(m.estimator) << ','
            << (m.n_ok > 0 ? format_double(m.mean_eps) : std::string("failed")) << ',' << m.n_ok << ','
            << m.n_failed << '\n';
}

}  // namespace swingid
