#include "swingid/analysis.hpp"

#include "swingid/errors.hpp"
#include "swingid/estimators.hpp"
#include "swingid/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace swingid {

void CompensatedSum::add(double value) {
    const double total = sum_ + value;
    if (std::abs(sum_) >= std::abs(value))
        compensation_ += (sum_ - total) + value;
    else
        compensation_ += (value - total) + sum_;
    sum_ = total;
}

Matrix to_continuous(const Matrix& a_hat, double dt) {
    if (!(std::isfinite(dt) && dt > 0.0)) throw ValidationError("must be positive", "dt");
    if (a_hat.rows() != a_hat.cols()) throw ValidationError("matrix is not square", "a_hat");
    return (a_hat - Matrix::Identity(a_hat.rows(), a_hat.cols())) / dt;
}

double relative_error(const Matrix& a_hat_d, const Matrix& a_d) {
    if (a_hat_d.rows() != a_d.rows() || a_hat_d.cols() != a_d.cols())
        throw ValidationError("dimension mismatch", "a_hat_d");
    const double reference = a_d.norm();
    if (!(reference > 0.0)) throw ValidationError("reference matrix has zero norm", "a_d");
    return (a_hat_d - a_d).norm() / reference;
}

namespace {

void check_bound_inputs(Eigen::Index dim, Eigen::Index n_samples, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("must lie in (0, 1)", "epsilon");
    if (n_samples <= dim + 2)
        throw ValidationError("need T > 2N + 2 = " + std::to_string(dim + 2), "n_samples");
}

}  // namespace

BoundReport theorem1_bound(const DiscreteSystem& sys, Eigen::Index n_samples, double epsilon,
                           double trace_sigma0_mean, double inv_norm_mean, int n_trials) {
    check_bound_inputs(sys.a.rows(), n_samples, epsilon);
    BoundReport report;
    report.which = BoundKind::Discrete;
    report.epsilon = epsilon;
    report.n_samples = n_samples;
    report.dt = sys.dt;
    report.n_trials = n_trials;
    report.trace_sigma0_mean = trace_sigma0_mean;
    report.inv_norm_mean = inv_norm_mean;
    const double b_norm = sys.b_diag.cwiseAbs().maxCoeff();
    report.rhs = b_norm / (epsilon * std::sqrt(static_cast<double>(n_samples - 1))) *
                 std::sqrt(trace_sigma0_mean * inv_norm_mean);
    return report;
}

BoundReport theorem1_bound(const DiscreteSystem& sys, Eigen::Index n_samples, double epsilon,
                           const MonteCarloOptions& options) {
    check_bound_inputs(sys.a.rows(), n_samples, epsilon);
    if (options.n_trials < 1) throw ValidationError("must be at least 1", "n_trials");

    Eigen::Index burn_in = options.burn_in;
    if (burn_in < 0) {
        ContinuousSystem continuous;
        continuous.n_gen = sys.n_gen;
        continuous.a_d = to_continuous(sys.a, sys.dt);
        burn_in = default_burn_in(continuous, sys.dt);
    }

    CompensatedSum trace_sum;
    CompensatedSum inv_sum;
    int used = 0;
    int discarded = 0;
    for (int k = 0; k < options.n_trials; ++k) {
        const Trajectory traj =
            simulate_stationary(sys, n_samples, burn_in, options.seed + static_cast<std::uint64_t>(k));
        const CovariancePair cov = covariances(traj);
        if (!(condition_number(cov.sigma0) <= options.condition_threshold)) {
            ++discarded;
            continue;
        }
        trace_sum.add(cov.sigma0.trace());
        inv_sum.add(cov.sigma0.ldlt().solve(Matrix::Identity(cov.sigma0.rows(), cov.sigma0.cols())).squaredNorm());
        ++used;
    }
    if (used == 0) throw NumericalError("sigma0 was singular in every Monte Carlo trial");

    BoundReport report = theorem1_bound(sys, n_samples, epsilon, trace_sum.value() / used,
                                        inv_sum.value() / used, used);
    report.discarded_trials = discarded;
    return report;
}

BoundReport corollary2_bound(const std::vector<double>& sigma_p, const std::vector<double>& inertia,
                             double dt, Eigen::Index n_samples, double epsilon,
                             double trace_sigma0_mean, double inv_norm_mean, int n_trials) {
    if (sigma_p.size() != inertia.size() || sigma_p.empty())
        throw ValidationError("sigma_P and M lists must be non-empty and of equal length", "sigma_p");
    if (!(std::isfinite(dt) && dt > 0.0)) throw ValidationError("must be positive", "dt");
    check_bound_inputs(2 * static_cast<Eigen::Index>(sigma_p.size()), n_samples, epsilon);

    CompensatedSum noise;
    for (std::size_t i = 0; i < sigma_p.size(); ++i) {
        if (!(inertia[i] > 0.0)) throw ValidationError("must be positive", "M");
        noise.add(sigma_p[i] * sigma_p[i] / (inertia[i] * inertia[i]));
    }
    BoundReport report;
    report.which = BoundKind::Continuous;
    report.epsilon = epsilon;
    report.n_samples = n_samples;
    report.dt = dt;
    report.n_trials = n_trials;
    report.trace_sigma0_mean = trace_sigma0_mean;
    report.inv_norm_mean = inv_norm_mean;
    report.rhs = std::sqrt(noise.value() / (dt * static_cast<double>(n_samples - 1)) *
                           trace_sigma0_mean * inv_norm_mean) /
                 epsilon;
    return report;
}

SpectralReport spectrum(const Matrix& a_d, double zero_mode_tol) {
    if (a_d.rows() != a_d.cols()) throw ValidationError("matrix is not square", "a_d");
    if (!a_d.allFinite()) throw ValidationError("matrix has non-finite entries", "a_d");
    const Eigen::EigenSolver<Matrix> solver(a_d, false);
    if (solver.info() != Eigen::Success)
        throw NumericalError("eigensolver failed to converge on a " + std::to_string(a_d.rows()) +
                             "x" + std::to_string(a_d.cols()) + " matrix");

    SpectralReport report;
    const auto& values = solver.eigenvalues();
    report.eigenvalues.assign(values.begin(), values.end());
    std::sort(report.eigenvalues.begin(), report.eigenvalues.end(), [](Complex x, Complex y) {
        return x.real() != y.real() ? x.real() > y.real() : x.imag() > y.imag();
    });
    double radius = 0.0;
    for (const auto& lambda : report.eigenvalues) radius = std::max(radius, std::abs(lambda));
    report.zero_mode_tol = zero_mode_tol >= 0.0 ? zero_mode_tol : 1e-6 * radius;

    // Sorted order: the first non-zero entry has the largest real part and non-negative imaginary part.
    const auto lead = std::find_if(report.eigenvalues.begin(), report.eigenvalues.end(),
                                   [&](Complex z) { return std::abs(z) > report.zero_mode_tol; });
    if (lead == report.eigenvalues.end()) return report;
    report.critical.push_back(*lead);
    if (lead->imag() != 0.0) {
        const Complex partner = std::conj(*lead);
        auto best = report.eigenvalues.end();
        for (auto it = report.eigenvalues.begin(); it != report.eigenvalues.end(); ++it) {
            if (it == lead) continue;
            if (best == report.eigenvalues.end() || std::abs(*it - partner) < std::abs(*best - partner))
                best = it;
        }
        if (best != report.eigenvalues.end()) report.critical.push_back(*best);
    }
    return report;
}

std::vector<int> min_cost_assignment(const Matrix& cost) {
    // Shortest augmenting path with row/column potentials (Kuhn-Munkres), 1-based internally.
    const auto n = static_cast<int>(cost.rows());
    if (cost.cols() != n) throw ValidationError("cost matrix must be square", "cost");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> min_v(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = match[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (reduced < min_v[j]) {
                    min_v[j] = reduced;
                    way[j] = j0;
                }
                if (min_v[j] < delta) {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> assignment(n, -1);
    for (int j = 1; j <= n; ++j)
        if (match[j] != 0) assignment[match[j] - 1] = j - 1;
    return assignment;
}

double spectral_distance(const std::vector<Complex>& eigs_a, const std::vector<Complex>& eigs_b) {
    if (eigs_a.size() != eigs_b.size())
        throw ValidationError("eigenvalue lists differ in length (" + std::to_string(eigs_a.size()) +
                                  " vs " + std::to_string(eigs_b.size()) + ")",
                              "eigenvalues");
    if (eigs_a.empty()) return 0.0;
    const auto n = static_cast<Eigen::Index>(eigs_a.size());
    Matrix cost(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            cost(i, j) = std::abs(eigs_a[static_cast<std::size_t>(i)] - eigs_b[static_cast<std::size_t>(j)]);
    const auto assignment = min_cost_assignment(cost);
    CompensatedSum total;
    for (Eigen::Index i = 0; i < n; ++i) total.add(cost(i, assignment[static_cast<std::size_t>(i)]));
    return total.value() / static_cast<double>(n);
}

}  // namespace swingid
