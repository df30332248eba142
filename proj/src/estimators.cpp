#include "swingid/estimators.hpp"

#include "swingid/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace swingid {

namespace {

constexpr double kTiny = std::numeric_limits<double>::min();

double soft_threshold(double x, double tau) {
    const double magnitude = std::abs(x) - tau;
    return magnitude > 0.0 ? std::copysign(magnitude, x) : 0.0;
}

Matrix soft_threshold(const Matrix& x, double tau) {
    return x.unaryExpr([tau](double v) { return soft_threshold(v, tau); });
}

/// Singular-value soft threshold; also returns the nuclear norm of the result.
Matrix singular_value_threshold(const Matrix& x, double tau, double& nuclear_norm) {
    const Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector shrunk = (svd.singularValues().array() - tau).max(0.0).matrix();
    nuclear_norm = shrunk.sum();
    return svd.matrixU() * shrunk.asDiagonal() * svd.matrixV().transpose();
}

double sample_weight(const CovariancePair& cov) {
    if (cov.n_samples < 2) throw ValidationError("at least 2 samples required", "n_samples");
    return static_cast<double>(cov.n_samples - 1);
}

void check_shapes(const CovariancePair& cov) {
    const auto dim = cov.sigma0.rows();
    if (cov.sigma0.cols() != dim || cov.sigma1.rows() != dim || cov.sigma1.cols() != dim)
        throw ValidationError("sigma0 and sigma1 must be square and of equal size", "covariances");
}

double largest_eigenvalue(const Matrix& symmetric) {
    const Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().maxCoeff();
}

/// Applies the condition guard. Returns false when the caller must fall back
/// to the pseudo-inverse.
bool well_conditioned(const Matrix& sigma0, const SolverOptions& options,
                      std::map<std::string, double>& diagnostics) {
    const double cond = condition_number(sigma0);
    diagnostics["condition_number"] = cond;
    if (cond <= options.condition_threshold) return true;
    if (!options.pseudo_inverse) {
        std::ostringstream msg;
        msg << "sigma0 is singular or ill-conditioned (condition number " << cond << " exceeds "
            << options.condition_threshold << "); the estimator needs at least " << sigma0.rows() + 2
            << " samples (2N+2)";
        throw NumericalError(msg.str());
    }
    return false;
}

Matrix pseudo_solve(const Matrix& sigma0, const Matrix& rhs, const SolverOptions& options,
                    std::map<std::string, double>& diagnostics) {
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma0);
    const Vector& values = eig.eigenvalues();
    const double cutoff = values.cwiseAbs().maxCoeff() / options.condition_threshold;
    const Vector inverted = values.unaryExpr([cutoff](double v) { return std::abs(v) > cutoff ? 1.0 / v : 0.0; });
    diagnostics["pseudo_inverse"] = 1.0;
    return rhs * eig.eigenvectors() * inverted.asDiagonal() * eig.eigenvectors().transpose();
}

/// Returns X solving X * sigma0 = rhs (sigma0 symmetric), guarded by the condition check.
Matrix right_solve(const Matrix& sigma0, const Matrix& rhs, const SolverOptions& options,
                   std::map<std::string, double>& diagnostics) {
    if (!well_conditioned(sigma0, options, diagnostics)) return pseudo_solve(sigma0, rhs, options, diagnostics);
    const Eigen::LDLT<Matrix> ldlt(sigma0);
    Matrix x = ldlt.solve(rhs.transpose()).transpose();
    // One step of iterative refinement tightens the residual on poorly scaled data.
    const Matrix residual = rhs - x * sigma0;
    x += ldlt.solve(residual.transpose()).transpose();
    return x;
}

/// Same solution as right_solve on the moments of (regressors, targets), but
/// by Householder QR of the regressor samples (one sample per row), which
/// loses accuracy with cond(sigma0)^(1/2) instead of cond(sigma0).
Matrix data_solve(const Matrix& sigma0, const Matrix& rhs, const Matrix& regressors, const Matrix& targets,
                  const SolverOptions& options, std::map<std::string, double>& diagnostics) {
    if (!well_conditioned(sigma0, options, diagnostics)) return pseudo_solve(sigma0, rhs, options, diagnostics);
    const Eigen::HouseholderQR<Matrix> qr(regressors);
    return qr.solve(targets).transpose();
}

struct RowSolve {
    Vector coefficients;
    int iterations = 0;
    bool converged = false;
};

/// Solves the stationarity conditions on the support and signs found by the
/// iterations; keeps the result only if the signs survive and F does not rise.
template <typename Objective>
void polish_support(const Matrix& s0, const Vector& s, double weight, double lambda, const Objective& objective,
                    Vector& x) {
    std::vector<int> support;
    for (Eigen::Index j = 0; j < x.size(); ++j)
        if (x(j) != 0.0) support.push_back(static_cast<int>(j));
    if (support.empty()) return;
    Vector signs(static_cast<Eigen::Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k)
        signs(static_cast<Eigen::Index>(k)) = x(support[k]) > 0.0 ? 1.0 : -1.0;
    const Eigen::LDLT<Matrix> ldlt(s0(support, support));
    if (ldlt.info() != Eigen::Success) return;
    const Vector reduced = ldlt.solve(s(support) - (lambda / (2.0 * weight)) * signs);
    if (!reduced.allFinite()) return;
    Vector candidate = Vector::Zero(x.size());
    for (std::size_t k = 0; k < support.size(); ++k) {
        const double v = reduced(static_cast<Eigen::Index>(k));
        if (lambda > 0.0 && v * signs(static_cast<Eigen::Index>(k)) <= 0.0) return;
        candidate(support[k]) = v;
    }
    if (objective(candidate) <= objective(x)) x = std::move(candidate);
}

/// FISTA with function-value restart on
///   weight * (a' S0 a - 2 a' s) + lambda |a|_1, started at a = 0.
RowSolve lasso_row(const Matrix& s0, const Vector& s, double weight, double lambda,
                   double lipschitz, const SolverOptions& options) {
    const auto dim = s.size();
    RowSolve out;
    out.coefficients = Vector::Zero(dim);
    if (lipschitz <= 0.0) {
        out.converged = true;
        return out;
    }
    const auto objective = [&](const Vector& a) {
        return weight * (a.dot(s0 * a) - 2.0 * a.dot(s)) + lambda * a.lpNorm<1>();
    };

    Vector x = Vector::Zero(dim);
    Vector y = x;
    double momentum = 1.0;
    double f_x = 0.0;
    int quiet_steps = 0;
    const double step_tolerance =
        std::sqrt(options.tolerance) * 2.0 * weight * std::max(s.lpNorm<Eigen::Infinity>(), kTiny);
    for (int k = 1; k <= options.max_iterations; ++k) {
        const Vector gradient = 2.0 * weight * (s0 * y - s);
        Vector x_next = y - gradient / lipschitz;
        for (Eigen::Index i = 0; i < dim; ++i) x_next(i) = soft_threshold(x_next(i), lambda / lipschitz);
        const double f_next = objective(x_next);
        out.iterations = k;

        if (f_next > f_x) {
            if ((y - x).lpNorm<Eigen::Infinity>() == 0.0) {
                // A plain proximal step from x cannot increase F; this is rounding.
                out.converged = true;
                break;
            }
            y = x;
            momentum = 1.0;
            continue;
        }
        const double decrease = f_x - f_next;
        const Vector x_previous = x;
        const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
        y = x_next + ((momentum - 1.0) / next_momentum) * (x_next - x);
        x = std::move(x_next);
        momentum = next_momentum;
        f_x = f_next;

        quiet_steps = decrease <= options.tolerance * std::max(std::abs(f_next), kTiny) ? quiet_steps + 1 : 0;
        // Slow linear phases also produce tiny decreases, so require a small
        // proximal-gradient step as well.
        const double step = lipschitz * (x - x_previous).lpNorm<Eigen::Infinity>();
        if (quiet_steps >= 2 && step <= step_tolerance) {
            out.converged = true;
            break;
        }
    }
    if (out.converged) polish_support(s0, s, weight, lambda, objective, x);
    out.coefficients = std::move(x);
    return out;
}

}  // namespace

std::string_view to_string(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::Uml: return "UML";
        case EstimatorKind::Cml: return "CML";
        case EstimatorKind::Tikhonov: return "TIKHONOV";
        case EstimatorKind::Lasso: return "LASSO";
        case EstimatorKind::SparseLowRank: return "SPARSE_LOW_RANK";
    }
    return "UNKNOWN";
}

EstimatorKind parse_estimator(std::string_view tag) {
    std::string lower(tag);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "uml") return EstimatorKind::Uml;
    if (lower == "cml") return EstimatorKind::Cml;
    if (lower == "tikhonov") return EstimatorKind::Tikhonov;
    if (lower == "lasso") return EstimatorKind::Lasso;
    if (lower == "sparse_low_rank" || lower == "slr") return EstimatorKind::SparseLowRank;
    throw ValidationError("unknown estimator '" + std::string(tag) + "'", "estimator");
}

CovariancePair covariances(const Trajectory& traj) {
    validate(traj);
    const Eigen::Index length = traj.length();
    if (length < 2) throw ValidationError("trajectory needs at least 2 samples", "states");
    const double weight = static_cast<double>(length - 1);
    const auto current = traj.states.leftCols(length - 1);
    const auto next = traj.states.rightCols(length - 1);

    CovariancePair cov;
    cov.n_samples = length;
    cov.sigma0 = (current * current.transpose()) / weight;
    cov.sigma0 = 0.5 * (cov.sigma0 + cov.sigma0.transpose()).eval();
    cov.sigma1 = (next * current.transpose()) / weight;
    cov.trace_next = next.squaredNorm() / weight;
    return cov;
}

double condition_number(const Matrix& sigma0) {
    const Eigen::SelfAdjointEigenSolver<Matrix> solver(sigma0, Eigen::EigenvaluesOnly);
    const Vector& values = solver.eigenvalues();
    const double smallest = values.minCoeff();
    const double largest = values.cwiseAbs().maxCoeff();
    if (!(smallest > 0.0)) return std::numeric_limits<double>::infinity();
    return largest / smallest;
}

double least_squares_objective(const CovariancePair& cov, const Matrix& a) {
    const double weight = sample_weight(cov);
    const double quadratic = (a * cov.sigma0).cwiseProduct(a).sum();
    const double cross = a.cwiseProduct(cov.sigma1).sum();
    return weight * (quadratic - 2.0 * cross + cov.trace_next);
}

Matrix least_squares_gradient(const CovariancePair& cov, const Matrix& a) {
    return 2.0 * sample_weight(cov) * (a * cov.sigma0 - cov.sigma1);
}

EstimationResult estimate_uml(const CovariancePair& cov, const SolverOptions& options) {
    check_shapes(cov);
    sample_weight(cov);
    EstimationResult result;
    result.estimator = EstimatorKind::Uml;
    result.a_hat = right_solve(cov.sigma0, cov.sigma1, options, result.diagnostics);
    result.objective = least_squares_objective(cov, result.a_hat);
    result.diagnostics["residual"] = (result.a_hat * cov.sigma0 - cov.sigma1).norm();
    return result;
}

EstimationResult estimate_uml(const Trajectory& traj, const SolverOptions& options) {
    const CovariancePair cov = covariances(traj);
    sample_weight(cov);
    const Eigen::Index length = traj.length();
    EstimationResult result;
    result.estimator = EstimatorKind::Uml;
    result.a_hat = data_solve(cov.sigma0, cov.sigma1, traj.states.leftCols(length - 1).transpose(),
                              traj.states.rightCols(length - 1).transpose(), options, result.diagnostics);
    result.objective = least_squares_objective(cov, result.a_hat);
    result.diagnostics["residual"] = (result.a_hat * cov.sigma0 - cov.sigma1).norm();
    return result;
}

namespace {

using RowsSolver = std::function<Matrix(const std::vector<int>& rows, const std::vector<int>& columns,
                                        std::map<std::string, double>& diagnostics)>;

EstimationResult constrained_solve(const CovariancePair& cov, int n_gen, const RowsSolver& solve) {
    check_shapes(cov);
    const double weight = sample_weight(cov);
    const Eigen::Index dim = cov.sigma0.rows();
    if (n_gen < 1 || 2 * n_gen != dim)
        throw ValidationError("2N must equal the covariance dimension", "n_gen");

    EstimationResult result;
    result.estimator = EstimatorKind::Cml;
    result.a_hat = Matrix::Zero(dim, dim);

    // Angle rows are unconstrained: same normal equations as UML.
    std::vector<int> angle_rows(static_cast<std::size_t>(n_gen));
    std::vector<int> all_columns(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) all_columns[static_cast<std::size_t>(j)] = j;
    for (int j = 0; j < n_gen; ++j) angle_rows[static_cast<std::size_t>(j)] = j;
    result.a_hat.topRows(n_gen) = solve(angle_rows, all_columns, result.diagnostics);

    // Speed row i may use every angle column plus its own speed column.
    std::vector<int> support(static_cast<std::size_t>(n_gen + 1));
    for (int j = 0; j < n_gen; ++j) support[static_cast<std::size_t>(j)] = j;
    double kkt = 0.0;
    for (int i = n_gen; i < 2 * n_gen; ++i) {
        support.back() = i;
        const Matrix s0 = cov.sigma0(support, support);
        const Matrix rhs = cov.sigma1(Eigen::seqN(i, 1), support);
        std::map<std::string, double> row_diagnostics;
        const Matrix row = [&] {
            try {
                return solve({i}, support, row_diagnostics);
            } catch (const NumericalError& e) {
                throw NumericalError("restricted regressor for row " + std::to_string(i) +
                                     " is rank deficient: " + e.what());
            }
        }();
        result.a_hat(Eigen::seqN(i, 1), support) = row;
        const Matrix gradient = 2.0 * weight * (row * s0 - rhs);
        kkt = std::max(kkt, gradient.lpNorm<Eigen::Infinity>());
    }
    const Matrix top_gradient = least_squares_gradient(cov, result.a_hat).topRows(n_gen);
    kkt = std::max(kkt, top_gradient.lpNorm<Eigen::Infinity>());
    const double scale = 2.0 * weight * std::max(cov.sigma1.lpNorm<Eigen::Infinity>(), kTiny);
    result.diagnostics["kkt_residual"] = kkt / scale;
    result.objective = least_squares_objective(cov, result.a_hat);
    return result;
}

}  // namespace

EstimationResult estimate_cml(const CovariancePair& cov, int n_gen, const SolverOptions& options) {
    return constrained_solve(cov, n_gen, [&](const std::vector<int>& rows, const std::vector<int>& columns,
                                             std::map<std::string, double>& diagnostics) {
        return right_solve(cov.sigma0(columns, columns), cov.sigma1(rows, columns), options, diagnostics);
    });
}

EstimationResult estimate_cml(const Trajectory& traj, const SolverOptions& options) {
    const CovariancePair cov = covariances(traj);
    const Eigen::Index length = traj.length();
    const auto current = traj.states.leftCols(length - 1);
    const auto next = traj.states.rightCols(length - 1);
    return constrained_solve(cov, traj.n_gen, [&](const std::vector<int>& rows, const std::vector<int>& columns,
                                                  std::map<std::string, double>& diagnostics) {
        return data_solve(cov.sigma0(columns, columns), cov.sigma1(rows, columns),
                          current(columns, Eigen::all).transpose(), next(rows, Eigen::all).transpose(), options,
                          diagnostics);
    });
}

EstimationResult estimate_tikhonov(const CovariancePair& cov, const Matrix& a_prev, double nu,
                                   const SolverOptions& options) {
    check_shapes(cov);
    const double weight = sample_weight(cov);
    if (!(std::isfinite(nu) && nu >= 0.0)) throw ValidationError("must be nonnegative", "nu");
    if (a_prev.rows() != cov.sigma0.rows() || a_prev.cols() != cov.sigma0.cols())
        throw ValidationError("dimension mismatch", "a_prev");

    EstimationResult result;
    result.estimator = EstimatorKind::Tikhonov;
    result.hyperparams["nu"] = nu;
    const double shift = nu / weight;
    const Eigen::Index dim = cov.sigma0.rows();
    const Matrix lhs = cov.sigma0 + shift * Matrix::Identity(dim, dim);
    const Matrix rhs = cov.sigma1 + shift * a_prev;
    if (nu == 0.0) {
        result.a_hat = right_solve(lhs, rhs, options, result.diagnostics);
    } else {
        const Eigen::LLT<Matrix> llt(lhs);
        if (llt.info() != Eigen::Success) throw NumericalError("regularized system is not positive definite");
        result.a_hat = llt.solve(rhs.transpose()).transpose();
    }
    result.objective = least_squares_objective(cov, result.a_hat) +
                       nu * (result.a_hat - a_prev).squaredNorm();
    return result;
}

EstimationResult estimate_lasso(const CovariancePair& cov, double lambda, const SolverOptions& options) {
    check_shapes(cov);
    const double weight = sample_weight(cov);
    if (!(std::isfinite(lambda) && lambda >= 0.0)) throw ValidationError("must be nonnegative", "lambda");

    const Eigen::Index dim = cov.sigma0.rows();
    const double lipschitz = 2.0 * weight * std::max(largest_eigenvalue(cov.sigma0), 0.0);

    EstimationResult result;
    result.estimator = EstimatorKind::Lasso;
    result.hyperparams["lambda"] = lambda;
    result.a_hat = Matrix::Zero(dim, dim);
    int total_iterations = 0;
    int worst_iterations = 0;
    for (Eigen::Index i = 0; i < dim; ++i) {
        const RowSolve row =
            lasso_row(cov.sigma0, cov.sigma1.row(i).transpose(), weight, lambda, lipschitz, options);
        if (!row.converged) {
            std::ostringstream msg;
            msg << "LASSO row " << i << " did not converge within " << options.max_iterations
                << " iterations (tolerance " << options.tolerance << ")";
            throw NumericalError(msg.str());
        }
        result.a_hat.row(i) = row.coefficients.transpose();
        total_iterations += row.iterations;
        worst_iterations = std::max(worst_iterations, row.iterations);
    }
    result.objective = least_squares_objective(cov, result.a_hat) + lambda * result.a_hat.lpNorm<1>();
    result.diagnostics["iterations_total"] = total_iterations;
    result.diagnostics["iterations_max_row"] = worst_iterations;
    result.diagnostics["kkt_residual"] = lasso_optimality_residual(cov, result.a_hat, lambda);
    return result;
}

EstimationResult estimate_lasso(const Trajectory& traj, double lambda, const SolverOptions& options) {
    return estimate_lasso(covariances(traj), lambda, options);
}

double lasso_optimality_residual(const CovariancePair& cov, const Matrix& a, double lambda) {
    const Matrix gradient = least_squares_gradient(cov, a);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            const double g = gradient(i, j);
            const double violation = a(i, j) == 0.0 ? std::max(std::abs(g) - lambda, 0.0)
                                                    : std::abs(g + lambda * (a(i, j) > 0.0 ? 1.0 : -1.0));
            worst = std::max(worst, violation);
        }
    }
    return worst;
}

double sparse_low_rank_objective(const CovariancePair& cov, const Matrix& a, const Matrix& l,
                                 double lambda, double eta) {
    const Eigen::JacobiSVD<Matrix> svd(l);
    return least_squares_objective(cov, a + l) + lambda * a.lpNorm<1>() + eta * svd.singularValues().sum();
}

EstimationResult estimate_sparse_low_rank(const CovariancePair& cov, double lambda, double eta,
                                          const SolverOptions& options) {
    check_shapes(cov);
    const double weight = sample_weight(cov);
    if (!(std::isfinite(lambda) && lambda >= 0.0)) throw ValidationError("must be nonnegative", "lambda");
    if (!(std::isfinite(eta) && eta >= 0.0)) throw ValidationError("must be nonnegative", "eta");

    const Eigen::Index dim = cov.sigma0.rows();
    const double lipschitz = 2.0 * weight * std::max(largest_eigenvalue(cov.sigma0), 0.0);

    EstimationResult result;
    result.estimator = EstimatorKind::SparseLowRank;
    result.hyperparams["lambda"] = lambda;
    result.hyperparams["eta"] = eta;
    Matrix a = Matrix::Zero(dim, dim);
    Matrix l = Matrix::Zero(dim, dim);
    double objective = sparse_low_rank_objective(cov, a, l, lambda, eta);
    result.objective_trace.push_back(objective);

    int increases = 0;
    bool converged = lipschitz <= 0.0;
    int iterations = 0;
    int quiet_steps = 0;
    while (!converged && iterations < options.max_iterations) {
        ++iterations;
        a = soft_threshold(a - least_squares_gradient(cov, a + l) / lipschitz, lambda / lipschitz);
        double nuclear = 0.0;
        l = singular_value_threshold(l - least_squares_gradient(cov, a + l) / lipschitz,
                                     eta / lipschitz, nuclear);
        const double next = least_squares_objective(cov, a + l) + lambda * a.lpNorm<1>() + eta * nuclear;
        result.objective_trace.push_back(next);
        if (next > objective + 1e-12 * std::abs(objective)) ++increases;
        const double decrease = objective - next;
        objective = next;
        quiet_steps = decrease <= options.tolerance * std::max(std::abs(next), kTiny) ? quiet_steps + 1 : 0;
        converged = quiet_steps >= 2;
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "sparse-plus-low-rank did not converge within " << options.max_iterations
            << " iterations; last objective " << objective;
        throw NumericalError(msg.str());
    }
    result.a_hat = std::move(a);
    result.l_hat = std::move(l);
    result.objective = objective;
    result.diagnostics["iterations"] = iterations;
    result.diagnostics["objective_increases"] = increases;
    return result;
}

EstimationResult estimate_sparse_low_rank(const Trajectory& traj, double lambda, double eta,
                                          const SolverOptions& options) {
    return estimate_sparse_low_rank(covariances(traj), lambda, eta, options);
}

Vector estimate_b(const Trajectory& traj, const Matrix& a_hat) {
    validate(traj);
    const Eigen::Index length = traj.length();
    if (length < 2) throw ValidationError("trajectory needs at least 2 samples", "states");
    const auto dim = traj.states.rows();
    if (a_hat.rows() != dim || a_hat.cols() != dim) throw ValidationError("dimension mismatch", "a_hat");
    const Matrix residuals = traj.states.rightCols(length - 1) - a_hat * traj.states.leftCols(length - 1);
    return (residuals.rowwise().squaredNorm() / static_cast<double>(length - 1)).cwiseSqrt();
}

Matrix threshold_structure(const Matrix& a_hat, int n_gen) {
    if (n_gen < 1 || a_hat.rows() != 2 * n_gen || a_hat.cols() != 2 * n_gen)
        throw ValidationError("matrix must be 2N x 2N", "a_hat");
    Matrix out = a_hat;
    for (int i = n_gen; i < 2 * n_gen; ++i)
        for (int j = n_gen; j < 2 * n_gen; ++j)
            if (i != j) out(i, j) = 0.0;
    return out;
}

}  // namespace swingid
