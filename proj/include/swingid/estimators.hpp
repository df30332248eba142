#pragma once

#include "swingid/model.hpp"
#include "swingid/sim.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace swingid {

enum class EstimatorKind { Uml, Cml, Tikhonov, Lasso, SparseLowRank };

[[nodiscard]] std::string_view to_string(EstimatorKind kind);
/// Accepts the lower- or upper-case tags: uml, cml, tikhonov, lasso, sparse_low_rank.
[[nodiscard]] EstimatorKind parse_estimator(std::string_view tag);

/// Empirical second moments of a trajectory, both with divisor T-1:
///   sigma0 = sum_t X_t X_t^T / (T-1),  sigma1 = sum_t X_{t+1} X_t^T / (T-1).
/// trace_next = sum_t |X_{t+1}|^2 / (T-1) only feeds reported objective values;
/// hand-built pairs may leave it at zero, which shifts objectives by a constant.
struct CovariancePair {
    Matrix sigma0;
    Matrix sigma1;
    Eigen::Index n_samples = 0;
    double trace_next = 0.0;
};

struct SolverOptions {
    double tolerance = 1e-10;           // relative objective decrease that ends iteration
    int max_iterations = 100000;
    double condition_threshold = 1e12;  // sigma0 condition numbers above this are rejected
    bool pseudo_inverse = false;        // exploratory: pseudo-invert instead of rejecting
};

struct EstimationResult {
    Matrix a_hat;
    EstimatorKind estimator = EstimatorKind::Uml;
    std::map<std::string, double> hyperparams;
    double objective = 0.0;
    std::optional<Matrix> l_hat;
    std::optional<Vector> b_hat;
    std::map<std::string, double> diagnostics;
    std::vector<double> objective_trace;  // per-iteration values of iterative solvers
};

CovariancePair covariances(const Trajectory& traj);

/// Ratio of extreme eigenvalues of the symmetric matrix; +inf when singular.
double condition_number(const Matrix& sigma0);

/// sum_t |X_{t+1} - A X_t|^2 expressed through the moments.
double least_squares_objective(const CovariancePair& cov, const Matrix& a);

/// Gradient of least_squares_objective: 2 (T-1) (A sigma0 - sigma1).
Matrix least_squares_gradient(const CovariancePair& cov, const Matrix& a);

EstimationResult estimate_uml(const CovariancePair& cov, const SolverOptions& options = {});
/// Same estimator solved by QR on the samples; more accurate when sigma0 is poorly conditioned.
EstimationResult estimate_uml(const Trajectory& traj, const SolverOptions& options = {});

/// Least squares with the lower-right block restricted to be diagonal.
EstimationResult estimate_cml(const CovariancePair& cov, int n_gen, const SolverOptions& options = {});
EstimationResult estimate_cml(const Trajectory& traj, const SolverOptions& options = {});

/// Minimizer of sum_t |X_{t+1} - A X_t|^2 + nu |A - a_prev|_F^2.
EstimationResult estimate_tikhonov(const CovariancePair& cov, const Matrix& a_prev, double nu,
                                   const SolverOptions& options = {});

/// Minimizer of sum_t |X_{t+1} - A X_t|^2 + lambda |A|_1 (entrywise).
EstimationResult estimate_lasso(const CovariancePair& cov, double lambda,
                                const SolverOptions& options = {});
EstimationResult estimate_lasso(const Trajectory& traj, double lambda,
                                const SolverOptions& options = {});

/// Largest violation of the entrywise subgradient condition at `a`.
double lasso_optimality_residual(const CovariancePair& cov, const Matrix& a, double lambda);

double sparse_low_rank_objective(const CovariancePair& cov, const Matrix& a, const Matrix& l,
                                 double lambda, double eta);

/// Minimizer of sum_t |X_{t+1} - (A + L) X_t|^2 + lambda |A|_1 + eta |L|_*.
EstimationResult estimate_sparse_low_rank(const CovariancePair& cov, double lambda, double eta,
                                          const SolverOptions& options = {});
EstimationResult estimate_sparse_low_rank(const Trajectory& traj, double lambda, double eta,
                                          const SolverOptions& options = {});

/// Per-row residual scale sqrt(mean_t (X_{t+1} - a_hat X_t)_i^2).
Vector estimate_b(const Trajectory& traj, const Matrix& a_hat);

/// Zeroes the off-diagonal entries of the lower-right N x N block.
Matrix threshold_structure(const Matrix& a_hat, int n_gen);

}  // namespace swingid
