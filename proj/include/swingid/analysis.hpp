#pragma once

#include "swingid/model.hpp"

#include <complex>
#include <cstdint>
#include <vector>

namespace swingid {

using Complex = std::complex<double>;

/// (a_hat - I) / dt.
Matrix to_continuous(const Matrix& a_hat, double dt);

/// |a_hat_d - a_d|_F / |a_d|_F.
double relative_error(const Matrix& a_hat_d, const Matrix& a_d);

enum class BoundKind { Discrete, Continuous };

struct BoundReport {
    BoundKind which = BoundKind::Discrete;
    double epsilon = 0.0;
    double rhs = 0.0;
    double trace_sigma0_mean = 0.0;  // Monte Carlo E[Tr sigma0]
    double inv_norm_mean = 0.0;      // Monte Carlo E[|sigma0^-1|_F^2]
    int n_trials = 0;                // trials that entered the means
    int discarded_trials = 0;        // trials with a singular sigma0
    Eigen::Index n_samples = 0;
    double dt = 0.0;
};

struct MonteCarloOptions {
    int n_trials = 200;
    std::uint64_t seed = 1;
    /// Burn-in before each recorded trajectory; negative selects default_burn_in.
    Eigen::Index burn_in = -1;
    double condition_threshold = 1e12;
};

/// Trial k simulates simulate_stationary(sys, T, burn_in, seed + k).
/// rhs = |B|_2 / (epsilon sqrt(T-1)) * sqrt(E[Tr sigma0] E[|sigma0^-1|_F^2]).
BoundReport theorem1_bound(const DiscreteSystem& sys, Eigen::Index n_samples, double epsilon,
                           const MonteCarloOptions& options = {});

/// Same bound with externally supplied expectations (no simulation).
BoundReport theorem1_bound(const DiscreteSystem& sys, Eigen::Index n_samples, double epsilon,
                           double trace_sigma0_mean, double inv_norm_mean, int n_trials);

/// Continuous-time bound
/// rhs = 1/epsilon * sqrt( sum_i sigma_i^2 / M_i^2 / (dt (T-1)) * E[Tr sigma0] E[|sigma0^-1|_F^2] ).
BoundReport corollary2_bound(const std::vector<double>& sigma_p, const std::vector<double>& inertia,
                             double dt, Eigen::Index n_samples, double epsilon,
                             double trace_sigma0_mean, double inv_norm_mean, int n_trials = 1);

struct SpectralReport {
    std::vector<Complex> eigenvalues;  // sorted by descending real part, then imaginary part
    std::vector<Complex> critical;
    double zero_mode_tol = 0.0;
};

/// Full eigendecomposition; `critical` holds the eigenvalue(s) of largest real
/// part among those with |lambda| > zero_mode_tol, conjugate partners included.
/// A negative zero_mode_tol selects 1e-6 times the spectral radius.
SpectralReport spectrum(const Matrix& a_d, double zero_mode_tol = -1.0);

/// Mean |a_i - b_pi(i)| over the minimum-cost perfect matching pi.
double spectral_distance(const std::vector<Complex>& eigs_a, const std::vector<Complex>& eigs_b);

/// Minimum-cost assignment for a square cost matrix: result[row] = column.
std::vector<int> min_cost_assignment(const Matrix& cost);

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double value);
    [[nodiscard]] double value() const { return sum_ + compensation_; }

private:
    double sum_ = 0.0;
    double compensation_ = 0.0;
};

}  // namespace swingid
