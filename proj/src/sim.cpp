#include "swingid/sim.hpp"

#include "swingid/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace swingid {

double NormalStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(1.0 - u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

void validate(const Trajectory& traj) {
    if (traj.n_gen < 1) throw ValidationError("must be at least 1", "n_gen");
    if (!(std::isfinite(traj.dt) && traj.dt > 0.0)) throw ValidationError("must be positive", "dt");
    if (traj.states.rows() != 2 * traj.n_gen)
        throw ValidationError("state dimension " + std::to_string(traj.states.rows()) +
                                  " is not 2N = " + std::to_string(2 * traj.n_gen),
                              "states");
    if (traj.states.cols() < 1) throw ValidationError("trajectory is empty", "states");
}

Trajectory simulate(const DiscreteSystem& sys, Eigen::Index n_steps, const Vector& x0,
                    std::uint64_t seed) {
    const Eigen::Index dim = sys.a.rows();
    if (n_steps < 1) throw ValidationError("must be at least 1", "n_steps");
    if (x0.size() != dim)
        throw ValidationError("expected dimension " + std::to_string(dim), "x0");
    if (sys.b_diag.size() != dim) throw ValidationError("dimension mismatch", "b_diag");

    Trajectory traj;
    traj.n_gen = sys.n_gen;
    traj.dt = sys.dt;
    traj.seed = seed;
    traj.states.resize(dim, n_steps + 1);
    traj.states.col(0) = x0;

    NormalStream noise(seed);
    Vector xi(dim);
    for (Eigen::Index t = 0; t < n_steps; ++t) {
        for (Eigen::Index i = 0; i < dim; ++i) xi(i) = noise.normal();
        traj.states.col(t + 1).noalias() = sys.a * traj.states.col(t);
        traj.states.col(t + 1) += sys.b_diag.cwiseProduct(xi);
    }
    return traj;
}

Trajectory subsample(const Trajectory& traj, Eigen::Index stride) {
    if (stride < 1) throw ValidationError("must be at least 1", "stride");
    const Eigen::Index length = (traj.length() + stride - 1) / stride;
    Trajectory out;
    out.n_gen = traj.n_gen;
    out.dt = traj.dt * static_cast<double>(stride);
    out.t0 = traj.t0;
    out.seed = traj.seed;
    out.states.resize(traj.states.rows(), length);
    for (Eigen::Index k = 0; k < length; ++k) out.states.col(k) = traj.states.col(k * stride);
    return out;
}

Vector steady_start(const DiscreteSystem& sys, Eigen::Index burn_in, std::uint64_t seed) {
    const Vector origin = Vector::Zero(sys.a.rows());
    if (burn_in <= 0) return origin;
    return simulate(sys, burn_in, origin, seed).states.col(burn_in);
}

Trajectory simulate_stationary(const DiscreteSystem& sys, Eigen::Index n_samples,
                               Eigen::Index burn_in, std::uint64_t seed) {
    if (n_samples < 2) throw ValidationError("must be at least 2", "n_samples");
    if (burn_in < 0) throw ValidationError("must be nonnegative", "burn_in");
    const Vector origin = Vector::Zero(sys.a.rows());
    Trajectory full = simulate(sys, burn_in + n_samples - 1, origin, seed);
    if (burn_in == 0) return full;
    Trajectory out;
    out.n_gen = full.n_gen;
    out.dt = full.dt;
    out.seed = seed;
    out.states = full.states.rightCols(n_samples);
    return out;
}

Eigen::Index default_burn_in(const ContinuousSystem& sys, double dt, double zero_tol) {
    if (!(std::isfinite(dt) && dt > 0.0)) throw ValidationError("must be positive", "dt");
    const Eigen::EigenSolver<Matrix> solver(sys.a_d, false);
    if (solver.info() != Eigen::Success) throw NumericalError("eigensolver failed");
    const auto eigenvalues = solver.eigenvalues();
    const double radius = eigenvalues.cwiseAbs().maxCoeff();
    if (zero_tol < 0.0) zero_tol = 1e-6 * radius;

    double slowest_rate = 0.0;
    for (const auto& lambda : eigenvalues) {
        if (std::abs(lambda) <= zero_tol) continue;
        const double rate = -lambda.real();
        if (rate <= 0.0) throw NumericalError("system has a non-decaying mode besides the zero mode");
        if (slowest_rate == 0.0 || rate < slowest_rate) slowest_rate = rate;
    }
    if (slowest_rate == 0.0) return 0;
    return static_cast<Eigen::Index>(std::ceil(2.0 / slowest_rate / dt));
}

}  // namespace swingid
