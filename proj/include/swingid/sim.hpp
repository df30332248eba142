#pragma once

#include "swingid/model.hpp"

#include <cstdint>
#include <optional>
#include <random>

namespace swingid {

/// Seeded standard-normal source with a fixed, platform-independent recipe:
///
///  * raw bits come from std::mt19937_64 seeded with the 64-bit seed (the
///    engine's output sequence is pinned by the C++ standard);
///  * a uniform u in [0,1) is the top 53 bits of one draw times 2^-53;
///  * normals are produced in pairs by Box-Muller from two uniforms u1, u2:
///    r = sqrt(-2 ln(1 - u1)), z0 = r cos(2 pi u2), z1 = r sin(2 pi u2),
///    returned in the order z0, z1.
///
/// std::normal_distribution is deliberately not used: its algorithm is
/// implementation-defined, so trajectories would differ between toolchains.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal();

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Sampled state trajectory. Column t of `states` is X_t = [delta; omega].
struct Trajectory {
    int n_gen = 0;
    double dt = 0.0;
    double t0 = 0.0;
    Matrix states;
    std::optional<std::uint64_t> seed;

    [[nodiscard]] Eigen::Index length() const { return states.cols(); }
};

/// Throws ValidationError if the trajectory breaks its invariants.
void validate(const Trajectory& traj);

/// Runs n_steps of the recursion from x0; the result holds n_steps + 1 states.
/// Every step consumes exactly 2N normals from NormalStream(seed), including
/// rows whose noise scale is zero.
Trajectory simulate(const DiscreteSystem& sys, Eigen::Index n_steps, const Vector& x0,
                    std::uint64_t seed);

/// Keeps samples 0, stride, 2*stride, ...
Trajectory subsample(const Trajectory& traj, Eigen::Index stride);

/// Final state of a burn_in-step run started at the origin.
Vector steady_start(const DiscreteSystem& sys, Eigen::Index burn_in, std::uint64_t seed);

/// One noise stream for burn-in and record: runs burn_in + n_samples - 1
/// steps from the origin and keeps the last n_samples states. Its first
/// state equals steady_start(sys, burn_in, seed).
Trajectory simulate_stationary(const DiscreteSystem& sys, Eigen::Index n_samples,
                               Eigen::Index burn_in, std::uint64_t seed);

/// Twice the slowest non-zero mode's time constant of `a_d`, in steps of dt,
/// rounded up. Eigenvalues with |lambda| <= zero_tol are treated as the
/// structural zero mode and ignored.
Eigen::Index default_burn_in(const ContinuousSystem& sys, double dt, double zero_tol = -1.0);

}  // namespace swingid
