#pragma once

#include <Eigen/Dense>

#include <vector>

namespace swingid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Generator {
    int node = 0;
    double inertia = 0.0;   // M_i
    double damping = 0.0;   // D_i
    double sigma_p = 0.0;   // std of the power injection noise
};

struct Line {
    int from = 0;
    int to = 0;
    double beta = 0.0;   // effective susceptance
    double gamma = 0.0;  // effective conductance, carried but unused by the dynamics
};

/// Network description. Nodes are indexed 0..n_nodes-1; nodes not listed in
/// `generators` are passive loads and get eliminated by Kron reduction.
struct GridModel {
    int n_nodes = 0;
    std::vector<Generator> generators;
    std::vector<Line> lines;

    [[nodiscard]] int n_gen() const { return static_cast<int>(generators.size()); }
    [[nodiscard]] std::vector<int> generator_ids() const;
};

/// Throws ValidationError naming the offending field on the first violated invariant.
void validate(const GridModel& model);

/// Continuous-time linearized swing dynamics x' = a_d x + noise.
/// State layout is [delta_1..delta_N, omega_1..omega_N].
struct ContinuousSystem {
    int n_gen = 0;
    Matrix a_d;
    Vector noise_scale;  // 0 on angle rows, sigma_p / M on speed rows
};

/// Euler-Maruyama one-step map X_{t+1} = a X_t + diag(b_diag) xi_t.
struct DiscreteSystem {
    int n_gen = 0;
    Matrix a;
    Vector b_diag;
    double dt = 0.0;
};

/// Susceptance-weighted Laplacian over all nodes.
Matrix build_laplacian(const GridModel& model);

/// Schur complement of `laplacian` onto `generator_ids` (in the given order).
/// Throws NumericalError if the load block is singular.
Matrix kron_reduce(const Matrix& laplacian, const std::vector<int>& generator_ids);

ContinuousSystem build_continuous(const GridModel& model, const Matrix& reduced_laplacian);

/// Validates, Kron-reduces and assembles in one go.
ContinuousSystem build_continuous(const GridModel& model);

DiscreteSystem build_discrete(const ContinuousSystem& sys, double dt);

}  // namespace swingid
