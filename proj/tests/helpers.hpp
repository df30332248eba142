#pragma once

#include "swingid/estimators.hpp"
#include "swingid/fixture.hpp"
#include "swingid/model.hpp"
#include "swingid/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

namespace testing {

using swingid::Matrix;
using swingid::Vector;

inline swingid::GridModel single_generator(double m, double d, double sigma = 0.01) {
    swingid::GridModel model;
    model.n_nodes = 1;
    model.generators.push_back({0, m, d, sigma});
    return model;
}

inline swingid::GridModel two_generators(double m = 1.0, double d = 1.0, double beta = 1.0,
                                         double sigma = 0.01) {
    swingid::GridModel model;
    model.n_nodes = 2;
    model.generators = {{0, m, d, sigma}, {1, m, d, sigma}};
    model.lines = {{0, 1, beta, 0.0}};
    return model;
}

/// Small random connected generator-only network from the fixture generator.
inline swingid::GridModel small_network(int n_gen, std::uint64_t seed) {
    swingid::FixtureSpec spec;
    spec.n_gen = n_gen;
    spec.radius = 0.8;
    spec.seed = seed;
    return swingid::random_geometric_fixture(spec);
}

inline swingid::DiscreteSystem discrete(const swingid::GridModel& model, double dt = 1.0 / 60.0) {
    return swingid::build_discrete(swingid::build_continuous(model), dt);
}

/// Noisy trajectory in every coordinate, so sigma0 is comfortably full rank.
inline swingid::Trajectory noisy_trajectory(const Matrix& a, Eigen::Index length, std::uint64_t seed,
                                            double noise = 1.0) {
    swingid::DiscreteSystem sys;
    sys.n_gen = static_cast<int>(a.rows() / 2);
    sys.a = a;
    sys.b_diag = Vector::Constant(a.rows(), noise);
    sys.dt = 1.0;
    return swingid::simulate(sys, length - 1, Vector::Zero(a.rows()), seed);
}

/// Random matrix scaled to spectral radius `radius`.
inline Matrix random_stable(Eigen::Index dim, std::uint64_t seed, double radius = 0.8) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Matrix a(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) a(i, j) = normal(rng);
    const double rho = Eigen::EigenSolver<Matrix>(a, false).eigenvalues().cwiseAbs().maxCoeff();
    return a * (radius / rho);
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
    return m;
}

/// Eliminates nodes one at a time by Gaussian pivoting (no block inverse).
inline Matrix eliminate_nodes(Matrix l, std::vector<int> keep) {
    std::vector<int> nodes(static_cast<std::size_t>(l.rows()));
    for (int i = 0; i < static_cast<int>(l.rows()); ++i) nodes[static_cast<std::size_t>(i)] = i;
    for (Eigen::Index k = l.rows() - 1; k >= 0; --k) {
        if (std::find(keep.begin(), keep.end(), nodes[static_cast<std::size_t>(k)]) != keep.end()) continue;
        const double pivot = l(k, k);
        for (Eigen::Index i = 0; i < l.rows(); ++i)
            for (Eigen::Index j = 0; j < l.cols(); ++j)
                if (i != k && j != k) l(i, j) -= l(i, k) * l(k, j) / pivot;
        Matrix smaller(l.rows() - 1, l.cols() - 1);
        for (Eigen::Index i = 0, r = 0; i < l.rows(); ++i) {
            if (i == k) continue;
            for (Eigen::Index j = 0, c = 0; j < l.cols(); ++j) {
                if (j == k) continue;
                smaller(r, c++) = l(i, j);
            }
            ++r;
        }
        l = smaller;
        nodes.erase(nodes.begin() + k);
    }
    Matrix out(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i)
        for (std::size_t j = 0; j < keep.size(); ++j) {
            const auto pi = std::find(nodes.begin(), nodes.end(), keep[i]) - nodes.begin();
            const auto pj = std::find(nodes.begin(), nodes.end(), keep[j]) - nodes.begin();
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = l(pi, pj);
        }
    return out;
}

/// Plain gradient descent on sum_t |X_{t+1} - A X_t|^2 + nu |A - prior|_F^2,
/// written through the moments; independent of the closed forms.
inline Matrix gradient_descent(const swingid::CovariancePair& cov, const Matrix& prior, double nu,
                               int max_iterations = 200000, double gradient_tol = 1e-13) {
    const double w = static_cast<double>(cov.n_samples - 1);
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(cov.sigma0, Eigen::EigenvaluesOnly);
    const double step = 1.0 / (2.0 * w * eig.eigenvalues().maxCoeff() + 2.0 * nu);
    Matrix a = Matrix::Zero(cov.sigma0.rows(), cov.sigma0.cols());
    for (int k = 0; k < max_iterations; ++k) {
        const Matrix gradient = 2.0 * w * (a * cov.sigma0 - cov.sigma1) + 2.0 * nu * (a - prior);
        if (gradient.norm() <= gradient_tol * std::max(1.0, w * cov.sigma1.norm())) break;
        a -= step * gradient;
    }
    return a;
}

/// Cyclic coordinate descent for the entrywise-l1 penalized least squares,
/// one row at a time, to a fixed point.
inline Matrix coordinate_descent_lasso(const swingid::CovariancePair& cov, double lambda,
                                       int sweeps = 100000, double tol = 1e-15) {
    const double w = static_cast<double>(cov.n_samples - 1);
    const auto dim = cov.sigma0.rows();
    Matrix a = Matrix::Zero(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        for (int sweep = 0; sweep < sweeps; ++sweep) {
            double change = 0.0;
            for (Eigen::Index j = 0; j < dim; ++j) {
                double c = cov.sigma1(i, j);
                for (Eigen::Index k = 0; k < dim; ++k)
                    if (k != j) c -= a(i, k) * cov.sigma0(k, j);
                const double tau = lambda / (2.0 * w);
                const double shrunk = std::abs(c) > tau ? (std::abs(c) - tau) * (c > 0 ? 1.0 : -1.0) : 0.0;
                const double updated = shrunk / cov.sigma0(j, j);
                change = std::max(change, std::abs(updated - a(i, j)));
                a(i, j) = updated;
            }
            if (change <= tol) break;
        }
    }
    return a;
}

}  // namespace testing
