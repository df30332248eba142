#include "swingid/fixture.hpp"

#include "swingid/errors.hpp"
#include "swingid/sim.hpp"

#include <cmath>
#include <vector>

namespace swingid {

namespace {

double draw(NormalStream& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

bool discrete_map_is_stable(const GridModel& model, double dt, double max_modulus) {
    const ContinuousSystem sys = build_continuous(model);
    const Eigen::EigenSolver<Matrix> solver(sys.a_d, false);
    if (solver.info() != Eigen::Success) return false;
    const auto& values = solver.eigenvalues();
    const double zero_tol = 1e-6 * values.cwiseAbs().maxCoeff();
    for (const auto& lambda : values) {
        if (std::abs(lambda) <= zero_tol) continue;
        if (std::abs(1.0 + dt * lambda) >= max_modulus) return false;
    }
    return true;
}

}  // namespace

GridModel random_geometric_fixture(const FixtureSpec& spec) {
    if (spec.n_gen < 1) throw ValidationError("must be at least 1", "n_gen");
    if (!(spec.radius > 0.0)) throw ValidationError("must be positive", "radius");
    if (!(spec.inertia_min > 0.0 && spec.inertia_min <= spec.inertia_max))
        throw ValidationError("invalid range", "inertia");
    if (!(spec.damping_min > 0.0 && spec.damping_min <= spec.damping_max))
        throw ValidationError("invalid range", "damping");
    if (!(spec.beta_min > 0.0 && spec.beta_min <= spec.beta_max)) throw ValidationError("invalid range", "beta");

    NormalStream rng(spec.seed);
    const auto n = static_cast<std::size_t>(spec.n_gen);
    for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.uniform();
            y[i] = rng.uniform();
        }
        GridModel model;
        model.n_nodes = spec.n_gen;
        for (int i = 0; i < spec.n_gen; ++i) {
            for (int j = i + 1; j < spec.n_gen; ++j) {
                const double dx = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)];
                const double dy = y[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(j)];
                if (std::hypot(dx, dy) < spec.radius) model.lines.push_back({i, j, 0.0, 0.0});
            }
        }
        for (auto& line : model.lines) line.beta = draw(rng, spec.beta_min, spec.beta_max);
        for (int i = 0; i < spec.n_gen; ++i) {
            Generator g;
            g.node = i;
            g.inertia = draw(rng, spec.inertia_min, spec.inertia_max);
            g.damping = draw(rng, spec.damping_min, spec.damping_max);
            g.sigma_p = spec.sigma_p;
            model.generators.push_back(g);
        }
        try {
            validate(model);
        } catch (const ValidationError&) {
            continue;  // disconnected draw
        }
        if (discrete_map_is_stable(model, spec.stability_dt, spec.max_modulus)) return model;
    }
    throw NumericalError("no stable connected fixture found within max_attempts draws");
}

}  // namespace swingid
