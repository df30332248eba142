#include "swingid/model.hpp"

#include "swingid/errors.hpp"

#include <cmath>
#include <queue>
#include <set>
#include <string>
#include <utility>

namespace swingid {

namespace {

bool is_connected(int n_nodes, const std::vector<Line>& lines) {
    if (n_nodes <= 1) return true;
    std::vector<std::vector<int>> adjacency(static_cast<std::size_t>(n_nodes));
    for (const auto& line : lines) {
        adjacency[static_cast<std::size_t>(line.from)].push_back(line.to);
        adjacency[static_cast<std::size_t>(line.to)].push_back(line.from);
    }
    std::vector<bool> seen(static_cast<std::size_t>(n_nodes), false);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = true;
    int visited = 1;
    while (!frontier.empty()) {
        const int node = frontier.front();
        frontier.pop();
        for (int next : adjacency[static_cast<std::size_t>(node)]) {
            if (!seen[static_cast<std::size_t>(next)]) {
                seen[static_cast<std::size_t>(next)] = true;
                ++visited;
                frontier.push(next);
            }
        }
    }
    return visited == n_nodes;
}

std::string at(const char* what, std::size_t index) {
    return std::string(what) + "[" + std::to_string(index) + "]";
}

}  // namespace

std::vector<int> GridModel::generator_ids() const {
    std::vector<int> ids;
    ids.reserve(generators.size());
    for (const auto& g : generators) ids.push_back(g.node);
    return ids;
}

void validate(const GridModel& model) {
    if (model.n_nodes < 1) throw ValidationError("must be at least 1", "n_nodes");
    if (model.generators.empty()) throw ValidationError("model has no generators", "generators");

    std::set<int> generator_nodes;
    for (std::size_t k = 0; k < model.generators.size(); ++k) {
        const auto& g = model.generators[k];
        const auto field = at("generators", k);
        if (g.node < 0 || g.node >= model.n_nodes)
            throw ValidationError("node index out of range", field + ".node");
        if (!generator_nodes.insert(g.node).second)
            throw ValidationError("node listed twice as generator", field + ".node");
        if (!(std::isfinite(g.inertia) && g.inertia > 0.0))
            throw ValidationError("M must be positive", field + ".M");
        if (!(std::isfinite(g.damping) && g.damping > 0.0))
            throw ValidationError("D must be positive", field + ".D");
        if (!(std::isfinite(g.sigma_p) && g.sigma_p >= 0.0))
            throw ValidationError("sigma_P must be nonnegative", field + ".sigma_P");
    }

    std::set<std::pair<int, int>> seen_pairs;
    for (std::size_t k = 0; k < model.lines.size(); ++k) {
        const auto& line = model.lines[k];
        const auto field = at("lines", k);
        if (line.from < 0 || line.from >= model.n_nodes || line.to < 0 || line.to >= model.n_nodes)
            throw ValidationError("endpoint is not a valid node index", field);
        if (line.from == line.to) throw ValidationError("self-loop", field);
        const auto key = std::minmax(line.from, line.to);
        if (!seen_pairs.insert(key).second) throw ValidationError("duplicate line", field);
        if (!(std::isfinite(line.beta) && line.beta > 0.0))
            throw ValidationError("beta must be positive", field + ".beta");
        if (!(std::isfinite(line.gamma) && line.gamma >= 0.0))
            throw ValidationError("gamma must be nonnegative", field + ".gamma");
    }

    if (!is_connected(model.n_nodes, model.lines))
        throw ValidationError("network is not connected", "lines");
}

Matrix build_laplacian(const GridModel& model) {
    validate(model);
    Matrix laplacian = Matrix::Zero(model.n_nodes, model.n_nodes);
    for (const auto& line : model.lines) {
        laplacian(line.from, line.to) -= line.beta;
        laplacian(line.to, line.from) -= line.beta;
        laplacian(line.from, line.from) += line.beta;
        laplacian(line.to, line.to) += line.beta;
    }
    return laplacian;
}

Matrix kron_reduce(const Matrix& laplacian, const std::vector<int>& generator_ids) {
    const auto n = static_cast<int>(laplacian.rows());
    if (laplacian.cols() != n) throw ValidationError("matrix is not square", "laplacian");
    if (generator_ids.empty()) throw ValidationError("empty generator set", "generator_ids");

    std::vector<bool> is_generator(static_cast<std::size_t>(n), false);
    for (int id : generator_ids) {
        if (id < 0 || id >= n) throw ValidationError("index out of range", "generator_ids");
        if (is_generator[static_cast<std::size_t>(id)])
            throw ValidationError("duplicate index", "generator_ids");
        is_generator[static_cast<std::size_t>(id)] = true;
    }
    std::vector<int> loads;
    for (int i = 0; i < n; ++i)
        if (!is_generator[static_cast<std::size_t>(i)]) loads.push_back(i);

    const Matrix l_gg = laplacian(generator_ids, generator_ids);
    if (loads.empty()) return l_gg;

    const Matrix l_gl = laplacian(generator_ids, loads);
    const Matrix l_ll = laplacian(loads, loads);

    // L_ll is positive definite exactly when every load component touches a generator.
    Eigen::LLT<Matrix> llt(l_ll);
    const double scale = l_ll.cwiseAbs().maxCoeff();
    bool singular = llt.info() != Eigen::Success;
    if (!singular) {
        const double min_pivot = llt.matrixL().toDenseMatrix().diagonal().minCoeff();
        singular = !(min_pivot * min_pivot > 1e-12 * scale);
    }
    if (singular) {
        // Name the loads that cannot reach a generator through the network.
        std::vector<bool> reached(static_cast<std::size_t>(n), false);
        std::queue<int> frontier;
        for (int id : generator_ids) {
            reached[static_cast<std::size_t>(id)] = true;
            frontier.push(id);
        }
        while (!frontier.empty()) {
            const int i = frontier.front();
            frontier.pop();
            for (int j = 0; j < n; ++j) {
                if (j != i && laplacian(i, j) != 0.0 && !reached[static_cast<std::size_t>(j)]) {
                    reached[static_cast<std::size_t>(j)] = true;
                    frontier.push(j);
                }
            }
        }
        std::string isolated;
        for (int i : loads) {
            if (!reached[static_cast<std::size_t>(i)]) {
                if (!isolated.empty()) isolated += ",";
                isolated += std::to_string(i);
            }
        }
        throw NumericalError("load block is singular; load nodes {" + isolated +
                             "} are disconnected from every generator");
    }

    Matrix reduced = l_gg - l_gl * llt.solve(l_gl.transpose());
    return 0.5 * (reduced + reduced.transpose());
}

ContinuousSystem build_continuous(const GridModel& model, const Matrix& reduced_laplacian) {
    const int n = model.n_gen();
    if (reduced_laplacian.rows() != n || reduced_laplacian.cols() != n)
        throw ValidationError("dimension " + std::to_string(reduced_laplacian.rows()) + "x" +
                                  std::to_string(reduced_laplacian.cols()) +
                                  " does not match generator count " + std::to_string(n),
                              "reduced_laplacian");

    ContinuousSystem sys;
    sys.n_gen = n;
    sys.a_d = Matrix::Zero(2 * n, 2 * n);
    sys.noise_scale = Vector::Zero(2 * n);
    sys.a_d.topRightCorner(n, n).setIdentity();
    for (int i = 0; i < n; ++i) {
        const auto& g = model.generators[static_cast<std::size_t>(i)];
        sys.a_d.block(n + i, 0, 1, n) = -reduced_laplacian.row(i) / g.inertia;
        sys.a_d(n + i, n + i) = -g.damping / g.inertia;
        sys.noise_scale(n + i) = g.sigma_p / g.inertia;
    }
    return sys;
}

ContinuousSystem build_continuous(const GridModel& model) {
    return build_continuous(model, kron_reduce(build_laplacian(model), model.generator_ids()));
}

DiscreteSystem build_discrete(const ContinuousSystem& sys, double dt) {
    if (!(std::isfinite(dt) && dt > 0.0)) throw ValidationError("must be positive", "dt");
    const auto dim = sys.a_d.rows();
    DiscreteSystem out;
    out.n_gen = sys.n_gen;
    out.dt = dt;
    out.a = Matrix::Identity(dim, dim) + dt * sys.a_d;
    out.b_diag = sys.noise_scale * std::sqrt(dt);
    return out;
}

}  // namespace swingid
