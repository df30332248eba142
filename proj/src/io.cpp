#include "swingid/io.hpp"

#include "swingid/errors.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>

namespace swingid {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string_view strip_comment(std::string_view s) {
    const auto hash = s.find('#');
    return trim(hash == std::string_view::npos ? s : s.substr(0, hash));
}

std::vector<std::string_view> split_commas(std::string_view s) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        fields.push_back(trim(s.substr(start, comma == std::string_view::npos ? comma : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

std::optional<int> at_line(int line) {
    return line > 0 ? std::optional<int>(line) : std::nullopt;
}

int parse_int(std::string_view token, const std::string& field, int line) {
    int value = 0;
    const auto* end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (token.empty() || ec != std::errc() || ptr != end)
        throw ValidationError("expected an integer, got '" + std::string(token) + "'", field, at_line(line));
    return value;
}

std::ifstream open_for_reading(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file", path.string());
    return in;
}

std::ofstream open_for_writing(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open file for writing", path.string());
    return out;
}

bool starts_with_letter(std::string_view s) {
    return !s.empty() && std::isalpha(static_cast<unsigned char>(s.front()));
}

}  // namespace

std::string format_double(double value) {
    std::array<char, 64> buffer{};
    const auto [ptr, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
    if (ec != std::errc()) throw std::runtime_error("to_chars failed");
    return {buffer.data(), ptr};
}

double parse_double(std::string_view token, const std::string& field, int line) {
    token = trim(token);
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    double value = 0.0;
    const auto* end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (token.empty() || ec != std::errc() || ptr != end)
        throw ValidationError("expected a decimal number, got '" + std::string(token) + "'", field, at_line(line));
    if (!std::isfinite(value)) throw ValidationError("value is not finite", field, at_line(line));
    return value;
}

// ---------------------------------------------------------------------------
// Model files

GridModel read_model(std::istream& in, const std::string& source) {
    enum class Section { None, Nodes, Lines };
    Section section = Section::None;
    GridModel model;
    std::unordered_map<int, int> index_of;
    std::set<std::pair<int, int>> pairs;
    std::string raw;
    int line_no = 0;
    bool saw_nodes = false;

    while (std::getline(in, raw)) {
        ++line_no;
        const auto text = strip_comment(raw);
        if (text.empty()) continue;
        if (text.front() == '[') {
            if (text == "[nodes]") {
                section = Section::Nodes;
                saw_nodes = true;
            } else if (text == "[lines]") {
                section = Section::Lines;
            } else {
                throw ValidationError("unknown section " + std::string(text), source, line_no);
            }
            continue;
        }
        const auto fields = split_commas(text);
        if (starts_with_letter(fields.front())) continue;  // column-name row

        if (section == Section::Nodes) {
            if (fields.size() != 2 && fields.size() != 5)
                throw ValidationError("expected id,is_generator,M,D,sigma_P", "nodes", line_no);
            const int id = parse_int(fields[0], "nodes.id", line_no);
            if (id < 0) throw ValidationError("must be nonnegative", "nodes.id", line_no);
            if (!index_of.emplace(id, model.n_nodes).second)
                throw ValidationError("duplicate node id " + std::to_string(id), "nodes.id", line_no);
            const int flag = parse_int(fields[1], "nodes.is_generator", line_no);
            if (flag != 0 && flag != 1) throw ValidationError("must be 0 or 1", "nodes.is_generator", line_no);
            if (flag == 1) {
                if (fields.size() != 5)
                    throw ValidationError("generator rows need M, D and sigma_P", "nodes", line_no);
                Generator g;
                g.node = model.n_nodes;
                g.inertia = parse_double(fields[2], "nodes.M", line_no);
                g.damping = parse_double(fields[3], "nodes.D", line_no);
                g.sigma_p = parse_double(fields[4], "nodes.sigma_P", line_no);
                if (!(g.inertia > 0.0)) throw ValidationError("M must be positive", "nodes.M", line_no);
                if (!(g.damping > 0.0)) throw ValidationError("D must be positive", "nodes.D", line_no);
                if (!(g.sigma_p >= 0.0))
                    throw ValidationError("sigma_P must be nonnegative", "nodes.sigma_P", line_no);
                model.generators.push_back(g);
            } else if (fields.size() == 5) {
                for (std::size_t k = 2; k < 5; ++k)
                    if (!fields[k].empty())
                        throw ValidationError("load rows must leave M, D and sigma_P empty", "nodes", line_no);
            }
            ++model.n_nodes;
        } else if (section == Section::Lines) {
            if (fields.size() != 3 && fields.size() != 4)
                throw ValidationError("expected i,j,beta[,gamma]", "lines", line_no);
            const int from_id = parse_int(fields[0], "lines.i", line_no);
            const int to_id = parse_int(fields[1], "lines.j", line_no);
            const auto from = index_of.find(from_id);
            const auto to = index_of.find(to_id);
            if (from == index_of.end()) throw ValidationError("unknown node id " + std::to_string(from_id), "lines.i", line_no);
            if (to == index_of.end()) throw ValidationError("unknown node id " + std::to_string(to_id), "lines.j", line_no);
            if (from->second == to->second) throw ValidationError("self-loop", "lines", line_no);
            if (!pairs.insert(std::minmax(from->second, to->second)).second)
                throw ValidationError("duplicate line (" + std::to_string(from_id) + "," + std::to_string(to_id) + ")",
                                      "lines", line_no);
            Line line;
            line.from = from->second;
            line.to = to->second;
            line.beta = parse_double(fields[2], "lines.beta", line_no);
            if (!(line.beta > 0.0)) throw ValidationError("beta must be positive", "lines.beta", line_no);
            if (fields.size() == 4 && !fields[3].empty()) {
                line.gamma = parse_double(fields[3], "lines.gamma", line_no);
                if (!(line.gamma >= 0.0)) throw ValidationError("gamma must be nonnegative", "lines.gamma", line_no);
            }
            model.lines.push_back(line);
        } else {
            throw ValidationError("data outside of a [nodes] or [lines] section", source, line_no);
        }
    }
    if (!saw_nodes) throw ValidationError("missing [nodes] section", source);
    try {
        validate(model);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string(e.what()), source);
    }
    return model;
}

GridModel load_model(const std::filesystem::path& path) {
    auto in = open_for_reading(path);
    return read_model(in, path.string());
}

void write_model(std::ostream& out, const GridModel& model) {
    std::vector<const Generator*> by_node(static_cast<std::size_t>(model.n_nodes), nullptr);
    for (const auto& g : model.generators) by_node[static_cast<std::size_t>(g.node)] = &g;
    // Generator order is part of the model; it survives a round trip only if
    // generator rows appear in that order, so write generators first.
    out << "[nodes]\nid,is_generator,M,D,sigma_P\n";
    std::vector<int> order;
    for (const auto& g : model.generators) order.push_back(g.node);
    for (int i = 0; i < model.n_nodes; ++i)
        if (by_node[static_cast<std::size_t>(i)] == nullptr) order.push_back(i);
    std::vector<int> id_of(static_cast<std::size_t>(model.n_nodes));
    for (std::size_t k = 0; k < order.size(); ++k) id_of[static_cast<std::size_t>(order[k])] = static_cast<int>(k);
    for (int node : order) {
        const auto* g = by_node[static_cast<std::size_t>(node)];
        out << id_of[static_cast<std::size_t>(node)];
        if (g != nullptr)
            out << ",1," << format_double(g->inertia) << ',' << format_double(g->damping) << ','
                << format_double(g->sigma_p) << '\n';
        else
            out << ",0,,,\n";
    }
    out << "[lines]\ni,j,beta,gamma\n";
    for (const auto& line : model.lines)
        out << id_of[static_cast<std::size_t>(line.from)] << ',' << id_of[static_cast<std::size_t>(line.to)] << ','
            << format_double(line.beta) << ',' << format_double(line.gamma) << '\n';
}

void save_model(const std::filesystem::path& path, const GridModel& model) {
    auto out = open_for_writing(path);
    write_model(out, model);
}

// ---------------------------------------------------------------------------
// Trajectories

Trajectory read_trajectory(std::istream& in, const std::string& source) {
    std::string raw;
    int line_no = 0;
    std::optional<std::uint64_t> seed;
    std::vector<std::string_view> header;
    std::string header_text;

    while (std::getline(in, raw)) {
        ++line_no;
        const auto t = trim(raw);
        if (t.empty()) continue;
        if (t.front() == '#') {
            const auto body = trim(t.substr(1));
            if (body.rfind("seed:", 0) == 0) {
                const auto value = trim(body.substr(5));
                std::uint64_t parsed = 0;
                const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
                if (ec != std::errc() || ptr != value.data() + value.size())
                    throw ValidationError("malformed seed comment", source, line_no);
                seed = parsed;
            }
            continue;
        }
        header_text = std::string(t);
        break;
    }
    if (header_text.empty()) throw ValidationError("missing header row", source);
    header = split_commas(header_text);
    if (header.empty() || header.front() != "t")
        throw ValidationError("header must start with 't'", "header", line_no);

    int n_delta = 0;
    int n_omega = 0;
    for (std::size_t k = 1; k < header.size(); ++k) {
        const auto& name = header[k];
        if (n_omega == 0 && name == "delta_" + std::to_string(n_delta + 1)) {
            ++n_delta;
        } else if (name == "omega_" + std::to_string(n_omega + 1)) {
            ++n_omega;
        } else {
            throw ValidationError("unexpected column '" + std::string(name) +
                                      "'; expected t,delta_1..delta_N,omega_1..omega_N",
                                  "header", line_no);
        }
    }
    if (n_delta == 0 || n_delta != n_omega)
        throw ValidationError("dimension error: " + std::to_string(n_delta) + " delta columns but " +
                                  std::to_string(n_omega) + " omega columns",
                              "header", line_no);

    const auto width = header.size();
    std::vector<double> times;
    std::vector<double> values;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto text = trim(raw);
        if (text.empty() || text.front() == '#') continue;
        const auto fields = split_commas(text);
        if (fields.size() != width)
            throw ValidationError("ragged row: " + std::to_string(fields.size()) + " fields, header has " +
                                      std::to_string(width),
                                  source, line_no);
        times.push_back(parse_double(fields[0], "t", line_no));
        for (std::size_t k = 1; k < width; ++k) values.push_back(parse_double(fields[k], std::string(header[k]), line_no));
    }
    if (times.size() < 2) throw ValidationError("need at least 2 samples to infer dt", source);

    const double dt = times[1] - times[0];
    if (!(dt > 0.0)) throw ValidationError("t column must be increasing", "t");
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double expected = times[0] + static_cast<double>(i) * dt;
        const double tolerance = 1e-9 * std::max({std::abs(times[i]), std::abs(expected), dt});
        if (!(std::abs(times[i] - expected) <= tolerance))
            throw ValidationError("non-uniform spacing at sample " + std::to_string(i), "t");
    }

    Trajectory traj;
    traj.n_gen = n_delta;
    traj.dt = dt;
    traj.t0 = times[0];
    traj.seed = seed;
    const auto dim = static_cast<Eigen::Index>(width - 1);
    traj.states = Eigen::Map<const Matrix>(values.data(), dim, static_cast<Eigen::Index>(times.size()));
    return traj;
}

Trajectory load_trajectory(const std::filesystem::path& path) {
    auto in = open_for_reading(path);
    return read_trajectory(in, path.string());
}

void write_trajectory(std::ostream& out, const Trajectory& traj) {
    validate(traj);
    if (traj.seed) out << "# seed: " << *traj.seed << '\n';
    out << 't';
    for (int i = 1; i <= traj.n_gen; ++i) out << ",delta_" << i;
    for (int i = 1; i <= traj.n_gen; ++i) out << ",omega_" << i;
    out << '\n';
    std::string row;
    for (Eigen::Index k = 0; k < traj.length(); ++k) {
        row = format_double(traj.t0 + static_cast<double>(k) * traj.dt);
        for (Eigen::Index i = 0; i < traj.states.rows(); ++i) {
            row += ',';
            row += format_double(traj.states(i, k));
        }
        row += '\n';
        out << row;
    }
}

void save_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
    auto out = open_for_writing(path);
    write_trajectory(out, traj);
}

// ---------------------------------------------------------------------------
// Matrices and key-value records

Matrix read_matrix(std::istream& in, const std::string& source) {
    std::string raw;
    int line_no = 0;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto text = strip_comment(raw);
        if (text.empty()) continue;
        std::vector<double> row;
        for (const auto& f : split_commas(text)) row.push_back(parse_double(f, source, line_no));
        if (!rows.empty() && row.size() != rows.front().size())
            throw ValidationError("ragged row", source, line_no);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError("matrix file is empty", source);
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

Matrix load_matrix(const std::filesystem::path& path) {
    auto in = open_for_reading(path);
    return read_matrix(in, path.string());
}

void write_matrix(std::ostream& out, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j > 0) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

void save_matrix(const std::filesystem::path& path, const Matrix& m) {
    auto out = open_for_writing(path);
    write_matrix(out, m);
}

KeyValues read_key_values(std::istream& in, const std::string& source) {
    KeyValues values;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto text = strip_comment(raw);
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string_view::npos) throw ValidationError("expected key=value", source, line_no);
        values[std::string(trim(text.substr(0, eq)))] = std::string(trim(text.substr(eq + 1)));
    }
    return values;
}

KeyValues load_key_values(const std::filesystem::path& path) {
    auto in = open_for_reading(path);
    return read_key_values(in, path.string());
}

void write_key_values(std::ostream& out, const KeyValues& values) {
    for (const auto& [key, value] : values) out << key << '=' << value << '\n';
}

void save_key_values(const std::filesystem::path& path, const KeyValues& values) {
    auto out = open_for_writing(path);
    write_key_values(out, values);
}

std::filesystem::path metadata_path(const std::filesystem::path& matrix_path) {
    return std::filesystem::path(matrix_path.string() + ".meta");
}

void save_result(const std::filesystem::path& matrix_path, const Matrix& matrix,
                 const EstimationResult& result, const KeyValues& extra) {
    save_matrix(matrix_path, matrix);
    KeyValues meta = extra;
    meta["estimator"] = std::string(to_string(result.estimator));
    meta["objective"] = format_double(result.objective);
    for (const auto& [name, value] : result.hyperparams) meta["hyper." + name] = format_double(value);
    for (const auto& [name, value] : result.diagnostics) meta["diag." + name] = format_double(value);
    if (result.b_hat) {
        std::string joined;
        for (Eigen::Index i = 0; i < result.b_hat->size(); ++i) {
            if (i > 0) joined += ',';
            joined += format_double((*result.b_hat)(i));
        }
        meta["b_hat"] = joined;
    }
    save_key_values(metadata_path(matrix_path), meta);
}

KeyValues bound_report_to_key_values(const BoundReport& report) {
    return {
        {"which", report.which == BoundKind::Discrete ? "DISCRETE" : "CONTINUOUS"},
        {"epsilon", format_double(report.epsilon)},
        {"rhs", format_double(report.rhs)},
        {"trace_sigma0_mean", format_double(report.trace_sigma0_mean)},
        {"inv_norm_mean", format_double(report.inv_norm_mean)},
        {"n_trials", std::to_string(report.n_trials)},
        {"discarded_trials", std::to_string(report.discarded_trials)},
        {"n_samples", std::to_string(report.n_samples)},
        {"dt", format_double(report.dt)},
    };
}

BoundReport bound_report_from_key_values(const KeyValues& values) {
    const auto get = [&](const std::string& key) -> const std::string& {
        const auto it = values.find(key);
        if (it == values.end()) throw ValidationError("missing key", key);
        return it->second;
    };
    BoundReport report;
    const auto& which = get("which");
    if (which == "DISCRETE")
        report.which = BoundKind::Discrete;
    else if (which == "CONTINUOUS")
        report.which = BoundKind::Continuous;
    else
        throw ValidationError("expected DISCRETE or CONTINUOUS", "which");
    report.epsilon = parse_double(get("epsilon"), "epsilon", 0);
    report.rhs = parse_double(get("rhs"), "rhs", 0);
    report.trace_sigma0_mean = parse_double(get("trace_sigma0_mean"), "trace_sigma0_mean", 0);
    report.inv_norm_mean = parse_double(get("inv_norm_mean"), "inv_norm_mean", 0);
    report.n_trials = parse_int(get("n_trials"), "n_trials", 0);
    report.discarded_trials = parse_int(get("discarded_trials"), "discarded_trials", 0);
    report.n_samples = parse_int(get("n_samples"), "n_samples", 0);
    report.dt = parse_double(get("dt"), "dt", 0);
    return report;
}

void write_eigen_table(std::ostream& out, const std::vector<EigenRow>& rows) {
    out << "re,im,source\n";
    for (const auto& row : rows)
        out << format_double(row.value.real()) << ',' << format_double(row.value.imag()) << ',' << row.source << '\n';
}

std::vector<EigenRow> read_eigen_table(std::istream& in, const std::string& source) {
    std::string raw;
    int line_no = 0;
    std::vector<EigenRow> rows;
    bool header = false;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto text = strip_comment(raw);
        if (text.empty()) continue;
        if (!header) {
            if (text != "re,im,source") throw ValidationError("expected header re,im,source", source, line_no);
            header = true;
            continue;
        }
        const auto fields = split_commas(text);
        if (fields.size() != 3) throw ValidationError("expected re,im,source", source, line_no);
        rows.push_back({{parse_double(fields[0], "re", line_no), parse_double(fields[1], "im", line_no)},
                        std::string(fields[2])});
    }
    return rows;
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file", path.string());
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char c = 0;
    while (in.get(c)) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << hash;
    return out.str();
}

}  // namespace swingid
