#include "swingid/config.hpp"

#include "swingid/errors.hpp"
#include "swingid/io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace swingid {

namespace pt = boost::property_tree;

namespace {

std::string trimmed(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        parts.push_back(trimmed(text.substr(start, pos == std::string::npos ? pos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return parts;
}

bool parse_bool(const std::string& text, const std::string& field) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ValidationError("expected true or false, got '" + text + "'", field);
}

std::uint64_t parse_u64(const std::string& text, const std::string& field) {
    std::uint64_t value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc() || ptr != end)
        throw ValidationError("expected a nonnegative integer, got '" + text + "'", field);
    return value;
}

std::int64_t parse_i64(const std::string& text, const std::string& field) {
    std::int64_t value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc() || ptr != end)
        throw ValidationError("expected an integer, got '" + text + "'", field);
    return value;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
    const std::filesystem::path p(value);
    return p.is_absolute() || base.empty() ? p : base / p;
}

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"model", {"path"}},
        {"generation", {"dt_base", "t_obs", "burn_in", "seeds"}},
        {"estimation",
         {"stride", "estimators", "threshold", "estimate_b", "nu", "lambda", "eta", "a_prev", "tolerance",
          "max_iterations", "condition_threshold", "pseudo_inverse"}},
        {"outputs", {"directory"}},
        {"sweep", {"variable", "values"}},
    };
    return keys;
}

}  // namespace

double parse_number(const std::string& text, const std::string& field) {
    const auto slash = text.find('/');
    if (slash == std::string::npos) return parse_double(trimmed(text), field, 0);
    const double num = parse_double(trimmed(text.substr(0, slash)), field, 0);
    const double den = parse_double(trimmed(text.substr(slash + 1)), field, 0);
    if (den == 0.0) throw ValidationError("division by zero", field);
    return num / den;
}

std::vector<double> parse_number_list(const std::string& text, const std::string& field) {
    std::vector<double> values;
    for (const auto& part : split(text, ',')) {
        if (part.empty()) throw ValidationError("empty list entry", field);
        values.push_back(parse_number(part, field));
    }
    return values;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text, const std::string& field) {
    std::vector<std::uint64_t> seeds;
    for (const auto& part : split(text, ',')) {
        if (part.empty()) throw ValidationError("empty list entry", field);
        const auto dash = part.find('-');
        if (dash == std::string::npos) {
            seeds.push_back(parse_u64(part, field));
            continue;
        }
        const auto lo = parse_u64(trimmed(part.substr(0, dash)), field);
        const auto hi = parse_u64(trimmed(part.substr(dash + 1)), field);
        if (hi < lo) throw ValidationError("descending seed range " + part, field);
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    }
    return seeds;
}

Eigen::Index samples_at_base(double t_obs, double dt_base) {
    if (!(dt_base > 0.0)) throw ValidationError("must be positive", "generation.dt_base");
    if (!(t_obs > 0.0)) throw ValidationError("must be positive", "generation.t_obs");
    const double ratio = t_obs / dt_base;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-6 * std::max(1.0, ratio))
        throw ValidationError("t_obs is not a whole number of dt_base steps", "generation.t_obs");
    return static_cast<Eigen::Index>(rounded);
}

Eigen::Index samples_after_stride(Eigen::Index n_samples, Eigen::Index stride) {
    if (stride < 1) throw ValidationError("must be at least 1", "estimation.stride");
    return (n_samples + stride - 1) / stride;
}

ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir, const std::string& source) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ValidationError(e.message(), source, static_cast<int>(e.line()));
    }

    for (const auto& [section, body] : tree) {
        const auto it = known_keys().find(section);
        if (it == known_keys().end()) {
            if (body.empty()) throw ValidationError("key outside of any section", section);
            throw ValidationError("unknown section [" + section + "]", source);
        }
        for (const auto& [key, value] : body)
            if (!it->second.count(key)) throw ValidationError("unknown key", section + "." + key);
    }

    const auto get = [&](const std::string& path) -> std::optional<std::string> {
        if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '.'))) return trimmed(*v);
        return std::nullopt;
    };

    ExperimentConfig config;
    if (auto v = get("model.path")) config.model_path = resolve(base_dir, *v);

    auto& gen = config.generation;
    if (auto v = get("generation.dt_base")) gen.dt_base = parse_number(*v, "generation.dt_base");
    if (auto v = get("generation.t_obs")) gen.t_obs = parse_number(*v, "generation.t_obs");
    if (auto v = get("generation.burn_in")) gen.burn_in = parse_i64(*v, "generation.burn_in");
    if (auto v = get("generation.seeds")) gen.seeds = parse_seed_list(*v, "generation.seeds");

    auto& est = config.estimation;
    if (auto v = get("estimation.stride")) est.stride = parse_i64(*v, "estimation.stride");
    if (auto v = get("estimation.estimators")) {
        est.estimators.clear();
        for (const auto& tag : split(*v, ',')) {
            try {
                est.estimators.push_back(parse_estimator(tag));
            } catch (const ValidationError& e) {
                throw ValidationError(e.what(), "estimation.estimators");
            }
        }
    }
    if (auto v = get("estimation.threshold")) est.threshold = parse_bool(*v, "estimation.threshold");
    if (auto v = get("estimation.estimate_b")) est.estimate_b = parse_bool(*v, "estimation.estimate_b");
    if (auto v = get("estimation.nu")) est.nu = parse_number(*v, "estimation.nu");
    if (auto v = get("estimation.lambda")) est.lambda = parse_number(*v, "estimation.lambda");
    if (auto v = get("estimation.eta")) est.eta = parse_number(*v, "estimation.eta");
    if (auto v = get("estimation.a_prev")) est.a_prev_path = resolve(base_dir, *v);
    if (auto v = get("estimation.tolerance")) est.solver.tolerance = parse_number(*v, "estimation.tolerance");
    if (auto v = get("estimation.max_iterations"))
        est.solver.max_iterations = static_cast<int>(parse_i64(*v, "estimation.max_iterations"));
    if (auto v = get("estimation.condition_threshold"))
        est.solver.condition_threshold = parse_number(*v, "estimation.condition_threshold");
    if (auto v = get("estimation.pseudo_inverse"))
        est.solver.pseudo_inverse = parse_bool(*v, "estimation.pseudo_inverse");

    if (auto v = get("outputs.directory")) config.output_dir = resolve(base_dir, *v);
    else config.output_dir = resolve(base_dir, "out");

    if (tree.get_child_optional("sweep")) {
        SweepConfig sweep;
        if (auto v = get("sweep.variable")) {
            if (*v == "stride")
                sweep.variable = SweepVariable::Stride;
            else if (*v == "t_obs")
                sweep.variable = SweepVariable::TObs;
            else
                throw ValidationError("expected stride or t_obs", "sweep.variable");
        }
        if (auto v = get("sweep.values")) sweep.values = parse_number_list(*v, "sweep.values");
        config.sweep = sweep;
    }

    validate(config);
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file", path.string());
    return parse_config(in, path.parent_path(), path.string());
}

std::vector<std::string> validate(const ExperimentConfig& config, int n_gen) {
    std::vector<std::string> warnings;
    const auto& gen = config.generation;
    const auto& est = config.estimation;
    if (gen.seeds.empty()) throw ValidationError("must not be empty", "generation.seeds");
    const Eigen::Index base = samples_at_base(gen.t_obs, gen.dt_base);
    if (est.stride < 1) throw ValidationError("must be at least 1", "estimation.stride");
    if (est.estimators.empty()) throw ValidationError("must not be empty", "estimation.estimators");
    if (est.nu < 0.0) throw ValidationError("must be nonnegative", "estimation.nu");
    if (est.lambda < 0.0) throw ValidationError("must be nonnegative", "estimation.lambda");
    if (est.eta < 0.0) throw ValidationError("must be nonnegative", "estimation.eta");
    if (!(est.solver.tolerance > 0.0)) throw ValidationError("must be positive", "estimation.tolerance");
    if (est.solver.max_iterations < 1) throw ValidationError("must be at least 1", "estimation.max_iterations");
    if (!(est.solver.condition_threshold > 1.0))
        throw ValidationError("must exceed 1", "estimation.condition_threshold");
    if (base < 2) throw ValidationError("window holds fewer than 2 samples", "generation.t_obs");
    if (config.sweep) {
        if (config.sweep->values.empty()) throw ValidationError("must not be empty", "sweep.values");
        for (double v : config.sweep->values) {
            if (config.sweep->variable == SweepVariable::Stride) {
                if (!(v >= 1.0 && v == std::floor(v)))
                    throw ValidationError("strides must be positive integers", "sweep.values");
            } else {
                samples_at_base(v, gen.dt_base);
            }
        }
    }
    if (n_gen > 0) {
        const auto check = [&](Eigen::Index n_base, Eigen::Index stride) {
            const auto t = samples_after_stride(n_base, stride);
            if (t <= 2 * n_gen + 2)
                warnings.push_back("only " + std::to_string(t) + " samples after stride " + std::to_string(stride) +
                                   "; estimation needs more than " + std::to_string(2 * n_gen + 2));
        };
        check(base, est.stride);
        if (config.sweep) {
            for (double v : config.sweep->values) {
                if (config.sweep->variable == SweepVariable::Stride)
                    check(base, static_cast<Eigen::Index>(v));
                else
                    check(samples_at_base(v, gen.dt_base), est.stride);
            }
        }
    }
    return warnings;
}

}  // namespace swingid
