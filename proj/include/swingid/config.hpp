#pragma once

#include "swingid/estimators.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace swingid {

struct GenerationConfig {
    double dt_base = 1.0 / 60.0;
    double t_obs = 600.0;
    Eigen::Index burn_in = -1;  // negative: default_burn_in of the model
    std::vector<std::uint64_t> seeds{1};
};

struct EstimationConfig {
    Eigen::Index stride = 3;
    std::vector<EstimatorKind> estimators{EstimatorKind::Cml, EstimatorKind::Uml};
    bool threshold = true;     // zero the lower-right off-diagonal block of UML estimates
    bool estimate_b = false;
    double nu = 0.0;
    double lambda = 0.0;
    double eta = 0.0;
    std::filesystem::path a_prev_path;  // Tikhonov prior; empty means the identity
    SolverOptions solver;
};

enum class SweepVariable { Stride, TObs };

struct SweepConfig {
    SweepVariable variable = SweepVariable::Stride;
    std::vector<double> values{1, 2, 3, 4, 5, 6, 10, 15, 20, 30};
};

struct ExperimentConfig {
    std::filesystem::path model_path;
    GenerationConfig generation;
    EstimationConfig estimation;
    std::filesystem::path output_dir{"out"};
    std::optional<SweepConfig> sweep;
};

/// Parses the sectioned key=value format:
///
///   [model]       path
///   [generation]  dt_base, t_obs, burn_in, seeds
///   [estimation]  stride, estimators, threshold, estimate_b, nu, lambda, eta,
///                 a_prev, tolerance, max_iterations, condition_threshold,
///                 pseudo_inverse
///   [outputs]     directory
///   [sweep]       variable (stride | t_obs), values
///
/// Numbers may be written as fractions ("1/60"). Seed lists accept ranges
/// ("1-50"). Relative paths resolve against `base_dir`. Unknown sections or
/// keys are errors.
ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {},
                              const std::string& source = "<stream>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Invariant checks; returns warnings for soft problems. With n_gen > 0 the
/// strided sample count is compared against 2N + 2.
std::vector<std::string> validate(const ExperimentConfig& config, int n_gen = 0);

/// Samples recorded at dt_base for a window of t_obs seconds.
Eigen::Index samples_at_base(double t_obs, double dt_base);

/// Samples left after keeping every stride-th one.
Eigen::Index samples_after_stride(Eigen::Index n_samples, Eigen::Index stride);

double parse_number(const std::string& text, const std::string& field);
std::vector<double> parse_number_list(const std::string& text, const std::string& field);
std::vector<std::uint64_t> parse_seed_list(const std::string& text, const std::string& field);

}  // namespace swingid
