#pragma once

#include "swingid/config.hpp"
#include "swingid/estimators.hpp"
#include "swingid/io.hpp"
#include "swingid/model.hpp"
#include "swingid/sim.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace swingid {

struct PreparedModel {
    GridModel model;
    ContinuousSystem continuous;
    DiscreteSystem base;  // Euler map at dt_base
    Eigen::Index default_burn_in = 0;
};

PreparedModel prepare_model(const GridModel& model, double dt_base);

/// Stationary trajectory of n_samples states at dt_base; burn_in < 0 uses the
/// model's default.
Trajectory generate_trajectory(const PreparedModel& prepared, Eigen::Index n_samples, Eigen::Index burn_in,
                               std::uint64_t seed);

struct EstimateRun {
    EstimationResult result;
    Matrix a_hat_d;
    Eigen::Index n_samples = 0;  // after striding
    double dt = 0.0;             // after striding
    Eigen::Index stride = 1;
    std::optional<double> error;  // relative Frobenius error against the truth
};

/// Strides the trajectory, checks T > 2N + 2, runs one estimator, thresholds
/// UML estimates when requested, and maps the estimate to continuous time.
EstimateRun run_estimator(const Trajectory& trajectory, EstimatorKind kind, const EstimationConfig& settings,
                          const Matrix* truth_a_d = nullptr, const Matrix* a_prev = nullptr);

/// Metadata entries describing a run (T, dt, stride, error).
KeyValues run_metadata(const EstimateRun& run);

struct SweepCell {
    double axis_value = 0.0;
    EstimatorKind estimator = EstimatorKind::Uml;
    std::uint64_t seed = 0;
    double eps = 0.0;
    bool failed = false;
    std::string message;
};

struct SweepMean {
    double axis_value = 0.0;
    EstimatorKind estimator = EstimatorKind::Uml;
    double mean_eps = 0.0;
    int n_ok = 0;
    int n_failed = 0;
};

/// One cell per (axis value, estimator, seed); every estimator of a given
/// (axis value, seed) sees the same trajectory. Failures are recorded in the
/// cell. The result is sorted by (axis value, estimator, seed) and does not
/// depend on `threads` (0 picks the hardware concurrency).
std::vector<SweepCell> run_sweep(const PreparedModel& prepared, const ExperimentConfig& config,
                                 const Matrix* a_prev = nullptr, unsigned threads = 0);

std::vector<SweepMean> summarize(const std::vector<SweepCell>& cells);

void write_sweep_table(std::ostream& out, const std::vector<SweepCell>& cells);
void write_mean_table(std::ostream& out, const std::vector<SweepMean>& means);

}  // namespace swingid
