#pragma once

#include "swingid/analysis.hpp"
#include "swingid/estimators.hpp"
#include "swingid/model.hpp"
#include "swingid/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace swingid {

using KeyValues = std::map<std::string, std::string>;

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

/// Strict decimal parse of the whole token; rejects NaN and infinities.
double parse_double(std::string_view token, const std::string& field, int line);

// Model files -------------------------------------------------------------
//
//   # comment
//   [nodes]
//   id,is_generator,M,D,sigma_P
//   1,1,2.5,1.0,0.01
//   2,0,,,
//   [lines]
//   i,j,beta,gamma
//   1,2,7.5
//
// Node ids are arbitrary non-negative integers; nodes are indexed in order of
// appearance. The column-name rows are optional.

GridModel read_model(std::istream& in, const std::string& source = "<stream>");
GridModel load_model(const std::filesystem::path& path);
void write_model(std::ostream& out, const GridModel& model);
void save_model(const std::filesystem::path& path, const GridModel& model);

// Trajectory files ----------------------------------------------------------
//
//   # seed: 7                       (optional)
//   t,delta_1,...,delta_N,omega_1,...,omega_N
//   0,...
//
// dt is t[1] - t[0]; the t column must be uniformly spaced within 1e-9 relative.

Trajectory read_trajectory(std::istream& in, const std::string& source = "<stream>");
Trajectory load_trajectory(const std::filesystem::path& path);
void write_trajectory(std::ostream& out, const Trajectory& traj);
void save_trajectory(const std::filesystem::path& path, const Trajectory& traj);

// Matrices, metadata and reports -------------------------------------------

Matrix read_matrix(std::istream& in, const std::string& source = "<stream>");
Matrix load_matrix(const std::filesystem::path& path);
void write_matrix(std::ostream& out, const Matrix& m);
void save_matrix(const std::filesystem::path& path, const Matrix& m);

/// `key=value` lines; '#' starts a comment.
KeyValues read_key_values(std::istream& in, const std::string& source = "<stream>");
KeyValues load_key_values(const std::filesystem::path& path);
void write_key_values(std::ostream& out, const KeyValues& values);
void save_key_values(const std::filesystem::path& path, const KeyValues& values);

/// Sidecar path for a matrix file: "<path>.meta".
std::filesystem::path metadata_path(const std::filesystem::path& matrix_path);

/// Writes the estimate's matrix to `matrix_path` and its metadata sidecar.
/// `extra` entries (T, dt, stride, ...) are merged into the sidecar.
void save_result(const std::filesystem::path& matrix_path, const Matrix& matrix,
                 const EstimationResult& result, const KeyValues& extra = {});

KeyValues bound_report_to_key_values(const BoundReport& report);
BoundReport bound_report_from_key_values(const KeyValues& values);

struct EigenRow {
    Complex value;
    std::string source;
};
void write_eigen_table(std::ostream& out, const std::vector<EigenRow>& rows);
std::vector<EigenRow> read_eigen_table(std::istream& in, const std::string& source = "<stream>");

/// FNV-1a 64-bit digest of a file's bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

}  // namespace swingid
