#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace swingid {

/// Malformed input: bad file contents, violated model invariants, bad arguments.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& message, std::string field = {},
                             std::optional<int> line = std::nullopt)
        : std::runtime_error(format(message, field, line)), field_(std::move(field)), line_(line) {}

    [[nodiscard]] const std::string& field() const noexcept { return field_; }
    [[nodiscard]] std::optional<int> line() const noexcept { return line_; }

private:
    static std::string format(const std::string& message, const std::string& field,
                              std::optional<int> line) {
        std::string out;
        if (line) out += "line " + std::to_string(*line) + ": ";
        if (!field.empty()) out += field + ": ";
        return out + message;
    }

    std::string field_;
    std::optional<int> line_;
};

/// The numbers are valid but the computation cannot proceed (singular
/// covariance, solver did not converge, eigensolver failure).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace swingid
