#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bilstm_ae {

/// Operand shapes do not conform.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// An argument is outside its documented domain.
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A model or pipeline configuration violates its invariants.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A caller broke a documented precondition (e.g. anomalous windows passed to training).
struct ContractViolation : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Mismatched caches or other broken internal bookkeeping.
struct InternalError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Non-finite loss or gradient encountered during fitting.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// CSV ingestion failure. `row()` is 1-based over data rows (header excluded), 0 if not row specific.
class IngestionError : public std::runtime_error {
public:
    IngestionError(std::size_t row, const std::string& what)
        : std::runtime_error(row == 0 ? what : "row " + std::to_string(row) + ": " + what), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

struct ModelLoadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ModelVersionError : ModelLoadError {
    using ModelLoadError::ModelLoadError;
};
struct ModelCorruptError : ModelLoadError {
    using ModelLoadError::ModelLoadError;
};
struct ModelTruncatedError : ModelLoadError {
    using ModelLoadError::ModelLoadError;
};
struct ModelShapeError : ModelLoadError {
    using ModelLoadError::ModelLoadError;
};

} // namespace bilstm_ae
