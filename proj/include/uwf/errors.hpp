#pragma once

#include <stdexcept>
#include <string>

namespace uwf {

/// Malformed bytes: bad magic, truncated payload, inconsistent lengths.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Well-formed input the toolkit deliberately does not handle
/// (e.g. fortran-order arrays, ASCII STL, exotic dtypes).
struct UnsupportedError : std::runtime_error {
    explicit UnsupportedError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A caller broke a documented precondition (shape mismatch, bad config value).
struct ContractError : std::invalid_argument {
    explicit ContractError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// The time integrator produced a non-finite field.
struct SimulationDiverged : std::runtime_error {
    int step;
    explicit SimulationDiverged(int step_, const std::string& msg)
        : std::runtime_error(msg), step(step_) {}
};

/// Training loss became non-finite.
struct TrainingDiverged : std::runtime_error {
    int epoch;
    int batch;
    TrainingDiverged(int epoch_, int batch_, const std::string& msg)
        : std::runtime_error(msg), epoch(epoch_), batch(batch_) {}
};

} // namespace uwf
