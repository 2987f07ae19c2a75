#ifndef BATTROM_ERRORS_HPP
#define BATTROM_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace battrom {

/// Base class for all library errors. `category()` is stable across
/// releases and maps to CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& msg)
        : std::runtime_error(msg), category_(std::move(category)) {}
    const std::string& category() const { return category_; }

private:
    std::string category_;
};

/// Mesh/array dimensions do not fit together (non-divisible lengths, ...).
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error("dimension", msg) {}
};

/// A configuration value is out of range or a region degenerates.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

/// Macro partition does not align with the voxel grid.
class PartitionError : public Error {
public:
    explicit PartitionError(const std::string& msg) : Error("partition", msg) {}
};

/// An API precondition was violated (length mismatch, wrong layout, ...).
class ContractError : public Error {
public:
    explicit ContractError(const std::string& msg) : Error("contract", msg) {}
};

/// Input data contains non-finite or otherwise unusable values.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error("data", msg) {}
};

/// Grid/face data is inconsistent at operator assembly time.
class AssemblyError : public Error {
public:
    explicit AssemblyError(const std::string& msg) : Error("assembly", msg) {}
};

/// A scalar function was evaluated outside its domain of definition.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error("domain", msg) {}
};

/// A nonlinear operator was evaluated at an inadmissible state.
/// Carries the interior-face index that triggered the failure (-1 if
/// the failure is not tied to a face).
class EvaluationError : public Error {
public:
    EvaluationError(const std::string& msg, int face)
        : Error("evaluation", msg), face_(face) {}
    int face() const { return face_; }

private:
    int face_;
};

/// Direct solver breakdown (singular or numerically unusable matrix).
class FactorizationError : public Error {
public:
    explicit FactorizationError(const std::string& msg) : Error("factorization", msg) {}
};

/// Newton ran out of iterations. Carries the residual-norm history and,
/// when raised from a time stepper, the offending step index.
class NonconvergenceError : public Error {
public:
    NonconvergenceError(const std::string& msg, std::vector<double> residual_history,
                        int step = -1)
        : Error("nonconvergence", msg),
          residual_history_(std::move(residual_history)),
          step_(step) {}
    const std::vector<double>& residual_history() const { return residual_history_; }
    int step() const { return step_; }

private:
    std::vector<double> residual_history_;
    int step_;
};

/// File format or filesystem failure.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error("io", msg) {}
};

} // namespace battrom

#endif
