#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace xfer {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Inputs with inconsistent sizes or values outside a documented domain.
class DimensionError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class UndefinedRelativeDegree : public Error {
public:
    using Error::Error;
};

// An output channel never responded inside a step-experiment record.
class UndetectableDegree : public Error {
public:
    UndetectableDegree(const std::string& what, int output)
        : Error(what), output_(output) {}
    int output() const noexcept { return output_; }

private:
    int output_;
};

class UnobservableError : public Error {
public:
    using Error::Error;
};

// The QP constraint set has no feasible point. `violated_row` is the
// constraint that could not be satisfied together with `active_rows`.
class InfeasibleProblem : public Error {
public:
    InfeasibleProblem(const std::string& what, int violated_row, std::vector<int> active_rows)
        : Error(what), violated_row_(violated_row), active_rows_(std::move(active_rows)) {}
    int violated_row() const noexcept { return violated_row_; }
    const std::vector<int>& active_rows() const noexcept { return active_rows_; }

private:
    int violated_row_;
    std::vector<int> active_rows_;
};

class SolverError : public Error {
public:
    using Error::Error;
};

class ControllerFault : public Error {
public:
    using Error::Error;
};

class RolloutDiverged : public Error {
public:
    RolloutDiverged(const std::string& what, std::size_t step) : Error(what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class MissingFeedback : public Error {
public:
    MissingFeedback(const std::string& what, std::size_t step) : Error(what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace xfer
