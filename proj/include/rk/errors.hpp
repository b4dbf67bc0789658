#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rk {

/// Raised when a computation produces non-finite values or fails to converge.
/// Bad arguments use std::invalid_argument instead.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DivergenceError : public NumericalError {
public:
    DivergenceError(const std::string& what, std::size_t step)
        : NumericalError(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, double best)
        : NumericalError(what), best_(best) {}
    double best_estimate() const { return best_; }

private:
    double best_;
};

} // namespace rk
