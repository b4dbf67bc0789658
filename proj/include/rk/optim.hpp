#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace rk {

struct NelderMeadOptions {
    std::size_t max_evaluations = 20000;
    double f_tol = 1e-10; // spread of simplex values
    double x_tol = 1e-8;  // simplex diameter
    double initial_step = 0.5;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t evaluations = 0;
    bool converged = false;
};

/// Derivative-free simplex minimisation with the usual reflection,
/// expansion, contraction and shrink coefficients (1, 2, 0.5, 0.5).
/// Non-finite objective values are treated as +inf.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                             const NelderMeadOptions& opt = {});

} // namespace rk
