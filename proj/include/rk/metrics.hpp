#pragma once

#include <span>

namespace rk {

struct MdaConfig {
    double flat_threshold = 0.05;
};

double mae(std::span<const double> pred, std::span<const double> actual);
double mse(std::span<const double> pred, std::span<const double> actual);

/// Direction of each move is taken against the previous actual value for both
/// series, so step t compares sign(pred[t] - actual[t-1]) with
/// sign(actual[t] - actual[t-1]) using a flat band of +-flat_threshold.
double mda(std::span<const double> pred, std::span<const double> actual, const MdaConfig& cfg = {});

} // namespace rk
