#include "rk/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace rk {

namespace {

void check_pair(std::span<const double> pred, std::span<const double> actual) {
    if (pred.size() != actual.size())
        throw std::invalid_argument("metrics: length mismatch");
    if (pred.empty())
        throw std::invalid_argument("metrics: empty input");
}

int direction(double delta, double band) {
    if (delta > band) return 1;
    if (delta < -band) return -1;
    return 0;
}

} // namespace

double mae(std::span<const double> pred, std::span<const double> actual) {
    check_pair(pred, actual);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - actual[i]);
    return s / static_cast<double>(pred.size());
}

double mse(std::span<const double> pred, std::span<const double> actual) {
    check_pair(pred, actual);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - actual[i];
        s += e * e;
    }
    return s / static_cast<double>(pred.size());
}

double mda(std::span<const double> pred, std::span<const double> actual, const MdaConfig& cfg) {
    if (pred.size() != actual.size())
        throw std::invalid_argument("mda: length mismatch");
    if (pred.size() < 2)
        throw std::invalid_argument("mda: need at least 2 points");
    if (cfg.flat_threshold < 0.0)
        throw std::invalid_argument("mda: negative flat threshold");
    std::size_t hits = 0;
    for (std::size_t t = 1; t < pred.size(); ++t) {
        const double base = actual[t - 1];
        if (direction(pred[t] - base, cfg.flat_threshold) == direction(actual[t] - base, cfg.flat_threshold))
            ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(pred.size() - 1);
}

} // namespace rk
