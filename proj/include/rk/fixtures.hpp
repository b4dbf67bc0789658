#pragma once

// Reference tasks shared by the tests, the acceptance runner and the CLI
// data generator. Every fixture is a pure function of its seed.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rk/crosscorr.hpp"
#include "rk/esn.hpp"
#include "rk/quantum.hpp"
#include "rk/variants.hpp"

namespace rk::fixtures {

// ------------------------------------------------------- periodic toy task

/// u(t) = sin(t/5), y(t) = u(t)^7 / 2 for t = 0..149; the first 100 steps
/// train, the last 50 are predicted by free run.
struct PeriodicTask {
    Mat<double> inputs;  // 150 x 1
    Mat<double> targets; // 150 x 1
    std::size_t train = 100;
    std::size_t test = 50;
};

PeriodicTask periodic_task();

enum class ReservoirStyle { inhomogeneous_sparse, inhomogeneous_dense, homogeneous_sparse, homogeneous_dense };

std::string to_string(ReservoirStyle s);

/// N = 200, rho 1.3, leak 0.8, feedback noise 0.1, gamma 0.01, tanh output,
/// W_back in {-1, 1}, W_in in {0, -1, 1}; density 5% or 100%.
EsnConfig periodic_config(ReservoirStyle style, std::uint64_t seed);

/// Test MSE of the 50-step free run.
double periodic_test_mse(ReservoirStyle style, std::uint64_t seed);

// ---------------------------------------------------------- heat equation

/// y(k, t) = sin(pi k / (L - 1)) exp(-t dt) for t = 0..steps.
Mat<double> heat_solution(std::size_t points = 100, std::size_t steps = 2500, double dt = 0.002);

/// N = 400, density 2%, rho 0.9, tanh output, W_back uniform on [-0.5, 0.5],
/// 500 training steps with 200 discarded. The improved variant adds feedback
/// noise 0.001, gamma 1e-12 and a constant input of dimension 5 with W_in in
/// {0, -0.14, 0.14}; the plain one uses no input and gamma = 0.
EsnConfig heat_config(bool improved, std::uint64_t seed);

inline constexpr std::size_t kHeatTrainSteps = 500;

struct HeatOutcome {
    double test_mse = 0.0; // +inf when training or the free run failed
    bool failed = false;
    std::string failure;
};

/// Trains on steps 0..499 and free-runs to the end of the solution.
HeatOutcome heat_free_run(bool improved, std::uint64_t seed);

// ------------------------------------------------- seasonal benchmark

/// Weekly-like series: trend + period-52 pattern + a residual driven by the
/// first regressor. 360 training and 60 test points; two regressors.
struct SeasonalSeries {
    std::vector<double> y;
    Mat<double> regressors; // n x 2
    std::size_t period = 52;
    std::size_t train = 360;
    std::size_t test = 60;
};

SeasonalSeries seasonal_benchmark(std::uint64_t seed);

/// Single reservoir: leak 0.81, N 120, gamma 2.6, rho 0.52, density 0.012.
EsnConfig srcrc_config(std::uint64_t seed);

/// Ensembles per component with the trend/seasonal/residual settings
/// (0.58, 60, 0.011, 1.1, 0.016, 80), (0.74, 20, 0.011, 0.32, 0.023, 100),
/// (0.91, 60, 7.24, 0.85, 0.022, 120) as (leak, N, gamma, rho, density, N_e).
DrcConfig drc_config(std::uint64_t seed, std::size_t period = 52);

struct PairedMae {
    double srcrc = 0.0;
    double drc = 0.0;
};

/// Both models see the series scaled to [-1, 1] on the training span and
/// forecast the test span by free run with the true future regressors. MAEs
/// are in original units.
PairedMae seasonal_comparison(std::uint64_t seed);

// ------------------------------------------------- cross-correlation

/// A white; B[t] = A[t-1] + e_B[t]; C[t] = e_B[t-2] + 0.5 e_C[t].
std::vector<std::vector<double>> chain_series(std::size_t n, std::uint64_t seed);

inline constexpr double kChainZ = 3.29;
inline constexpr int kChainMaxLag = 5;

/// True when the network is exactly {A->B lag 1, B->C lag 2}.
bool is_planted_chain(const CcfNetwork& net);

struct LagShiftFixture {
    std::vector<double> target;
    std::vector<Candidate> candidates;
    std::vector<std::size_t> planted;
    std::size_t train = 350;
    EsnConfig evaluator;
    std::size_t members = 3;
};

/// y[t] = tanh(x[t-2]) + 0.05 e[t] with x an AR(1); candidates are two noise
/// series and x delayed by two.
LagShiftFixture lag_shift_fixture(std::uint64_t seed);

// ------------------------------------------------------------- residuals

/// 80% N(0, 0.1^2), 20% negated Exp(mean 0.4): skewed with a heavy left tail.
std::vector<double> skewed_residuals(std::size_t n, std::uint64_t seed);

// ------------------------------------------------------------- quantum

struct QuantumPreset {
    std::string name;
    PotentialSpec potential;
    Wavefunction psi0;
    double dt = 0.0;
    std::size_t steps = 0;        // oracle propagation length
    Window window = Window::rectangular;
    double prominence = 0.07;
    std::vector<double> analytic; // known levels, empty when none
    RcPropagationConfig rc;       // reservoir settings for the rc mode
};

/// ho1d, morse, quartic_poly or ho2d. Throws std::invalid_argument otherwise.
QuantumPreset quantum_preset(const std::string& name, std::uint64_t seed = 1);

std::vector<std::string> quantum_preset_names();

} // namespace rk::fixtures
