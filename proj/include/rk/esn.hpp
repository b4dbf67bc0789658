#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <type_traits>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace rk {

using cplx = std::complex<double>;

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class ScalarField { real, complex };
enum class FeatureKind { linear, quadratic };
enum class OutputActivation { identity, tanh };

/// Sign pattern of the reservoir weights: inhomogeneous draws each nonzero
/// as -a or +a, homogeneous uses +a everywhere.
enum class WeightSign { inhomogeneous, homogeneous };

/// Feedback weights: uniform on [-s, s] or drawn from {-s, +s}.
enum class FeedbackDist { uniform, binary };

template <class T>
constexpr ScalarField field_of() {
    return std::is_same_v<T, double> ? ScalarField::real : ScalarField::complex;
}

struct EsnConfig {
    std::size_t input_dim = 1;   // K
    std::size_t state_dim = 100; // N
    std::size_t output_dim = 1;  // L
    double spectral_radius = 0.9;
    double density = 0.05;
    double leaking_rate = 1.0;
    double regularization = 1e-6;
    std::size_t transient = 10;
    double teacher_noise = 0.0;
    bool quadratic_readout = false;
    ScalarField field = ScalarField::real;
    std::uint64_t seed = 0;

    double input_scale = 1.0;
    double feedback_scale = 0.5;
    FeedbackDist feedback_dist = FeedbackDist::uniform;
    WeightSign weight_sign = WeightSign::inhomogeneous;
    OutputActivation output_activation = OutputActivation::identity;
    /// When set, every input channel is held at this value whenever no
    /// explicit inputs are supplied.
    std::optional<double> constant_input;

    FeatureKind feature_kind() const { return quadratic_readout ? FeatureKind::quadratic : FeatureKind::linear; }

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

struct ReservoirMatrices {
    SpMat W;               // N x N
    Eigen::MatrixXd W_in;  // N x K
    Eigen::MatrixXd W_back; // N x L

    std::size_t state_dim() const { return static_cast<std::size_t>(W.rows()); }
};

template <class T>
struct StateTrajectory {
    Mat<T> states;  // T x N
    Mat<T> inputs;  // T x K
    Mat<T> targets; // T x L
    std::size_t transient_discarded = 0;

    std::size_t length() const { return static_cast<std::size_t>(states.rows()); }
};

template <class T>
struct LinearReadout {
    Mat<T> W_out; // L x M
    double gamma_used = 0.0;
    FeatureKind feature_kind = FeatureKind::linear;
    OutputActivation activation = OutputActivation::identity;

    Vec<T> apply(const Vec<T>& x) const;
};

struct SpectralRadiusOptions {
    double tol = 1e-6;
    std::size_t max_iterations = 10000; // matrix-vector products
    std::size_t krylov_dim = 30;
};

/// Modulus of the dominant eigenvalue. Uses restarted Arnoldi (a block
/// generalisation of power iteration) so that complex-conjugate dominant
/// pairs converge; on stagnation the iteration restarts from a fresh vector.
double spectral_radius(const SpMat& W, const SpectralRadiusOptions& opt = {});
double spectral_radius(const Eigen::MatrixXd& W, const SpectralRadiusOptions& opt = {});

ReservoirMatrices build_reservoir(const EsnConfig& config);

template <class T>
Vec<T> features(const Vec<T>& x, FeatureKind kind);

template <class T>
Vec<T> step_state(const ReservoirMatrices& m, const Vec<T>& x_prev, const Vec<T>& u, const Vec<T>& y_prev,
                  double alpha, ScalarField field);

/// Input matrix of `rows` steps holding config.constant_input (or zeros).
template <class T>
Mat<T> constant_inputs(const EsnConfig& config, std::size_t rows);

/// Drives the reservoir with y_teach(t-1) in the feedback path. The feedback
/// before the first step is `y_init` (zeros when empty); x(0) is `x_init`
/// (zeros when empty). Uniform noise on [-b, b] is added to the feedback only.
template <class T>
StateTrajectory<T> teacher_force(const ReservoirMatrices& m, const EsnConfig& config, const Mat<T>& inputs,
                                 const Mat<T>& targets, const Vec<T>& x_init = {}, const Vec<T>& y_init = {});

/// Normal-equation accumulator for ridge regression, so rows can be added
/// from several sources before a single solve.
template <class T>
class RidgeAccumulator {
public:
    RidgeAccumulator(std::size_t features, std::size_t outputs);

    /// Rows of `phi` are feature vectors, rows of `y` the matching targets.
    void add(const Mat<T>& phi, const Mat<T>& y);
    std::size_t rows() const { return rows_; }

    /// Returns W_out (outputs x features).
    Mat<T> solve(double gamma) const;

    RidgeAccumulator& operator+=(const RidgeAccumulator& other);

private:
    Mat<T> gram_;
    Mat<T> cross_;
    std::size_t rows_ = 0;
};

/// Feature rows for the post-transient part of a trajectory.
template <class T>
Mat<T> feature_rows(const Mat<T>& states, std::size_t first, FeatureKind kind);

/// Targets mapped through the inverse output activation.
template <class T>
Mat<T> readout_targets(const Mat<T>& targets, OutputActivation act);

template <class T>
LinearReadout<T> fit_readout(const StateTrajectory<T>& traj, double gamma, FeatureKind kind,
                             OutputActivation act = OutputActivation::identity);

template <class T>
struct FreeRunResult {
    Mat<T> predictions; // horizon x L
    Mat<T> states;      // horizon x N when recorded, else empty
    Vec<T> last_state;
    Vec<T> last_output;
};

/// Autonomous run: each step feeds the previous prediction back. Inputs come
/// from `inputs_future` (horizon x K) or the configured constant input.
template <class T>
FreeRunResult<T> free_run(const ReservoirMatrices& m, const EsnConfig& config, const LinearReadout<T>& readout,
                          const Vec<T>& x_start, const Vec<T>& y_start, const Mat<T>* inputs_future,
                          std::size_t horizon, bool record_states = false);

} // namespace rk
