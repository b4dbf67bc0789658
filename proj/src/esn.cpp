#include "rk/esn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "rk/errors.hpp"
#include "rk/rng.hpp"

namespace rk {

namespace {

constexpr std::uint64_t kStreamW = 0;
constexpr std::uint64_t kStreamIn = 1;
constexpr std::uint64_t kStreamBack = 2;
constexpr std::uint64_t kStreamNoise = 3;
constexpr int kMaxMaskAttempts = 10;

template <class T>
Vec<T> times(const SpMat& A, const Vec<T>& x) {
    if constexpr (std::is_same_v<T, double>) {
        return A * x;
    } else {
        Vec<T> out(A.rows());
        out.real() = A * x.real();
        out.imag() = A * x.imag();
        return out;
    }
}

template <class T>
Vec<T> times(const Eigen::MatrixXd& A, const Vec<T>& x) {
    if constexpr (std::is_same_v<T, double>) {
        return A * x;
    } else {
        Vec<T> out(A.rows());
        out.real() = A * x.real();
        out.imag() = A * x.imag();
        return out;
    }
}

template <class T>
T activate(T z) {
    if constexpr (std::is_same_v<T, double>)
        return std::tanh(z);
    else
        return {std::tanh(z.real()), std::tanh(z.imag())};
}

double clamped_atanh(double v) {
    constexpr double lim = 1.0 - 1e-9;
    return std::atanh(std::clamp(v, -lim, lim));
}

template <class T>
T inverse_activate(T z) {
    if constexpr (std::is_same_v<T, double>)
        return clamped_atanh(z);
    else
        return {clamped_atanh(z.real()), clamped_atanh(z.imag())};
}

template <class T>
bool all_finite(const Vec<T>& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if constexpr (std::is_same_v<T, double>) {
            if (!std::isfinite(v[i])) return false;
        } else {
            if (!std::isfinite(v[i].real()) || !std::isfinite(v[i].imag())) return false;
        }
    }
    return true;
}

template <class T>
T noise_sample(Rng& rng, double b) {
    if constexpr (std::is_same_v<T, double>)
        return rng.uniform(-b, b);
    else {
        const double re = rng.uniform(-b, b);
        return {re, rng.uniform(-b, b)};
    }
}

template <class T>
void check_field(ScalarField field) {
    if (field != field_of<T>())
        throw std::invalid_argument("scalar field does not match the value type");
}

SpMat draw_mask(const EsnConfig& c, Rng& rng) {
    const auto n = static_cast<Eigen::Index>(c.state_dim);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(c.density * static_cast<double>(n * n) * 1.2) + 16);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (rng.uniform() >= c.density) continue;
            double v = 1.0;
            if (c.weight_sign == WeightSign::inhomogeneous) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
            trip.emplace_back(i, j, v);
        }
    }
    SpMat W(n, n);
    W.setFromTriplets(trip.begin(), trip.end());
    W.makeCompressed();
    return W;
}

// A sparsity pattern whose directed graph has no cycle gives a nilpotent W.
bool mask_acyclic(const SpMat& W) {
    const Eigen::Index n = W.rows();
    std::vector<int> indeg(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i)
        for (SpMat::InnerIterator it(W, i); it; ++it) ++indeg[static_cast<std::size_t>(it.col())];
    std::vector<Eigen::Index> queue;
    for (Eigen::Index i = 0; i < n; ++i)
        if (indeg[static_cast<std::size_t>(i)] == 0) queue.push_back(i);
    std::size_t seen = 0;
    while (seen < queue.size()) {
        const Eigen::Index i = queue[seen++];
        for (SpMat::InnerIterator it(W, i); it; ++it)
            if (--indeg[static_cast<std::size_t>(it.col())] == 0) queue.push_back(it.col());
    }
    return seen == static_cast<std::size_t>(n);
}

} // namespace

void EsnConfig::validate() const {
    auto bad = [](const std::string& what) { throw std::invalid_argument("EsnConfig." + what); };
    if (state_dim < 1) bad("state_dim must be >= 1");
    if (output_dim < 1) bad("output_dim must be >= 1");
    if (!(leaking_rate > 0.0 && leaking_rate <= 1.0)) bad("leaking_rate must lie in (0, 1]");
    if (!(density > 0.0 && density <= 1.0)) bad("density must lie in (0, 1]");
    if (!(regularization >= 0.0)) bad("regularization must be >= 0");
    if (!(spectral_radius >= 0.0)) bad("spectral_radius must be >= 0");
    if (!(teacher_noise >= 0.0)) bad("teacher_noise must be >= 0");
    if (!(input_scale >= 0.0)) bad("input_scale must be >= 0");
    if (!(feedback_scale >= 0.0)) bad("feedback_scale must be >= 0");
}

double spectral_radius(const Eigen::MatrixXd& W, const SpectralRadiusOptions& opt) {
    return spectral_radius(SpMat(W.sparseView()), opt);
}

double spectral_radius(const SpMat& W, const SpectralRadiusOptions& opt) {
    if (W.rows() != W.cols()) throw std::invalid_argument("spectral_radius: matrix not square");
    const Eigen::Index n = W.rows();
    for (Eigen::Index k = 0; k < W.nonZeros(); ++k)
        if (!std::isfinite(W.valuePtr()[k])) throw std::invalid_argument("spectral_radius: non-finite entry");
    if (n == 0 || W.nonZeros() == 0 || mask_acyclic(W)) return 0.0;

    const Eigen::Index m = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(opt.krylov_dim));
    const double scale = W.norm();
    Rng rng(0x5eedULL);
    auto random_start = [&] {
        Eigen::VectorXcd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = {rng.normal(), rng.normal()};
        return v;
    };

    Eigen::VectorXcd v = random_start();
    Eigen::MatrixXcd V(n, m + 1);
    Eigen::MatrixXcd H(m + 1, m);
    std::size_t matvecs = 0;
    double best = 0.0, prev = -1.0;
    int stagnant = 0, steady = 0;
    double best_residual = std::numeric_limits<double>::infinity();

    while (matvecs < opt.max_iterations) {
        V.setZero();
        H.setZero();
        V.col(0) = v / v.norm();
        Eigen::Index built = m;
        for (Eigen::Index j = 0; j < m; ++j) {
            Eigen::VectorXcd w(n);
            w.real() = W * V.col(j).real();
            w.imag() = W * V.col(j).imag();
            ++matvecs;
            for (int pass = 0; pass < 2; ++pass) {
                const Eigen::VectorXcd c = V.leftCols(j + 1).adjoint() * w;
                w -= V.leftCols(j + 1) * c;
                H.col(j).head(j + 1) += c;
            }
            const double h = w.norm();
            H(j + 1, j) = h;
            if (h <= 1e-13 * scale) {
                built = j + 1;
                break;
            }
            V.col(j + 1) = w / h;
        }

        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(H.topLeftCorner(built, built));
        const Eigen::VectorXcd& ev = es.eigenvalues();
        std::vector<Eigen::Index> order(static_cast<std::size_t>(built));
        for (Eigen::Index i = 0; i < built; ++i) order[static_cast<std::size_t>(i)] = i;
        std::sort(order.begin(), order.end(),
                  [&](Eigen::Index a, Eigen::Index b) { return std::abs(ev[a]) > std::abs(ev[b]); });
        const Eigen::Index top = order.front();
        const double theta = std::abs(ev[top]);
        best = std::max(best, theta);

        // Invariant subspace reached: Ritz values are exact eigenvalues.
        if (built < m || built == n) return theta;
        const double residual = std::abs(H(m, m - 1)) * std::abs(es.eigenvectors()(m - 1, top));
        if (residual <= opt.tol * std::max(theta, 1e-300)) return theta;

        // The modulus can settle before the Ritz vector does (clustered
        // eigenvalues of equal modulus); accept it once steady.
        if (prev >= 0.0 && std::abs(theta - prev) <= opt.tol * theta)
            ++steady;
        else
            steady = 0;
        prev = theta;
        if (steady >= 3) return theta;

        if (residual < best_residual * 0.5) {
            best_residual = residual;
            stagnant = 0;
        } else if (++stagnant >= 30) {
            v = random_start();
            stagnant = 0;
            best_residual = std::numeric_limits<double>::infinity();
            continue;
        }
        // Restart from the sum of the leading Ritz vectors.
        Eigen::VectorXcd s = Eigen::VectorXcd::Zero(m);
        for (std::size_t k = 0; k < std::min<std::size_t>(4, order.size()); ++k) s += es.eigenvectors().col(order[k]);
        v = V.leftCols(m) * s;
        if (v.norm() == 0.0) v = random_start();
    }
    throw ConvergenceError("spectral_radius: no convergence, best estimate " + std::to_string(best), best);
}

ReservoirMatrices build_reservoir(const EsnConfig& c) {
    c.validate();
    ReservoirMatrices m;
    const auto n = static_cast<Eigen::Index>(c.state_dim);

    if (c.spectral_radius == 0.0) {
        m.W = SpMat(n, n);
    } else {
        for (int attempt = 0;; ++attempt) {
            if (attempt == kMaxMaskAttempts)
                throw NumericalError("build_reservoir: reservoir mask nilpotent after " +
                                     std::to_string(kMaxMaskAttempts) + " attempts");
            Rng rng = Rng::stream(Rng::split(c.seed, kStreamW), static_cast<std::uint64_t>(attempt));
            SpMat W = draw_mask(c, rng);
            const double rho = spectral_radius(W);
            if (!(rho > 1e-12)) continue;
            W *= c.spectral_radius / rho;
            m.W = std::move(W);
            break;
        }
    }

    Rng rin = Rng::stream(c.seed, kStreamIn);
    m.W_in.resize(n, static_cast<Eigen::Index>(c.input_dim));
    for (Eigen::Index j = 0; j < m.W_in.cols(); ++j)
        for (Eigen::Index i = 0; i < n; ++i) {
            const double u = rin.uniform();
            m.W_in(i, j) = u < 0.5 ? 0.0 : (u < 0.75 ? c.input_scale : -c.input_scale);
        }

    Rng rback = Rng::stream(c.seed, kStreamBack);
    m.W_back.resize(n, static_cast<Eigen::Index>(c.output_dim));
    for (Eigen::Index j = 0; j < m.W_back.cols(); ++j)
        for (Eigen::Index i = 0; i < n; ++i) {
            if (c.feedback_dist == FeedbackDist::uniform)
                m.W_back(i, j) = rback.uniform(-c.feedback_scale, c.feedback_scale);
            else
                m.W_back(i, j) = rback.uniform() < 0.5 ? -c.feedback_scale : c.feedback_scale;
        }
    return m;
}

template <class T>
Vec<T> features(const Vec<T>& x, FeatureKind kind) {
    if (kind == FeatureKind::linear) return x;
    Vec<T> f(2 * x.size());
    f.head(x.size()) = x;
    f.tail(x.size()) = x.array().square().matrix();
    return f;
}

template <class T>
Vec<T> LinearReadout<T>::apply(const Vec<T>& x) const {
    Vec<T> y = W_out * features(x, feature_kind);
    if (activation == OutputActivation::tanh)
        for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = activate(y[i]);
    return y;
}

template <class T>
Vec<T> step_state(const ReservoirMatrices& m, const Vec<T>& x_prev, const Vec<T>& u, const Vec<T>& y_prev,
                  double alpha, ScalarField field) {
    check_field<T>(field);
    const auto n = static_cast<Eigen::Index>(m.state_dim());
    if (x_prev.size() != n || u.size() != m.W_in.cols() || y_prev.size() != m.W_back.cols() ||
        m.W_in.rows() != n || m.W_back.rows() != n)
        throw std::invalid_argument("step_state: dimension mismatch");
    Vec<T> pre = times<T>(m.W, x_prev);
    if (u.size() > 0) pre += times<T>(m.W_in, u);
    pre += times<T>(m.W_back, y_prev);
    for (Eigen::Index i = 0; i < n; ++i) pre[i] = activate(pre[i]);
    if (alpha == 1.0) return pre;
    return (1.0 - alpha) * x_prev + alpha * pre;
}

template <class T>
Mat<T> constant_inputs(const EsnConfig& config, std::size_t rows) {
    return Mat<T>::Constant(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(config.input_dim),
                            T(config.constant_input.value_or(0.0)));
}

template <class T>
StateTrajectory<T> teacher_force(const ReservoirMatrices& m, const EsnConfig& config, const Mat<T>& inputs,
                                 const Mat<T>& targets, const Vec<T>& x_init, const Vec<T>& y_init) {
    config.validate();
    check_field<T>(config.field);
    const Eigen::Index T_len = targets.rows();
    const auto n = static_cast<Eigen::Index>(m.state_dim());
    if (inputs.rows() != T_len) throw std::invalid_argument("teacher_force: inputs and targets differ in length");
    if (targets.cols() != m.W_back.cols() || inputs.cols() != m.W_in.cols())
        throw std::invalid_argument("teacher_force: dimension mismatch");
    if (static_cast<std::size_t>(T_len) <= config.transient)
        throw std::invalid_argument("teacher_force: training length must exceed the transient");

    StateTrajectory<T> traj;
    traj.states.resize(T_len, n);
    traj.inputs = inputs;
    traj.targets = targets;
    traj.transient_discarded = config.transient;

    Vec<T> x = x_init.size() ? x_init : Vec<T>(Vec<T>::Zero(n));
    Vec<T> y = y_init.size() ? y_init : Vec<T>(Vec<T>::Zero(targets.cols()));
    if (x.size() != n || y.size() != targets.cols()) throw std::invalid_argument("teacher_force: bad initial state");

    Rng noise = Rng::stream(config.seed, kStreamNoise);
    const double b = config.teacher_noise;
    for (Eigen::Index t = 0; t < T_len; ++t) {
        Vec<T> fb = y;
        if (b > 0.0)
            for (Eigen::Index i = 0; i < fb.size(); ++i) fb[i] += noise_sample<T>(noise, b);
        x = step_state<T>(m, x, inputs.row(t).transpose(), fb, config.leaking_rate, config.field);
        if (!all_finite(x)) throw DivergenceError("teacher_force: non-finite state", static_cast<std::size_t>(t));
        traj.states.row(t) = x.transpose();
        y = targets.row(t).transpose();
    }
    return traj;
}

template <class T>
RidgeAccumulator<T>::RidgeAccumulator(std::size_t features, std::size_t outputs)
    : gram_(Mat<T>::Zero(static_cast<Eigen::Index>(features), static_cast<Eigen::Index>(features))),
      cross_(Mat<T>::Zero(static_cast<Eigen::Index>(features), static_cast<Eigen::Index>(outputs))) {}

template <class T>
void RidgeAccumulator<T>::add(const Mat<T>& phi, const Mat<T>& y) {
    if (phi.rows() != y.rows() || phi.cols() != gram_.rows() || y.cols() != cross_.cols())
        throw std::invalid_argument("RidgeAccumulator: dimension mismatch");
    if (phi.rows() == 0) return;
    gram_.template selfadjointView<Eigen::Lower>().rankUpdate(phi.adjoint());
    cross_.noalias() += phi.adjoint() * y;
    rows_ += static_cast<std::size_t>(phi.rows());
}

template <class T>
RidgeAccumulator<T>& RidgeAccumulator<T>::operator+=(const RidgeAccumulator& other) {
    if (other.gram_.rows() != gram_.rows() || other.cross_.cols() != cross_.cols())
        throw std::invalid_argument("RidgeAccumulator: dimension mismatch");
    gram_ += other.gram_;
    cross_ += other.cross_;
    rows_ += other.rows_;
    return *this;
}

template <class T>
Mat<T> RidgeAccumulator<T>::solve(double gamma) const {
    if (!(gamma >= 0.0)) throw std::invalid_argument("ridge: gamma must be >= 0");
    if (rows_ == 0) throw std::invalid_argument("ridge: no rows accumulated");
    Mat<T> A = gram_.template selfadjointView<Eigen::Lower>();
    A.diagonal().array() += T(gamma);
    Eigen::LDLT<Mat<T>> ldlt(A);
    const auto d = ldlt.vectorD().cwiseAbs();
    const double dmax = d.maxCoeff();
    if (gamma == 0.0 && (ldlt.info() != Eigen::Success || !(dmax > 0.0) || d.minCoeff() <= 1e-13 * dmax))
        throw NumericalError("ridge: singular normal equations at gamma = 0; use gamma > 0");
    if (ldlt.info() != Eigen::Success || !(d.minCoeff() > 0.0))
        throw NumericalError("ridge: normal equations not positive definite");
    Mat<T> sol = ldlt.solve(cross_);
    return sol.transpose();
}

template <class T>
Mat<T> feature_rows(const Mat<T>& states, std::size_t first, FeatureKind kind) {
    const Eigen::Index rows = states.rows() - static_cast<Eigen::Index>(first);
    if (rows <= 0) return Mat<T>(0, kind == FeatureKind::linear ? states.cols() : 2 * states.cols());
    auto tail = states.bottomRows(rows);
    if (kind == FeatureKind::linear) return tail;
    Mat<T> phi(rows, 2 * states.cols());
    phi.leftCols(states.cols()) = tail;
    phi.rightCols(states.cols()) = tail.array().square().matrix();
    return phi;
}

template <class T>
Mat<T> readout_targets(const Mat<T>& targets, OutputActivation act) {
    if (act == OutputActivation::identity) return targets;
    return targets.unaryExpr([](T v) { return inverse_activate(v); });
}

template <class T>
LinearReadout<T> fit_readout(const StateTrajectory<T>& traj, double gamma, FeatureKind kind, OutputActivation act) {
    const std::size_t first = traj.transient_discarded;
    if (traj.length() <= first) throw std::invalid_argument("fit_readout: no post-transient rows");
    const Mat<T> phi = feature_rows(traj.states, first, kind);
    const Mat<T> y = readout_targets<T>(traj.targets.bottomRows(phi.rows()), act);
    RidgeAccumulator<T> acc(static_cast<std::size_t>(phi.cols()), static_cast<std::size_t>(y.cols()));
    acc.add(phi, y);
    LinearReadout<T> r;
    r.W_out = acc.solve(gamma);
    r.gamma_used = gamma;
    r.feature_kind = kind;
    r.activation = act;
    return r;
}

template <class T>
FreeRunResult<T> free_run(const ReservoirMatrices& m, const EsnConfig& config, const LinearReadout<T>& readout,
                          const Vec<T>& x_start, const Vec<T>& y_start, const Mat<T>* inputs_future,
                          std::size_t horizon, bool record_states) {
    check_field<T>(config.field);
    const auto n = static_cast<Eigen::Index>(m.state_dim());
    const Eigen::Index L = m.W_back.cols();
    if (readout.W_out.rows() != L || readout.W_out.cols() != (readout.feature_kind == FeatureKind::quadratic ? 2 * n : n))
        throw std::invalid_argument("free_run: readout does not match reservoir dimensions");
    if (x_start.size() != n || y_start.size() != L) throw std::invalid_argument("free_run: bad start vectors");
    const auto H = static_cast<Eigen::Index>(horizon);
    if (inputs_future && (inputs_future->rows() < H || inputs_future->cols() != m.W_in.cols()))
        throw std::invalid_argument("free_run: inputs_future too short or wrong width");

    FreeRunResult<T> out;
    out.predictions.resize(H, L);
    if (record_states) out.states.resize(H, n);
    const Vec<T> u_const = Vec<T>::Constant(m.W_in.cols(), T(config.constant_input.value_or(0.0)));

    Vec<T> x = x_start, y = y_start;
    for (Eigen::Index t = 0; t < H; ++t) {
        const Vec<T> u = inputs_future ? Vec<T>(inputs_future->row(t).transpose()) : u_const;
        x = step_state<T>(m, x, u, y, config.leaking_rate, config.field);
        y = readout.apply(x);
        if (!all_finite(x) || !all_finite(y))
            throw DivergenceError("free_run: non-finite state", static_cast<std::size_t>(t));
        out.predictions.row(t) = y.transpose();
        if (record_states) out.states.row(t) = x.transpose();
    }
    out.last_state = x;
    out.last_output = y;
    return out;
}

#define RK_INSTANTIATE(T)                                                                                        \
    template Vec<T> features<T>(const Vec<T>&, FeatureKind);                                                      \
    template struct LinearReadout<T>;                                                                             \
    template Vec<T> step_state<T>(const ReservoirMatrices&, const Vec<T>&, const Vec<T>&, const Vec<T>&, double,  \
                                  ScalarField);                                                                   \
    template Mat<T> constant_inputs<T>(const EsnConfig&, std::size_t);                                            \
    template StateTrajectory<T> teacher_force<T>(const ReservoirMatrices&, const EsnConfig&, const Mat<T>&,       \
                                                 const Mat<T>&, const Vec<T>&, const Vec<T>&);                    \
    template class RidgeAccumulator<T>;                                                                           \
    template Mat<T> feature_rows<T>(const Mat<T>&, std::size_t, FeatureKind);                                     \
    template Mat<T> readout_targets<T>(const Mat<T>&, OutputActivation);                                          \
    template LinearReadout<T> fit_readout<T>(const StateTrajectory<T>&, double, FeatureKind, OutputActivation);   \
    template FreeRunResult<T> free_run<T>(const ReservoirMatrices&, const EsnConfig&, const LinearReadout<T>&,    \
                                          const Vec<T>&, const Vec<T>&, const Mat<T>*, std::size_t, bool);

RK_INSTANTIATE(double)
RK_INSTANTIATE(cplx)

#undef RK_INSTANTIATE

} // namespace rk
