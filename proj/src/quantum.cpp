#include "rk/quantum.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include <fftw3.h>

#include "rk/errors.hpp"
#include "rk/variants.hpp"

namespace rk {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
static_assert(sizeof(fftw_complex) == sizeof(cplx));

namespace {

constexpr double kPi = std::numbers::pi;

// In-place complex FFT over the whole grid. Forward is unnormalised.
class GridFft {
public:
    explicit GridFft(const SpatialGrid& g) : n_(g.size()) {
        buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_));
        if (!buf_) throw std::bad_alloc();
        int dims[2];
        for (std::size_t d = 0; d < g.dim(); ++d) dims[d] = static_cast<int>(g.axes[d].points);
        const int rank = static_cast<int>(g.dim());
        fwd_ = fftw_plan_dft(rank, dims, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft(rank, dims, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~GridFft() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(buf_);
    }
    GridFft(const GridFft&) = delete;
    GridFft& operator=(const GridFft&) = delete;

    cplx* data() { return reinterpret_cast<cplx*>(buf_); }
    Eigen::Map<Eigen::VectorXcd> vec() { return {data(), static_cast<Eigen::Index>(n_)}; }
    void forward() { fftw_execute(fwd_); }
    void backward() { fftw_execute(bwd_); }

private:
    std::size_t n_;
    fftw_complex* buf_ = nullptr;
    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
};

// 1/2 |k|^2 at every FFT bin, row-major.
Eigen::VectorXd kinetic_symbol(const SpatialGrid& g) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(g.size()));
    const auto kx = wavenumbers(g.axes[0]);
    if (g.dim() == 1) {
        for (std::size_t i = 0; i < kx.size(); ++i) out[static_cast<Eigen::Index>(i)] = 0.5 * kx[i] * kx[i];
        return out;
    }
    const auto ky = wavenumbers(g.axes[1]);
    for (std::size_t i = 0; i < kx.size(); ++i)
        for (std::size_t j = 0; j < ky.size(); ++j)
            out[static_cast<Eigen::Index>(i * ky.size() + j)] = 0.5 * (kx[i] * kx[i] + ky[j] * ky[j]);
    return out;
}

void require_grid_vector(const SpatialGrid& g, Eigen::Index size, const char* who) {
    if (static_cast<std::size_t>(size) != g.size())
        throw std::invalid_argument(std::string(who) + ": vector length does not match the grid");
}

void check_support(const Axis& a, double center, double width, const char* who) {
    if (!(width > 0.0) || !std::isfinite(width)) throw std::invalid_argument(std::string(who) + ": width must be > 0");
    if (!std::isfinite(center)) throw std::invalid_argument(std::string(who) + ": non-finite center");
    if (center - 6.0 * width < a.min || center + 6.0 * width > a.max)
        throw std::invalid_argument(std::string(who) + ": packet support x0 +- 6 dx is clipped by the grid");
}

Eigen::VectorXcd packet_1d(const Axis& a, double x0, double width, double p0) {
    Eigen::VectorXcd v(static_cast<Eigen::Index>(a.points));
    const double s = 4.0 * width;
    for (std::size_t i = 0; i < a.points; ++i) {
        const double d = a.coord(i) - x0;
        v[static_cast<Eigen::Index>(i)] = std::exp(-(d * d) / (s * s)) * std::polar(1.0, p0 * d);
    }
    return v;
}

void normalise(Wavefunction& w) {
    const double n = w.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("wavefunction has zero or non-finite norm");
    w.psi /= n;
}

std::vector<double> window_weights(std::size_t n, Window w) {
    std::vector<double> out(n, 1.0);
    if (w == Window::hann && n > 1)
        for (std::size_t j = 0; j < n; ++j)
            out[j] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(j) / static_cast<double>(n - 1)));
    return out;
}

template <class V>
void write_pod(std::ostream& os, V v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <class V>
V read_pod(std::istream& is) {
    V v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!is) throw std::runtime_error("read_trajectory: truncated file");
    return v;
}

constexpr char kMagic[8] = {'R', 'K', 'T', 'R', 'A', 'J', '0', '1'};
constexpr std::uint32_t kVersion = 1;

} // namespace

// ------------------------------------------------------------------ grid

SpatialGrid SpatialGrid::line(double min, double max, std::size_t points) {
    SpatialGrid g;
    g.axes.push_back({min, max, points});
    g.validate();
    return g;
}

SpatialGrid SpatialGrid::plane(Axis x, Axis y) {
    SpatialGrid g;
    g.axes = {x, y};
    g.validate();
    return g;
}

std::size_t SpatialGrid::size() const {
    std::size_t n = 1;
    for (const auto& a : axes) n *= a.points;
    return n;
}

double SpatialGrid::cell_volume() const {
    double v = 1.0;
    for (const auto& a : axes) v *= a.spacing();
    return v;
}

void SpatialGrid::validate() const {
    if (axes.empty() || axes.size() > 2) throw std::invalid_argument("SpatialGrid: dimension must be 1 or 2");
    for (const auto& a : axes) {
        if (a.points < 8) throw std::invalid_argument("SpatialGrid: at least 8 points per dimension");
        if (!std::isfinite(a.min) || !std::isfinite(a.max) || !(a.max > a.min))
            throw std::invalid_argument("SpatialGrid: need finite min < max");
    }
}

bool SpatialGrid::same_as(const SpatialGrid& o) const {
    if (o.axes.size() != axes.size()) return false;
    for (std::size_t d = 0; d < axes.size(); ++d) {
        const Axis &a = axes[d], &b = o.axes[d];
        const double tol = 1e-12 * std::max(1.0, std::abs(a.max - a.min));
        if (a.points != b.points || std::abs(a.min - b.min) > tol || std::abs(a.max - b.max) > tol) return false;
    }
    return true;
}

double Wavefunction::norm() const { return std::sqrt(psi.squaredNorm() * grid.cell_volume()); }

// ------------------------------------------------------------- potentials

PotentialSpec PotentialSpec::harmonic(double omega, double x0) {
    PotentialSpec p{Kind::harmonic, {omega, x0}};
    p.validate();
    return p;
}

PotentialSpec PotentialSpec::morse(double De, double a, double xe) {
    PotentialSpec p{Kind::morse, {De, a, xe}};
    p.validate();
    return p;
}

PotentialSpec PotentialSpec::quartic_poly(const std::array<double, 5>& alpha) {
    PotentialSpec p{Kind::quartic_poly, {alpha.begin(), alpha.end()}};
    p.validate();
    return p;
}

PotentialSpec PotentialSpec::harmonic2d(double wx2, double wy2, double x0, double y0) {
    PotentialSpec p{Kind::harmonic2d, {wx2, wy2, x0, y0}};
    p.validate();
    return p;
}

void PotentialSpec::validate() const {
    const std::size_t want = kind == Kind::harmonic ? 2 : kind == Kind::morse ? 3 : kind == Kind::quartic_poly ? 5 : 4;
    if (params.size() != want) throw std::invalid_argument("PotentialSpec: wrong parameter count");
    for (double v : params)
        if (!std::isfinite(v)) throw std::invalid_argument("PotentialSpec: non-finite parameter");
    switch (kind) {
    case Kind::harmonic:
        if (!(params[0] > 0.0)) throw std::invalid_argument("PotentialSpec: harmonic omega must be > 0");
        break;
    case Kind::morse:
        if (!(params[0] > 0.0) || !(params[1] > 0.0))
            throw std::invalid_argument("PotentialSpec: morse needs De > 0 and a > 0");
        break;
    case Kind::harmonic2d:
        if (!(params[0] > 0.0) || !(params[1] > 0.0))
            throw std::invalid_argument("PotentialSpec: harmonic2d needs omega_x^2, omega_y^2 > 0");
        break;
    case Kind::quartic_poly:
        break;
    }
}

Eigen::VectorXd PotentialSpec::sample(const SpatialGrid& g) const {
    validate();
    g.validate();
    if (g.dim() != dim()) throw std::invalid_argument("PotentialSpec: grid dimension does not match the potential");
    Eigen::VectorXd V(static_cast<Eigen::Index>(g.size()));
    const auto& p = params;
    if (kind == Kind::harmonic2d) {
        const Axis &ax = g.axes[0], &ay = g.axes[1];
        for (std::size_t i = 0; i < ax.points; ++i)
            for (std::size_t j = 0; j < ay.points; ++j) {
                const double dx = ax.coord(i) - p[2], dy = ay.coord(j) - p[3];
                V[static_cast<Eigen::Index>(i * ay.points + j)] = 0.5 * (p[0] * dx * dx + p[1] * dy * dy);
            }
        return V;
    }
    const Axis& a = g.axes[0];
    for (std::size_t i = 0; i < a.points; ++i) {
        const double x = a.coord(i);
        double v = 0.0;
        if (kind == Kind::harmonic) {
            const double d = x - p[1];
            v = 0.5 * p[0] * p[0] * d * d;
        } else if (kind == Kind::morse) {
            const double e = std::exp(-p[1] * (x - p[2]));
            v = p[0] * (e * e - 2.0 * e);
        } else {
            v = p[0] + x * (p[1] + x * (p[2] + x * (p[3] + x * p[4])));
        }
        V[static_cast<Eigen::Index>(i)] = v;
    }
    return V;
}

// ---------------------------------------------------------------- packets

Wavefunction gaussian_wavepacket(const SpatialGrid& grid, double x0, double width, double p0) {
    grid.validate();
    if (grid.dim() != 1) throw std::invalid_argument("gaussian_wavepacket: 1D grid required");
    check_support(grid.axes[0], x0, width, "gaussian_wavepacket");
    if (!std::isfinite(p0)) throw std::invalid_argument("gaussian_wavepacket: non-finite momentum");
    Wavefunction w{grid, packet_1d(grid.axes[0], x0, width, p0), 0.0};
    normalise(w);
    return w;
}

Wavefunction gaussian_wavepacket_2d(const SpatialGrid& grid, std::array<double, 2> center,
                                    std::array<double, 2> width, std::array<double, 2> momentum) {
    grid.validate();
    if (grid.dim() != 2) throw std::invalid_argument("gaussian_wavepacket_2d: 2D grid required");
    for (std::size_t d = 0; d < 2; ++d) {
        check_support(grid.axes[d], center[d], width[d], "gaussian_wavepacket_2d");
        if (!std::isfinite(momentum[d])) throw std::invalid_argument("gaussian_wavepacket_2d: non-finite momentum");
    }
    const auto px = packet_1d(grid.axes[0], center[0], width[0], momentum[0]);
    const auto py = packet_1d(grid.axes[1], center[1], width[1], momentum[1]);
    Wavefunction w{grid, Eigen::VectorXcd(static_cast<Eigen::Index>(grid.size())), 0.0};
    for (Eigen::Index i = 0; i < px.size(); ++i)
        for (Eigen::Index j = 0; j < py.size(); ++j) w.psi[i * py.size() + j] = px[i] * py[j];
    normalise(w);
    return w;
}

std::vector<double> wavenumbers(const Axis& a) {
    const std::size_t n = a.points;
    const double scale = 2.0 * kPi / (static_cast<double>(n) * a.spacing());
    std::vector<double> k(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto m = static_cast<double>(i <= (n - 1) / 2 ? static_cast<std::ptrdiff_t>(i)
                                                            : static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(n));
        k[i] = scale * m;
    }
    return k;
}

Eigen::VectorXcd apply_hamiltonian(const SpatialGrid& grid, const Eigen::VectorXd& V, const Eigen::VectorXcd& psi) {
    grid.validate();
    require_grid_vector(grid, V.size(), "apply_hamiltonian");
    require_grid_vector(grid, psi.size(), "apply_hamiltonian");
    GridFft fft(grid);
    fft.vec() = psi;
    fft.forward();
    fft.vec().array() *= kinetic_symbol(grid).array() / static_cast<double>(grid.size());
    fft.backward();
    return fft.vec() + (V.array() * psi.array()).matrix();
}

double mean_energy(const Wavefunction& w, const Eigen::VectorXd& V) {
    const Eigen::VectorXcd h = apply_hamiltonian(w.grid, V, w.psi);
    return w.psi.dot(h).real() * w.grid.cell_volume();
}

double mean_position(const Wavefunction& w, std::size_t axis) {
    if (axis >= w.grid.dim()) throw std::invalid_argument("mean_position: axis out of range");
    require_grid_vector(w.grid, w.psi.size(), "mean_position");
    const std::size_t inner = w.grid.dim() == 2 ? w.grid.axes[1].points : 1;
    double s = 0.0;
    for (Eigen::Index idx = 0; idx < w.psi.size(); ++idx) {
        const auto u = static_cast<std::size_t>(idx);
        const std::size_t i = axis == 0 ? u / inner : u % inner;
        s += std::norm(w.psi[idx]) * w.grid.axes[axis].coord(i);
    }
    return s * w.grid.cell_volume();
}

// ------------------------------------------------------------ propagation

struct SplitStepPropagator::Plans {
    explicit Plans(const SpatialGrid& g) : fft(g) {}
    GridFft fft;
};

SplitStepPropagator::SplitStepPropagator(const SpatialGrid& grid, const Eigen::VectorXd& V, double dt)
    : grid_(grid), dt_(dt), plans_(nullptr) {
    grid.validate();
    require_grid_vector(grid, V.size(), "SplitStepPropagator");
    if (!std::isfinite(dt) || dt == 0.0) throw std::invalid_argument("SplitStepPropagator: dt must be finite and nonzero");
    if (!V.allFinite()) throw std::invalid_argument("SplitStepPropagator: non-finite potential");
    half_potential_.resize(V.size());
    for (Eigen::Index i = 0; i < V.size(); ++i) half_potential_[i] = std::polar(1.0, -0.5 * V[i] * dt);
    const Eigen::VectorXd ks = kinetic_symbol(grid);
    kinetic_.resize(ks.size());
    const double inv_n = 1.0 / static_cast<double>(grid.size());
    for (Eigen::Index i = 0; i < ks.size(); ++i) kinetic_[i] = std::polar(inv_n, -ks[i] * dt);
    plans_ = new Plans(grid);
}

SplitStepPropagator::~SplitStepPropagator() { delete plans_; }

void SplitStepPropagator::step(Eigen::VectorXcd& psi) {
    auto buf = plans_->fft.vec();
    if (psi.size() != buf.size()) throw std::invalid_argument("SplitStepPropagator: wavefunction length mismatch");
    buf = (psi.array() * half_potential_.array()).matrix();
    plans_->fft.forward();
    buf.array() *= kinetic_.array();
    plans_->fft.backward();
    psi = (buf.array() * half_potential_.array()).matrix();
}

void check_momentum_resolution(const Wavefunction& w) {
    const SpatialGrid& g = w.grid;
    g.validate();
    require_grid_vector(g, w.psi.size(), "check_momentum_resolution");
    GridFft fft(g);
    fft.vec() = w.psi;
    fft.forward();
    const std::size_t inner = g.dim() == 2 ? g.axes[1].points : 1;
    for (std::size_t d = 0; d < g.dim(); ++d) {
        const auto k = wavenumbers(g.axes[d]);
        double s0 = 0.0, s1 = 0.0, s2 = 0.0;
        for (Eigen::Index idx = 0; idx < fft.vec().size(); ++idx) {
            const auto u = static_cast<std::size_t>(idx);
            const double kk = k[d == 0 ? u / inner : u % inner];
            const double p = std::norm(fft.vec()[idx]);
            s0 += p;
            s1 += p * kk;
            s2 += p * kk * kk;
        }
        const double mean = s1 / s0;
        const double sd = std::sqrt(std::max(0.0, s2 / s0 - mean * mean));
        const double nyquist = kPi / g.axes[d].spacing();
        if (std::abs(mean) + 5.0 * sd > nyquist)
            throw std::invalid_argument("split_step_propagate: grid does not resolve the packet's momentum (|<p>| + 5 sd = " +
                                        std::to_string(std::abs(mean) + 5.0 * sd) + " > pi/dx = " +
                                        std::to_string(nyquist) + ")");
    }
}

Trajectory split_step_propagate(const Wavefunction& psi0, const Eigen::VectorXd& V, double dt, std::size_t steps,
                                std::size_t stride) {
    if (stride == 0) throw std::invalid_argument("split_step_propagate: stride must be >= 1");
    if (!psi0.psi.allFinite()) throw std::invalid_argument("split_step_propagate: non-finite initial state");
    check_momentum_resolution(psi0);
    SplitStepPropagator prop(psi0.grid, V, dt);
    Trajectory tr;
    tr.grid = psi0.grid;
    tr.dt = dt * static_cast<double>(stride);
    tr.frames.reserve(steps / stride + 1);
    Eigen::VectorXcd psi = psi0.psi;
    tr.frames.push_back(psi);
    for (std::size_t s = 1; s <= steps; ++s) {
        prop.step(psi);
        if (s % stride == 0) {
            if (!psi.allFinite()) throw DivergenceError("split_step_propagate: non-finite amplitudes", s);
            tr.frames.push_back(psi);
        }
    }
    return tr;
}

std::vector<cplx> autocorrelation(const Trajectory& tr, const Wavefunction& psi0) {
    if (!tr.grid.same_as(psi0.grid)) throw std::invalid_argument("autocorrelation: grid mismatch");
    const double dv = tr.grid.cell_volume();
    std::vector<cplx> A;
    A.reserve(tr.frames.size());
    for (const auto& f : tr.frames) {
        if (f.size() != psi0.psi.size()) throw std::invalid_argument("autocorrelation: frame length mismatch");
        A.push_back(psi0.psi.dot(f) * dv);
    }
    return A;
}

// --------------------------------------------------------------- spectrum

Spectrum energy_spectrum(std::span<const cplx> A, double dt, Window window, std::size_t pad_factor) {
    const std::size_t n = A.size();
    if (n < kMinSpectrumSamples)
        throw std::invalid_argument("energy_spectrum: at least " + std::to_string(kMinSpectrumSamples) + " samples needed");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("energy_spectrum: dt must be > 0");
    if (pad_factor < 1) throw std::invalid_argument("energy_spectrum: pad_factor must be >= 1");
    const std::size_t M = n * pad_factor;
    const auto w = window_weights(n, window);

    auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * M));
    if (!buf) throw std::bad_alloc();
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(M), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    auto* z = reinterpret_cast<cplx*>(buf);
    std::fill(z, z + M, cplx{});
    for (std::size_t j = 0; j < n; ++j) z[j] = A[j] * (w[j] * dt);
    fftw_execute(plan);

    Spectrum s;
    s.dt = dt;
    s.resolution = 2.0 * kPi / (static_cast<double>(n - 1) * dt);
    s.energy.reserve(M);
    s.intensity.reserve(M);
    const double dE = 2.0 * kPi / (static_cast<double>(M) * dt);
    const std::size_t half = M / 2;
    for (std::size_t r = 0; r < M; ++r) {
        const std::size_t m = (r + half) % M;
        const double e = m >= half ? (static_cast<double>(m) - static_cast<double>(M)) * dE : static_cast<double>(m) * dE;
        s.energy.push_back(e);
        s.intensity.push_back(std::norm(z[m]));
    }
    fftw_destroy_plan(plan);
    fftw_free(buf);
    return s;
}

std::vector<double> find_peaks(std::span<const double> x, std::span<const double> y, double prominence_frac) {
    if (x.size() != y.size()) throw std::invalid_argument("find_peaks: x and y differ in length");
    if (!(prominence_frac >= 0.0)) throw std::invalid_argument("find_peaks: prominence_frac must be >= 0");
    std::vector<double> out;
    const std::size_t n = y.size();
    if (n < 3) return out;
    const double ymax = *std::max_element(y.begin(), y.end());
    if (!(ymax > 0.0)) return out;
    const double need = prominence_frac * ymax;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(y[i] > y[i - 1] && y[i] > y[i + 1]) || y[i] < need) continue;
        double left_min = y[i], right_min = y[i];
        for (std::size_t j = i; j-- > 0;) {
            if (y[j] > y[i]) break;
            left_min = std::min(left_min, y[j]);
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            if (y[j] > y[i]) break;
            right_min = std::min(right_min, y[j]);
        }
        if (y[i] - std::max(left_min, right_min) < need) continue;
        const double a = y[i - 1], b = y[i], c = y[i + 1];
        const double denom = a - 2.0 * b + c;
        const double d = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
        out.push_back(x[i] + d * 0.5 * (x[i + 1] - x[i - 1]));
    }
    return out;
}

std::vector<double> find_peaks(const Spectrum& s, double prominence_frac) {
    return find_peaks(s.energy, s.intensity, prominence_frac);
}

Wavefunction extract_eigenfunction(const Trajectory& tr, double energy, Window window, double min_weight) {
    if (tr.frames.size() < 2) throw std::invalid_argument("extract_eigenfunction: trajectory too short");
    if (!std::isfinite(energy)) throw std::invalid_argument("extract_eigenfunction: non-finite energy");
    const auto w = window_weights(tr.frames.size(), window);
    Eigen::VectorXcd phi = Eigen::VectorXcd::Zero(tr.frames.front().size());
    double total = 0.0;
    for (std::size_t j = 0; j < tr.frames.size(); ++j) {
        const double t = static_cast<double>(j) * tr.dt;
        phi += tr.frames[j] * (std::polar(w[j] * tr.dt, energy * t));
        total += w[j] * tr.dt;
    }
    Wavefunction out{tr.grid, std::move(phi), 0.0};
    const double weight = out.norm() / total;
    if (!(weight >= min_weight))
        throw NumericalError("extract_eigenfunction: projection at E = " + std::to_string(energy) +
                             " is negligible (weight " + std::to_string(weight) + ")");
    normalise(out);
    Eigen::Index imax = 0;
    out.psi.cwiseAbs2().maxCoeff(&imax);
    out.psi *= std::conj(out.psi[imax]) / std::abs(out.psi[imax]);
    out.psi[imax] = std::abs(out.psi[imax]);
    return out;
}

double stationarity_residual(const Wavefunction& phi, const Eigen::VectorXd& V, double energy) {
    const Eigen::VectorXcd r = apply_hamiltonian(phi.grid, V, phi.psi) - energy * phi.psi;
    return r.norm() / phi.psi.norm();
}

double overlap(const Wavefunction& a, const Wavefunction& b) {
    if (!a.grid.same_as(b.grid)) throw std::invalid_argument("overlap: grid mismatch");
    return std::abs(a.psi.dot(b.psi)) * a.grid.cell_volume();
}

// ---------------------------------------------------------------- levels

std::vector<double> morse_levels_analytic(double De, double a, std::size_t n_max) {
    if (!(De > 0.0) || !(a > 0.0)) throw std::invalid_argument("morse_levels_analytic: De and a must be > 0");
    const double lambda = std::sqrt(2.0 * De) / a;
    if (!(lambda > 0.5)) throw std::invalid_argument("morse_levels_analytic: lambda <= 1/2, no bound states");
    const auto top = static_cast<std::size_t>(std::floor(lambda - 0.5));
    std::vector<double> out;
    for (std::size_t n = 0; n <= std::min(n_max, top); ++n) {
        const double q = lambda - static_cast<double>(n) - 0.5;
        out.push_back(-0.5 * a * a * q * q);
    }
    return out;
}

std::vector<double> ho_levels_analytic(double omega, std::size_t n_max) {
    if (!(omega > 0.0)) throw std::invalid_argument("ho_levels_analytic: omega must be > 0");
    std::vector<double> out;
    for (std::size_t n = 0; n <= n_max; ++n) out.push_back(omega * (static_cast<double>(n) + 0.5));
    return out;
}

std::vector<double> ho_levels_analytic(std::span<const double> omegas, std::size_t n_max) {
    if (omegas.empty()) throw std::invalid_argument("ho_levels_analytic: no frequencies");
    for (double w : omegas)
        if (!(w > 0.0)) throw std::invalid_argument("ho_levels_analytic: omega must be > 0");
    std::vector<double> out;
    std::vector<std::size_t> q(omegas.size(), 0);
    while (true) {
        double e = 0.0;
        for (std::size_t d = 0; d < q.size(); ++d) e += omegas[d] * (static_cast<double>(q[d]) + 0.5);
        out.push_back(e);
        // next tuple with sum <= n_max
        std::size_t d = 0;
        while (d < q.size()) {
            ++q[d];
            std::size_t sum = 0;
            for (std::size_t v : q) sum += v;
            if (sum <= n_max) break;
            q[d] = 0;
            ++d;
        }
        if (d == q.size()) break;
    }
    std::sort(out.begin(), out.end());
    return out;
}

double wavefunction_mse(const std::vector<Eigen::VectorXcd>& pred, const std::vector<Eigen::VectorXcd>& exact) {
    if (pred.size() != exact.size()) throw std::invalid_argument("wavefunction_mse: step counts differ");
    if (pred.empty()) throw std::invalid_argument("wavefunction_mse: empty trajectories");
    const Eigen::Index pts = exact.front().size();
    double s = 0.0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        if (pred[t].size() != pts || exact[t].size() != pts)
            throw std::invalid_argument("wavefunction_mse: grid sizes differ");
        s += (pred[t] - exact[t]).squaredNorm();
    }
    return s / (static_cast<double>(pred.size()) * static_cast<double>(pts));
}

// ------------------------------------------------------------ RC harness

namespace {

EsnConfig harness_config(const Trajectory& exact, const RcPropagationConfig& cfg) {
    EsnConfig c = cfg.esn;
    c.field = ScalarField::complex;
    c.input_dim = 0;
    c.constant_input.reset();
    c.output_dim = exact.grid.size();
    return c;
}

} // namespace

RcPropagationResult rc_propagate(const Trajectory& exact, const RcPropagationConfig& cfg) {
    return rc_propagate(build_reservoir(harness_config(exact, cfg)), exact, cfg);
}

RcPropagationResult rc_propagate(const ReservoirMatrices& m, const Trajectory& exact, const RcPropagationConfig& cfg) {
    const EsnConfig c = harness_config(exact, cfg);
    c.validate();
    const std::size_t T = cfg.train_steps, H = cfg.test_steps;
    if (exact.steps() < T + H) throw std::invalid_argument("rc_propagate: trajectory shorter than train + test steps");
    if (T <= c.transient) throw std::invalid_argument("rc_propagate: train_steps must exceed the transient");
    const auto L = static_cast<Eigen::Index>(c.output_dim);
    if (m.W_back.cols() != L || m.W_in.cols() != 0)
        throw std::invalid_argument("rc_propagate: reservoir matrices do not match the grid");

    Mat<cplx> targets(static_cast<Eigen::Index>(T), L);
    for (std::size_t t = 0; t < T; ++t) targets.row(static_cast<Eigen::Index>(t)) = exact.frames[t + 1].transpose();
    const Mat<cplx> inputs(static_cast<Eigen::Index>(T), 0);
    const Vec<cplx> y0 = exact.frames[0];

    const auto traj = teacher_force<cplx>(m, c, inputs, targets, Vec<cplx>{}, y0);
    LinearReadout<cplx> readout;
    if (cfg.multi_step)
        readout = multi_step_train<cplx>(m, inputs, targets, MultiStepConfig{cfg.split_fraction, c}, y0).readout;
    else
        readout = fit_readout(traj, c.regularization, c.feature_kind(), c.output_activation);

    RcPropagationResult r;
    r.predicted.grid = exact.grid;
    r.predicted.dt = exact.dt;
    r.predicted.frames.reserve(T + H + 1);
    r.predicted.frames.push_back(exact.frames[0]);
    for (std::size_t t = 0; t < T; ++t)
        r.predicted.frames.push_back(readout.apply(traj.states.row(static_cast<Eigen::Index>(t)).transpose()));
    if (H > 0) {
        const auto fr = free_run<cplx>(m, c, readout, traj.states.row(static_cast<Eigen::Index>(T) - 1).transpose(),
                                       exact.frames[T], nullptr, H);
        for (Eigen::Index t = 0; t < fr.predictions.rows(); ++t)
            r.predicted.frames.push_back(fr.predictions.row(t).transpose());
    }

    auto slice = [](const std::vector<Eigen::VectorXcd>& v, std::size_t a, std::size_t b) {
        return std::vector<Eigen::VectorXcd>(v.begin() + static_cast<std::ptrdiff_t>(a),
                                             v.begin() + static_cast<std::ptrdiff_t>(b));
    };
    r.report.train_steps = T;
    r.report.test_steps = H;
    const std::size_t first = c.transient + 1;
    r.report.train_mse = wavefunction_mse(slice(r.predicted.frames, first, T + 1), slice(exact.frames, first, T + 1));
    r.report.test_mse =
        H > 0 ? wavefunction_mse(slice(r.predicted.frames, T + 1, T + H + 1), slice(exact.frames, T + 1, T + H + 1)) : 0.0;
    r.report.total_mse =
        wavefunction_mse(slice(r.predicted.frames, first, T + H + 1), slice(exact.frames, first, T + H + 1));
    return r;
}

// ------------------------------------------------------------ checkpoint

void write_trajectory(const std::string& path, const Trajectory& tr) {
    tr.grid.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_trajectory: cannot open " + path);
    os.write(kMagic, sizeof kMagic);
    write_pod<std::uint32_t>(os, kVersion);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(tr.grid.dim()));
    for (const auto& a : tr.grid.axes) {
        write_pod<std::uint64_t>(os, a.points);
        write_pod<double>(os, a.min);
        write_pod<double>(os, a.spacing());
    }
    write_pod<double>(os, tr.dt);
    write_pod<std::uint64_t>(os, tr.frames.size());
    for (const auto& f : tr.frames) {
        if (static_cast<std::size_t>(f.size()) != tr.grid.size())
            throw std::invalid_argument("write_trajectory: frame length does not match the grid");
        os.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(cplx)));
    }
    if (!os) throw std::runtime_error("write_trajectory: write failed for " + path);
}

Trajectory read_trajectory(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_trajectory: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw std::runtime_error("read_trajectory: not a trajectory checkpoint");
    if (read_pod<std::uint32_t>(is) != kVersion) throw std::runtime_error("read_trajectory: unsupported version");
    const auto dims = read_pod<std::uint32_t>(is);
    if (dims < 1 || dims > 2) throw std::runtime_error("read_trajectory: bad dimension count");
    Trajectory tr;
    for (std::uint32_t d = 0; d < dims; ++d) {
        const auto pts = read_pod<std::uint64_t>(is);
        const double mn = read_pod<double>(is), dx = read_pod<double>(is);
        if (pts < 8 || pts > (1u << 24) || !(dx > 0.0) || !std::isfinite(mn))
            throw std::runtime_error("read_trajectory: bad axis header");
        tr.grid.axes.push_back({mn, mn + static_cast<double>(pts) * dx, static_cast<std::size_t>(pts)});
    }
    tr.dt = read_pod<double>(is);
    const auto frames = read_pod<std::uint64_t>(is);
    const std::size_t n = tr.grid.size();
    const auto header_end = is.tellg();
    is.seekg(0, std::ios::end);
    const auto remaining = static_cast<std::uint64_t>(is.tellg() - header_end);
    if (remaining != frames * n * sizeof(cplx)) throw std::runtime_error("read_trajectory: payload size mismatch");
    is.seekg(header_end);
    tr.frames.assign(static_cast<std::size_t>(frames), Eigen::VectorXcd(static_cast<Eigen::Index>(n)));
    for (auto& f : tr.frames) {
        is.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(n * sizeof(cplx)));
        if (!is) throw std::runtime_error("read_trajectory: truncated file");
    }
    return tr;
}

void write_spectrum_csv(std::ostream& os, const Spectrum& s) {
    os << "energy,intensity\n" << std::setprecision(17);
    for (std::size_t i = 0; i < s.energy.size(); ++i) os << s.energy[i] << ',' << s.intensity[i] << '\n';
}

} // namespace rk
