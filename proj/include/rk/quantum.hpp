#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rk/esn.hpp"

namespace rk {

// Units: hbar = m = 1 throughout.

struct Axis {
    double min = 0.0;
    double max = 1.0;
    std::size_t points = 8;

    /// Periodic grid: the point at `max` coincides with `min` and is omitted.
    double spacing() const { return (max - min) / static_cast<double>(points); }
    double coord(std::size_t i) const { return min + static_cast<double>(i) * spacing(); }
};

struct SpatialGrid {
    std::vector<Axis> axes; // 1 or 2; 2D arrays are row-major with x slowest

    static SpatialGrid line(double min, double max, std::size_t points);
    static SpatialGrid plane(Axis x, Axis y);

    std::size_t dim() const { return axes.size(); }
    std::size_t size() const;
    double cell_volume() const; // dx^d
    void validate() const;
    bool same_as(const SpatialGrid& other) const;
};

struct Wavefunction {
    SpatialGrid grid;
    Eigen::VectorXcd psi;
    double t = 0.0;

    double norm() const; // sqrt(sum |psi|^2 dx^d)
};

struct PotentialSpec {
    enum class Kind { harmonic, morse, quartic_poly, harmonic2d };
    Kind kind = Kind::harmonic;
    /// harmonic: {omega, x0}; morse: {De, a, xe}; quartic_poly: {a0..a4};
    /// harmonic2d: {omega_x^2, omega_y^2, x0, y0}.
    std::vector<double> params;

    static PotentialSpec harmonic(double omega, double x0 = 0.0);
    static PotentialSpec morse(double De, double a, double xe = 0.0);
    static PotentialSpec quartic_poly(const std::array<double, 5>& alpha);
    static PotentialSpec harmonic2d(double omega_x2, double omega_y2, double x0 = 0.0, double y0 = 0.0);

    std::size_t dim() const { return kind == Kind::harmonic2d ? 2 : 1; }
    void validate() const;
    /// Potential sampled on the grid (row-major for 2D).
    Eigen::VectorXd sample(const SpatialGrid& grid) const;
};

/// Minimum-uncertainty packet exp(-(x-x0)^2/(4 dx)^2) exp(i p0 (x-x0)),
/// renormalised on the grid. Throws when x0 +- 6 dx leaves the grid.
Wavefunction gaussian_wavepacket(const SpatialGrid& grid, double x0, double width, double p0);

/// Product of two 1D packets, one per axis.
Wavefunction gaussian_wavepacket_2d(const SpatialGrid& grid, std::array<double, 2> center,
                                    std::array<double, 2> width, std::array<double, 2> momentum);

/// Angular wavenumbers of the FFT bins along one axis (fftfreq order).
std::vector<double> wavenumbers(const Axis& axis);

/// H psi with the kinetic term applied spectrally.
Eigen::VectorXcd apply_hamiltonian(const SpatialGrid& grid, const Eigen::VectorXd& V, const Eigen::VectorXcd& psi);

/// <psi|(-1/2 Laplacian + V)|psi> for a normalised psi.
double mean_energy(const Wavefunction& psi, const Eigen::VectorXd& V);

/// <psi|x_axis|psi>.
double mean_position(const Wavefunction& psi, std::size_t axis = 0);

struct Trajectory {
    SpatialGrid grid;
    double dt = 0.0;
    std::vector<Eigen::VectorXcd> frames; // frame j at time j*dt

    std::size_t steps() const { return frames.empty() ? 0 : frames.size() - 1; }
    Wavefunction frame(std::size_t j) const { return {grid, frames.at(j), static_cast<double>(j) * dt}; }
};

/// Strang split-step Fourier integrator:
/// e^{-iV dt/2} F^-1 e^{-i k^2 dt/2} F e^{-iV dt/2}. Negative dt runs backwards.
class SplitStepPropagator {
public:
    SplitStepPropagator(const SpatialGrid& grid, const Eigen::VectorXd& V, double dt);
    ~SplitStepPropagator();
    SplitStepPropagator(const SplitStepPropagator&) = delete;
    SplitStepPropagator& operator=(const SplitStepPropagator&) = delete;

    void step(Eigen::VectorXcd& psi);
    double dt() const { return dt_; }

private:
    struct Plans;
    SpatialGrid grid_;
    double dt_;
    Eigen::VectorXcd half_potential_;
    Eigen::VectorXcd kinetic_;
    Plans* plans_;
};

/// Checks that the grid's Nyquist wavenumber pi/dx exceeds |<p>| + 5 sd(p)
/// along every axis, both measured from psi's momentum distribution.
void check_momentum_resolution(const Wavefunction& psi);

/// Frames 0..steps (every `stride`-th step is stored).
Trajectory split_step_propagate(const Wavefunction& psi0, const Eigen::VectorXd& V, double dt, std::size_t steps,
                                std::size_t stride = 1);

/// A(t_j) = sum_x psi0*(x) psi(x, t_j) dx^d = <psi0|psi(t_j)>, so a stationary
/// state of energy E gives e^{-iEt}.
std::vector<cplx> autocorrelation(const Trajectory& traj, const Wavefunction& psi0);

enum class Window { rectangular, hann };

struct Spectrum {
    std::vector<double> energy;    // ascending, spacing 2 pi / (pad n dt)
    std::vector<double> intensity; // |I(E)|^2
    double resolution = 0.0;       // 2 pi / T with T = (n - 1) dt
    double dt = 0.0;
};

inline constexpr std::size_t kMinSpectrumSamples = 256;

/// I(E) = sum_j w_j A(t_j) e^{i E t_j} dt on a zero-padded grid.
Spectrum energy_spectrum(std::span<const cplx> A, double dt, Window window = Window::rectangular,
                         std::size_t pad_factor = 4);

/// Strict local maxima with topographic prominence >= prominence_frac * max(y),
/// refined by a parabola through the three samples around each maximum.
std::vector<double> find_peaks(std::span<const double> x, std::span<const double> y, double prominence_frac);
std::vector<double> find_peaks(const Spectrum& s, double prominence_frac = 0.07);

/// phi(x) = sum_j w_j psi(x, t_j) e^{i E t_j} dt, normalised, with the global
/// phase chosen so the largest-modulus component is real and positive.
/// Throws NumericalError when the projected amplitude |c| = |phi| / sum w dt
/// is below min_weight.
Wavefunction extract_eigenfunction(const Trajectory& traj, double energy, Window window = Window::rectangular,
                                   double min_weight = 1e-6);

/// || H phi - E phi || / || phi ||.
double stationarity_residual(const Wavefunction& phi, const Eigen::VectorXd& V, double energy);

/// |<a|b>| on a shared grid.
double overlap(const Wavefunction& a, const Wavefunction& b);

/// E_n = -(a^2/2)(lambda - n - 1/2)^2, lambda = sqrt(2 De)/a, for
/// n <= min(n_max, floor(lambda - 1/2)).
std::vector<double> morse_levels_analytic(double De, double a, std::size_t n_max);

/// omega (n + 1/2), n = 0..n_max.
std::vector<double> ho_levels_analytic(double omega, std::size_t n_max);

/// Sums of omega_i (n_i + 1/2) over all quantum numbers with sum n_i <= n_max,
/// sorted ascending.
std::vector<double> ho_levels_analytic(std::span<const double> omegas, std::size_t n_max);

/// (1 / (frames * points)) sum_t sum_x |psi - psi_ref|^2.
double wavefunction_mse(const std::vector<Eigen::VectorXcd>& predicted, const std::vector<Eigen::VectorXcd>& exact);

struct RcPropagationConfig {
    EsnConfig esn;              // field is forced to complex, input_dim to 0
    std::size_t train_steps = 5000;
    std::size_t test_steps = 5000;
    bool multi_step = true;
    double split_fraction = 0.85;
};

struct RcPropagationReport {
    // Frames up to the transient come from unwashed states and are skipped.
    double train_mse = 0.0; // frames transient+1..train, teacher-forced fit
    double test_mse = 0.0;  // free-run frames train+1..train+test (0 when empty)
    double total_mse = 0.0; // frames transient+1..train+test
    std::size_t train_steps = 0;
    std::size_t test_steps = 0;
};

struct RcPropagationResult {
    Trajectory predicted; // frame 0 is psi0, then the fit and the free run
    RcPropagationReport report;
};

/// Trains a complex reservoir whose output is the flattened wavefunction
/// (row-major in 2D). The feedback before step t is psi(t-1); the reservoir
/// has no external input. Both the standard and the multi-step readouts start
/// the free run from the state reached by teacher forcing the full span.
RcPropagationResult rc_propagate(const Trajectory& exact, const RcPropagationConfig& config);

/// Same as rc_propagate but reuses prepared reservoir matrices.
RcPropagationResult rc_propagate(const ReservoirMatrices& matrices, const Trajectory& exact,
                                 const RcPropagationConfig& config);

// Checkpoint: "RKTRAJ01", u32 version, u32 dims, per axis (u64 points, f64
// min, f64 dx), f64 dt, u64 frame count, then re/im float64 pairs, all
// little-endian.
void write_trajectory(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory(const std::string& path);

/// "energy,intensity" header then one row per grid point.
void write_spectrum_csv(std::ostream& os, const Spectrum& s);

} // namespace rk
