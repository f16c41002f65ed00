#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spdesync/field.hpp"
#include "spdesync/noise.hpp"

namespace spdesync {

/// Time discretization of (d/dt - Delta) u = P(u) + xi.
enum class Scheme {
  /// Lie splitting: backward Euler for the pointwise ODE u' = P(u), then an
  /// implicit step of the 5-point lattice Laplacian with the noise
  /// increment. Monotone in the data, so ordered initial conditions stay
  /// ordered on the grid, and stable for arbitrarily large data.
  ImplicitSplit,
  /// u_k^+ = (u_k + dt F[P(u)]_k + xi_k) / (1 + dt mu_k) with the spectral
  /// symbol; P(u) is evaluated on a zero-padded grid large enough to remove
  /// aliasing for the polynomial degree. Explicit in P, so large data blow up.
  SemiImplicitSpectral,
};

const char* to_string(Scheme scheme) noexcept;
Scheme scheme_from_string(const std::string& name);

/// Discretization and model parameters.
///
/// The drift is P(u) = -sum_k a_k H_k(u, C_N) + mass_term * u with Hermite
/// polynomials H_k; the default a_3 = 1, mass_term = 1 gives
/// -(u^3 - 3 C_N u) + u.
class SolverConfig {
 public:
  SolverConfig(const TorusGrid& grid, double dt, int truncation, RenormConstant renorm,
               std::vector<double> hermite_coefficients = {0.0, 0.0, 0.0, 1.0},
               double mass_term = 1.0, Scheme scheme = Scheme::ImplicitSplit);

  /// Default model at the given resolution: truncation N/2 - 1, C_N with
  /// reference mass 1.
  static SolverConfig standard(const TorusGrid& grid, double dt,
                               Scheme scheme = Scheme::ImplicitSplit);

  const TorusGrid& grid() const noexcept { return grid_; }
  double dt() const noexcept { return dt_; }
  int truncation() const noexcept { return truncation_; }
  const RenormConstant& renorm() const noexcept { return renorm_; }
  std::span<const double> hermite_coefficients() const noexcept { return hermite_; }
  double mass_term() const noexcept { return mass_term_; }
  Scheme scheme() const noexcept { return scheme_; }
  int degree() const noexcept { return static_cast<int>(drift_.size()) - 1; }

  /// Monomial coefficients of P, lowest order first.
  std::span<const double> drift_polynomial() const noexcept { return drift_; }
  double drift(double u) const noexcept;
  double drift_derivative(double u) const noexcept;
  /// sup_u P'(u); finite because the leading Hermite coefficient is positive
  /// and of odd degree.
  double drift_derivative_bound() const noexcept { return drift_slope_bound_; }

  /// Time to step index on this config's lattice; throws if t is off-lattice.
  std::int64_t step_index(double t) const;

 private:
  TorusGrid grid_;
  double dt_;
  int truncation_;
  RenormConstant renorm_;
  std::vector<double> hermite_;
  double mass_term_;
  Scheme scheme_;
  std::vector<double> drift_;
  double drift_slope_bound_ = 0.0;
};

/// Advances raw sample arrays by one step without allocating. Owns its
/// scratch space, so each instance belongs to one thread.
class Stepper {
 public:
  explicit Stepper(const SolverConfig& config);

  /// u <- one step from u with the given physical-space noise increment.
  /// Throws BlowUpError(step_index) if the result is not finite.
  void advance(std::span<double> u, std::span<const double> noise_increment,
               std::int64_t step_index);

  /// Advances base + offset_k for every k. The base receives the noise; the
  /// offsets (member minus base) are propagated through the exact
  /// difference of the split step, so they keep full relative precision
  /// however small they become. Requires Scheme::ImplicitSplit.
  void advance_relative(std::span<double> base, std::span<std::vector<double>> offsets,
                        std::span<const double> noise_increment, std::int64_t step_index);

  /// Backward-Euler solve of v - dt P(v) = w for a single value.
  double local_implicit_solve(double w) const;

  /// (P(a) - P(b)) / (a - b), and P'(a) when a == b.
  double drift_divided_difference(double a, double b) const noexcept;

 private:
  void advance_split(std::span<double> u, std::span<const double> noise);
  void apply_heat_step(std::span<double> u);
  void advance_spectral(std::span<double> u, std::span<const double> noise);

  SolverConfig config_;
  std::vector<double> drift_;
  double dt_;
  double slope_floor_;
  double lead_;
  std::vector<double> inverse_symbol_;  // 1 / (1 + dt mu_k) / N^2 on the half spectrum
  std::vector<std::complex<double>> spectrum_;
  std::vector<std::complex<double>> noise_spectrum_;
  int padded_ = 0;
  std::vector<std::complex<double>> padded_spectrum_;
  std::vector<double> padded_values_;
};

/// One step of the configured scheme.
Field step(const Field& u, const SolverConfig& config, const Field& noise_increment,
           std::int64_t step_index = 0);

struct Snapshot {
  double time;
  Field field;
};

/// Solution u(.; s; f) on [s, t] for one noise realization.
struct Trajectory {
  double start_time;
  double end_time;
  Field initial;
  Field final_state;
  std::vector<Snapshot> snapshots;
};

/// Called after every step with the step index just completed (the state is
/// at time (step + 1) dt) and the states of all coupled members.
using StepObserver =
    std::function<void(std::int64_t step, std::span<const std::vector<double>> states)>;

/// u(t; s; f): steps from s to t consuming increments s/dt, ..., t/dt - 1.
/// Snapshots are recorded at the requested times (rounded to the step
/// lattice, restricted to [s, t]).
Trajectory evolve(const Field& f, double s, double t, const SolverConfig& config,
                  const NoiseRealization& noise, std::span<const double> output_times = {});

/// All members consume the identical increment at every step (synchronous
/// coupling) and advance in lockstep.
std::vector<Trajectory> evolve_coupled(std::span<const Field> fs, double s, double t,
                                       const SolverConfig& config,
                                       const NoiseRealization& noise,
                                       std::span<const double> output_times = {},
                                       const StepObserver& observer = {});

/// Coupled members stored as base + offset, see Stepper::advance_relative.
struct RelativeSnapshot {
  double time;
  Field base;
  std::vector<Field> offsets;
};

struct RelativeEnsemble {
  double start_time;
  double end_time;
  Field base;
  std::vector<Field> offsets;
  std::vector<RelativeSnapshot> snapshots;
};

/// Called after every step with the step index just completed, the base
/// state and the offsets of the members.
using RelativeObserver = std::function<void(std::int64_t step, std::span<const double> base,
                                            std::span<const std::vector<double>> offsets)>;

/// Synchronously coupled evolution of `base` and `members`, where member k is
/// carried as base + offset_k with offset_k = members[k] - base initially.
/// Under Scheme::ImplicitSplit the offsets are advanced by the exact
/// difference of the scheme (no cancellation); under the spectral scheme
/// the members are advanced directly and the offsets are differences.
RelativeEnsemble evolve_relative(const Field& base, std::span<const Field> members, double s,
                                 double t, const SolverConfig& config,
                                 const NoiseRealization& noise,
                                 std::span<const double> output_times = {},
                                 const RelativeObserver& observer = {});

/// Same as evolve_relative with the members given directly as offsets from
/// the base, so an ensemble can be resumed without re-rounding.
RelativeEnsemble evolve_offsets(const Field& base, std::span<const Field> offsets, double s,
                                double t, const SolverConfig& config,
                                const NoiseRealization& noise,
                                std::span<const double> output_times = {},
                                const RelativeObserver& observer = {});

/// Discrete Lyapunov functional of the noise-free flow:
/// sum_x h^d (|grad u|^2 / 2 + V(u)) with V' = -P, using the same Laplacian
/// as the scheme.
double energy(const Field& u, const SolverConfig& config);

}  // namespace spdesync
