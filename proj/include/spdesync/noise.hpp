#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spdesync/field.hpp"
#include "spdesync/philox.hpp"

namespace spdesync {

/// Spectrally truncated space-time white noise on a TorusGrid.
///
/// The increment over step n, i.e. over [n dt, (n+1) dt), is the Gaussian
/// field dW(x) = sum_{|k|_inf <= K} c_k exp(2 pi i k.x / L) with
/// E|c_k|^2 = amplitude^2 dt / L^d, c_{-k} = conj(c_k). Each independent
/// mode reads one Philox counter (mode id, stream, step lo, step hi), so
/// increments are a pure function of (seed, step) and disjoint step ranges
/// are independent. The zero mode carries noise.
class NoiseRealization {
 public:
  NoiseRealization(std::uint64_t seed, const TorusGrid& grid, double dt,
                   std::int64_t first_step, std::int64_t end_step, int truncation,
                   double amplitude = 1.0);

  std::uint64_t seed() const noexcept { return seed_; }
  const TorusGrid& grid() const noexcept { return grid_; }
  double dt() const noexcept { return dt_; }
  int truncation() const noexcept { return truncation_; }
  double amplitude() const noexcept { return amplitude_; }
  /// Steps n with first_step <= n < end_step are available.
  std::int64_t first_step() const noexcept { return first_step_; }
  std::int64_t end_step() const noexcept { return end_step_; }
  bool covers(std::int64_t step) const noexcept {
    return step >= first_step_ && step < end_step_;
  }
  /// Number of retained complex modes, (2K + 1)^2.
  std::size_t retained_modes() const noexcept;

  /// Physical-space increment for `step`.
  Field increment(std::int64_t step) const;
  /// Same, written into `out` (size N^2) without allocating a Field.
  void increment_into(std::int64_t step, std::span<double> out) const;
  Spectrum increment_spectrum(std::int64_t step) const;

  /// Restriction to a sub-window; increments are unchanged.
  NoiseRealization window(std::int64_t first_step, std::int64_t end_step) const;

 private:
  void fill_spectrum(std::int64_t step, std::span<std::complex<double>> out) const;

  std::uint64_t seed_;
  TorusGrid grid_;
  double dt_;
  std::int64_t first_step_;
  std::int64_t end_step_;
  int truncation_;
  double amplitude_;
  Philox4x32 rng_;
};

/// Renormalization constant of the truncated model.
struct RenormConstant {
  double value;
  int truncation;
  double mass;
};

/// C_N = L^{-d} sum_{0 < |k|_inf <= K} 1 / (2 (mu_k + m)): the pointwise
/// stationary variance of the truncated linear field dZ = (Delta - m) Z + xi
/// without its zero mode.
RenormConstant renorm_constant(const TorusGrid& grid, int truncation, double mass = 1.0);

/// k-th Hermite polynomial with variance parameter C:
/// H_0 = 1, H_1 = u, H_{k+1} = u H_k - k C H_{k-1}.
double hermite(int k, double u, double variance);
Field hermite(int k, const Field& u, double variance);

/// Exact sample of the stationary truncated linear field (zero mode
/// excluded) whose pointwise variance is renorm_constant(...).value.
/// Independent of the increment streams for the same seed.
Field stationary_linear_field(const TorusGrid& grid, int truncation, double mass,
                              std::uint64_t seed, std::uint64_t sample);

}  // namespace spdesync
