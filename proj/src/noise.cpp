#include "spdesync/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "spdesync/fft.hpp"

namespace spdesync {
namespace {

constexpr std::uint32_t kIncrementStream = 0;
constexpr std::uint32_t kStationaryStream = 1;

std::uint32_t mode_id(int kx, int ky) {
  return (static_cast<std::uint32_t>(kx + 0x8000) << 16) | static_cast<std::uint32_t>(ky);
}

void check_truncation(const TorusGrid& grid, int truncation) {
  if (truncation < 1 || truncation > grid.points() / 2 - 1) {
    throw ConfigError("noise truncation must lie in [1, N/2 - 1] (got " +
                      std::to_string(truncation) + " for N = " +
                      std::to_string(grid.points()) + ")");
  }
}

// Fills the half spectrum with independent Gaussian modes |k|_inf <= K,
// Hermitian on the ky = 0 line. std_dev(kx, ky) is the standard deviation of
// |c_k|; the stored coefficient is N^2 c_k.
template <class StdDev>
void gaussian_half_spectrum(const TorusGrid& grid, int truncation, const Philox4x32& rng,
                            std::uint32_t stream, std::uint64_t index, bool include_zero,
                            StdDev&& std_dev, std::span<std::complex<double>> out) {
  std::fill(out.begin(), out.end(), std::complex<double>{});
  const int n = grid.points();
  const int hw = grid.half_width();
  const double scale = static_cast<double>(grid.size());
  const auto lo = static_cast<std::uint32_t>(index);
  const auto hi = static_cast<std::uint32_t>(index >> 32);
  auto slot = [&](int kx, int ky) -> std::complex<double>& {
    return out[static_cast<std::size_t>((kx + n) % n) * hw + ky];
  };
  for (int ky = 0; ky <= truncation; ++ky) {
    for (int kx = -truncation; kx <= truncation; ++kx) {
      if (ky == 0 && kx < 0) continue;
      const bool zero = (kx == 0 && ky == 0);
      if (zero && !include_zero) continue;
      const auto [x, y] = rng.normal_pair({mode_id(kx, ky), stream, lo, hi});
      const double sd = std_dev(kx, ky) * scale;
      if (zero) {
        slot(0, 0) = {sd * x, 0.0};
        continue;
      }
      const std::complex<double> c = sd * std::numbers::sqrt2 * 0.5 * std::complex<double>(x, y);
      slot(kx, ky) = c;
      if (ky == 0) slot(-kx, 0) = std::conj(c);
    }
  }
}

}  // namespace

NoiseRealization::NoiseRealization(std::uint64_t seed, const TorusGrid& grid, double dt,
                                   std::int64_t first_step, std::int64_t end_step,
                                   int truncation, double amplitude)
    : seed_(seed),
      grid_(grid),
      dt_(dt),
      first_step_(first_step),
      end_step_(end_step),
      truncation_(truncation),
      amplitude_(amplitude),
      rng_(seed) {
  if (!(dt > 0.0)) throw ConfigError("NoiseRealization: dt must be > 0");
  if (end_step < first_step) throw ConfigError("NoiseRealization: empty or inverted window");
  if (!(amplitude >= 0.0)) throw ConfigError("NoiseRealization: amplitude must be >= 0");
  check_truncation(grid, truncation);
}

std::size_t NoiseRealization::retained_modes() const noexcept {
  const auto side = static_cast<std::size_t>(2 * truncation_ + 1);
  return side * side;
}

void NoiseRealization::fill_spectrum(std::int64_t step, std::span<std::complex<double>> out) const {
  if (!covers(step)) {
    throw PreconditionError("noise increment: step " + std::to_string(step) +
                            " outside window [" + std::to_string(first_step_) + ", " +
                            std::to_string(end_step_) + ")");
  }
  const double sd = amplitude_ * std::sqrt(dt_ / grid_.volume());
  gaussian_half_spectrum(grid_, truncation_, rng_, kIncrementStream,
                         static_cast<std::uint64_t>(step), true,
                         [sd](int, int) { return sd; }, out);
}

Spectrum NoiseRealization::increment_spectrum(std::int64_t step) const {
  std::vector<std::complex<double>> c(grid_.spectral_size());
  fill_spectrum(step, c);
  return Spectrum(grid_, std::move(c));
}

void NoiseRealization::increment_into(std::int64_t step, std::span<double> out) const {
  thread_local std::vector<std::complex<double>> c;
  c.resize(grid_.spectral_size());
  fill_spectrum(step, c);
  fft::inverse(grid_.points(), c, out);
  const double norm = 1.0 / static_cast<double>(grid_.size());
  for (double& x : out) x *= norm;
}

Field NoiseRealization::increment(std::int64_t step) const {
  std::vector<double> v(grid_.size());
  increment_into(step, v);
  return Field(grid_, std::move(v));
}

NoiseRealization NoiseRealization::window(std::int64_t first, std::int64_t end) const {
  if (first < first_step_ || end > end_step_) {
    throw PreconditionError("NoiseRealization::window: sub-window exceeds the realization");
  }
  return NoiseRealization(seed_, grid_, dt_, first, end, truncation_, amplitude_);
}

RenormConstant renorm_constant(const TorusGrid& grid, int truncation, double mass) {
  if (truncation < 1) throw ConfigError("renorm_constant: truncation must be >= 1");
  if (!(mass > 0.0)) throw ConfigError("renorm_constant: mass must be > 0");
  double sum = 0.0;
  for (int kx = -truncation; kx <= truncation; ++kx) {
    for (int ky = -truncation; ky <= truncation; ++ky) {
      if (kx == 0 && ky == 0) continue;
      sum += 1.0 / (2.0 * (grid.laplace_eigenvalue(kx, ky) + mass));
    }
  }
  return {sum / grid.volume(), truncation, mass};
}

double hermite(int k, double u, double variance) {
  if (k < 0) throw PreconditionError("hermite: degree must be >= 0");
  if (k == 0) return 1.0;
  double prev = 1.0, cur = u;
  for (int j = 1; j < k; ++j) {
    const double next = u * cur - j * variance * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

Field hermite(int k, const Field& u, double variance) {
  std::vector<double> v(u.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = hermite(k, u[i], variance);
  return Field(u.grid(), std::move(v));
}

Field stationary_linear_field(const TorusGrid& grid, int truncation, double mass,
                              std::uint64_t seed, std::uint64_t sample) {
  check_truncation(grid, truncation);
  if (!(mass > 0.0)) throw ConfigError("stationary_linear_field: mass must be > 0");
  const Philox4x32 rng(seed);
  std::vector<std::complex<double>> c(grid.spectral_size());
  const double volume = grid.volume();
  gaussian_half_spectrum(
      grid, truncation, rng, kStationaryStream, sample, false,
      [&](int kx, int ky) {
        return std::sqrt(1.0 / (2.0 * volume * (grid.laplace_eigenvalue(kx, ky) + mass)));
      },
      c);
  return to_physical(Spectrum(grid, std::move(c)));
}

}  // namespace spdesync
