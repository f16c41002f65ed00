#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "spdesync/error.hpp"

namespace spdesync {

/// Uniform periodic grid on the torus [0, L)^d.
///
/// Only d = 2 is supported for transforms and dynamics. N must be a power of
/// two and at least 4. Points are stored row-major: index = i * N + j with
/// x = (i h, j h), h = L / N.
class TorusGrid {
 public:
  TorusGrid(double length, int points, int dim = 2);

  int dim() const noexcept { return dim_; }
  double length() const noexcept { return length_; }
  int points() const noexcept { return points_; }

  double spacing() const noexcept { return length_ / points_; }
  double cell_volume() const noexcept { return spacing() * spacing(); }
  double volume() const noexcept { return length_ * length_; }
  std::size_t size() const noexcept {
    return static_cast<std::size_t>(points_) * points_;
  }

  /// Number of complex coefficients in the half spectrum, N * (N/2 + 1).
  std::size_t spectral_size() const noexcept {
    return static_cast<std::size_t>(points_) * (points_ / 2 + 1);
  }
  int half_width() const noexcept { return points_ / 2 + 1; }

  /// Signed wavenumber for storage index i along a full axis.
  int wavenumber(int i) const noexcept { return i <= points_ / 2 ? i : i - points_; }

  /// (2 pi / L)^2 |k|^2.
  double laplace_eigenvalue(int kx, int ky) const noexcept;

  /// Symbol of the 5-point lattice Laplacian, (4/h^2) sum_i sin^2(pi k_i / N).
  double lattice_laplace_eigenvalue(int kx, int ky) const noexcept;

  friend bool operator==(const TorusGrid&, const TorusGrid&) = default;

 private:
  double length_;
  int points_;
  int dim_;
};

void require_same_grid(const TorusGrid& a, const TorusGrid& b);

class Spectrum;

/// Real scalar field sampled on a TorusGrid. Values are immutable once built.
class Field {
 public:
  explicit Field(const TorusGrid& grid);
  Field(const TorusGrid& grid, std::vector<double> values);

  static Field constant(const TorusGrid& grid, double value);
  /// Samples fn(x, y) at the grid points.
  static Field sample(const TorusGrid& grid,
                      const std::function<double(double, double)>& fn);

  const TorusGrid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double at(int i, int j) const noexcept {
    return values_[static_cast<std::size_t>(i) * grid_.points() + j];
  }
  std::size_t size() const noexcept { return values_.size(); }

  /// Moves the sample vector out; the field is left empty.
  std::vector<double> release() && { return std::move(values_); }

  Field operator+(const Field& other) const;
  Field operator-(const Field& other) const;
  Field operator*(double scale) const;
  Field operator-() const { return *this * -1.0; }

  double mean() const;
  bool all_finite() const;

 private:
  TorusGrid grid_;
  std::vector<double> values_;
};

inline Field operator*(double scale, const Field& f) { return f * scale; }

/// Half-spectrum (real-to-complex) Fourier coefficients of a Field.
///
/// Storage is N x (N/2 + 1), row-major; entry (i, j) holds the unnormalized
/// DFT coefficient sum_x f(x) exp(-2 pi i (k_i x_1 + j x_2) / L) for the
/// signed wavenumber k_i = wavenumber(i) and ky = j >= 0. Modes with ky < 0
/// follow from Hermitian symmetry. The Fourier amplitude of mode k in
/// f(x) = sum_k c_k exp(2 pi i k.x / L) is coefficient / N^2.
class Spectrum {
 public:
  explicit Spectrum(const TorusGrid& grid);
  Spectrum(const TorusGrid& grid, std::vector<std::complex<double>> coeffs);

  const TorusGrid& grid() const noexcept { return grid_; }
  std::span<const std::complex<double>> coefficients() const noexcept {
    return coeffs_;
  }
  std::complex<double> at(int i, int j) const noexcept {
    return coeffs_[static_cast<std::size_t>(i) * grid_.half_width() + j];
  }
  /// Amplitude c_k for any signed mode (kx, ky) with |k_i| <= N/2.
  std::complex<double> amplitude(int kx, int ky) const;

 private:
  TorusGrid grid_;
  std::vector<std::complex<double>> coeffs_;
};

Spectrum to_spectral(const Field& f);
Field to_physical(const Spectrum& s);

/// Smoothing time of the heat semigroup; s > 0.
struct HeatParams {
  double s;
};

/// exp(s Delta) f, applied exactly per Fourier mode.
Field heat_smooth(const Field& f, HeatParams params);
Spectrum heat_smooth(const Spectrum& f, HeatParams params);

/// Discrete L^p norm with cell volume h^d; p = 0 is not allowed.
double lp_norm(const Field& f, int p);
double sup_norm(const Field& f);

/// min_x (g(x) - f(x)); f is below g on the grid iff the result is >= 0.
double order_gap(const Field& f, const Field& g);

}  // namespace spdesync
