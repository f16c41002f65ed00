#include "spdesync/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "spdesync/fft.hpp"

namespace spdesync {

TorusGrid::TorusGrid(double length, int points, int dim)
    : length_(length), points_(points), dim_(dim) {
  if (dim != 2) {
    throw ConfigError("TorusGrid: only d = 2 is supported (got d = " +
                      std::to_string(dim) + ")");
  }
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw ConfigError("TorusGrid: side length must be positive");
  }
  if (points < 4 || (points & (points - 1)) != 0) {
    throw ConfigError("TorusGrid: N must be a power of two >= 4 (got " +
                      std::to_string(points) + ")");
  }
}

double TorusGrid::laplace_eigenvalue(int kx, int ky) const noexcept {
  const double w = 2.0 * std::numbers::pi / length_;
  return w * w * (static_cast<double>(kx) * kx + static_cast<double>(ky) * ky);
}

double TorusGrid::lattice_laplace_eigenvalue(int kx, int ky) const noexcept {
  const double h = spacing();
  const double sx = std::sin(std::numbers::pi * kx / points_);
  const double sy = std::sin(std::numbers::pi * ky / points_);
  return 4.0 / (h * h) * (sx * sx + sy * sy);
}

void require_same_grid(const TorusGrid& a, const TorusGrid& b) {
  if (!(a == b)) {
    throw GridMismatch("fields live on different grids (N " +
                       std::to_string(a.points()) + " vs " +
                       std::to_string(b.points()) + ")");
  }
}

Field::Field(const TorusGrid& grid) : grid_(grid), values_(grid.size(), 0.0) {}

Field::Field(const TorusGrid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw ConfigError("Field: expected " + std::to_string(grid_.size()) +
                      " samples, got " + std::to_string(values_.size()));
  }
}

Field Field::constant(const TorusGrid& grid, double value) {
  return Field(grid, std::vector<double>(grid.size(), value));
}

Field Field::sample(const TorusGrid& grid,
                    const std::function<double(double, double)>& fn) {
  std::vector<double> v(grid.size());
  const int n = grid.points();
  const double h = grid.spacing();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      v[static_cast<std::size_t>(i) * n + j] = fn(i * h, j * h);
    }
  }
  return Field(grid, std::move(v));
}

Field Field::operator+(const Field& other) const {
  require_same_grid(grid_, other.grid_);
  std::vector<double> v(values_.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = values_[i] + other.values_[i];
  return Field(grid_, std::move(v));
}

Field Field::operator-(const Field& other) const {
  require_same_grid(grid_, other.grid_);
  std::vector<double> v(values_.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = values_[i] - other.values_[i];
  return Field(grid_, std::move(v));
}

Field Field::operator*(double scale) const {
  std::vector<double> v(values_.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = scale * values_[i];
  return Field(grid_, std::move(v));
}

double Field::mean() const {
  double sum = 0.0;
  for (double x : values_) sum += x;
  return sum / static_cast<double>(values_.size());
}

bool Field::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double x) { return std::isfinite(x); });
}

Spectrum::Spectrum(const TorusGrid& grid)
    : grid_(grid), coeffs_(grid.spectral_size()) {}

Spectrum::Spectrum(const TorusGrid& grid, std::vector<std::complex<double>> coeffs)
    : grid_(grid), coeffs_(std::move(coeffs)) {
  if (coeffs_.size() != grid_.spectral_size()) {
    throw ConfigError("Spectrum: wrong coefficient count");
  }
}

std::complex<double> Spectrum::amplitude(int kx, int ky) const {
  const int n = grid_.points();
  if (std::abs(kx) > n / 2 || std::abs(ky) > n / 2) {
    throw PreconditionError("Spectrum::amplitude: mode outside the grid band");
  }
  const double norm = 1.0 / static_cast<double>(grid_.size());
  if (ky < 0 || (ky == 0 && kx < 0)) {
    kx = -kx;
    ky = -ky;
    const int i = ((kx % n) + n) % n;
    return std::conj(at(i, ky)) * norm;
  }
  const int i = ((kx % n) + n) % n;
  return at(i, ky) * norm;
}

Spectrum to_spectral(const Field& f) {
  std::vector<std::complex<double>> c(f.grid().spectral_size());
  fft::forward(f.grid().points(), f.values(), c);
  return Spectrum(f.grid(), std::move(c));
}

Field to_physical(const Spectrum& s) {
  const TorusGrid& g = s.grid();
  std::vector<double> v(g.size());
  fft::inverse(g.points(), s.coefficients(), v);
  const double norm = 1.0 / static_cast<double>(g.size());
  for (double& x : v) x *= norm;
  return Field(g, std::move(v));
}

Spectrum heat_smooth(const Spectrum& f, HeatParams params) {
  if (!(params.s > 0.0)) throw PreconditionError("heat_smooth: s must be > 0");
  const TorusGrid& g = f.grid();
  const int n = g.points();
  const int hw = g.half_width();
  // exp(-s mu_k) factorizes over the two axes.
  std::vector<double> ex(n), ey(hw);
  for (int i = 0; i < n; ++i) ex[i] = std::exp(-params.s * g.laplace_eigenvalue(g.wavenumber(i), 0));
  for (int j = 0; j < hw; ++j) ey[j] = std::exp(-params.s * g.laplace_eigenvalue(0, j));
  std::vector<std::complex<double>> c(f.coefficients().begin(), f.coefficients().end());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < hw; ++j) c[static_cast<std::size_t>(i) * hw + j] *= ex[i] * ey[j];
  }
  return Spectrum(g, std::move(c));
}

Field heat_smooth(const Field& f, HeatParams params) {
  return to_physical(heat_smooth(to_spectral(f), params));
}

double lp_norm(const Field& f, int p) {
  if (p < 1) throw PreconditionError("lp_norm: p must be >= 1");
  // Scale by the max to keep large p finite.
  const double m = sup_norm(f);
  if (m == 0.0) return 0.0;
  double sum = 0.0;
  for (double x : f.values()) sum += std::pow(std::abs(x) / m, p);
  return m * std::pow(sum * f.grid().cell_volume(), 1.0 / p);
}

double sup_norm(const Field& f) {
  double m = 0.0;
  for (double x : f.values()) m = std::max(m, std::abs(x));
  return m;
}

double order_gap(const Field& f, const Field& g) {
  require_same_grid(f.grid(), g.grid());
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < f.size(); ++i) gap = std::min(gap, g[i] - f[i]);
  return gap;
}

}  // namespace spdesync
