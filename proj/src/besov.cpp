#include "spdesync/besov.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "spdesync/fft.hpp"

namespace spdesync {
namespace {

double ipow(double x, int p) {
  double r = 1.0;
  while (p > 0) {
    if (p & 1) r *= x;
    x *= x;
    p >>= 1;
  }
  return r;
}

// sgn(a)|a|^p - sgn(b)|b|^p given delta = a - b, so that near-equal a and b
// do not lose precision to cancellation.
double signed_power_step(double a, double b, double delta, int p) {
  const bool opposite = (a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0);
  if (opposite) {
    const double s = a > 0.0 ? 1.0 : -1.0;
    return s * (ipow(std::abs(a), p) + ipow(std::abs(b), p));
  }
  const double x = std::abs(a);
  const double y = std::abs(b);
  // x^p - y^p = (x - y) sum_j x^{p-1-j} y^j, and sgn * (x - y) = a - b
  double acc = 1.0;
  double ypow = 1.0;
  for (int i = 1; i < p; ++i) {
    ypow *= y;
    acc = acc * x + ypow;
  }
  return delta * acc;
}

double signed_power_difference(double a, double b, int p) {
  return signed_power_step(a, b, a - b, p);
}

double signed_power(double a, int p) {
  if (a > 0.0) return ipow(a, p);
  if (a < 0.0) return -ipow(-a, p);
  return 0.0;
}

// Applies exp(s_j Delta) to every field for each s_j in turn and hands the
// smoothed samples to fn(j, smoothed). Spectra are computed once.
template <class Fn>
void smoothing_ladder(std::span<const Field* const> fields, const SGrid& s_grid, Fn&& fn) {
  const TorusGrid& g = fields.front()->grid();
  for (const Field* f : fields) require_same_grid(g, f->grid());
  const int n = g.points();
  const int hw = g.half_width();
  std::vector<std::vector<std::complex<double>>> spectra;
  spectra.reserve(fields.size());
  for (const Field* f : fields) {
    std::vector<std::complex<double>> c(g.spectral_size());
    fft::forward(n, f->values(), c);
    spectra.push_back(std::move(c));
  }
  std::vector<double> mux(n), muy(hw), ex(n), ey(hw);
  for (int i = 0; i < n; ++i) mux[i] = g.laplace_eigenvalue(g.wavenumber(i), 0);
  for (int j = 0; j < hw; ++j) muy[j] = g.laplace_eigenvalue(0, j);
  std::vector<std::complex<double>> work(g.spectral_size());
  std::vector<std::vector<double>> smoothed(fields.size(), std::vector<double>(g.size()));
  const double norm = 1.0 / static_cast<double>(g.size());
  for (std::size_t k = 0; k < s_grid.size(); ++k) {
    const double s = s_grid.times()[k];
    for (int i = 0; i < n; ++i) ex[i] = std::exp(-s * mux[i]) * norm;
    for (int j = 0; j < hw; ++j) ey[j] = std::exp(-s * muy[j]);
    for (std::size_t f = 0; f < fields.size(); ++f) {
      const auto& c = spectra[f];
      for (int i = 0; i < n; ++i) {
        const std::size_t row = static_cast<std::size_t>(i) * hw;
        for (int j = 0; j < hw; ++j) work[row + j] = c[row + j] * (ex[i] * ey[j]);
      }
      fft::inverse(n, work, smoothed[f]);
    }
    fn(k, std::span<const std::vector<double>>(smoothed));
  }
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// (sum |v|^p h^d)^{1/p}, scaled to avoid overflow.
double discrete_lp(std::span<const double> v, int p, double cell) {
  const double m = max_abs(v);
  if (m == 0.0) return 0.0;
  double sum = 0.0;
  for (double x : v) sum += ipow(std::abs(x) / m, p);
  return m * std::pow(sum * cell, 1.0 / p);
}

// (sum_j W_j a_j^p)^{1/p} for a_j >= 0, scaled by the largest a_j.
double weighted_p_root(std::span<const double> w, std::span<const double> a, int p) {
  const double m = *std::max_element(a.begin(), a.end());
  if (m == 0.0) return 0.0;
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) sum += w[j] * ipow(a[j] / m, p);
  return m * std::pow(sum, 1.0 / p);
}

void require_p(int p, const char* where) {
  if (p < 1) throw PreconditionError(std::string(where) + ": p must be an integer >= 1");
}

}  // namespace

SGrid::SGrid(double s_min, int points) {
  if (!(s_min > 0.0) || !(s_min < 1.0)) {
    throw ConfigError("SGrid: s_min must lie in (0, 1)");
  }
  if (points < 32) throw ConfigError("SGrid: at least 32 points are required");
  const double lo = std::log(s_min);
  log_step_ = -lo / (points - 1);
  times_.resize(points);
  for (int j = 0; j < points; ++j) times_[j] = std::exp(lo + j * log_step_);
  times_.back() = 1.0;
}

SGrid::SGrid(std::vector<double> times) : times_(std::move(times)) {
  log_step_ = std::log(times_[1] / times_[0]);
}

SGrid SGrid::for_grid(const TorusGrid& grid, int points) {
  const double h = grid.spacing();
  return SGrid(h * h, points);
}

SGrid SGrid::refined() const {
  std::vector<double> t;
  t.reserve(2 * times_.size() - 1);
  for (std::size_t j = 0; j + 1 < times_.size(); ++j) {
    t.push_back(times_[j]);
    t.push_back(std::sqrt(times_[j] * times_[j + 1]));
  }
  t.push_back(times_.back());
  return SGrid(std::move(t));
}

std::vector<double> SGrid::weights(double w) const {
  if (!(w > 0.0)) throw PreconditionError("SGrid::weights: exponent must be > 0");
  const std::size_t J = times_.size();
  std::vector<double> out(J, 0.0);
  const double x = w * log_step_;
  // Per interval [u, u + d] in u = log s:
  //   int e^{wt} dt = d (e^x - 1)/x, int e^{wt} t/d dt = d g(x).
  double mass, right;
  if (std::abs(x) < 1e-2) {
    double term = 1.0, e1 = 0.0, g = 0.0;
    for (int m = 1; m < 10; ++m) {
      term *= x / m;  // x^m / m!
      e1 += term / x;
      if (m >= 2) g += term / (x * x) * (m - 1);
    }
    mass = log_step_ * e1;
    right = log_step_ * g;
  } else {
    const double em1 = std::expm1(x);
    mass = log_step_ * em1 / x;
    right = log_step_ * ((x * (em1 + 1.0) - em1) / (x * x));
  }
  const double left = mass - right;
  for (std::size_t j = 0; j + 1 < J; ++j) {
    const double base = std::pow(times_[j], w);  // e^{w u_j}
    out[j] += base * left;
    out[j + 1] += base * right;
  }
  out[0] += std::pow(times_[0], w) / w;
  return out;
}

BesovParams::BesovParams(double a, int pp, SGrid grid)
    : alpha(a), p(pp), s_grid(std::move(grid)) {
  if (!(alpha > 0.0)) throw ConfigError("BesovParams: alpha must be > 0");
  require_p(p, "BesovParams");
}

double besov_norm_sup(const Field& f, double alpha, const SGrid& s_grid) {
  if (!(alpha > 0.0)) throw PreconditionError("besov_norm_sup: alpha must be > 0");
  const Field* fs[] = {&f};
  double best = 0.0;
  smoothing_ladder(fs, s_grid, [&](std::size_t j, auto smoothed) {
    best = std::max(best, std::pow(s_grid.times()[j], 0.5 * alpha) * max_abs(smoothed[0]));
  });
  return best;
}

double besov_norm_p(const Field& f, const BesovParams& params) {
  const int p = params.p;
  const double cell = f.grid().cell_volume();
  const Field* fs[] = {&f};
  std::vector<double> norms(params.s_grid.size());
  smoothing_ladder(fs, params.s_grid, [&](std::size_t j, auto smoothed) {
    norms[j] = discrete_lp(smoothed[0], p, cell);
  });
  const auto w = params.s_grid.weights(0.5 * params.alpha * p);
  return weighted_p_root(w, norms, p);
}

double phi_p(const Field& f, int p) {
  require_p(p, "phi_p");
  double sum = 0.0;
  for (double x : f.values()) sum += signed_power(x, p);
  return std::ldexp(sum * f.grid().cell_volume(), p - 1);
}

namespace {

double phi_weight_exponent(const TorusGrid& grid, const BesovParams& params) {
  const double shifted = params.alpha - static_cast<double>(grid.dim()) / params.p;
  if (!(shifted > 0.0)) {
    throw ConfigError("phi_besov: requires alpha > d/p (alpha = " +
                      std::to_string(params.alpha) + ", p = " + std::to_string(params.p) + ")");
  }
  return 0.5 * shifted * params.p;
}

}  // namespace

double phi_besov(const Field& f, const BesovParams& params) {
  const auto w = params.s_grid.weights(phi_weight_exponent(f.grid(), params));
  const int p = params.p;
  const Field* fs[] = {&f};
  double total = 0.0;
  smoothing_ladder(fs, params.s_grid, [&](std::size_t j, auto smoothed) {
    double sum = 0.0;
    for (double x : smoothed[0]) sum += signed_power(x, p);
    total += w[j] * sum;
  });
  return std::ldexp(total * f.grid().cell_volume(), p - 1);
}

double phi_besov_difference(const Field& f, const Field& g, const BesovParams& params) {
  require_same_grid(f.grid(), g.grid());
  const auto w = params.s_grid.weights(phi_weight_exponent(f.grid(), params));
  const int p = params.p;
  const Field* fs[] = {&f, &g};
  double total = 0.0;
  smoothing_ladder(fs, params.s_grid, [&](std::size_t j, auto smoothed) {
    const auto& a = smoothed[0];
    const auto& b = smoothed[1];
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += signed_power_difference(a[i], b[i], p);
    total += w[j] * sum;
  });
  return std::ldexp(total * f.grid().cell_volume(), p - 1);
}

double phi_besov_increment(const Field& base, const Field& offset, const BesovParams& params) {
  require_same_grid(base.grid(), offset.grid());
  const auto w = params.s_grid.weights(phi_weight_exponent(base.grid(), params));
  const int p = params.p;
  const Field* fs[] = {&base, &offset};
  double total = 0.0;
  smoothing_ladder(fs, params.s_grid, [&](std::size_t j, auto smoothed) {
    const auto& b = smoothed[0];
    const auto& d = smoothed[1];
    double sum = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) sum += signed_power_step(b[i] + d[i], b[i], d[i], p);
    total += w[j] * sum;
  });
  return std::ldexp(total * base.grid().cell_volume(), p - 1);
}

InequalitySides lemma_a1_gap(const Field& f, const Field& g, const BesovParams& params) {
  require_same_grid(f.grid(), g.grid());
  if (order_gap(g, f) < 0.0) {
    throw PreconditionError("lemma_a1_gap: requires g <= f pointwise");
  }
  const int p = params.p;
  const auto w = params.s_grid.weights(0.5 * params.alpha * p);
  const Field* fs[] = {&f, &g};
  double lhs = 0.0, rhs = 0.0;
  smoothing_ladder(fs, params.s_grid, [&](std::size_t j, auto smoothed) {
    const auto& a = smoothed[0];
    const auto& b = smoothed[1];
    double norm = 0.0, phi = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      norm += ipow(std::abs(a[i] - b[i]), p);
      phi += signed_power_difference(a[i], b[i], p);
    }
    lhs += w[j] * norm;
    rhs += w[j] * phi;
  });
  const double cell = f.grid().cell_volume();
  return {lhs * cell, std::ldexp(rhs * cell, p - 1)};
}

double lemma_a2_constant(int p) {
  require_p(p, "lemma_a2_constant");
  return std::ldexp(static_cast<double>(p), p - 1);
}

InequalitySides lemma_a2_gap(const Field& f, const Field& g, const BesovParams& params) {
  require_same_grid(f.grid(), g.grid());
  const int p = params.p;
  const double cell = f.grid().cell_volume();
  const auto w = params.s_grid.weights(0.5 * params.alpha * p);
  const Field* fs[] = {&f, &g};
  std::vector<double> nf(params.s_grid.size()), ng(nf.size()), nd(nf.size());
  std::vector<double> diff(f.size());
  double phi = 0.0;
  smoothing_ladder(fs, params.s_grid, [&](std::size_t j, auto smoothed) {
    const auto& a = smoothed[0];
    const auto& b = smoothed[1];
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      diff[i] = a[i] - b[i];
      sum += signed_power_difference(a[i], b[i], p);
    }
    phi += w[j] * sum;
    nf[j] = discrete_lp(a, p, cell);
    ng[j] = discrete_lp(b, p, cell);
    nd[j] = discrete_lp(diff, p, cell);
  });
  const double lhs = std::abs(std::ldexp(phi * cell, p - 1));
  const double norm_f = weighted_p_root(w, nf, p);
  const double norm_g = weighted_p_root(w, ng, p);
  const double norm_d = weighted_p_root(w, nd, p);
  const double growth = std::max(1.0, ipow(norm_f, p) + ipow(norm_g, p));
  return {lhs, lemma_a2_constant(p) * std::min(norm_d, 1.0) * growth};
}

double sup_to_p_embedding_constant(const TorusGrid& grid, const BesovParams& params) {
  const double w = 0.5 * params.alpha * params.p;
  const auto weights = params.s_grid.weights(w);
  double sum = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    sum += weights[j] * std::pow(params.s_grid.times()[j], -w);
  }
  return std::pow(grid.volume() * sum, 1.0 / params.p);
}

}  // namespace spdesync
