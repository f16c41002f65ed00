#include "spdesync/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "spdesync/fft.hpp"

namespace spdesync {
namespace {

// Monomial coefficients of H_k(., C) for k = 0..n.
std::vector<std::vector<double>> hermite_monomials(int n, double variance) {
  std::vector<std::vector<double>> h(n + 1);
  h[0] = {1.0};
  if (n >= 1) h[1] = {0.0, 1.0};
  for (int k = 1; k < n; ++k) {
    std::vector<double> next(k + 2, 0.0);
    for (int m = 0; m <= k; ++m) next[m + 1] += h[k][m];
    for (int m = 0; m <= k - 1; ++m) next[m] -= k * variance * h[k - 1][m];
    h[k + 1] = std::move(next);
  }
  return h;
}

double horner(std::span<const double> c, double x) {
  double r = 0.0;
  for (std::size_t m = c.size(); m-- > 0;) r = r * x + c[m];
  return r;
}

std::vector<double> derivative(std::span<const double> c) {
  if (c.size() <= 1) return {0.0};
  std::vector<double> d(c.size() - 1);
  for (std::size_t m = 1; m < c.size(); ++m) d[m - 1] = m * c[m];
  return d;
}

// sup of a polynomial of even degree with negative leading coefficient.
double polynomial_sup(std::span<const double> c) {
  if (c.size() == 1) return c[0];
  const auto d = derivative(c);
  // All critical points lie within the Cauchy bound of d's roots.
  double bound = 1.0;
  if (d.size() > 1) {
    const double lead = std::abs(d.back());
    for (std::size_t m = 0; m + 1 < d.size(); ++m) bound = std::max(bound, 1.0 + std::abs(d[m]) / lead);
  }
  constexpr int kSamples = 4001;
  double best_x = -bound, best = horner(c, -bound);
  for (int i = 1; i < kSamples; ++i) {
    const double x = -bound + 2.0 * bound * i / (kSamples - 1);
    const double v = horner(c, x);
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  // Golden-section refinement around the best sample.
  const double width = 2.0 * bound / (kSamples - 1);
  double a = best_x - width, b = best_x + width;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 200 && b - a > 1e-14 * (1.0 + std::abs(a)); ++it) {
    const double x1 = b - phi * (b - a);
    const double x2 = a + phi * (b - a);
    if (horner(c, x1) > horner(c, x2)) b = x2; else a = x1;
  }
  return std::max(best, horner(c, 0.5 * (a + b)));
}

int padded_points(int n, int degree) {
  if (degree <= 1) return n;
  // Products of `degree` modes with |k| < n/2 reach |k| < degree n/2; no
  // alias lands on a retained mode once M >= (degree + 1) n / 2.
  const int need = (degree + 1) * n / 2;
  int m = n;
  while (m < need) m *= 2;
  return m;
}

void check_finite(std::span<const double> u, std::int64_t step) {
  for (double x : u) {
    if (!std::isfinite(x) || std::abs(x) > 1e150) {
      throw BlowUpError(step, "solver blow-up at step " + std::to_string(step) +
                                  ": non-finite or overflowing values; reduce dt");
    }
  }
}

}  // namespace

const char* to_string(Scheme scheme) noexcept {
  switch (scheme) {
    case Scheme::ImplicitSplit: return "implicit_split";
    case Scheme::SemiImplicitSpectral: return "semi_implicit_spectral";
  }
  return "unknown";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "implicit_split") return Scheme::ImplicitSplit;
  if (name == "semi_implicit_spectral") return Scheme::SemiImplicitSpectral;
  throw ConfigError("unknown scheme '" + name +
                    "' (expected implicit_split or semi_implicit_spectral)");
}

SolverConfig::SolverConfig(const TorusGrid& grid, double dt, int truncation,
                           RenormConstant renorm, std::vector<double> hermite_coefficients,
                           double mass_term, Scheme scheme)
    : grid_(grid),
      dt_(dt),
      truncation_(truncation),
      renorm_(renorm),
      hermite_(std::move(hermite_coefficients)),
      mass_term_(mass_term),
      scheme_(scheme) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("solver: dt must be > 0");
  if (truncation < 1 || truncation > grid.points() / 2 - 1) {
    throw ConfigError("solver: truncation must lie in [1, N/2 - 1]");
  }
  while (!hermite_.empty() && hermite_.back() == 0.0) hermite_.pop_back();
  const int n = static_cast<int>(hermite_.size()) - 1;
  if (n >= 2) {
    if (n % 2 == 0 || !(hermite_.back() > 0.0)) {
      throw ConfigError("solver: the leading Hermite coefficient a_n needs odd n and a_n > 0");
    }
  }
  const auto h = hermite_monomials(std::max(n, 1), renorm_.value);
  drift_.assign(std::max(n, 1) + 1, 0.0);
  for (int k = 0; k <= n; ++k) {
    for (std::size_t m = 0; m < h[k].size(); ++m) drift_[m] -= hermite_[k] * h[k][m];
  }
  drift_[1] += mass_term_;
  while (drift_.size() > 1 && drift_.back() == 0.0) drift_.pop_back();
  drift_slope_bound_ = polynomial_sup(derivative(drift_));
  if (scheme_ == Scheme::ImplicitSplit && !(dt_ * drift_slope_bound_ < 1.0)) {
    throw ConfigError("solver: implicit split requires dt * sup P' < 1 (dt = " +
                      std::to_string(dt_) + ", sup P' = " +
                      std::to_string(drift_slope_bound_) + "); reduce dt");
  }
}

SolverConfig SolverConfig::standard(const TorusGrid& grid, double dt, Scheme scheme) {
  const int truncation = grid.points() / 2 - 1;
  return SolverConfig(grid, dt, truncation, renorm_constant(grid, truncation, 1.0),
                      {0.0, 0.0, 0.0, 1.0}, 1.0, scheme);
}

double SolverConfig::drift(double u) const noexcept { return horner(drift_, u); }

double SolverConfig::drift_derivative(double u) const noexcept {
  double r = 0.0;
  for (std::size_t m = drift_.size(); m-- > 1;) r = r * u + m * drift_[m];
  return r;
}

std::int64_t SolverConfig::step_index(double t) const {
  const double x = t / dt_;
  const auto n = static_cast<std::int64_t>(std::llround(x));
  if (std::abs(x - static_cast<double>(n)) > 1e-6) {
    throw ConfigError("time " + std::to_string(t) + " is not a multiple of dt = " +
                      std::to_string(dt_));
  }
  return n;
}

Stepper::Stepper(const SolverConfig& config)
    : config_(config),
      drift_(config.drift_polynomial().begin(), config.drift_polynomial().end()),
      dt_(config.dt()),
      slope_floor_(1.0 - config.dt() * config.drift_derivative_bound()),
      lead_(config.degree() >= 3 ? -config.drift_polynomial().back() : 0.0) {
  const TorusGrid& g = config_.grid();
  const int n = g.points();
  const int hw = g.half_width();
  const double norm = 1.0 / static_cast<double>(g.size());
  inverse_symbol_.resize(g.spectral_size());
  for (int i = 0; i < n; ++i) {
    const int kx = g.wavenumber(i);
    for (int j = 0; j < hw; ++j) {
      double& w = inverse_symbol_[static_cast<std::size_t>(i) * hw + j];
      if (config_.scheme() == Scheme::ImplicitSplit) {
        w = norm / (1.0 + config_.dt() * g.lattice_laplace_eigenvalue(kx, j));
      } else {
        const bool nyquist = (i == n / 2) || (j == n / 2);
        w = nyquist ? 0.0 : norm / (1.0 + config_.dt() * g.laplace_eigenvalue(kx, j));
      }
    }
  }
  spectrum_.resize(g.spectral_size());
  if (config_.scheme() == Scheme::SemiImplicitSpectral) {
    noise_spectrum_.resize(g.spectral_size());
    padded_ = padded_points(n, config_.degree());
    padded_spectrum_.resize(static_cast<std::size_t>(padded_) * (padded_ / 2 + 1));
    padded_values_.resize(static_cast<std::size_t>(padded_) * padded_);
  }
}

double Stepper::local_implicit_solve(double w) const {
  const double* c = drift_.data();
  const int n = static_cast<int>(drift_.size()) - 1;
  const double dt = dt_;
  // G(v) = v - dt P(v) - w and G'(v) in one Horner pass.
  auto eval = [&](double v, double& slope) {
    double value = c[n], deriv = 0.0;
    for (int m = n; m-- > 0;) {
      deriv = deriv * v + value;
      value = value * v + c[m];
    }
    slope = 1.0 - dt * deriv;
    return v - dt * value - w;
  };
  double slope;
  const double g0 = eval(w, slope);
  if (g0 == 0.0) return w;
  // G is increasing with G' >= slope_floor_, which brackets the root.
  double lo, hi;
  if (g0 < 0.0) {
    lo = w;
    hi = w - g0 / slope_floor_;
  } else {
    hi = w;
    lo = w - g0 / slope_floor_;
  }
  double v;
  if (n >= 3 && dt * lead_ * w * w > 1.0) {
    // Leading balance v + dt |a_n| v^n = w for huge data.
    v = std::copysign(std::pow(std::abs(w) / (dt * lead_), 1.0 / n), w);
  } else {
    v = w - g0;  // explicit Euler predictor, w + dt P(w)
  }
  v = std::clamp(v, lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double g = eval(v, slope);
    if (g == 0.0) return v;
    if (g < 0.0) lo = v; else hi = v;
    double next = v - g / slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    // Newton converges quadratically with a small constant here, so a
    // relative step of 1e-8 leaves an error far below one ulp.
    if (std::abs(next - v) <= 1e-8 * std::abs(next) || next == lo || next == hi) return next;
    v = next;
  }
  return v;
}

void Stepper::advance(std::span<double> u, std::span<const double> noise_increment,
                      std::int64_t step_index) {
  if (config_.scheme() == Scheme::ImplicitSplit) {
    advance_split(u, noise_increment);
  } else {
    advance_spectral(u, noise_increment);
  }
  check_finite(u, step_index);
}

void Stepper::advance_split(std::span<double> u, std::span<const double> noise) {
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = local_implicit_solve(u[i]) + noise[i];
  apply_heat_step(u);
}

void Stepper::apply_heat_step(std::span<double> u) {
  const int n = config_.grid().points();
  fft::forward(n, u, spectrum_);
  for (std::size_t k = 0; k < spectrum_.size(); ++k) spectrum_[k] *= inverse_symbol_[k];
  fft::inverse(n, spectrum_, u);
}

double Stepper::drift_divided_difference(double a, double b) const noexcept {
  // sum_m c_m (a^m - b^m) / (a - b), with h_m = sum_j a^{m-1-j} b^j.
  double h = 1.0, bpow = 1.0, q = 0.0;
  for (std::size_t m = 1; m < drift_.size(); ++m) {
    if (m > 1) {
      bpow *= b;
      h = a * h + bpow;
    }
    q += drift_[m] * h;
  }
  return q;
}

void Stepper::advance_relative(std::span<double> base, std::span<std::vector<double>> offsets,
                               std::span<const double> noise, std::int64_t step_index) {
  if (config_.scheme() != Scheme::ImplicitSplit) {
    throw PreconditionError("advance_relative: requires the implicit split scheme");
  }
  for (std::size_t i = 0; i < base.size(); ++i) {
    const double v0 = local_implicit_solve(base[i]);
    for (auto& d : offsets) {
      // v_k - v_0 - dt (P(v_k) - P(v_0)) = w_k - w_0 = d
      const double vk = local_implicit_solve(base[i] + d[i]);
      d[i] /= 1.0 - dt_ * drift_divided_difference(vk, v0);
    }
    base[i] = v0 + noise[i];
  }
  apply_heat_step(base);
  for (auto& d : offsets) apply_heat_step(d);
  check_finite(base, step_index);
  for (const auto& d : offsets) check_finite(d, step_index);
}

void Stepper::advance_spectral(std::span<double> u, std::span<const double> noise) {
  const TorusGrid& g = config_.grid();
  const int n = g.points();
  const int hw = g.half_width();
  const double dt = config_.dt();
  fft::forward(n, u, spectrum_);
  fft::forward(n, noise, noise_spectrum_);
  const int m = padded_;
  const int mhw = m / 2 + 1;
  const double up = static_cast<double>(m) * m / (static_cast<double>(n) * n);
  // Interpolate the retained modes (Nyquist dropped) onto the M-grid.
  std::fill(padded_spectrum_.begin(), padded_spectrum_.end(), std::complex<double>{});
  for (int i = 0; i < n; ++i) {
    if (i == n / 2) continue;
    const int kx = g.wavenumber(i);
    const std::size_t row = static_cast<std::size_t>((kx + m) % m) * mhw;
    for (int j = 0; j < n / 2; ++j) {
      padded_spectrum_[row + j] = spectrum_[static_cast<std::size_t>(i) * hw + j] * up;
    }
  }
  fft::inverse(m, padded_spectrum_, padded_values_);
  const double inv_m2 = 1.0 / (static_cast<double>(m) * m);
  const auto p = config_.drift_polynomial();
  for (double& x : padded_values_) x = horner(p, x * inv_m2);
  fft::forward(m, padded_values_, padded_spectrum_);
  const double down = 1.0 / up;
  for (int i = 0; i < n; ++i) {
    const int kx = g.wavenumber(i);
    const std::size_t row = static_cast<std::size_t>((kx + m) % m) * mhw;
    for (int j = 0; j < hw; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * hw + j;
      const std::complex<double> nonlinear =
          (i == n / 2 || j == n / 2) ? std::complex<double>{} : padded_spectrum_[row + j] * down;
      spectrum_[k] = (spectrum_[k] + dt * nonlinear + noise_spectrum_[k]) * inverse_symbol_[k];
    }
  }
  fft::inverse(n, spectrum_, u);
}

Field step(const Field& u, const SolverConfig& config, const Field& noise_increment,
           std::int64_t step_index) {
  require_same_grid(u.grid(), config.grid());
  require_same_grid(u.grid(), noise_increment.grid());
  for (double x : u.values()) {
    if (!std::isfinite(x)) throw PreconditionError("step: input field is not finite");
  }
  Stepper stepper(config);
  std::vector<double> v(u.values().begin(), u.values().end());
  stepper.advance(v, noise_increment.values(), step_index);
  return Field(u.grid(), std::move(v));
}

namespace {

void check_noise(const SolverConfig& config, const NoiseRealization& noise, std::int64_t first,
                 std::int64_t end) {
  require_same_grid(config.grid(), noise.grid());
  if (std::abs(noise.dt() - config.dt()) > 1e-15 * config.dt()) {
    throw PreconditionError("noise and solver use different dt");
  }
  if (end > first && (!noise.covers(first) || !noise.covers(end - 1))) {
    throw PreconditionError("noise window [" + std::to_string(noise.first_step()) + ", " +
                            std::to_string(noise.end_step()) + ") does not cover steps [" +
                            std::to_string(first) + ", " + std::to_string(end) + ")");
  }
}

// Sorted, unique step indices of the requested output times within [first, end].
std::vector<std::int64_t> wanted_steps(const SolverConfig& config,
                                       std::span<const double> output_times, std::int64_t first,
                                       std::int64_t end) {
  std::vector<std::int64_t> wanted;
  for (double time : output_times) {
    const std::int64_t k = config.step_index(time);
    if (k >= first && k <= end) wanted.push_back(k);
  }
  std::sort(wanted.begin(), wanted.end());
  wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());
  return wanted;
}

}  // namespace

std::vector<Trajectory> evolve_coupled(std::span<const Field> fs, double s, double t,
                                       const SolverConfig& config,
                                       const NoiseRealization& noise,
                                       std::span<const double> output_times,
                                       const StepObserver& observer) {
  if (t < s) throw PreconditionError("evolve: requires t >= s");
  const std::int64_t first = config.step_index(s);
  const std::int64_t end = config.step_index(t);
  check_noise(config, noise, first, end);
  for (const Field& f : fs) {
    require_same_grid(f.grid(), config.grid());
    if (!f.all_finite()) throw PreconditionError("evolve: initial field is not finite");
  }

  const auto wanted = wanted_steps(config, output_times, first, end);

  std::vector<Trajectory> out;
  std::vector<std::vector<double>> states;
  for (const Field& f : fs) {
    out.push_back({s, t, f, f, {}});
    states.emplace_back(f.values().begin(), f.values().end());
  }
  auto next_wanted = wanted.begin();
  auto record = [&](std::int64_t k) {
    while (next_wanted != wanted.end() && *next_wanted == k) {
      for (std::size_t m = 0; m < states.size(); ++m) {
        out[m].snapshots.push_back({static_cast<double>(k) * config.dt(), Field(config.grid(), states[m])});
      }
      ++next_wanted;
    }
  };
  record(first);

  Stepper stepper(config);
  std::vector<double> increment(config.grid().size());
  for (std::int64_t k = first; k < end; ++k) {
    noise.increment_into(k, increment);
    for (auto& state : states) stepper.advance(state, increment, k);
    if (observer) observer(k, states);
    record(k + 1);
  }
  for (std::size_t m = 0; m < states.size(); ++m) {
    out[m].final_state = Field(config.grid(), std::move(states[m]));
  }
  return out;
}

Trajectory evolve(const Field& f, double s, double t, const SolverConfig& config,
                  const NoiseRealization& noise, std::span<const double> output_times) {
  auto runs = evolve_coupled(std::span<const Field>(&f, 1), s, t, config, noise, output_times);
  return std::move(runs.front());
}

RelativeEnsemble evolve_relative(const Field& base, std::span<const Field> members, double s,
                                 double t, const SolverConfig& config,
                                 const NoiseRealization& noise,
                                 std::span<const double> output_times,
                                 const RelativeObserver& observer) {
  require_same_grid(base.grid(), config.grid());
  std::vector<Field> offsets;
  for (const Field& m : members) {
    require_same_grid(m.grid(), config.grid());
    offsets.push_back(m - base);
  }
  return evolve_offsets(base, offsets, s, t, config, noise, output_times, observer);
}

RelativeEnsemble evolve_offsets(const Field& base, std::span<const Field> offsets, double s,
                                double t, const SolverConfig& config,
                                const NoiseRealization& noise,
                                std::span<const double> output_times,
                                const RelativeObserver& observer) {
  const TorusGrid& g = config.grid();
  require_same_grid(base.grid(), g);
  for (const Field& d : offsets) require_same_grid(d.grid(), g);
  auto as_offsets = [&](std::span<const double> b, std::span<const std::vector<double>> absolute) {
    std::vector<std::vector<double>> d(absolute.size(), std::vector<double>(b.size()));
    for (std::size_t k = 0; k < absolute.size(); ++k) {
      for (std::size_t i = 0; i < b.size(); ++i) d[k][i] = absolute[k][i] - b[i];
    }
    return d;
  };

  if (config.scheme() != Scheme::ImplicitSplit) {
    std::vector<Field> all = {base};
    for (const Field& d : offsets) all.push_back(base + d);
    StepObserver inner;
    if (observer) {
      inner = [&](std::int64_t k, std::span<const std::vector<double>> states) {
        observer(k, states[0], as_offsets(states[0], states.subspan(1)));
      };
    }
    auto runs = evolve_coupled(all, s, t, config, noise, output_times, inner);
    RelativeEnsemble out{s, t, runs[0].final_state, {}, {}};
    for (std::size_t k = 1; k < runs.size(); ++k) out.offsets.push_back(runs[k].final_state - runs[0].final_state);
    for (std::size_t j = 0; j < runs[0].snapshots.size(); ++j) {
      RelativeSnapshot snap{runs[0].snapshots[j].time, runs[0].snapshots[j].field, {}};
      for (std::size_t k = 1; k < runs.size(); ++k) {
        snap.offsets.push_back(runs[k].snapshots[j].field - runs[0].snapshots[j].field);
      }
      out.snapshots.push_back(std::move(snap));
    }
    return out;
  }

  if (t < s) throw PreconditionError("evolve: requires t >= s");
  const std::int64_t first = config.step_index(s);
  const std::int64_t end = config.step_index(t);
  check_noise(config, noise, first, end);
  if (!base.all_finite()) throw PreconditionError("evolve: initial field is not finite");
  for (const Field& m : offsets) {
    if (!m.all_finite()) throw PreconditionError("evolve: initial field is not finite");
  }
  const auto wanted = wanted_steps(config, output_times, first, end);

  std::vector<double> b(base.values().begin(), base.values().end());
  std::vector<std::vector<double>> d;
  for (const Field& f : offsets) d.emplace_back(f.values().begin(), f.values().end());

  RelativeEnsemble out{s, t, base, {}, {}};
  auto next_wanted = wanted.begin();
  auto record = [&](std::int64_t k) {
    while (next_wanted != wanted.end() && *next_wanted == k) {
      RelativeSnapshot snap{static_cast<double>(k) * config.dt(), Field(g, b), {}};
      for (const auto& x : d) snap.offsets.emplace_back(g, x);
      out.snapshots.push_back(std::move(snap));
      ++next_wanted;
    }
  };
  record(first);
  Stepper stepper(config);
  std::vector<double> increment(g.size());
  for (std::int64_t k = first; k < end; ++k) {
    noise.increment_into(k, increment);
    stepper.advance_relative(b, d, increment, k);
    if (observer) observer(k, b, d);
    record(k + 1);
  }
  out.base = Field(g, std::move(b));
  for (auto& x : d) out.offsets.emplace_back(g, std::move(x));
  return out;
}

double energy(const Field& u, const SolverConfig& config) {
  const TorusGrid& g = u.grid();
  const int n = g.points();
  const int hw = g.half_width();
  const Spectrum spec = to_spectral(u);
  // Parseval: sum_x h^d |grad u|^2 = L^d sum_k mu_k |c_k|^2.
  double gradient = 0.0;
  const double norm = 1.0 / static_cast<double>(g.size());
  for (int i = 0; i < n; ++i) {
    const int kx = g.wavenumber(i);
    for (int j = 0; j < hw; ++j) {
      const double mu = config.scheme() == Scheme::ImplicitSplit
                            ? g.lattice_laplace_eigenvalue(kx, j)
                            : g.laplace_eigenvalue(kx, j);
      const double mult = (j == 0 || j == n / 2) ? 1.0 : 2.0;
      gradient += mult * mu * std::norm(spec.at(i, j) * norm);
    }
  }
  gradient *= g.volume();
  const auto p = config.drift_polynomial();
  double potential = 0.0;
  for (double x : u.values()) {
    double v = 0.0;
    for (std::size_t m = p.size(); m-- > 0;) v = v * x + p[m] / static_cast<double>(m + 1);
    potential -= v * x;
  }
  return 0.5 * gradient + potential * g.cell_volume();
}

}  // namespace spdesync
