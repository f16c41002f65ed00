#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "spdesync/sampling.hpp"
#include "spdesync/solver.hpp"

using namespace spdesync;
using std::numbers::pi;

namespace {

const TorusGrid kGrid(2 * pi, 32);

SolverConfig linear_config(Scheme scheme, double dt = 1e-2) {
  return SolverConfig(kGrid, dt, 15, {0.0, 15, 1.0}, {}, 0.0, scheme);
}

SolverConfig cubic_config(double c, Scheme scheme, double dt = 1e-3) {
  return SolverConfig(kGrid, dt, 15, {c, 15, 1.0}, {0.0, 0.0, 0.0, 1.0}, 1.0, scheme);
}

bool identical(const Field& a, const Field& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("config validation and drift polynomial") {
  const RenormConstant c{0.5, 15, 1.0};
  CHECK_THROWS_AS(SolverConfig(kGrid, 0.0, 15, c), ConfigError);
  CHECK_THROWS_AS(SolverConfig(kGrid, 1e-3, 16, c), ConfigError);
  CHECK_THROWS_AS(SolverConfig(kGrid, 1e-3, 15, c, {0, 0, 1.0}), ConfigError);
  CHECK_THROWS_AS(SolverConfig(kGrid, 1e-3, 15, c, {0, 0, 0, -1.0}), ConfigError);
  // trailing zeros are ignored
  CHECK_NOTHROW(SolverConfig(kGrid, 1e-3, 15, c, {0, 0, 0, 1.0, 0.0}));

  const SolverConfig cfg(kGrid, 1e-3, 15, c);
  // P(u) = -(u^3 - 3 C u) + u = -u^3 + 2.5 u
  const auto p = cfg.drift_polynomial();
  REQUIRE(p.size() == 4);
  CHECK(p[0] == 0.0);
  CHECK(p[1] == doctest::Approx(2.5));
  CHECK(p[2] == 0.0);
  CHECK(p[3] == -1.0);
  CHECK(cfg.drift(2.0) == doctest::Approx(-8 + 5.0));
  CHECK(cfg.drift_derivative(1.0) == doctest::Approx(-3 + 2.5));
  CHECK(cfg.drift_derivative_bound() == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(cfg.degree() == 3);

  // fifth-order Hermite nonlinearity: sup P' of -H_5(u, C) + u
  const SolverConfig quintic(kGrid, 1e-4, 15, c, {0, 0, 0, 0, 0, 1.0});
  CHECK(quintic.degree() == 5);
  const double h5_at_1 = hermite(5, 1.0, 0.5);
  CHECK(quintic.drift(1.0) == doctest::Approx(-h5_at_1 + 1.0));
  CHECK(quintic.drift_derivative_bound() >= quintic.drift_derivative(0.0));

  CHECK_THROWS_AS(SolverConfig(kGrid, 1.0, 15, c), ConfigError);  // dt sup P' >= 1
  CHECK_NOTHROW(SolverConfig(kGrid, 1.0, 15, c, {0, 0, 0, 1.0}, 1.0, Scheme::SemiImplicitSpectral));

  CHECK(cfg.step_index(0.25) == 250);
  CHECK_THROWS_AS(cfg.step_index(0.00025), ConfigError);
  CHECK(scheme_from_string("implicit_split") == Scheme::ImplicitSplit);
  CHECK(std::string(to_string(Scheme::SemiImplicitSpectral)) == "semi_implicit_spectral");
  CHECK_THROWS_AS(scheme_from_string("rk4"), ConfigError);
}

TEST_CASE("linear step on an eigenfunction") {
  const Field u = Field::sample(kGrid, [](double x, double) { return std::cos(x); });
  const Field zero(kGrid);
  {
    const double dt = 1e-2;
    const Field next = step(u, linear_config(Scheme::SemiImplicitSpectral, dt), zero);
    const Spectrum s = to_spectral(next);
    CHECK(s.amplitude(1, 0).real() == doctest::Approx(0.5 / (1 + dt)).epsilon(1e-13));
    for (std::size_t i = 0; i < u.size(); ++i) REQUIRE(next[i] == doctest::Approx(u[i] / (1 + dt)));
  }
  {
    // the lattice symbol of mode 1 is (4/h^2) sin^2(pi/N)
    const double dt = 1e-2;
    const double mu = kGrid.lattice_laplace_eigenvalue(1, 0);
    CHECK(mu == doctest::Approx(1.0).epsilon(1e-2));
    const Field next = step(u, linear_config(Scheme::ImplicitSplit, dt), zero);
    for (std::size_t i = 0; i < u.size(); ++i) REQUIRE(next[i] == doctest::Approx(u[i] / (1 + dt * mu)));
  }
}

TEST_CASE("zero is a fixed point without noise") {
  for (Scheme scheme : {Scheme::ImplicitSplit, Scheme::SemiImplicitSpectral}) {
    const Field next = step(Field(kGrid), cubic_config(0.3, scheme), Field(kGrid));
    for (double x : next.values()) CHECK(x == 0.0);
  }
}

TEST_CASE("constant data follow the scalar ODE u' = -u^3 + u") {
  // reference: RK4 at dt / 100
  auto reference = [](double u0, double t, double h) {
    auto f = [](double u) { return -u * u * u + u; };
    double u = u0;
    const int steps = static_cast<int>(std::llround(t / h));
    for (int i = 0; i < steps; ++i) {
      const double k1 = f(u), k2 = f(u + 0.5 * h * k1), k3 = f(u + 0.5 * h * k2), k4 = f(u + h * k3);
      u += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return u;
  };
  const double dt = 1e-3;
  for (Scheme scheme : {Scheme::ImplicitSplit, Scheme::SemiImplicitSpectral}) {
    const SolverConfig cfg = cubic_config(0.0, scheme, dt);
    const NoiseRealization silent(0, kGrid, dt, 0, 20000, 1, 0.0);
    const double times[] = {1.0, 20.0};
    const Trajectory tr = evolve(Field::constant(kGrid, 2.0), 0.0, 20.0, cfg, silent, times);
    REQUIRE(tr.snapshots.size() == 2);
    // first-order scheme: O(dt) agreement at t = 1
    CHECK(tr.snapshots[0].field[0] == doctest::Approx(reference(2.0, 1.0, dt / 100)).epsilon(5e-3));
    CHECK(std::abs(tr.final_state[0] - 1.0) < 1e-6);
    CHECK(std::abs(reference(2.0, 20.0, dt / 100) - 1.0) < 1e-6);
    for (double x : tr.final_state.values()) REQUIRE(x == tr.final_state[0]);
  }
}

TEST_CASE("implicit split handles huge data") {
  const SolverConfig cfg = cubic_config(0.2, Scheme::ImplicitSplit);
  const Stepper stepper(cfg);
  for (double w : {1e8, -1e8, 1e4, 3.0, -0.7, 0.0, 1e-12}) {
    const double v = stepper.local_implicit_solve(w);
    CHECK(v - cfg.dt() * cfg.drift(v) == doctest::Approx(w).epsilon(1e-13));
    if (w > 0.0) CHECK(v > 0.0);
  }
  const NoiseRealization noise(5, kGrid, cfg.dt(), 0, 100, 15);
  const Trajectory tr = evolve(Field::constant(kGrid, 1e8), 0.0, 0.1, cfg, noise);
  CHECK(tr.final_state.all_finite());
  CHECK(sup_norm(tr.final_state) < 10.0);
}

TEST_CASE("explicit scheme reports blow-up with the step index") {
  const SolverConfig cfg = cubic_config(0.2, Scheme::SemiImplicitSpectral);
  const NoiseRealization noise(5, kGrid, cfg.dt(), 0, 100, 15);
  try {
    evolve(Field::constant(kGrid, 1e8), 0.0, 0.1, cfg, noise);
    FAIL("expected blow-up");
  } catch (const BlowUpError& e) {
    CHECK(e.step() >= 0);
    CHECK(e.step() < 100);
  }
}

TEST_CASE("evolve: flow property, snapshots and windows") {
  const SolverConfig cfg = cubic_config(renorm_constant(kGrid, 15).value, Scheme::ImplicitSplit);
  const NoiseRealization noise(77, kGrid, cfg.dt(), 0, 2000, 15);
  const Field f = random_field(kGrid, FieldKind::Smooth, 1, 0, 2.0);

  const Trajectory same = evolve(f, 0.0, 0.0, cfg, noise);
  CHECK(identical(same.final_state, f));

  const Trajectory direct = evolve(f, 0.0, 2.0, cfg, noise);
  for (double r : {0.5, 1.0, 1.337}) {
    const Trajectory first = evolve(f, 0.0, r, cfg, noise);
    const Trajectory second = evolve(first.final_state, r, 2.0, cfg, noise);
    CHECK(identical(direct.final_state, second.final_state));
  }
  // a restricted noise window yields the same increments
  const Trajectory windowed = evolve(f, 1.0, 2.0, cfg, noise.window(1000, 2000));
  const Trajectory full = evolve(f, 1.0, 2.0, cfg, noise);
  CHECK(identical(windowed.final_state, full.final_state));

  const double times[] = {0.0, 0.5, 0.5, 3.0, 1.0};
  const Trajectory snaps = evolve(f, 0.0, 1.0, cfg, noise, times);
  REQUIRE(snaps.snapshots.size() == 3);
  CHECK(snaps.snapshots[0].time == 0.0);
  CHECK(identical(snaps.snapshots[0].field, f));
  CHECK(snaps.snapshots[1].time == doctest::Approx(0.5));
  CHECK(identical(snaps.snapshots[2].field, snaps.final_state));

  CHECK_THROWS_AS(evolve(f, 0.0, 2.5, cfg, noise), PreconditionError);
  CHECK_THROWS_AS(evolve(f, 1.0, 0.5, cfg, noise), PreconditionError);
  const NoiseRealization other_dt(77, kGrid, 2e-3, 0, 2000, 15);
  CHECK_THROWS_AS(evolve(f, 0.0, 1.0, cfg, other_dt), PreconditionError);

  const Trajectory other = evolve(f, 0.0, 2.0, cfg, NoiseRealization(78, kGrid, cfg.dt(), 0, 2000, 15));
  CHECK(lp_norm(other.final_state - direct.final_state, 2) > 0.0);
}

TEST_CASE("coupled trajectories share increments and keep order") {
  const SolverConfig cfg = cubic_config(renorm_constant(kGrid, 15).value, Scheme::ImplicitSplit);
  const NoiseRealization noise(3, kGrid, cfg.dt(), 0, 1000, 15);
  const Field f = random_field(kGrid, FieldKind::Rough, 2, 0);
  const std::vector<Field> twins = {f, f};
  const auto t = evolve_coupled(twins, 0.0, 1.0, cfg, noise);
  CHECK(identical(t[0].final_state, t[1].final_state));

  const double r = 1e4;
  const std::vector<Field> extremes = {Field::constant(kGrid, -r), Field::constant(kGrid, r)};
  CHECK(order_gap(extremes[0], extremes[1]) == 2 * r);
  double worst = 1e300;
  std::int64_t calls = 0;
  evolve_coupled(extremes, 0.0, 1.0, cfg, noise, {},
                 [&](std::int64_t, std::span<const std::vector<double>> states) {
                   ++calls;
                   for (std::size_t i = 0; i < states[0].size(); ++i) {
                     worst = std::min(worst, states[1][i] - states[0][i]);
                   }
                 });
  CHECK(calls == 1000);
  CHECK(worst >= 0.0);
}

TEST_CASE("order preservation for random ordered pairs") {
  const SolverConfig cfg = cubic_config(renorm_constant(kGrid, 15).value, Scheme::ImplicitSplit);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const NoiseRealization noise(seed, kGrid, cfg.dt(), 0, 300, 15);
    const Field lower = random_field(kGrid, FieldKind::Smooth, seed, 0, 3.0);
    const Field h = random_field(kGrid, FieldKind::Rough, seed, 1, 0.1);
    std::vector<double> v(kGrid.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = lower[i] + h[i] * h[i];
    const std::vector<Field> pair = {lower, Field(kGrid, std::move(v))};
    const double tol = -1e-8 * (1 + sup_norm(pair[1] - pair[0]));
    double worst = 1e300;
    evolve_coupled(pair, 0.0, 0.3, cfg, noise, {},
                   [&](std::int64_t, std::span<const std::vector<double>> s) {
                     for (std::size_t i = 0; i < s[0].size(); ++i) worst = std::min(worst, s[1][i] - s[0][i]);
                   });
    CHECK(worst >= tol);
  }
}

TEST_CASE("energy decreases along the noise-free flow") {
  const SolverConfig cfg = cubic_config(renorm_constant(kGrid, 15).value, Scheme::ImplicitSplit);
  const NoiseRealization silent(0, kGrid, cfg.dt(), 0, 500, 15, 0.0);
  const Field f = random_field(kGrid, FieldKind::Smooth, 9, 0, 2.0);
  double prev = energy(f, cfg);
  double worst = -1e300;
  evolve_coupled(std::span<const Field>(&f, 1), 0.0, 0.5, cfg, silent, {},
                 [&](std::int64_t, std::span<const std::vector<double>> s) {
                   const double e = energy(Field(kGrid, s[0]), cfg);
                   worst = std::max(worst, (e - prev) / (1 + std::abs(e)));
                   prev = e;
                 });
  CHECK(worst <= 1e-10);

  // energy of a constant: -L^2 int_0^c P = L^2 (c^4/4 - (1 + 3C) c^2 / 2)
  const double c = 0.7, C = cfg.renorm().value;
  CHECK(energy(Field::constant(kGrid, c), cfg) ==
        doctest::Approx(kGrid.volume() * (std::pow(c, 4) / 4 - (1 + 3 * C) * c * c / 2)));
}

TEST_CASE("relative evolution matches coupled evolution for O(1) offsets") {
  for (Scheme scheme : {Scheme::ImplicitSplit, Scheme::SemiImplicitSpectral}) {
    const auto cfg = cubic_config(0.3, scheme);
    const NoiseRealization noise(11, kGrid, cfg.dt(), 0, 200, 15);
    const Field base = random_field(kGrid, FieldKind::Smooth, 3, 0);
    const std::vector<Field> members = {random_field(kGrid, FieldKind::Smooth, 3, 1),
                                        random_field(kGrid, FieldKind::Trig, 3, 2)};
    const std::vector<double> times = {0.1};
    const auto rel = evolve_relative(base, members, 0.0, 0.2, cfg, noise, times);
    std::vector<Field> all = {base, members[0], members[1]};
    const auto abs = evolve_coupled(all, 0.0, 0.2, cfg, noise, times);
    CHECK(identical(rel.base, abs[0].final_state));
    REQUIRE(rel.snapshots.size() == 1);
    for (std::size_t k = 0; k < members.size(); ++k) {
      CHECK(sup_norm(rel.base + rel.offsets[k] - abs[k + 1].final_state) < 1e-10);
      CHECK(sup_norm(rel.snapshots[0].base + rel.snapshots[0].offsets[k] -
                     abs[k + 1].snapshots[0].field) < 1e-10);
    }
  }
}

TEST_CASE("relative evolution resolves differences far below rounding of the base") {
  const auto cfg = cubic_config(0.3, Scheme::ImplicitSplit);
  const NoiseRealization noise(12, kGrid, cfg.dt(), 0, 300, 15);
  const Field base = random_field(kGrid, FieldKind::Smooth, 4, 0);
  const Field bump = random_field(kGrid, FieldKind::Smooth, 4, 1);
  std::vector<double> v(kGrid.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = bump[i] * bump[i] + 0.1;
  const Field positive(kGrid, std::move(v));
  const std::vector<Field> small = {positive * 1e-6};
  const std::vector<Field> tiny = {positive * 1e-250};
  const auto a = evolve_offsets(base, small, 0.0, 0.3, cfg, noise);
  const auto b = evolve_offsets(base, tiny, 0.0, 0.3, cfg, noise);
  // offsets stay ordered and scale linearly
  CHECK(order_gap(Field(kGrid), b.offsets[0]) > 0.0);
  for (std::size_t i = 0; i < kGrid.size(); ++i) {
    CHECK(b.offsets[0][i] * 1e250 == doctest::Approx(a.offsets[0][i] * 1e6).epsilon(1e-4));
  }
}

TEST_CASE("evolve_relative and evolve_offsets agree") {
  const auto cfg = cubic_config(0.3, Scheme::ImplicitSplit);
  const NoiseRealization noise(13, kGrid, cfg.dt(), 0, 100, 15);
  const Field base = Field::constant(kGrid, -3.0);
  const std::vector<Field> members = {Field::constant(kGrid, 3.0)};
  const std::vector<Field> offsets = {Field::constant(kGrid, 6.0)};
  int calls = 0;
  const auto a = evolve_relative(base, members, 0.0, 0.1, cfg, noise, {},
                                 [&](std::int64_t, auto, auto) { ++calls; });
  const auto b = evolve_offsets(base, offsets, 0.0, 0.1, cfg, noise);
  CHECK(calls == 100);
  CHECK(identical(a.offsets[0], b.offsets[0]));
  CHECK(identical(a.base, b.base));
}
