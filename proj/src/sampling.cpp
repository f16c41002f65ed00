#include "spdesync/sampling.hpp"

#include <cmath>
#include <numbers>

#include "spdesync/philox.hpp"

namespace spdesync {
namespace {

constexpr std::uint32_t kSamplingStream = 2;

class NormalSource {
 public:
  NormalSource(std::uint64_t seed, std::uint64_t index)
      : rng_(splitmix64(seed)), lo_(static_cast<std::uint32_t>(index)),
        hi_(static_cast<std::uint32_t>(index >> 32)) {}

  // Normal pair for draw `i`.
  std::pair<double, double> pair(std::uint32_t i) const {
    return rng_.normal_pair({i, kSamplingStream, lo_, hi_});
  }

 private:
  Philox4x32 rng_;
  std::uint32_t lo_, hi_;
};

Field fourier_field(const TorusGrid& grid, const NormalSource& src, int band, bool decay) {
  const double two_pi_over_l = 2.0 * std::numbers::pi / grid.length();
  std::vector<double> v(grid.size(), 0.0);
  const int n = grid.points();
  const double h = grid.spacing();
  std::uint32_t draw = 0;
  for (int kx = -band; kx <= band; ++kx) {
    for (int ky = 0; ky <= band; ++ky) {
      if (ky == 0 && kx <= 0) continue;
      const auto [a, b] = src.pair(draw++);
      const double weight = decay ? 1.0 / (1.0 + kx * kx + ky * ky) : 1.0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const double phase = two_pi_over_l * (kx * i * h + ky * j * h);
          v[static_cast<std::size_t>(i) * n + j] +=
              weight * (a * std::cos(phase) + b * std::sin(phase));
        }
      }
    }
  }
  const auto [c0, unused] = src.pair(draw);
  (void)unused;
  for (double& x : v) x += (decay ? 1.0 : 0.5) * c0;
  return Field(grid, std::move(v));
}

Field rescaled(const Field& f, double amplitude) {
  const double m = sup_norm(f);
  return m > 0.0 ? f * (amplitude / m) : f;
}

}  // namespace

const char* to_string(FieldKind kind) noexcept {
  switch (kind) {
    case FieldKind::Constant: return "constant";
    case FieldKind::Trig: return "trig";
    case FieldKind::Smooth: return "smooth";
    case FieldKind::Rough: return "rough";
  }
  return "unknown";
}

Field random_field(const TorusGrid& grid, FieldKind kind, std::uint64_t seed,
                   std::uint64_t index, double amplitude, int band) {
  const NormalSource src(seed, index);
  switch (kind) {
    case FieldKind::Constant:
      return Field::constant(grid, amplitude * src.pair(0).first);
    case FieldKind::Trig:
      return rescaled(fourier_field(grid, src, std::min(4, grid.points() / 2 - 1), false), amplitude);
    case FieldKind::Smooth:
      return rescaled(fourier_field(grid, src, std::min(band, grid.points() / 2 - 1), true), amplitude);
    case FieldKind::Rough: {
      std::vector<double> v(grid.size());
      for (std::size_t i = 0; i < v.size(); i += 2) {
        const auto [a, b] = src.pair(static_cast<std::uint32_t>(i / 2));
        v[i] = amplitude * a;
        if (i + 1 < v.size()) v[i + 1] = amplitude * b;
      }
      return Field(grid, std::move(v));
    }
  }
  throw ConfigError("random_field: unknown kind");
}

Field band_limited_field(const TorusGrid& grid, std::uint64_t seed, std::uint64_t index,
                         int band) {
  if (band > grid.points() / 2 - 1) {
    throw ConfigError("band_limited_field: band exceeds the grid's resolved modes");
  }
  return fourier_field(grid, NormalSource(seed, index), band, true);
}

}  // namespace spdesync
