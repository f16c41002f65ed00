#include "spdesync/stats.hpp"

#include <algorithm>
#include <cmath>

#include "spdesync/error.hpp"
#include "spdesync/philox.hpp"

namespace spdesync::stats {

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw PreconditionError("linear_fit: size mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw DegenerateFit("linear_fit: need at least two points");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw DegenerateFit("linear_fit: non-finite data (is the fitted quantity zero?)");
    }
  }
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw DegenerateFit("linear_fit: no variance in x");
  if (syy == 0.0) throw DegenerateFit("linear_fit: no variance in y");
  LinearFit fit{};
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  const double ssr = std::max(0.0, syy - fit.slope * sxy);
  fit.r_squared = 1.0 - ssr / syy;
  fit.slope_stderr = n > 2 ? std::sqrt(ssr / static_cast<double>(n - 2) / sxx) : 0.0;
  return fit;
}

double mean(std::span<const double> v) {
  if (v.empty()) throw PreconditionError("mean: empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double standard_error(std::span<const double> v) {
  if (v.size() < 2) throw PreconditionError("standard_error: need at least two values");
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

double p_mean(std::span<const double> v, int p) {
  if (v.empty()) throw PreconditionError("p_mean: empty sample");
  if (p < 1) throw PreconditionError("p_mean: p must be >= 1");
  double m = 0.0;
  for (double x : v) {
    if (x < 0.0) throw PreconditionError("p_mean: values must be nonnegative");
    m = std::max(m, x);
  }
  if (m == 0.0) return 0.0;
  double s = 0.0;
  for (double x : v) s += std::pow(x / m, p);
  return m * std::pow(s / static_cast<double>(v.size()), 1.0 / p);
}

namespace {

// Index draw i of resample b, uniform on [0, n) up to a 2^-64 bias.
std::size_t draw_index(const Philox4x32& rng, std::uint32_t b, std::uint32_t i, std::size_t n) {
  const auto r = rng({i, b, 0x5eedu, 0});
  const std::uint64_t bits = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
  return static_cast<std::size_t>(bits % n);
}

double spread(std::span<const double> values) {
  const double m = mean(values);
  double ss = 0.0;
  for (double x : values) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace

double bootstrap_stderr(std::span<const double> v, const Statistic& statistic, int resamples,
                        std::uint64_t seed) {
  std::vector<std::vector<double>> cols = {std::vector<double>(v.begin(), v.end())};
  return bootstrap_stderr_rows(
      cols, [&](std::span<const std::vector<double>> c) { return statistic(c[0]); }, resamples,
      seed);
}

double bootstrap_stderr_rows(
    std::span<const std::vector<double>> columns,
    const std::function<double(std::span<const std::vector<double>>)>& statistic, int resamples,
    std::uint64_t seed) {
  if (columns.empty() || columns[0].empty()) throw PreconditionError("bootstrap: empty sample");
  if (resamples < 2) throw PreconditionError("bootstrap: need at least two resamples");
  const std::size_t n = columns[0].size();
  for (const auto& c : columns) {
    if (c.size() != n) throw PreconditionError("bootstrap: columns differ in length");
  }
  const Philox4x32 rng(seed);
  std::vector<std::vector<double>> sample(columns.size(), std::vector<double>(n));
  std::vector<double> stats(resamples);
  for (int b = 0; b < resamples; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = draw_index(rng, static_cast<std::uint32_t>(b),
                                       static_cast<std::uint32_t>(i), n);
      for (std::size_t c = 0; c < columns.size(); ++c) sample[c][i] = columns[c][k];
    }
    stats[b] = statistic(sample);
  }
  return spread(stats);
}

std::vector<double> isotonic_nonincreasing(std::span<const double> y,
                                           std::span<const double> weights) {
  if (!weights.empty() && weights.size() != y.size()) {
    throw PreconditionError("isotonic: weights and values differ in length");
  }
  struct Block {
    double value, weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < y.size(); ++i) {
    blocks.push_back({y[i], weights.empty() ? 1.0 : weights[i], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].value < blocks.back().value) {
      const Block b = blocks.back();
      blocks.pop_back();
      Block& a = blocks.back();
      const double w = a.weight + b.weight;
      a.value = (a.value * a.weight + b.value * b.weight) / w;
      a.weight = w;
      a.count += b.count;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (const Block& b : blocks) out.insert(out.end(), b.count, b.value);
  return out;
}

}  // namespace spdesync::stats
