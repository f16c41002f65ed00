#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace spdesync::stats {

struct LinearFit {
  double slope;
  double intercept;
  double r_squared;
  double slope_stderr;
  std::size_t n;
};

/// Ordinary least squares y = intercept + slope x. Throws DegenerateFit for
/// fewer than two points, non-finite data, or zero variance in x or y.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> v);
/// Standard error of the mean (sample standard deviation / sqrt(n)).
double standard_error(std::span<const double> v);

/// (mean x_i^p)^{1/p} for x_i >= 0, computed relative to the largest value.
double p_mean(std::span<const double> v, int p);

using Statistic = std::function<double(std::span<const double>)>;

/// Bootstrap standard error of `statistic` over `resamples` resamples with
/// replacement; the resampling indices come from a counter-based generator
/// keyed by `seed`, so the result is reproducible.
double bootstrap_stderr(std::span<const double> v, const Statistic& statistic,
                        int resamples = 1000, std::uint64_t seed = 0);

/// Same, for a statistic of several aligned columns resampled jointly by row.
double bootstrap_stderr_rows(std::span<const std::vector<double>> columns,
                             const std::function<double(std::span<const std::vector<double>>)>& statistic,
                             int resamples = 1000, std::uint64_t seed = 0);

/// Least-squares nonincreasing fit (pool adjacent violators) with weights.
std::vector<double> isotonic_nonincreasing(std::span<const double> y,
                                           std::span<const double> weights = {});

}  // namespace spdesync::stats
