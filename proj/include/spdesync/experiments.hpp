#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spdesync/besov.hpp"
#include "spdesync/config.hpp"

namespace spdesync {

/// One line of the experiment CSV. `seed` is the member seed in decimal, or
/// "ensemble" for rows aggregated over members.
struct CsvRow {
  std::string seed;
  double t;
  std::string quantity;
  double value;
};

struct PropertyCheck {
  std::string name;
  bool passed;
  double observed;
  double threshold;
  std::string detail;
  std::vector<std::uint64_t> failing_seeds;
};

/// Fitted exponential decay of an ensemble p-mean.
struct RateEstimate {
  int p;
  double lambda_hat;  ///< p * rate
  double rate;        ///< -slope of log p-mean
  double rate_stderr;  ///< seed-level bootstrap
  double fit_start;
  double fit_end;
  double r_squared;
  double intercept;
  std::vector<double> times;
  std::vector<double> p_means;
  std::vector<double> means;
  std::vector<double> mean_stderrs;
};

struct ComingDownStats {
  double gamma;
  std::vector<double> radii;
  std::vector<double> times;
  /// weighted[seed][radius][time] = t^gamma ||u(t; 0; R)||_{-alpha}
  std::vector<std::vector<std::vector<double>>> weighted;
  std::vector<double> k_hat;
  std::vector<double> spread;  ///< relative spread across R at the probe time
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<std::uint64_t> member_seeds;
  std::vector<CsvRow> rows;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<PropertyCheck> checks;
  std::optional<RateEstimate> rate;
  std::optional<ComingDownStats> coming_down;

  bool passed() const noexcept;
  double metric(std::string_view name) const;
  const PropertyCheck& check(std::string_view name) const;
};

struct RunOptions {
  int threads = 0;  ///< 0: resolve from config, then SPDE_SYNC_THREADS
  std::function<void(const std::string&)> log;
};

/// Fits log of the ensemble p-mean of d[member][time] linearly in t over
/// times in [fit_start, fit_end]. Throws DegenerateFit when a p-mean in the
/// window vanishes or the fit is undetermined.
RateEstimate estimate_rate(std::span<const double> times,
                           std::span<const std::vector<double>> d, int p, double fit_start,
                           double fit_end, std::uint64_t bootstrap_seed = 0);

/// Largest ratio ||f||_{-alpha} / ||f||_{-alpha+d/p;p} over `samples` seeded
/// band-limited fields.
double calibrate_embedding_constant(const TorusGrid& grid, double alpha, int p,
                                    const SGrid& s_grid, int samples, std::uint64_t seed);

/// Checks lemma_a2_constant on `cases` seeded pairs of constant fields
/// against the scalar two-term bound evaluated directly.
PropertyCheck validate_lemma_a2_constant(int cases, std::uint64_t seed);

/// heat_smooth against exact e^{-s mu_k} factors and the semigroup law on
/// `cases` randomized cases, both to 1e-12 relative.
PropertyCheck spectral_exactness_suite(int cases, std::uint64_t seed);

ExperimentResult run_sync_rate(const ExperimentConfig& cfg, const RunOptions& options = {});
ExperimentResult run_coming_down(const ExperimentConfig& cfg, const RunOptions& options = {});
ExperimentResult run_order(const ExperimentConfig& cfg, const RunOptions& options = {});
ExperimentResult run_pullback(const ExperimentConfig& cfg, const RunOptions& options = {});
ExperimentResult run_phi_contraction(const ExperimentConfig& cfg,
                                     const RunOptions& options = {});
ExperimentResult run_lemma_suite(const ExperimentConfig& cfg, const RunOptions& options = {});

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

/// CSV with header `experiment,seed,t,quantity,value`; numbers use %.17g.
std::string to_csv(const ExperimentResult& result);

/// {kind, config, config_ini, seeds, metrics, properties, passed}.
std::string summary_json(const ExperimentResult& result);

}  // namespace spdesync
