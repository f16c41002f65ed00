#include <cmath>
#include <cstdlib>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "spdesync/error.hpp"
#include "spdesync/experiments.hpp"
#include "spdesync/parallel.hpp"

using namespace spdesync;

namespace {

ExperimentConfig small(ExperimentKind kind) {
  auto cfg = ExperimentConfig::defaults(kind);
  cfg.points = 16;
  cfg.truncation = 7;
  cfg.s_points = 32;
  cfg.threads = 1;
  return cfg;
}

std::size_t count_rows(const ExperimentResult& r, const std::string& quantity) {
  std::size_t n = 0;
  for (const auto& row : r.rows) n += row.quantity == quantity;
  return n;
}

}  // namespace

TEST_CASE("estimate_rate recovers a synthetic exponential") {
  std::vector<double> times;
  for (int j = 0; j <= 20; ++j) times.push_back(0.25 * j);
  std::vector<std::vector<double>> d;
  for (int m = 0; m < 8; ++m) {
    std::vector<double> row;
    for (double t : times) row.push_back((1.0 + 0.1 * m) * std::exp(-0.7 * t));
    d.push_back(row);
  }
  const auto est = estimate_rate(times, d, 4, 1.0, 5.0, 3);
  CHECK(est.rate == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(est.lambda_hat == doctest::Approx(2.8).epsilon(1e-12));
  CHECK(est.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(est.times.size() == 17);
  CHECK(est.rate_stderr < 1e-10);
}

TEST_CASE("estimate_rate rejects a vanishing p-mean") {
  const std::vector<double> times = {0.0, 1.0, 2.0};
  const std::vector<std::vector<double>> zeros(4, std::vector<double>(3, 0.0));
  CHECK_THROWS_AS(estimate_rate(times, zeros, 2, 0.0, 2.0), DegenerateFit);
  const std::vector<std::vector<double>> ones(4, std::vector<double>(3, 1.0));
  CHECK_THROWS_AS(estimate_rate(times, ones, 2, 1.5, 2.0), DegenerateFit);
}

TEST_CASE("sync_rate without noise from equal data is a degenerate fit") {
  auto cfg = small(ExperimentKind::SyncRate);
  cfg.amplitude = 0.0;
  cfg.radius = 0.0;
  cfg.radius_check = 0.0;
  cfg.ensemble = 2;
  cfg.horizon = 1.0;
  CHECK_THROWS_AS(run_sync_rate(cfg), DegenerateFit);
}

TEST_CASE("small sync_rate run") {
  auto cfg = small(ExperimentKind::SyncRate);
  cfg.ensemble = 3;
  cfg.horizon = 1.5;
  cfg.fit_start = 0.5;
  const auto r = run_sync_rate(cfg);
  REQUIRE(r.rate.has_value());
  CHECK(count_rows(r, "D") == 3 * 3);
  CHECK(count_rows(r, "pmean") == 3);
  CHECK(r.check("envelope").passed);
  CHECK(std::isfinite(r.metric("lambda_hat")));
  for (const auto& row : r.rows) {
    if (row.quantity == "D") CHECK(row.value > 0.0);
  }

  cfg.threads = 2;
  CHECK(to_csv(run_sync_rate(cfg)) == to_csv(r));
}

TEST_CASE("coming down from zero without noise stays at zero") {
  auto cfg = small(ExperimentKind::ComingDown);
  cfg.amplitude = 0.0;
  cfg.radii = {0.0};
  cfg.ensemble = 2;
  cfg.horizon = 0.2;
  cfg.probe_time = 0.1;
  const auto r = run_coming_down(cfg);
  REQUIRE(r.coming_down.has_value());
  for (const auto& member : r.coming_down->weighted) {
    for (const auto& series : member) {
      for (double w : series) CHECK(w == 0.0);
    }
  }
  CHECK(r.check("coming_down_spread").passed);
}

TEST_CASE("small coming_down run") {
  auto cfg = small(ExperimentKind::ComingDown);
  cfg.ensemble = 3;
  cfg.horizon = 0.2;
  cfg.output_step = 0.1;
  cfg.probe_time = 0.1;
  const auto r = run_coming_down(cfg);
  CHECK(count_rows(r, "weighted_norm_R100") == 3 * 2);
  CHECK(count_rows(r, "spread") == 3);
  CHECK(r.metric("k_hat_max") > 0.0);
}

TEST_CASE("small order run") {
  auto cfg = small(ExperimentKind::Order);
  cfg.ensemble = 8;
  cfg.horizon = 0.1;
  cfg.output_step = 0.05;
  const auto r = run_order(cfg);
  CHECK(r.passed());
  CHECK(r.check("equal_pair_identical").passed);
  CHECK(r.metric("pairs") == 8);
  CHECK(to_csv(run_order(cfg)) == to_csv(r));
}

TEST_CASE("small phi_contraction run") {
  auto cfg = small(ExperimentKind::PhiContraction);
  cfg.ensemble = 1;
  cfg.initial_conditions = 4;
  cfg.horizon = 0.5;
  cfg.output_step = 0.25;
  cfg.calibration_samples = 20;
  const auto r = run_phi_contraction(cfg);
  CHECK(r.check("phi_gap_nonnegative").passed);
  CHECK(r.check("envelope").passed);
  CHECK(r.metric("c2") > 0.0);
}

TEST_CASE("small pullback run") {
  auto cfg = small(ExperimentKind::Pullback);
  cfg.ensemble = 3;
  cfg.pullback_depth = 4;
  const auto r = run_pullback(cfg);
  CHECK(r.rate.has_value());
  CHECK(std::isfinite(r.metric("stationarity_difference")));
  CHECK(to_csv(run_pullback(cfg)) == to_csv(r));
}

TEST_CASE("small lemma_suite run") {
  auto cfg = small(ExperimentKind::LemmaSuite);
  cfg.ensemble = 12;
  const auto r = run_lemma_suite(cfg);
  CHECK(r.passed());
  CHECK(r.metric("a1_passed") == 12);
  CHECK(r.metric("a2_passed") == 12);
}

TEST_CASE("stand-alone suites") {
  CHECK(spectral_exactness_suite(8, 5).passed);
  CHECK(validate_lemma_a2_constant(20, 5).passed);
}

TEST_CASE("csv and summary layout") {
  auto cfg = small(ExperimentKind::LemmaSuite);
  cfg.ensemble = 3;
  const auto r = run_experiment(cfg);
  const std::string csv = to_csv(r);
  CHECK(csv.rfind("experiment,seed,t,quantity,value\n", 0) == 0);
  CHECK(csv.find("\nlemma_suite,") != std::string::npos);
  const auto j = nlohmann::json::parse(summary_json(r));
  CHECK(j["kind"] == "lemma_suite");
  CHECK(j["passed"] == r.passed());
  CHECK(j["seeds"].size() == 3);
  CHECK(ExperimentConfig::from_ini(j["config_ini"].get<std::string>()) == cfg);
}

TEST_CASE("member seeds are distinct and reproducible") {
  auto cfg = small(ExperimentKind::LemmaSuite);
  cfg.ensemble = 50;
  const auto a = run_lemma_suite(cfg).member_seeds;
  CHECK(std::set<std::uint64_t>(a.begin(), a.end()).size() == 50);
  CHECK(run_lemma_suite(cfg).member_seeds == a);
  cfg.seed = 2;
  CHECK(run_lemma_suite(cfg).member_seeds != a);
}

TEST_CASE("parallel_for") {
  std::vector<int> out(100, 0);
  parallel_for(out.size(), 3, [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i * i));
  CHECK_THROWS_WITH(parallel_for(10, 4,
                                 [](std::size_t i) {
                                   if (i == 7) throw std::runtime_error("seven");
                                   if (i == 9) throw std::runtime_error("nine");
                                 }),
                    "seven");
  CHECK(resolve_threads(5) == 5);
  ::setenv("SPDE_SYNC_THREADS", "3", 1);
  CHECK(resolve_threads(0) == 3);
  ::unsetenv("SPDE_SYNC_THREADS");
  CHECK(resolve_threads(0) >= 1);
}
