#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "spdesync/besov.hpp"
#include "spdesync/experiments.hpp"
#include "spdesync/io.hpp"
#include "spdesync/parallel.hpp"

namespace {

using namespace spdesync;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kPropertyFailure = 2;

void report(const ExperimentResult& r) {
  for (const auto& c : r.checks) {
    std::printf("%-4s %s: %s (observed %.6g, threshold %.6g)\n", c.passed ? "PASS" : "FAIL",
                c.name.c_str(), c.detail.c_str(), c.observed, c.threshold);
    if (!c.failing_seeds.empty()) {
      std::printf("     failing seeds:");
      for (auto s : c.failing_seeds) std::printf(" %llu", static_cast<unsigned long long>(s));
      std::printf("\n");
    }
  }
}

struct RunArgs {
  std::string experiment;
  std::string config_path;
  std::string out;
  std::string manifest;
  std::optional<std::uint64_t> seed;
  std::optional<int> ensemble;
  int threads = 0;
  bool quiet = false;
};

int do_run(const RunArgs& a) {
  ExperimentConfig cfg;
  if (!a.manifest.empty()) {
    cfg = RunManifest::from_json(read_file(a.manifest)).config();
  } else {
    std::optional<ExperimentKind> kind;
    if (!a.experiment.empty()) kind = experiment_kind_from_string(a.experiment);
    const std::string text = a.config_path.empty() ? "" : read_file(a.config_path);
    if (!kind && text.find("kind") == std::string::npos) {
      throw ConfigError("run: give --experiment or set [experiment] kind in the config");
    }
    cfg = ExperimentConfig::from_ini(text, kind);
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.ensemble) cfg.ensemble = *a.ensemble;
  if (a.threads > 0) cfg.threads = a.threads;
  cfg.validate();
  for (const auto& w : cfg.warnings()) std::fprintf(stderr, "warning: %s\n", w.c_str());

  RunOptions options;
  options.threads = resolve_threads(cfg.threads);
  if (!a.quiet) options.log = [](const std::string& m) { std::fprintf(stderr, "%s\n", m.c_str()); };
  const auto started = std::chrono::system_clock::now();
  const ExperimentResult result = run_experiment(cfg, options);
  const auto finished = std::chrono::system_clock::now();
  const auto manifest = write_run(a.out, result, started, finished);
  std::printf("%s: wrote", to_string(cfg.kind));
  for (const auto& [name, hash] : manifest.outputs) std::printf(" %s", name.c_str());
  std::printf(" manifest.json to %s\n", a.out.c_str());
  report(result);
  return result.passed() ? kOk : kPropertyFailure;
}

int do_check(int threads) {
  bool ok = true;
  const auto exact = spectral_exactness_suite(50, 1);
  std::printf("%-4s %s: %s\n", exact.passed ? "PASS" : "FAIL", exact.name.c_str(),
              exact.detail.c_str());
  ok = ok && exact.passed;
  RunOptions options;
  options.threads = resolve_threads(threads);
  for (ExperimentKind kind : {ExperimentKind::LemmaSuite, ExperimentKind::Order}) {
    const auto result = run_experiment(ExperimentConfig::defaults(kind), options);
    std::printf("[%s]\n", to_string(kind));
    report(result);
    ok = ok && result.passed();
  }
  return ok ? kOk : kPropertyFailure;
}

int do_norms(const std::string& path, double alpha, int p, int s_points) {
  const Field f = read_field(path);
  const SGrid sg = SGrid::for_grid(f.grid(), s_points);
  const BesovParams params(alpha, p, sg);
  nlohmann::ordered_json j;
  j["field"] = path;
  j["alpha"] = alpha;
  j["p"] = p;
  j["besov_norm_sup"] = besov_norm_sup(f, alpha, sg);
  j["besov_norm_p"] = besov_norm_p(f, params);
  if (alpha > static_cast<double>(f.grid().dim()) / p) {
    j["phi_besov"] = phi_besov(f, params);
  } else {
    j["phi_besov"] = nullptr;
  }
  std::printf("%s\n", j.dump(2).c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synchronization-by-noise experiments for the stochastic Allen-Cahn equation on the 2-torus"};
  app.require_subcommand(1);
  app.set_version_flag("--version", spdesync::code_version());

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run one experiment and write CSV, summary and manifest");
  run_cmd->add_option("--experiment", run.experiment,
                      "sync_rate | coming_down | order | pullback | phi_contraction | lemma_suite");
  run_cmd->add_option("--config", run.config_path, "INI file with [solver] [noise] [besov] [experiment]")
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--out", run.out, "output directory")->required();
  run_cmd->add_option("--manifest", run.manifest, "re-run the configuration recorded in a manifest")
      ->check(CLI::ExistingFile);
  run_cmd->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { run.seed = s; },
                                              "base seed");
  run_cmd->add_option_function<int>("--ensemble", [&](int m) { run.ensemble = m; },
                                    "ensemble size M")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--threads", run.threads, "worker cap (default: SPDE_SYNC_THREADS, then all cores)")
      ->check(CLI::NonNegativeNumber);
  run_cmd->add_flag("--quiet", run.quiet, "no progress messages");

  int check_threads = 0;
  auto* check_cmd = app.add_subcommand("check", "run the lemma, spectral and order suites");
  check_cmd->add_option("--threads", check_threads, "worker cap")->check(CLI::NonNegativeNumber);

  std::string field_path;
  double alpha = 0.1;
  int p = 2;
  int s_points = 64;
  auto* norms_cmd = app.add_subcommand("norms", "Besov norms of a stored field");
  norms_cmd->add_option("--field", field_path, "binary field with a .json sidecar")->required();
  norms_cmd->add_option("--alpha", alpha, "regularity exponent > 0")->required();
  norms_cmd->add_option("--p", p, "integrability exponent >= 1")->required();
  norms_cmd->add_option("--s-points", s_points, "s-quadrature points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*run_cmd) return do_run(run);
    if (*check_cmd) return do_check(check_threads);
    if (*norms_cmd) return do_norms(field_path, alpha, p, s_points);
  } catch (const spdesync::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const spdesync::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const spdesync::PreconditionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const spdesync::Error& e) {
    std::fprintf(stderr, "experiment failed: %s\n", e.what());
    return kPropertyFailure;
  }
  return kUsage;
}
