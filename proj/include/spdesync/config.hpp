#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spdesync/solver.hpp"

namespace spdesync {

/// Flat INI document: `[section]` headers and `key = value` lines; `#` and
/// `;` start comments. Errors carry the 1-based line number.
class IniDocument {
 public:
  static IniDocument parse(const std::string& text);

  struct Entry {
    std::string value;
    int line;
  };
  using Section = std::map<std::string, Entry>;

  const std::map<std::string, Section>& sections() const noexcept { return sections_; }
  std::optional<Entry> find(const std::string& section, const std::string& key) const;

 private:
  std::map<std::string, Section> sections_;
};

enum class ExperimentKind { SyncRate, ComingDown, Order, Pullback, PhiContraction, LemmaSuite };

const char* to_string(ExperimentKind kind) noexcept;
ExperimentKind experiment_kind_from_string(const std::string& name);
std::vector<ExperimentKind> all_experiment_kinds();

/// Every resolved parameter of an experiment run.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::SyncRate;

  // [solver]
  double length = 0.25;
  int points = 64;
  double dt = 1e-3;
  int truncation = 31;
  double renorm_mass = 1.0;
  std::vector<double> hermite = {0.0, 0.0, 0.0, 1.0};
  double mass_term = 1.0;
  Scheme scheme = Scheme::ImplicitSplit;

  // [noise]
  std::uint64_t seed = 1;
  double amplitude = 1.0;

  // [besov]
  double alpha = 0.1;
  int p = 41;
  int s_points = 64;
  double theta = 0.1;
  double delta = 0.05;

  // [experiment]
  int ensemble = 32;
  double horizon = 10.0;
  double output_step = 0.5;
  double fit_start = 1.0;
  double radius = 1e4;
  double radius_check = 1e8;
  std::vector<double> radii = {1e2, 1e4, 1e8};
  double gamma = 0.5;
  double probe_time = 0.5;
  int pullback_depth = 16;
  int initial_conditions = 8;
  double lemma_alpha = 0.6;
  std::vector<int> lemma_p = {2, 3, 4};
  int calibration_samples = 200;
  int threads = 0;

  /// Defaults of the given experiment kind.
  static ExperimentConfig defaults(ExperimentKind kind);

  /// Parses an INI document on top of defaults(kind). The kind comes from
  /// `[experiment] kind` unless `kind_override` is given. Unknown sections or
  /// keys and malformed values raise ConfigError with the line number.
  static ExperimentConfig from_ini(const std::string& text,
                                   std::optional<ExperimentKind> kind_override = {});

  /// Complete INI echo; from_ini(to_ini()) reproduces the config exactly.
  std::string to_ini() const;

  /// Throws ConfigError for values no experiment can run with.
  void validate() const;

  /// Non-fatal notes, e.g. when p violates p > d / (alpha - alpha0 + delta).
  std::vector<std::string> warnings() const;

  TorusGrid grid() const;
  SolverConfig solver() const;
  /// alpha0 = theta in d = 2.
  double alpha0() const noexcept { return theta; }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

}  // namespace spdesync
