#include "spdesync/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>

namespace spdesync {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw ConfigError("config line " + std::to_string(line) + ": " + what);
}

double parse_double(const IniDocument::Entry& e, const std::string& key) {
  const char* begin = e.value.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
    fail(e.line, "'" + key + "' expects a finite number, got '" + e.value + "'");
  }
  return v;
}

long long parse_integer(const std::string& text, int line, const std::string& key) {
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0' || errno == ERANGE) {
    fail(line, "'" + key + "' expects an integer, got '" + text + "'");
  }
  return v;
}

int parse_int(const IniDocument::Entry& e, const std::string& key) {
  const long long v = parse_integer(e.value, e.line, key);
  if (v < -2147483647LL || v > 2147483647LL) fail(e.line, "'" + key + "' is out of range");
  return static_cast<int>(v);
}

std::uint64_t parse_u64(const IniDocument::Entry& e, const std::string& key) {
  if (e.value.empty() || e.value[0] == '-') fail(e.line, "'" + key + "' expects an unsigned integer");
  const char* begin = e.value.c_str();
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(begin, &end, 0);
  if (end == begin || *end != '\0' || errno == ERANGE) {
    fail(e.line, "'" + key + "' expects an unsigned integer, got '" + e.value + "'");
  }
  return v;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::vector<double> parse_doubles(const IniDocument::Entry& e, const std::string& key) {
  std::vector<double> out;
  for (const auto& item : split_list(e.value)) out.push_back(parse_double({item, e.line}, key));
  if (out.empty()) fail(e.line, "'" + key + "' expects a comma-separated list");
  return out;
}

std::vector<int> parse_ints(const IniDocument::Entry& e, const std::string& key) {
  std::vector<int> out;
  for (const auto& item : split_list(e.value)) out.push_back(parse_int({item, e.line}, key));
  if (out.empty()) fail(e.line, "'" + key + "' expects a comma-separated list");
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F&& f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += f(v[i]);
  }
  return out;
}

}  // namespace

IniDocument IniDocument::parse(const std::string& text) {
  IniDocument doc;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto comment = raw.find_first_of("#;");
    const std::string s = trim(comment == std::string::npos ? raw : raw.substr(0, comment));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) fail(line, "malformed section header '" + s + "'");
      section = trim(s.substr(1, s.size() - 2));
      doc.sections_[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected 'key = value', got '" + s + "'");
    if (section.empty()) fail(line, "key outside of any [section]");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) fail(line, "empty key");
    auto& sec = doc.sections_[section];
    if (sec.count(key)) fail(line, "duplicate key '" + key + "' in [" + section + "]");
    sec[key] = {value, line};
  }
  return doc;
}

std::optional<IniDocument::Entry> IniDocument::find(const std::string& section,
                                                    const std::string& key) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return std::nullopt;
  const auto k = s->second.find(key);
  if (k == s->second.end()) return std::nullopt;
  return k->second;
}

const char* to_string(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::SyncRate: return "sync_rate";
    case ExperimentKind::ComingDown: return "coming_down";
    case ExperimentKind::Order: return "order";
    case ExperimentKind::Pullback: return "pullback";
    case ExperimentKind::PhiContraction: return "phi_contraction";
    case ExperimentKind::LemmaSuite: return "lemma_suite";
  }
  return "unknown";
}

std::vector<ExperimentKind> all_experiment_kinds() {
  return {ExperimentKind::SyncRate,       ExperimentKind::ComingDown, ExperimentKind::Order,
          ExperimentKind::Pullback,       ExperimentKind::PhiContraction,
          ExperimentKind::LemmaSuite};
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (ExperimentKind k : all_experiment_kinds()) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown experiment '" + name +
                    "' (expected sync_rate, coming_down, order, pullback, phi_contraction or "
                    "lemma_suite)");
}

ExperimentConfig ExperimentConfig::defaults(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::SyncRate:
      c.length = 0.25;
      // the backward-Euler fall from R leaves an O(dt) phase that the
      // R = 1e4 vs 1e8 comparison sees through the small envelope width
      c.dt = 2.5e-4;
      break;
    case ExperimentKind::ComingDown:
      c.length = 2.0 * 3.141592653589793;
      c.horizon = 1.0;
      c.output_step = 0.05;
      break;
    case ExperimentKind::Order:
      c.length = 2.0 * 3.141592653589793;
      c.ensemble = 100;
      c.horizon = 1.0;
      c.output_step = 0.1;
      break;
    case ExperimentKind::Pullback:
      c.length = 0.25;
      c.ensemble = 16;
      c.horizon = 0.0;
      break;
    case ExperimentKind::PhiContraction:
      c.length = 0.25;
      c.ensemble = 4;
      c.horizon = 5.0;
      break;
    case ExperimentKind::LemmaSuite:
      c.length = 2.0 * 3.141592653589793;
      c.ensemble = 1000;
      c.horizon = 0.0;
      break;
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_ini(const std::string& text,
                                            std::optional<ExperimentKind> kind_override) {
  const IniDocument doc = IniDocument::parse(text);
  ExperimentKind kind = ExperimentKind::SyncRate;
  if (auto e = doc.find("experiment", "kind")) {
    try {
      kind = experiment_kind_from_string(e->value);
    } catch (const ConfigError& err) {
      fail(e->line, err.what());
    }
  }
  if (kind_override) kind = *kind_override;
  ExperimentConfig c = defaults(kind);
  bool truncation_given = false;

  using Setter = std::function<void(const IniDocument::Entry&, const std::string&)>;
  const std::map<std::string, std::map<std::string, Setter>> keys = {
      {"solver",
       {{"length", [&](auto& e, auto& k) { c.length = parse_double(e, k); }},
        {"points", [&](auto& e, auto& k) { c.points = parse_int(e, k); }},
        {"dt", [&](auto& e, auto& k) { c.dt = parse_double(e, k); }},
        {"truncation",
         [&](auto& e, auto& k) {
           c.truncation = parse_int(e, k);
           truncation_given = true;
         }},
        {"renorm_mass", [&](auto& e, auto& k) { c.renorm_mass = parse_double(e, k); }},
        {"hermite", [&](auto& e, auto& k) { c.hermite = parse_doubles(e, k); }},
        {"mass_term", [&](auto& e, auto& k) { c.mass_term = parse_double(e, k); }},
        {"scheme",
         [&](auto& e, auto&) {
           try {
             c.scheme = scheme_from_string(e.value);
           } catch (const ConfigError& err) {
             fail(e.line, err.what());
           }
         }}}},
      {"noise",
       {{"seed", [&](auto& e, auto& k) { c.seed = parse_u64(e, k); }},
        {"amplitude", [&](auto& e, auto& k) { c.amplitude = parse_double(e, k); }}}},
      {"besov",
       {{"alpha", [&](auto& e, auto& k) { c.alpha = parse_double(e, k); }},
        {"p", [&](auto& e, auto& k) { c.p = parse_int(e, k); }},
        {"s_points", [&](auto& e, auto& k) { c.s_points = parse_int(e, k); }},
        {"theta", [&](auto& e, auto& k) { c.theta = parse_double(e, k); }},
        {"delta", [&](auto& e, auto& k) { c.delta = parse_double(e, k); }}}},
      {"experiment",
       {{"kind", [](auto&, auto&) {}},
        {"ensemble", [&](auto& e, auto& k) { c.ensemble = parse_int(e, k); }},
        {"horizon", [&](auto& e, auto& k) { c.horizon = parse_double(e, k); }},
        {"output_step", [&](auto& e, auto& k) { c.output_step = parse_double(e, k); }},
        {"fit_start", [&](auto& e, auto& k) { c.fit_start = parse_double(e, k); }},
        {"radius", [&](auto& e, auto& k) { c.radius = parse_double(e, k); }},
        {"radius_check", [&](auto& e, auto& k) { c.radius_check = parse_double(e, k); }},
        {"radii", [&](auto& e, auto& k) { c.radii = parse_doubles(e, k); }},
        {"gamma", [&](auto& e, auto& k) { c.gamma = parse_double(e, k); }},
        {"probe_time", [&](auto& e, auto& k) { c.probe_time = parse_double(e, k); }},
        {"pullback_depth", [&](auto& e, auto& k) { c.pullback_depth = parse_int(e, k); }},
        {"initial_conditions",
         [&](auto& e, auto& k) { c.initial_conditions = parse_int(e, k); }},
        {"lemma_alpha", [&](auto& e, auto& k) { c.lemma_alpha = parse_double(e, k); }},
        {"lemma_p", [&](auto& e, auto& k) { c.lemma_p = parse_ints(e, k); }},
        {"calibration_samples",
         [&](auto& e, auto& k) { c.calibration_samples = parse_int(e, k); }},
        {"threads", [&](auto& e, auto& k) { c.threads = parse_int(e, k); }}}},
  };

  for (const auto& [section, entries] : doc.sections()) {
    const auto known = keys.find(section);
    if (known == keys.end()) {
      const int line = entries.empty() ? 0 : entries.begin()->second.line;
      throw ConfigError("config: unknown section [" + section + "]" +
                        (line ? " (first key on line " + std::to_string(line) + ")" : ""));
    }
    for (const auto& [key, entry] : entries) {
      const auto setter = known->second.find(key);
      if (setter == known->second.end()) {
        fail(entry.line, "unknown key '" + key + "' in [" + section + "]");
      }
      setter->second(entry, key);
    }
  }
  if (!truncation_given) c.truncation = c.points / 2 - 1;
  c.validate();
  return c;
}

std::string ExperimentConfig::to_ini() const {
  std::ostringstream o;
  o << "[solver]\n"
    << "length = " << fmt(length) << "\n"
    << "points = " << points << "\n"
    << "dt = " << fmt(dt) << "\n"
    << "truncation = " << truncation << "\n"
    << "renorm_mass = " << fmt(renorm_mass) << "\n"
    << "hermite = " << join(hermite, fmt) << "\n"
    << "mass_term = " << fmt(mass_term) << "\n"
    << "scheme = " << to_string(scheme) << "\n\n"
    << "[noise]\n"
    << "seed = " << seed << "\n"
    << "amplitude = " << fmt(amplitude) << "\n\n"
    << "[besov]\n"
    << "alpha = " << fmt(alpha) << "\n"
    << "p = " << p << "\n"
    << "s_points = " << s_points << "\n"
    << "theta = " << fmt(theta) << "\n"
    << "delta = " << fmt(delta) << "\n\n"
    << "[experiment]\n"
    << "kind = " << to_string(kind) << "\n"
    << "ensemble = " << ensemble << "\n"
    << "horizon = " << fmt(horizon) << "\n"
    << "output_step = " << fmt(output_step) << "\n"
    << "fit_start = " << fmt(fit_start) << "\n"
    << "radius = " << fmt(radius) << "\n"
    << "radius_check = " << fmt(radius_check) << "\n"
    << "radii = " << join(radii, fmt) << "\n"
    << "gamma = " << fmt(gamma) << "\n"
    << "probe_time = " << fmt(probe_time) << "\n"
    << "pullback_depth = " << pullback_depth << "\n"
    << "initial_conditions = " << initial_conditions << "\n"
    << "lemma_alpha = " << fmt(lemma_alpha) << "\n"
    << "lemma_p = " << join(lemma_p, [](int v) { return std::to_string(v); }) << "\n"
    << "calibration_samples = " << calibration_samples << "\n"
    << "threads = " << threads << "\n";
  return o.str();
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
  };
  (void)grid();
  (void)solver();
  require(amplitude >= 0.0, "amplitude must be >= 0");
  require(alpha > 0.0, "alpha must be > 0");
  require(p >= 1, "p must be an integer >= 1");
  require(s_points >= 32, "s_points must be >= 32");
  require(theta > 0.0 && delta > 0.0, "theta and delta must be > 0");
  require(ensemble >= 1, "ensemble must be >= 1");
  require(horizon >= 0.0, "horizon must be >= 0");
  require(output_step > 0.0, "output_step must be > 0");
  require(fit_start >= 0.0, "fit_start must be >= 0");
  require(radius >= 0.0 && radius_check >= 0.0, "radii must be >= 0");
  for (double r : radii) require(r >= 0.0, "radii must be >= 0");
  require(!radii.empty(), "radii must not be empty");
  require(gamma > 0.0, "gamma must be > 0");
  require(probe_time > 0.0, "probe_time must be > 0");
  require(pullback_depth >= 2 && (pullback_depth & (pullback_depth - 1)) == 0,
          "pullback_depth must be a power of two >= 2");
  require(initial_conditions >= 1, "initial_conditions must be >= 1");
  require(lemma_alpha > 0.0, "lemma_alpha must be > 0");
  for (int q : lemma_p) require(q >= 1, "lemma_p entries must be >= 1");
  require(!lemma_p.empty(), "lemma_p must not be empty");
  require(calibration_samples >= 1, "calibration_samples must be >= 1");
  require(threads >= 0, "threads must be >= 0");
}

std::vector<std::string> ExperimentConfig::warnings() const {
  std::vector<std::string> out;
  const double a0 = alpha0();
  if (!(alpha > a0 - delta && alpha <= a0)) {
    out.push_back("alpha = " + fmt(alpha) + " lies outside (alpha0 - delta, alpha0] = (" +
                  fmt(a0 - delta) + ", " + fmt(a0) + "]");
  }
  const double bound = 2.0 / (alpha - a0 + delta);
  if (alpha - a0 + delta > 0.0 && !(p > bound)) {
    out.push_back("p = " + std::to_string(p) + " violates p > d / (alpha - alpha0 + delta) = " +
                  fmt(bound) + "; the synchronization theorem's moment constraint does not hold");
  }
  return out;
}

TorusGrid ExperimentConfig::grid() const { return TorusGrid(length, points); }

SolverConfig ExperimentConfig::solver() const {
  const TorusGrid g = grid();
  return SolverConfig(g, dt, truncation, renorm_constant(g, truncation, renorm_mass), hermite,
                      mass_term, scheme);
}

}  // namespace spdesync
