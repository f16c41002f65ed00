#include "spdesync/io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "json.hpp"

#ifndef SPDESYNC_VERSION
#define SPDESYNC_VERSION "unknown"
#endif

namespace spdesync {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, std::string_view content) {
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write to " + tmp.string() + " failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename onto " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw IoError("sha1: cannot allocate digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw IoError("sha1: digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 15];
  }
  return out;
}

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xff) << (8 * (7 - i));
  return r;
}

fs::path sidecar(const fs::path& path) {
  fs::path p = path;
  p += ".json";
  return p;
}

}  // namespace

void write_field(const fs::path& path, const Field& f) {
  std::string bytes(f.size() * 8, '\0');
  for (std::size_t i = 0; i < f.size(); ++i) {
    const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(f[i]));
    for (int b = 0; b < 8; ++b) bytes[8 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  const nlohmann::ordered_json meta = {
      {"d", f.grid().dim()}, {"L", f.grid().length()}, {"N", f.grid().points()}};
  write_file_atomic(path, bytes);
  write_file_atomic(sidecar(path), meta.dump(2) + "\n");
}

Field read_field(const fs::path& path) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(sidecar(path)));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed sidecar " + sidecar(path).string() + ": " + e.what());
  }
  if (!meta.contains("d") || !meta.contains("L") || !meta.contains("N")) {
    throw IoError("sidecar " + sidecar(path).string() + " needs d, L and N");
  }
  const TorusGrid grid(meta["L"].get<double>(), meta["N"].get<int>(), meta["d"].get<int>());
  const std::string bytes = read_file(path);
  if (bytes.size() != grid.size() * 8) {
    throw IoError(path.string() + ": expected " + std::to_string(grid.size() * 8) + " bytes, got " +
                  std::to_string(bytes.size()));
  }
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 * i + b])) << (8 * b);
    }
    values[i] = std::bit_cast<double>(to_little(bits));
  }
  return Field(grid, std::move(values));
}

const char* code_version() noexcept { return SPDESYNC_VERSION; }

std::string iso_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = kind;
  j["version"] = version;
  j["base_seed"] = base_seed;
  j["seed_rule"] = "member_seed(i) = splitmix64(base_seed ^ splitmix64(i))";
  j["member_seeds"] = member_seeds;
  j["config"] = config_ini;
  j["started"] = started;
  j["finished"] = finished;
  nlohmann::ordered_json files = nlohmann::ordered_json::object();
  for (const auto& [name, hash] : outputs) files[name] = hash;
  j["outputs"] = files;
  j["passed"] = passed;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::ordered_json::parse(text);
    RunManifest m;
    m.kind = j.at("kind").get<std::string>();
    m.version = j.at("version").get<std::string>();
    m.base_seed = j.at("base_seed").get<std::uint64_t>();
    m.member_seeds = j.at("member_seeds").get<std::vector<std::uint64_t>>();
    m.config_ini = j.at("config").get<std::string>();
    m.started = j.at("started").get<std::string>();
    m.finished = j.at("finished").get<std::string>();
    for (const auto& [name, hash] : j.at("outputs").items()) {
      m.outputs.emplace_back(name, hash.get<std::string>());
    }
    m.passed = j.at("passed").get<bool>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
}

ExperimentConfig RunManifest::config() const { return ExperimentConfig::from_ini(config_ini); }

RunManifest write_run(const fs::path& dir, const ExperimentResult& result,
                      std::chrono::system_clock::time_point started,
                      std::chrono::system_clock::time_point finished) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  const std::string kind = to_string(result.config.kind);
  RunManifest m;
  m.kind = kind;
  m.config_ini = result.config.to_ini();
  m.base_seed = result.config.seed;
  m.member_seeds = result.member_seeds;
  m.version = code_version();
  m.started = iso_timestamp(started);
  m.finished = iso_timestamp(finished);
  m.passed = result.passed();
  const std::pair<std::string, std::string> files[] = {
      {kind + ".csv", to_csv(result)}, {kind + "_summary.json", summary_json(result)}};
  for (const auto& [name, content] : files) {
    write_file_atomic(dir / name, content);
    m.outputs.emplace_back(name, git_blob_sha1(content));
  }
  write_file_atomic(dir / "manifest.json", m.to_json());
  return m;
}

}  // namespace spdesync
