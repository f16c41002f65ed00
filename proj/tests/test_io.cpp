#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "spdesync/io.hpp"
#include "spdesync/sampling.hpp"

using namespace spdesync;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("spdesync_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("git blob hashes") {
  CHECK(git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("atomic write replaces and leaves no temporaries") {
  const auto dir = scratch_dir("atomic");
  write_file_atomic(dir / "a.txt", "one");
  write_file_atomic(dir / "a.txt", "two");
  CHECK(read_file(dir / "a.txt") == "two");
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir)) files += e.is_regular_file();
  CHECK(files == 1);
  CHECK_THROWS_AS(write_file_atomic(dir / "missing" / "a.txt", "x"), IoError);
  CHECK_THROWS_AS(read_file(dir / "nothing"), IoError);
}

TEST_CASE("field binary round trip") {
  const auto dir = scratch_dir("field");
  const TorusGrid g(2 * std::numbers::pi, 16);
  const Field f = random_field(g, FieldKind::Rough, 3, 0);
  write_field(dir / "f.bin", f);
  CHECK(fs::file_size(dir / "f.bin") == 16 * 16 * 8);
  const Field back = read_field(dir / "f.bin");
  CHECK(back.grid() == g);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(back[i] == f[i]);
  write_file_atomic(dir / "f.bin", "short");
  CHECK_THROWS_AS(read_field(dir / "f.bin"), IoError);
}

TEST_CASE("manifest round trip and output hashes") {
  const auto dir = scratch_dir("run");
  auto cfg = ExperimentConfig::defaults(ExperimentKind::LemmaSuite);
  cfg.ensemble = 6;
  cfg.points = 16;
  cfg.truncation = 7;
  cfg.threads = 1;
  const auto result = run_experiment(cfg);
  const auto now = std::chrono::system_clock::now();
  const auto m = write_run(dir, result, now, now);
  CHECK(m.passed);
  REQUIRE(m.outputs.size() == 2);
  for (const auto& [name, hash] : m.outputs) CHECK(git_blob_sha1(read_file(dir / name)) == hash);
  const auto back = RunManifest::from_json(read_file(dir / "manifest.json"));
  CHECK(back.config() == cfg);
  CHECK(back.member_seeds == result.member_seeds);
  CHECK(back.outputs == m.outputs);
  CHECK(back.kind == "lemma_suite");
  CHECK_THROWS_AS(RunManifest::from_json("{\"kind\": 3}"), IoError);
}
