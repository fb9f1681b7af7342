// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "mpt/binio.hpp"
#include "mpt/cli.hpp"

using namespace mpt;
using namespace mpt::cli;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig =
    "# tiny pipeline\n"
    "train_size = 24\n"
    "dev_size = 4\n"
    "test_size = 6\n"
    "teacher_epochs = 1\n"
    "source_epochs = 1\n"
    "target_epochs = 1\n"
    "batch_size = 8\n"
    "seeds = 1\n"
    "few_shot_k = 4\n"
    "few_shot_draws = 1\n";

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_stage(const fs::path& dir, const std::string& stage, std::string* err_text = nullptr) {
  CliInvocation inv;
  inv.subcommand = stage;
  inv.config_path = dir / "tiny.cfg";
  inv.output_dir = dir / "out";
  std::ostringstream out, err;
  const int rc = run(inv, out, err);
  if (err_text) *err_text = err.str();
  return rc;
}

}  // namespace

TEST_CASE("empty config gives the documented defaults") {
  const RunConfig c = parse_config_text("");
  CHECK(c == RunConfig{});
  CHECK(c.lambda == 0.9);
  CHECK(parse_config_text("# only a comment\n\n").lr_specific_target == 0.4);
}

TEST_CASE("config parse errors carry line numbers") {
  try {
    parse_config_text("lambda = 0.5\nbogus = 1\n");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config_text("lambda 0.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("batch_size = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("decomposition = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("seed = 1\nseed = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("lambda = -1\n"), std::invalid_argument);
}

TEST_CASE("values, comments and whitespace") {
  const RunConfig c = parse_config_text(
      "lambda=0.5   # trailing comment\n  optimizer = adam\nfreeze_shared = on\nseed = 7\n");
  CHECK(c.lambda == 0.5);
  CHECK(c.optimizer == OptimizerKind::kAdam);
  CHECK(c.freeze_shared);
  CHECK(c.seed == 7);
}

TEST_CASE("serialize and parse round trip") {
  RunConfig c;
  c.lr_specific_target = 0.4;
  c.lambda = 0.1 + 0.2;  // not exactly representable in short decimal
  c.optimizer = OptimizerKind::kAdam;
  c.stochastic_sampling = false;
  c.model.d_model = 32;
  c.init.embedding_std = 0.125;
  const RunConfig back = parse_config_text(serialize_config(c));
  CHECK(back == c);
  CHECK(config_keys().size() == 47);
}

TEST_CASE("seed resolution order") {
  const fs::path d = fresh_dir("mpt_cli_seed");
  write_file_bytes(d / "c.cfg", "seed = 5\n");
  CliInvocation inv;
  inv.config_path = d / "c.cfg";
  ::unsetenv("MPT_SEED");
  CHECK(resolve_config(inv).seed == 5);
  ::setenv("MPT_SEED", "11", 1);
  CHECK(resolve_config(inv).seed == 11);
  inv.seed = 13;
  CHECK(resolve_config(inv).seed == 13);
  ::unsetenv("MPT_SEED");
  inv.seed.reset();
  inv.overrides = {"seed=3", "lambda = 0.25"};
  const RunConfig c = resolve_config(inv);
  CHECK(c.seed == 3);
  CHECK(c.lambda == 0.25);
  inv.overrides = {"nokey=1"};
  CHECK_THROWS_AS(resolve_config(inv), ConfigError);
  fs::remove_all(d);
}

TEST_CASE("stages refuse to run without their inputs") {
  const fs::path d = fresh_dir("mpt_cli_missing");
  write_file_bytes(d / "tiny.cfg", kTinyConfig);
  std::string err;
  CHECK(run_stage(d, "adapt-target", &err) == 3);
  CHECK(err.find("missing artifact") != std::string::npos);
  CHECK(err.find("adapt-target") != std::string::npos);
  REQUIRE(run_stage(d, "gen-tasks") == 0);
  CHECK(run_stage(d, "adapt-target", &err) == 3);
  CHECK(err.find("train-source") != std::string::npos);
  CHECK(run_stage(d, "no-such-stage", &err) != 0);
  fs::remove_all(d);
}

TEST_CASE("a held lock blocks a second writer") {
  const fs::path d = fresh_dir("mpt_cli_lock");
  write_file_bytes(d / "tiny.cfg", kTinyConfig);
  write_file_bytes(d / "out" / ".lock", "");
  std::string err;
  CHECK(run_stage(d, "gen-tasks", &err) == 1);
  CHECK(err.find("lock") != std::string::npos);
  fs::remove(d / "out" / ".lock");
  CHECK(run_stage(d, "gen-tasks") == 0);
  CHECK_FALSE(fs::exists(d / "out" / ".lock"));
  fs::remove_all(d);
}

TEST_CASE("full pipeline is reproducible and tamper-evident") {
  const std::vector<std::string> stages{"gen-tasks", "train-teachers", "train-source",
                                        "adapt-target", "adapt-group", "few-shot", "ablate", "analyze",
                                        "report"};
  std::map<std::string, std::string> first;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path d = fresh_dir("mpt_cli_pipeline_" + std::to_string(rep));
    write_file_bytes(d / "tiny.cfg", kTinyConfig);
    for (const auto& s : stages) {
      std::string err;
      const int rc = run_stage(d, s, &err);
      INFO(s, ": ", err);
      REQUIRE(rc == 0);
    }
    const auto manifest = read_manifest(d / "out");
    CHECK(manifest.count("model.mptm") == 1);
    CHECK(manifest.count("teachers/copy.mptv") == 1);
    CHECK(manifest.count("source/decomposition.mptp") == 1);
    CHECK(manifest.count("targets/sort/compressed.mptv") == 1);
    CHECK(manifest.count("reports/similarity.ppm") == 1);
    if (rep == 0) {
      first = manifest;
    } else {
      CHECK(manifest == first);
      // Corrupt a recorded artifact: later stages and the report notice.
      write_file_bytes(d / "out" / "teachers" / "copy.mptv", "garbage");
      std::string err;
      CHECK(run_stage(d, "train-source", &err) != 0);
      CHECK(err.find("changed") != std::string::npos);
      CHECK(run_stage(d, "report", &err) != 0);
    }
  }
  fs::remove_all(fs::temp_directory_path() / "mpt_cli_pipeline_0");
  fs::remove_all(fs::temp_directory_path() / "mpt_cli_pipeline_1");
}
