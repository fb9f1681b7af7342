// SPDX-License-Identifier: Apache-2.0
//
// Pipeline driver: flat key = value configs, the on-disk artifact store and
// one function per subcommand.
//
// Output layout:
//   model.mptm, config.txt, tasks/<id>.<split>.tsv
//   teachers/<id>.mptv
//   source/decomposition.mptp, source/manifests.tsv
//   targets/<id>/decomposition.mptp, targets/<id>/compressed.mptv
//   targets/group/decomposition.mptp
//   reports/*.tsv, reports/similarity.{txt,ppm}
//   manifest.tsv  (relative path, FNV-1a 64 content hash)

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpt/trainer.hpp"

namespace mpt::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Applies one `key = value` assignment; throws ConfigError on unknown keys or
// unparsable values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();

// Missing keys keep their defaults. Errors name the offending line. The
// result is validated.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::filesystem::path& path);

// Every key, one per line, in config_keys() order; parses back to `cfg`.
std::string serialize_config(const RunConfig& cfg);

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"gen-tasks",   "train-teachers", "train-source",
                                              "adapt-target", "adapt-group",    "few-shot",
                                              "ablate",       "analyze",        "report"};
  return names;
}

struct CliInvocation {
  std::string subcommand;
  std::optional<std::filesystem::path> config_path;
  std::filesystem::path output_dir = "out";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;  // "key=value"
  std::optional<std::string> task;     // restricts adapt-target / few-shot
};

// Config file, then overrides, then $MPT_SEED, then the --seed flag.
RunConfig resolve_config(const CliInvocation& inv);

// Hex FNV-1a 64 of a file's bytes.
std::string content_hash(const std::filesystem::path& path);

// relative path → hash
std::map<std::string, std::string> read_manifest(const std::filesystem::path& output_dir);

// Runs one stage. Returns 0 on success; otherwise prints a one-line
// diagnostic naming the stage to `err` and returns nonzero.
int run(const CliInvocation& inv, std::ostream& out, std::ostream& err);

}  // namespace mpt::cli
