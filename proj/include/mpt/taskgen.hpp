// SPDX-License-Identifier: Apache-2.0
//
// Synthetic seq2seq task families with closed-form targets, their on-disk
// corpus format, few-shot subsampling and exact-match evaluation.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpt/model.hpp"
#include "mpt/objectives.hpp"
#include "mpt/rng.hpp"

namespace mpt {

enum class TaskFamily { kCopy, kReverse, kSort, kMapSubstitute, kClassifyParity, kClassifyMajority };

std::string family_name(TaskFamily f);
TaskFamily parse_family(const std::string& name);  // throws std::invalid_argument

struct SplitSizes {
  std::size_t train = 2000;
  std::size_t dev = 200;
  std::size_t test = 200;
  bool operator==(const SplitSizes&) const = default;
};

struct LengthRange {
  std::size_t min = 3;
  std::size_t max = 8;
  bool operator==(const LengthRange&) const = default;
};

enum class Split { kTrain, kDev, kTest };
std::string split_name(Split s);

struct TaskCorpus {
  std::string task_id;
  TaskFamily family = TaskFamily::kCopy;
  std::size_t vocab_size = 0;
  std::uint64_t seed = 0;
  LengthRange lengths;
  std::vector<Example> train, dev, test;

  const std::vector<Example>& split(Split s) const;
};

// Content tokens are kFirstContentToken .. vocab_size - 1.
std::size_t content_token_count(std::size_t vocab_size);

// Substitution table of a map-substitute task: a permutation of the content
// tokens derived from the task seed. table[t - kFirstContentToken] is the
// image of token t.
std::vector<int> substitution_table(std::size_t vocab_size, std::uint64_t seed);

// The family's closed-form target for `src`. `seed` only matters for
// map-substitute.
std::vector<int> expected_target(TaskFamily family, std::span<const int> src,
                                 std::size_t vocab_size, std::uint64_t seed);

// Samples distinct sources uniformly (length uniform in range, tokens uniform
// over content tokens) and labels them with expected_target. The rng's seed
// becomes the corpus seed.
TaskCorpus generate_task(const std::string& task_id, TaskFamily family, std::size_t vocab_size,
                         const SplitSizes& sizes, const LengthRange& lengths, Rng rng);

struct FewShotSample {
  std::string parent_task;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> indices;  // into the parent's train split
  std::vector<Example> examples;
};

// Uniform k-subset of the train split without replacement.
FewShotSample few_shot(const TaskCorpus& corpus, std::size_t k, Rng rng);

// Greedy-decode each example's target length and score exact match.
double evaluate(const FrozenModel& model, const Matrix& prompt, std::span<const Example> examples);
double evaluate(const FrozenModel& model, const Matrix& prompt, const TaskCorpus& corpus,
                Split split);

// ---- default suite --------------------------------------------------------------

struct TaskSpec {
  std::string task_id;
  TaskFamily family;
};

struct SuiteSpec {
  std::size_t vocab_size = 20;
  SplitSizes sizes;
  LengthRange lengths;
  std::vector<TaskSpec> sources;
  std::vector<TaskSpec> targets;
};

// Sources copy, reverse, map_a, parity; targets sort, map_b.
SuiteSpec default_suite();

struct Suite {
  std::vector<TaskCorpus> sources;
  std::vector<TaskCorpus> targets;
};

Suite generate_suite(const SuiteSpec& spec, std::uint64_t seed);

// ---- corpus files -----------------------------------------------------------------

class CorpusFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Writes <dir>/<task_id>.<split>.tsv for the three splits.
void write_corpus(const std::filesystem::path& dir, const TaskCorpus& corpus);
TaskCorpus read_corpus(const std::filesystem::path& dir, const std::string& task_id);

std::string format_split(const TaskCorpus& corpus, Split split);

// Parses one split file. Rejects token ids >= vocab and examples whose target
// disagrees with the family oracle.
struct ParsedSplit {
  std::string task_id;
  TaskFamily family;
  std::size_t vocab_size;
  std::uint64_t seed;
  std::vector<Example> examples;
};
ParsedSplit parse_split(const std::string& text);

}  // namespace mpt
