// SPDX-License-Identifier: Apache-2.0
//
// The training procedures: vanilla prompt tuning of per-task teachers,
// multitask source training of the decomposed student under the distillation
// objective, and target adaptation of the shared prompt with two learning
// rates (single target or a group of targets sharing P*).

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpt/model.hpp"
#include "mpt/objectives.hpp"
#include "mpt/prompts.hpp"
#include "mpt/sampling.hpp"
#include "mpt/taskgen.hpp"

namespace mpt {

enum class OptimizerKind { kSgd, kAdam };

std::string optimizer_name(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& name);

struct RunConfig {
  // Backbone and synthetic suite.
  ModelConfig model;
  InitOptions init;
  std::uint64_t model_seed = 1234;
  std::uint64_t data_seed = 42;
  SplitSizes sizes;
  LengthRange lengths;

  // Prompt and distillation.
  std::size_t prompt_length = 8;
  double lambda = 0.9;
  double temperature = 2.0;
  double factor_init_noise = kFactorInitNoise;

  // Optimisation.
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double lr_teacher = 0.3;
  double lr_shared_source = 0.3;
  double lr_specific_source = 0.3;
  double lr_shared_target = 0.3;
  double lr_specific_target = 0.4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t teacher_epochs = 30;
  std::size_t source_epochs = 20;
  std::size_t target_epochs = 30;
  std::size_t batch_size = 16;
  std::size_t mixing_cap = kDefaultMixingCap;

  // Training seeds: runs use seed, seed + 1, ..., seed + num_seeds - 1.
  std::uint64_t seed = 0;
  std::size_t num_seeds = 3;

  // Ablation axes.
  bool decomposition = true;
  bool distillation = true;
  bool logits_loss = true;
  bool hidden_loss = true;
  bool prompt_distance = false;
  bool stochastic_sampling = true;
  bool freeze_shared = false;
  bool freeze_specific = false;

  // Few-shot protocol.
  std::size_t few_shot_k = 16;
  std::size_t few_shot_draws = 10;

  // Throws std::invalid_argument describing the first inconsistent field.
  void validate() const;
  DistillConfig distill_config() const;
  SuiteSpec suite_spec() const;
  bool operator==(const RunConfig&) const = default;
};

struct EpochLosses {
  std::size_t epoch = 0;
  double l_plm = 0.0;
  double l_logits = 0.0;
  double l_hidden = 0.0;
  double l_total = 0.0;
};

struct TrainReport {
  std::vector<EpochLosses> epochs;
  std::vector<std::pair<std::string, double>> eval;  // task → accuracy
  std::vector<std::string> checkpoints;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;  // not part of the exported text

  void add_eval(const std::string& task, double accuracy) { eval.emplace_back(task, accuracy); }
};

// epoch<TAB>l_plm<TAB>l_logits<TAB>l_hidden<TAB>l_total rows, then
// eval<TAB>task<TAB>accuracy rows.
void write_report(std::ostream& os, const TrainReport& report);
std::string format_report(const TrainReport& report);

// ---- optimisers -----------------------------------------------------------------------

// p ← p − lr·g
void sgd_step(std::span<double> params, std::span<const double> grads, double lr);

// Plain SGD or Adam over named parameter blocks; Adam keeps moments per block.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  explicit Optimizer(const RunConfig& cfg)
      : Optimizer(cfg.optimizer, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps) {}

  void step(const std::string& block, std::span<double> params, std::span<const double> grads,
            double lr);

 private:
  struct Moments {
    std::vector<double> m, v;
    std::uint64_t t = 0;
  };
  OptimizerKind kind_;
  double beta1_, beta2_, eps_;
  std::map<std::string, Moments> state_;
};

// ---- stages -----------------------------------------------------------------------------

using TeacherSet = std::map<std::string, VanillaPrompt>;

// Vanilla prompt tuning of `init` on `examples` under the task loss.
VanillaPrompt train_prompt(const FrozenModel& model, VanillaPrompt init,
                           std::span<const Example> examples, double lr, std::size_t epochs,
                           std::size_t batch_size, OptimizerKind optimizer, Rng rng,
                           TrainReport* report = nullptr);

// Teacher for one source task: vocabulary-sampled init, then train_prompt.
VanillaPrompt train_teacher(const FrozenModel& model, const TaskCorpus& corpus,
                            const RunConfig& cfg, TrainReport* report = nullptr);

TeacherSet train_teachers(const FrozenModel& model, const std::vector<TaskCorpus>& sources,
                          const RunConfig& cfg, std::map<std::string, TrainReport>* reports = nullptr);

struct SourceResult {
  SharedPrompt shared;
  std::vector<TaskFactors> factors;  // empty when decomposition is off
  std::vector<BatchManifest> manifests;
  TrainReport report;
};

// Multitask source training. Per batch: stochastic task subset, proportional
// mixing, per-task objective, gradients accumulated with weight n_task / B,
// one optimiser step for P* and every represented task's (u, v).
SourceResult train_source(const FrozenModel& model, const std::vector<TaskCorpus>& sources,
                          const TeacherSet& teachers, const RunConfig& cfg);

struct AdaptResult {
  SharedPrompt shared;
  TaskFactors factors;
  TrainReport report;
  double accuracy = 0.0;  // exact match on the target's test split
};

// Target adaptation: factors start at the mean of the source factors (or all
// ones when there are none); P* and (u, v) follow the task loss with
// lr_shared_target and lr_specific_target, honouring the freeze flags.
// `train_override` replaces the corpus train split (few-shot runs).
AdaptResult adapt_target(const FrozenModel& model, const SharedPrompt& shared,
                         const std::vector<TaskFactors>& source_factors,
                         const TaskCorpus& target, const RunConfig& cfg,
                         std::span<const Example> train_override = {});

struct GroupResult {
  SharedPrompt shared;
  std::vector<TaskFactors> factors;
  TrainReport report;
  std::map<std::string, double> accuracy;
  std::uint64_t params_per_task = 0;  // grouped per-task count
};

GroupResult adapt_target_group(const FrozenModel& model, const SharedPrompt& shared,
                               const std::vector<TaskFactors>& source_factors,
                               const std::vector<TaskCorpus>& targets, const RunConfig& cfg);

// ---- few-shot --------------------------------------------------------------------------

struct FewShotComparison {
  std::string task_id;
  std::size_t k = 0;
  std::vector<double> mpt;  // accuracy per draw, decomposition-initialised
  std::vector<double> pt;   // accuracy per draw, vanilla prompt tuning
  double mpt_mean() const;
  double pt_mean() const;
};

// cfg.few_shot_draws k-shot samples of the target's train split. Each draw
// adapts the source decomposition and, separately, tunes a fresh
// vocabulary-sampled prompt; both are scored on the full test split.
FewShotComparison run_few_shot(const FrozenModel& model, const SharedPrompt& shared,
                               const std::vector<TaskFactors>& source_factors,
                               const TaskCorpus& target, const RunConfig& cfg);

// ---- ablation harness ---------------------------------------------------------------

struct AblationCell {
  bool decomposition = false;
  bool distillation = false;
  std::vector<double> seed_accuracy;  // mean target accuracy per seed
  double mean() const;
};

struct AblationTable {
  std::vector<std::uint64_t> seeds;
  // Indexed [decomposition][distillation].
  AblationCell cells[2][2];

  const AblationCell& cell(bool decomposition, bool distillation) const {
    return cells[decomposition ? 1 : 0][distillation ? 1 : 0];
  }
};

// Four source-training variants per seed sharing data, teachers, prompt
// initialisation and batch manifests; each followed by full adaptation on
// every target. Cell value: mean test accuracy over targets.
// `full_sources`, when given, receives the full cell's source result per seed.
AblationTable run_ablation_grid(const FrozenModel& model, const Suite& suite, const RunConfig& cfg,
                                std::vector<SourceResult>* full_sources = nullptr);

void write_ablation(std::ostream& os, const AblationTable& table);

// Config for training seed `index` (cfg.seed + index).
RunConfig with_seed(const RunConfig& cfg, std::size_t index);

}  // namespace mpt
