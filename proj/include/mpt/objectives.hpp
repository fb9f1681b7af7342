// SPDX-License-Identifier: Apache-2.0
//
// Training objectives: the task NLL, temperature-smoothed logit KL against a
// teacher prompt, hidden-state MSE, the prompt-distance variant, and their
// weighted total. All reductions are means (per position, then per example).

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpt/model.hpp"
#include "mpt/numerics.hpp"
#include "mpt/prompts.hpp"

namespace mpt {

struct Example {
  std::vector<int> src;
  std::vector<int> tgt;
  bool operator==(const Example&) const = default;
};

struct DistillConfig {
  double lambda = 0.9;
  double temperature = 2.0;
  bool use_logits_kl = true;
  bool use_hidden_mse = true;
  bool use_prompt_distance = false;

  bool distillation_active() const { return use_logits_kl || use_hidden_mse || use_prompt_distance; }
  // Throws std::invalid_argument on a negative λ, non-positive T, or prompt
  // distance combined with the logit/hidden pair.
  void validate() const;
};

struct LossGrad {
  double value = 0.0;
  Matrix grad;  // gradient w.r.t. the second (student) argument
};

// mean over positions of KL(softmax(teacher/T) || softmax(student/T)).
double kl_logits_loss(const Matrix& teacher_logits, const Matrix& student_logits,
                      double temperature);
LossGrad kl_logits_loss_grad(const Matrix& teacher_logits, const Matrix& student_logits,
                             double temperature);

// mean((se - te)^2) + mean((sd - td)^2)
double hidden_mse_loss(const Matrix& teacher_enc, const Matrix& teacher_dec,
                       const Matrix& student_enc, const Matrix& student_dec);

// Mean squared difference between two same-shaped matrices and its gradient
// with respect to `student`.
LossGrad mse_loss_grad(const Matrix& teacher, const Matrix& student);

double total_loss(double l_plm, double l_logits, double l_hidden, double lambda);

double prompt_distance_loss(const VanillaPrompt& teacher_prompt, const Matrix& student_composed);

// Losses of one prompt over a set of examples, with the gradient with respect
// to that prompt.
struct PromptObjective {
  double l_plm = 0.0;
  double l_logits = 0.0;
  double l_hidden = 0.0;
  double l_total = 0.0;
  Matrix grad;  // dl_total / dprompt
};

enum class Exec { kSerial, kParallel };

// L_PLM plus, when a teacher is given and cfg enables them, the logit KL and
// hidden MSE against the teacher prompt's forward pass. kParallel spreads the
// examples across OpenMP threads; per-example results are reduced in example
// order, so both policies return bitwise-identical values.
PromptObjective prompt_objective(const FrozenModel& model, const Matrix& prompt,
                                 std::span<const Example> batch, const Matrix* teacher_prompt,
                                 const DistillConfig& cfg, Exec exec = Exec::kParallel);

struct DistillationBatchResult {
  double l_plm = 0.0;
  double l_logits = 0.0;
  double l_hidden = 0.0;
  double l_total = 0.0;
  Matrix grad_shared;
  std::map<std::string, std::pair<Vector, Vector>> grad_factors;  // task → (du, dv)
};

// One task's batch through the decomposed student. The teacher may be null
// when cfg has distillation disabled.
DistillationBatchResult batch_objective(const FrozenModel& model, const SharedPrompt& shared,
                                        const TaskFactors& factors,
                                        const VanillaPrompt* teacher_prompt,
                                        std::span<const Example> batch, const DistillConfig& cfg,
                                        Exec exec = Exec::kParallel);

}  // namespace mpt
