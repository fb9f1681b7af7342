// SPDX-License-Identifier: Apache-2.0

#include "mpt/objectives.hpp"

#include <cmath>
#include <stdexcept>

namespace mpt {

void DistillConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("distillation lambda must be a nonnegative finite number");
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw std::invalid_argument("distillation temperature must be positive");
  if (use_prompt_distance && (use_logits_kl || use_hidden_mse))
    throw std::invalid_argument(
        "prompt-distance distillation excludes the logit and hidden-state losses");
}

namespace {

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
}

// Row-wise log-softmax of logits / T.
void log_softmax_row(std::span<const double> logits, double temperature, std::span<double> out) {
  double mx = logits[0];
  for (double z : logits) mx = std::max(mx, z);
  double sum = 0.0;
  for (double z : logits) sum += std::exp((z - mx) / temperature);
  const double lse = std::log(sum);
  for (std::size_t j = 0; j < logits.size(); ++j) out[j] = (logits[j] - mx) / temperature - lse;
}

}  // namespace

LossGrad kl_logits_loss_grad(const Matrix& teacher_logits, const Matrix& student_logits,
                             double temperature) {
  require_same_shape("kl_logits_loss", teacher_logits, student_logits);
  if (!(temperature > 0.0)) throw std::invalid_argument("kl_logits_loss: temperature must be positive");
  const std::size_t n = teacher_logits.rows();
  const std::size_t v = teacher_logits.cols();
  LossGrad out{0.0, Matrix(n, v)};
  if (n == 0) return out;
  std::vector<double> lp(v), lq(v);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    log_softmax_row(teacher_logits.row(i), temperature, lp);
    log_softmax_row(student_logits.row(i), temperature, lq);
    double kl = 0.0;
    auto g = out.grad.row(i);
    for (std::size_t j = 0; j < v; ++j) {
      const double p = std::exp(lp[j]);
      kl += p * (lp[j] - lq[j]);
      g[j] = (std::exp(lq[j]) - p) / temperature * inv_n;
    }
    out.value += kl;
  }
  out.value *= inv_n;
  return out;
}

double kl_logits_loss(const Matrix& teacher_logits, const Matrix& student_logits,
                      double temperature) {
  return kl_logits_loss_grad(teacher_logits, student_logits, temperature).value;
}

LossGrad mse_loss_grad(const Matrix& teacher, const Matrix& student) {
  require_same_shape("mse_loss", teacher, student);
  LossGrad out{0.0, Matrix(student.rows(), student.cols())};
  if (student.size() == 0) return out;
  const double inv = 1.0 / static_cast<double>(student.size());
  auto t = teacher.values();
  auto s = student.values();
  auto g = out.grad.values();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double diff = s[i] - t[i];
    out.value += diff * diff;
    g[i] = 2.0 * diff * inv;
  }
  out.value *= inv;
  return out;
}

double hidden_mse_loss(const Matrix& teacher_enc, const Matrix& teacher_dec,
                       const Matrix& student_enc, const Matrix& student_dec) {
  return mse_loss_grad(teacher_enc, student_enc).value +
         mse_loss_grad(teacher_dec, student_dec).value;
}

double total_loss(double l_plm, double l_logits, double l_hidden, double lambda) {
  return l_plm + lambda * (l_logits + l_hidden);
}

double prompt_distance_loss(const VanillaPrompt& teacher_prompt, const Matrix& student_composed) {
  return mse_loss_grad(teacher_prompt.matrix, student_composed).value;
}

PromptObjective prompt_objective(const FrozenModel& model, const Matrix& prompt,
                                 std::span<const Example> batch, const Matrix* teacher_prompt,
                                 const DistillConfig& cfg, Exec exec) {
  cfg.validate();
  if (batch.empty()) throw std::invalid_argument("prompt_objective: empty batch");
  const bool use_kl = teacher_prompt != nullptr && cfg.use_logits_kl;
  const bool use_hidden = teacher_prompt != nullptr && cfg.use_hidden_mse;

  struct Slot {
    double plm = 0.0, logits = 0.0, hidden = 0.0;
    Matrix grad;
  };
  std::vector<Slot> slots(batch.size());

  auto run_one = [&](std::size_t e) {
    const Example& ex = batch[e];
    const ForwardTrace st = model.forward(prompt, ex.src, ex.tgt);
    Slot& slot = slots[e];
    slot.plm = task_loss(st, ex.tgt);
    Matrix dlogits = task_loss_grad(st, ex.tgt);
    Matrix denc, ddec;
    if (use_kl || use_hidden) {
      const ForwardTrace tt = model.forward(*teacher_prompt, ex.src, ex.tgt);
      if (use_kl) {
        LossGrad kl = kl_logits_loss_grad(tt.logits, st.logits, cfg.temperature);
        slot.logits = kl.value;
        axpy(dlogits, kl.grad, cfg.lambda);
      }
      if (use_hidden) {
        LossGrad enc = mse_loss_grad(tt.enc_hidden, st.enc_hidden);
        LossGrad dec = mse_loss_grad(tt.dec_hidden, st.dec_hidden);
        slot.hidden = enc.value + dec.value;
        denc = scale(enc.grad, cfg.lambda);
        ddec = scale(dec.grad, cfg.lambda);
      }
    }
    slot.grad = model.backward_to_prompt(st, dlogits, denc, ddec);
  };

  const auto n = static_cast<long long>(batch.size());
  if (exec == Exec::kParallel) {
    // Exceptions must not escape the parallel region; capture the first one.
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
    for (long long e = 0; e < n; ++e) {
      try {
        run_one(static_cast<std::size_t>(e));
      } catch (...) {
#pragma omp critical(mpt_objective_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  } else {
    for (long long e = 0; e < n; ++e) run_one(static_cast<std::size_t>(e));
  }

  PromptObjective out;
  out.grad = Matrix(prompt.rows(), prompt.cols());
  for (const Slot& s : slots) {
    out.l_plm += s.plm;
    out.l_logits += s.logits;
    out.l_hidden += s.hidden;
    axpy(out.grad, s.grad);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.l_plm *= inv;
  out.l_logits *= inv;
  out.l_hidden *= inv;
  for (double& g : out.grad.values()) g *= inv;
  out.l_total = total_loss(out.l_plm, out.l_logits, out.l_hidden, cfg.lambda);
  return out;
}

DistillationBatchResult batch_objective(const FrozenModel& model, const SharedPrompt& shared,
                                        const TaskFactors& factors,
                                        const VanillaPrompt* teacher_prompt,
                                        std::span<const Example> batch, const DistillConfig& cfg,
                                        Exec exec) {
  cfg.validate();
  if (teacher_prompt == nullptr && cfg.distillation_active())
    throw std::invalid_argument("batch_objective: distillation enabled but no teacher for task '" +
                                factors.task_id + "'");
  const Matrix composed = compose(shared, factors);
  const Matrix* teacher = teacher_prompt ? &teacher_prompt->matrix : nullptr;
  PromptObjective po = prompt_objective(model, composed, batch, teacher, cfg, exec);

  DistillationBatchResult r;
  r.l_plm = po.l_plm;
  r.l_logits = po.l_logits;
  r.l_hidden = po.l_hidden;
  if (cfg.use_prompt_distance) {
    LossGrad pd = mse_loss_grad(teacher_prompt->matrix, composed);
    // Reported in the logits slot.
    r.l_logits = pd.value;
    axpy(po.grad, pd.grad, cfg.lambda);
  }
  r.l_total = total_loss(r.l_plm, r.l_logits, r.l_hidden, cfg.lambda);
  FactorGradients g = chain_gradients(po.grad, shared, factors);
  r.grad_shared = std::move(g.shared);
  r.grad_factors.emplace(factors.task_id, std::make_pair(std::move(g.u), std::move(g.v)));
  return r;
}

}  // namespace mpt
