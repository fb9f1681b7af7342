// SPDX-License-Identifier: Apache-2.0

#include "mpt/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mpt {

std::string optimizer_name(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw std::invalid_argument("unknown optimizer '" + name + "' (expected sgd or adam)");
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("invalid run config: " + what);
  };
  model.validate();
  require(prompt_length >= 1 && prompt_length <= kMaxPromptLength, "l must be in [1, 512]");
  require(std::isfinite(lambda) && lambda >= 0.0, "lambda must be nonnegative");
  require(std::isfinite(temperature) && temperature > 0.0, "temperature must be positive");
  require(factor_init_noise >= 0.0, "factor_init_noise must be nonnegative");
  for (double lr : {lr_teacher, lr_shared_source, lr_specific_source, lr_shared_target,
                    lr_specific_target})
    require(std::isfinite(lr) && lr > 0.0, "learning rates must be positive");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          "adam betas must be in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be positive");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(mixing_cap >= 1, "mixing_cap must be >= 1");
  require(num_seeds >= 1, "seeds must be >= 1");
  require(!(prompt_distance && (logits_loss || hidden_loss)),
          "prompt_distance excludes logits_loss and hidden_loss");
  require(model.vocab_size >= 4, "vocab_size must be >= 4");
  require(lengths.min >= 1 && lengths.min <= lengths.max, "min_len must be in [1, max_len]");
  require(lengths.max <= model.max_src_len && lengths.max <= model.max_tgt_len,
          "max_len exceeds the model's sequence limits");
  require(sizes.train >= 1 && sizes.dev >= 1 && sizes.test >= 1, "split sizes must be >= 1");
  require(few_shot_k >= 1 && few_shot_draws >= 1, "few-shot k and draws must be >= 1");
}

DistillConfig RunConfig::distill_config() const {
  DistillConfig d;
  d.lambda = lambda;
  d.temperature = temperature;
  d.use_prompt_distance = distillation && prompt_distance;
  d.use_logits_kl = distillation && !prompt_distance && logits_loss;
  d.use_hidden_mse = distillation && !prompt_distance && hidden_loss;
  return d;
}

SuiteSpec RunConfig::suite_spec() const {
  SuiteSpec s = default_suite();
  s.vocab_size = model.vocab_size;
  s.sizes = sizes;
  s.lengths = lengths;
  return s;
}

RunConfig with_seed(const RunConfig& cfg, std::size_t index) {
  RunConfig c = cfg;
  c.seed = cfg.seed + index;
  return c;
}

// ---- reports --------------------------------------------------------------------------

void write_report(std::ostream& os, const TrainReport& report) {
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << "epoch\tl_plm\tl_logits\tl_hidden\tl_total\n";
  os << std::setprecision(10);
  for (const auto& e : report.epochs)
    os << e.epoch << '\t' << e.l_plm << '\t' << e.l_logits << '\t' << e.l_hidden << '\t'
       << e.l_total << '\n';
  for (const auto& [task, acc] : report.eval)
    os << "eval\t" << task << '\t' << std::fixed << std::setprecision(4) << acc
       << std::defaultfloat << std::setprecision(10) << '\n';
  os.flags(flags);
  os.precision(prec);
}

std::string format_report(const TrainReport& report) {
  std::ostringstream os;
  write_report(os, report);
  return os.str();
}

// ---- optimisers -------------------------------------------------------------------------

void sgd_step(std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != grads.size()) throw ShapeError("sgd_step: parameter/gradient size mismatch");
  if (!(lr > 0.0)) throw std::invalid_argument("sgd_step: learning rate must be positive");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

Optimizer::Optimizer(OptimizerKind kind, double beta1, double beta2, double eps)
    : kind_(kind), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Optimizer::step(const std::string& block, std::span<double> params,
                     std::span<const double> grads, double lr) {
  if (kind_ == OptimizerKind::kSgd) {
    sgd_step(params, grads, lr);
    return;
  }
  if (params.size() != grads.size()) throw ShapeError("adam: parameter/gradient size mismatch");
  Moments& s = state_[block];
  if (s.m.empty()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  if (s.m.size() != params.size()) throw ShapeError("adam: block '" + block + "' changed size");
  ++s.t;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * grads[i];
    s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * grads[i] * grads[i];
    params[i] -= lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + eps_);
  }
}

// ---- helpers ----------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

DistillConfig task_loss_only(const RunConfig& cfg) {
  DistillConfig d;
  d.lambda = cfg.lambda;
  d.temperature = cfg.temperature;
  d.use_logits_kl = false;
  d.use_hidden_mse = false;
  d.use_prompt_distance = false;
  return d;
}

std::vector<std::size_t> shuffled(std::size_t n, Rng rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i)
    std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform_index(i))]);
  return idx;
}

struct LossAccumulator {
  double plm = 0, logits = 0, hidden = 0, total = 0;
  std::size_t steps = 0;

  void add(double p, double lg, double h, double t) {
    plm += p;
    logits += lg;
    hidden += h;
    total += t;
    ++steps;
  }
  EpochLosses finish(std::size_t epoch) const {
    const double inv = steps ? 1.0 / static_cast<double>(steps) : 0.0;
    return {epoch, plm * inv, logits * inv, hidden * inv, total * inv};
  }
};

std::size_t steps_per_epoch(std::size_t total_examples, std::size_t batch_size) {
  return std::max<std::size_t>(1, total_examples / batch_size);
}

const TaskCorpus& find_corpus(const std::vector<TaskCorpus>& corpora, const std::string& id) {
  for (const auto& c : corpora)
    if (c.task_id == id) return c;
  throw std::invalid_argument("no corpus for task '" + id + "'");
}

// Single-task loop shared by vanilla prompt tuning and target adaptation.
// `step_fn(batch)` returns the batch losses after applying its update.
template <typename StepFn>
void single_task_epochs(std::span<const Example> examples, std::size_t epochs,
                        std::size_t batch_size, Rng rng, TrainReport* report, StepFn step_fn) {
  std::vector<Example> batch;
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled(examples.size(), rng.fork(epoch));
    LossAccumulator acc;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);
      const EpochLosses l = step_fn(std::span<const Example>(batch));
      acc.add(l.l_plm, l.l_logits, l.l_hidden, l.l_total);
    }
    if (report) report->epochs.push_back(acc.finish(epoch));
  }
}

}  // namespace

// ---- stages -------------------------------------------------------------------------------

VanillaPrompt train_prompt(const FrozenModel& model, VanillaPrompt init,
                           std::span<const Example> examples, double lr, std::size_t epochs,
                           std::size_t batch_size, OptimizerKind optimizer, Rng rng,
                           TrainReport* report) {
  if (epochs > 0 && examples.empty()) throw std::invalid_argument("train_prompt: no examples");
  if (batch_size == 0) throw std::invalid_argument("train_prompt: batch_size must be >= 1");
  Optimizer opt(optimizer);
  DistillConfig plm_only;
  plm_only.use_logits_kl = false;
  plm_only.use_hidden_mse = false;
  VanillaPrompt p = std::move(init);
  single_task_epochs(examples, epochs, batch_size, rng, report, [&](std::span<const Example> b) {
    PromptObjective po = prompt_objective(model, p.matrix, b, nullptr, plm_only);
    opt.step("prompt", p.matrix.values(), po.grad.values(), lr);
    return EpochLosses{0, po.l_plm, 0.0, 0.0, po.l_total};
  });
  return p;
}

VanillaPrompt train_teacher(const FrozenModel& model, const TaskCorpus& corpus,
                            const RunConfig& cfg, TrainReport* report) {
  cfg.validate();
  const auto t0 = Clock::now();
  const Rng rng = Rng(cfg.seed).fork("teacher:" + corpus.task_id);
  Rng init_rng = rng.fork("init");
  VanillaPrompt init = init_vanilla_prompt(model, cfg.prompt_length, init_rng);
  VanillaPrompt p = train_prompt(model, std::move(init), corpus.train, cfg.lr_teacher,
                                 cfg.teacher_epochs, cfg.batch_size, cfg.optimizer,
                                 rng.fork("shuffle"), report);
  if (report) {
    report->seed = cfg.seed;
    report->wall_seconds = seconds_since(t0);
  }
  return p;
}

TeacherSet train_teachers(const FrozenModel& model, const std::vector<TaskCorpus>& sources,
                          const RunConfig& cfg, std::map<std::string, TrainReport>* reports) {
  TeacherSet teachers;
  for (const auto& corpus : sources) {
    TrainReport rep;
    teachers.emplace(corpus.task_id, train_teacher(model, corpus, cfg, &rep));
    if (reports) (*reports)[corpus.task_id] = std::move(rep);
  }
  return teachers;
}

SourceResult train_source(const FrozenModel& model, const std::vector<TaskCorpus>& sources,
                          const TeacherSet& teachers, const RunConfig& cfg) {
  cfg.validate();
  if (sources.empty()) throw std::invalid_argument("train_source: no source tasks");
  const auto t0 = Clock::now();
  const DistillConfig dcfg = cfg.distill_config();
  if (dcfg.distillation_active())
    for (const auto& c : sources)
      if (!teachers.count(c.task_id))
        throw std::invalid_argument("train_source: missing teacher for task '" + c.task_id + "'");

  const Rng rng = Rng(cfg.seed).fork("source");
  const std::size_t l = cfg.prompt_length;
  const std::size_t d = model.config().d_model;

  std::vector<std::string> ids;
  MixingSpec mix;
  mix.cap = cfg.mixing_cap;
  std::size_t total_train = 0;
  for (const auto& c : sources) {
    ids.push_back(c.task_id);
    mix.task_sizes[c.task_id] = c.train.size();
    total_train += c.train.size();
  }

  SourceResult out;
  Rng init_rng = rng.fork("prompt-init");
  Decomposition dec = init_decomposition(model, l, ids, init_rng, cfg.factor_init_noise);
  out.shared = std::move(dec.shared);
  std::map<std::string, TaskFactors> factors;
  for (auto& f : dec.factors) {
    if (!cfg.decomposition) f = identity_factors(f.task_id, l, d);
    factors.emplace(f.task_id, std::move(f));
  }

  const std::size_t per_epoch = steps_per_epoch(total_train, cfg.batch_size);
  SourceBatchOptions opts;
  opts.batch_size = cfg.batch_size;
  opts.steps = per_epoch * cfg.source_epochs;
  opts.stochastic_tasks = cfg.stochastic_sampling;
  Rng manifest_rng = rng.fork("manifests");
  out.manifests = make_source_batches(mix, opts, manifest_rng);
  const std::vector<BatchManifest>& manifests = out.manifests;

  Optimizer opt(cfg);
  std::vector<Example> batch;
  const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
  LossAccumulator acc;
  for (std::size_t step = 0; step < manifests.size(); ++step) {
    Matrix grad_shared(l, d);
    std::map<std::string, std::pair<Vector, Vector>> grad_factors;
    double plm = 0, lg = 0, hid = 0, tot = 0;
    for (const auto& [task, indices] : manifests[step].by_task()) {
      const TaskCorpus& corpus = find_corpus(sources, task);
      batch.clear();
      for (std::size_t i : indices) batch.push_back(corpus.train.at(i));
      const auto teacher_it = teachers.find(task);
      const VanillaPrompt* teacher =
          dcfg.distillation_active() && teacher_it != teachers.end() ? &teacher_it->second : nullptr;
      DistillationBatchResult r =
          batch_objective(model, out.shared, factors.at(task), teacher, batch, dcfg);
      const double w = static_cast<double>(indices.size()) * inv_b;
      axpy(grad_shared, r.grad_shared, w);
      auto& [du, dv] = r.grad_factors.at(task);
      auto [it, inserted] = grad_factors.try_emplace(task, Vector(l), Vector(d));
      axpy(it->second.first, du, w);
      axpy(it->second.second, dv, w);
      plm += w * r.l_plm;
      lg += w * r.l_logits;
      hid += w * r.l_hidden;
      tot += w * r.l_total;
    }
    opt.step("shared", out.shared.matrix.values(), grad_shared.values(), cfg.lr_shared_source);
    if (cfg.decomposition) {
      for (auto& [task, g] : grad_factors) {
        TaskFactors& f = factors.at(task);
        opt.step("u:" + task, f.u.values(), g.first.values(), cfg.lr_specific_source);
        opt.step("v:" + task, f.v.values(), g.second.values(), cfg.lr_specific_source);
      }
    }
    acc.add(plm, lg, hid, tot);
    if ((step + 1) % per_epoch == 0) {
      out.report.epochs.push_back(acc.finish((step + 1) / per_epoch));
      acc = LossAccumulator{};
    }
  }
  if (cfg.decomposition)
    for (const auto& id : ids) out.factors.push_back(factors.at(id));
  out.report.seed = cfg.seed;
  out.report.wall_seconds = seconds_since(t0);
  return out;
}

AdaptResult adapt_target(const FrozenModel& model, const SharedPrompt& shared,
                         const std::vector<TaskFactors>& source_factors,
                         const TaskCorpus& target, const RunConfig& cfg,
                         std::span<const Example> train_override) {
  cfg.validate();
  if (shared.width() != model.config().d_model)
    throw ShapeError("adapt_target: shared prompt width does not match model");
  const auto t0 = Clock::now();
  AdaptResult out;
  out.shared = shared;
  out.factors = source_factors.empty()
                    ? identity_factors(target.task_id, shared.length(), shared.width())
                    : average_factors(source_factors, target.task_id);
  const std::span<const Example> train =
      train_override.empty() ? std::span<const Example>(target.train) : train_override;
  const DistillConfig plm_only = task_loss_only(cfg);
  Optimizer opt(cfg);
  const bool train_any = !(cfg.freeze_shared && cfg.freeze_specific);
  const Rng rng = Rng(cfg.seed).fork("target:" + target.task_id);
  single_task_epochs(train, train_any ? cfg.target_epochs : 0, cfg.batch_size, rng.fork("shuffle"),
                     &out.report, [&](std::span<const Example> b) {
                       DistillationBatchResult r = batch_objective(model, out.shared, out.factors,
                                                                   nullptr, b, plm_only);
                       if (!cfg.freeze_shared)
                         opt.step("shared", out.shared.matrix.values(), r.grad_shared.values(),
                                  cfg.lr_shared_target);
                       if (!cfg.freeze_specific) {
                         auto& [du, dv] = r.grad_factors.at(out.factors.task_id);
                         opt.step("u", out.factors.u.values(), du.values(), cfg.lr_specific_target);
                         opt.step("v", out.factors.v.values(), dv.values(), cfg.lr_specific_target);
                       }
                       return EpochLosses{0, r.l_plm, 0.0, 0.0, r.l_total};
                     });
  out.accuracy = evaluate(model, compose(out.shared, out.factors), target, Split::kTest);
  out.report.add_eval(target.task_id, out.accuracy);
  out.report.seed = cfg.seed;
  out.report.wall_seconds = seconds_since(t0);
  return out;
}

GroupResult adapt_target_group(const FrozenModel& model, const SharedPrompt& shared,
                               const std::vector<TaskFactors>& source_factors,
                               const std::vector<TaskCorpus>& targets, const RunConfig& cfg) {
  cfg.validate();
  if (targets.size() < 2) throw std::invalid_argument("adapt_target_group: need at least 2 targets");
  const auto t0 = Clock::now();
  const std::size_t l = shared.length();
  const std::size_t d = shared.width();
  GroupResult out;
  out.shared = shared;
  std::map<std::string, TaskFactors> factors;
  MixingSpec mix;
  mix.cap = cfg.mixing_cap;
  std::size_t total_train = 0;
  for (const auto& t : targets) {
    factors.emplace(t.task_id, source_factors.empty() ? identity_factors(t.task_id, l, d)
                                                      : average_factors(source_factors, t.task_id));
    mix.task_sizes[t.task_id] = t.train.size();
    total_train += t.train.size();
  }
  const DistillConfig plm_only = task_loss_only(cfg);
  const std::size_t per_epoch = steps_per_epoch(total_train, cfg.batch_size);
  SourceBatchOptions opts;
  opts.batch_size = cfg.batch_size;
  opts.steps = per_epoch * cfg.target_epochs;
  opts.stochastic_tasks = false;
  Rng manifest_rng = Rng(cfg.seed).fork("target-group");
  const std::vector<BatchManifest> manifests = make_source_batches(mix, opts, manifest_rng);

  Optimizer opt(cfg);
  std::vector<Example> batch;
  const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
  LossAccumulator acc;
  for (std::size_t step = 0; step < manifests.size(); ++step) {
    Matrix grad_shared(l, d);
    std::map<std::string, std::pair<Vector, Vector>> grad_factors;
    double plm = 0, tot = 0;
    for (const auto& [task, indices] : manifests[step].by_task()) {
      const TaskCorpus& corpus = find_corpus(targets, task);
      batch.clear();
      for (std::size_t i : indices) batch.push_back(corpus.train.at(i));
      DistillationBatchResult r =
          batch_objective(model, out.shared, factors.at(task), nullptr, batch, plm_only);
      const double w = static_cast<double>(indices.size()) * inv_b;
      axpy(grad_shared, r.grad_shared, w);
      auto& [du, dv] = r.grad_factors.at(task);
      auto [it, inserted] = grad_factors.try_emplace(task, Vector(l), Vector(d));
      axpy(it->second.first, du, w);
      axpy(it->second.second, dv, w);
      plm += w * r.l_plm;
      tot += w * r.l_total;
    }
    if (!cfg.freeze_shared)
      opt.step("shared", out.shared.matrix.values(), grad_shared.values(), cfg.lr_shared_target);
    if (!cfg.freeze_specific) {
      for (auto& [task, g] : grad_factors) {
        TaskFactors& f = factors.at(task);
        opt.step("u:" + task, f.u.values(), g.first.values(), cfg.lr_specific_target);
        opt.step("v:" + task, f.v.values(), g.second.values(), cfg.lr_specific_target);
      }
    }
    acc.add(plm, 0.0, 0.0, tot);
    if ((step + 1) % per_epoch == 0) {
      out.report.epochs.push_back(acc.finish((step + 1) / per_epoch));
      acc = LossAccumulator{};
    }
  }
  for (const auto& t : targets) {
    const TaskFactors& f = factors.at(t.task_id);
    const double a = evaluate(model, compose(out.shared, f), t, Split::kTest);
    out.accuracy[t.task_id] = a;
    out.report.add_eval(t.task_id, a);
    out.factors.push_back(f);
  }
  out.params_per_task = param_count(l, d, ParamMode::grouped_per_task(targets.size()));
  out.report.seed = cfg.seed;
  out.report.wall_seconds = seconds_since(t0);
  return out;
}

// ---- few-shot -----------------------------------------------------------------------------

namespace {
double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}
}  // namespace

double FewShotComparison::mpt_mean() const { return mean_of(mpt); }
double FewShotComparison::pt_mean() const { return mean_of(pt); }

FewShotComparison run_few_shot(const FrozenModel& model, const SharedPrompt& shared,
                               const std::vector<TaskFactors>& source_factors,
                               const TaskCorpus& target, const RunConfig& cfg) {
  cfg.validate();
  FewShotComparison out;
  out.task_id = target.task_id;
  out.k = cfg.few_shot_k;
  const Rng rng = Rng(cfg.seed).fork("few-shot:" + target.task_id);
  for (std::size_t draw = 0; draw < cfg.few_shot_draws; ++draw) {
    const Rng draw_rng = rng.fork(draw);
    const FewShotSample sample = few_shot(target, cfg.few_shot_k, draw_rng.fork("sample"));
    out.mpt.push_back(
        adapt_target(model, shared, source_factors, target, cfg, sample.examples).accuracy);
    Rng init_rng = draw_rng.fork("pt-init");
    VanillaPrompt init = init_vanilla_prompt(model, cfg.prompt_length, init_rng);
    const VanillaPrompt p =
        train_prompt(model, std::move(init), sample.examples, cfg.lr_shared_target,
                     cfg.target_epochs, cfg.batch_size, cfg.optimizer, draw_rng.fork("pt-shuffle"));
    out.pt.push_back(evaluate(model, p.matrix, target, Split::kTest));
  }
  return out;
}

// ---- ablation -----------------------------------------------------------------------------

double AblationCell::mean() const {
  if (seed_accuracy.empty()) return 0.0;
  return std::accumulate(seed_accuracy.begin(), seed_accuracy.end(), 0.0) /
         static_cast<double>(seed_accuracy.size());
}

AblationTable run_ablation_grid(const FrozenModel& model, const Suite& suite, const RunConfig& cfg,
                                std::vector<SourceResult>* full_sources) {
  cfg.validate();
  if (suite.targets.empty()) throw std::invalid_argument("run_ablation_grid: no target tasks");
  AblationTable table;
  for (int dec = 0; dec < 2; ++dec)
    for (int dis = 0; dis < 2; ++dis) {
      table.cells[dec][dis].decomposition = dec == 1;
      table.cells[dec][dis].distillation = dis == 1;
    }
  for (std::size_t s = 0; s < cfg.num_seeds; ++s) {
    const RunConfig seed_cfg = with_seed(cfg, s);
    table.seeds.push_back(seed_cfg.seed);
    const TeacherSet teachers = train_teachers(model, suite.sources, seed_cfg);
    for (int dec = 0; dec < 2; ++dec) {
      for (int dis = 0; dis < 2; ++dis) {
        RunConfig c = seed_cfg;
        c.decomposition = dec == 1;
        c.distillation = dis == 1;
        const SourceResult src = train_source(model, suite.sources, teachers, c);
        double sum = 0.0;
        for (const auto& target : suite.targets)
          sum += adapt_target(model, src.shared, src.factors, target, c).accuracy;
        table.cells[dec][dis].seed_accuracy.push_back(sum / static_cast<double>(suite.targets.size()));
        if (full_sources && dec == 1 && dis == 1) full_sources->push_back(src);
      }
    }
  }
  return table;
}

void write_ablation(std::ostream& os, const AblationTable& table) {
  const auto flags = os.flags();
  os << "decomposition\tdistillation\tmean";
  for (auto s : table.seeds) os << "\tseed" << s;
  os << '\n' << std::fixed << std::setprecision(4);
  for (int dec = 0; dec < 2; ++dec)
    for (int dis = 0; dis < 2; ++dis) {
      const AblationCell& c = table.cells[dec][dis];
      os << (dec ? "on" : "off") << '\t' << (dis ? "on" : "off") << '\t' << c.mean();
      for (double a : c.seed_accuracy) os << '\t' << a;
      os << '\n';
    }
  const AblationCell& base = table.cell(false, false);
  const AblationCell& distill = table.cell(false, true);
  const AblationCell& decomp = table.cell(true, false);
  const AblationCell& full = table.cell(true, true);
  for (std::size_t i = 0; i < table.seeds.size(); ++i) {
    os << "ordering\tseed" << table.seeds[i]
       << "\tfull>=decomposition:" << (full.seed_accuracy[i] >= decomp.seed_accuracy[i])
       << "\tdecomposition>=baseline:" << (decomp.seed_accuracy[i] >= base.seed_accuracy[i])
       << "\tfull>=distillation:" << (full.seed_accuracy[i] >= distill.seed_accuracy[i]) << '\n';
  }
  os.flags(flags);
}

}  // namespace mpt
