// SPDX-License-Identifier: Apache-2.0

#include <omp.h>

#include <cmath>

#include "doctest.h"
#include "mpt/objectives.hpp"
#include "support.hpp"

using namespace mpt;
using mpt::test::random_matrix;
using mpt::test::random_vector;
using mpt::test::rel_err;
using mpt::test::tiny_model;

namespace {

// KL(softmax(t/T) || softmax(s/T)) per row, averaged; computed with plain exp.
double kl_oracle(const Matrix& t, const Matrix& s, double temp) {
  double total = 0.0;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double zt = 0, zs = 0;
    for (std::size_t c = 0; c < t.cols(); ++c) {
      zt += std::exp(t(r, c) / temp);
      zs += std::exp(s(r, c) / temp);
    }
    for (std::size_t c = 0; c < t.cols(); ++c) {
      const double p = std::exp(t(r, c) / temp) / zt;
      const double q = std::exp(s(r, c) / temp) / zs;
      total += p * std::log(p / q);
    }
  }
  return total / static_cast<double>(t.rows());
}

std::vector<Example> tiny_batch() {
  return {{{4, 5, 6}, {7, 8}}, {{9, 10}, {11, 12, 13}}, {{14, 15, 16, 17}, {4}}};
}

}  // namespace

TEST_CASE("KL matches the direct formula") {
  const Matrix t = random_matrix(3, 7, 1, 3.0);
  const Matrix s = random_matrix(3, 7, 2, 3.0);
  for (double temp : {1.0, 2.0, 4.0})
    CHECK(kl_logits_loss(t, s, temp) == doctest::Approx(kl_oracle(t, s, temp)).epsilon(1e-12));
}

TEST_CASE("KL(p||p) = 0 and KL >= 0") {
  const Matrix t = random_matrix(4, 9, 3, 5.0);
  CHECK(std::abs(kl_logits_loss(t, t, 2.0)) < 1e-12);
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const Matrix a = random_matrix(2, 6, 100 + seed, 4.0);
    const Matrix b = random_matrix(2, 6, 900 + seed, 4.0);
    CHECK(kl_logits_loss(a, b, 2.0) >= 0.0);
  }
  CHECK_THROWS_AS(kl_logits_loss(t, Matrix(4, 8), 2.0), ShapeError);
}

TEST_CASE("KL gradient w.r.t. student logits matches finite differences") {
  const Matrix t = random_matrix(2, 5, 4, 2.0);
  const Matrix s = random_matrix(2, 5, 5, 2.0);
  const LossGrad lg = kl_logits_loss_grad(t, s, 2.0);
  CHECK(lg.value == doctest::Approx(kl_logits_loss(t, s, 2.0)));
  for (std::size_t i = 0; i < s.size(); ++i) {
    Matrix hi = s, lo = s;
    hi.values()[i] += 1e-5;
    lo.values()[i] -= 1e-5;
    const double fd = (kl_logits_loss(t, hi, 2.0) - kl_logits_loss(t, lo, 2.0)) / 2e-5;
    CHECK(rel_err(lg.grad.values()[i], fd) < 1e-7);
  }
}

TEST_CASE("hidden MSE is the sum of the two means") {
  const Matrix te = random_matrix(3, 4, 6), td = random_matrix(2, 4, 7);
  const Matrix se = random_matrix(3, 4, 8), sd = random_matrix(2, 4, 9);
  double e = 0, d = 0;
  for (std::size_t i = 0; i < te.size(); ++i) e += std::pow(se.values()[i] - te.values()[i], 2);
  for (std::size_t i = 0; i < td.size(); ++i) d += std::pow(sd.values()[i] - td.values()[i], 2);
  CHECK(hidden_mse_loss(te, td, se, sd) == doctest::Approx(e / 12.0 + d / 8.0).epsilon(1e-14));
  CHECK(hidden_mse_loss(te, td, te, td) == 0.0);
}

TEST_CASE("total loss is linear in lambda") {
  const double plm = 1.3, lg = 0.2, h = 0.7;
  CHECK(total_loss(plm, lg, h, 0.0) == plm);
  for (double lam : {0.1, 0.9, 2.5})
    CHECK(std::abs(total_loss(plm, lg, h, lam) - (plm + lam * (lg + h))) < 1e-14);
}

TEST_CASE("distill config validation") {
  DistillConfig c;
  CHECK_NOTHROW(c.validate());
  c.lambda = -1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.temperature = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.use_prompt_distance = true;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.use_logits_kl = c.use_hidden_mse = false;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("batch objective gradients w.r.t. P*, u and v match finite differences") {
  const FrozenModel m = tiny_model(17);
  const SharedPrompt shared{random_matrix(4, 16, 20, 0.5)};
  const TaskFactors f{"t", random_vector(4, 21, 0.3), random_vector(16, 22, 0.3)};
  TaskFactors fac = f;
  for (double& x : fac.u.values()) x += 1.0;
  for (double& x : fac.v.values()) x += 1.0;
  const VanillaPrompt teacher{random_matrix(4, 16, 23, 0.5)};
  const std::vector<Example> batch = tiny_batch();

  struct Variant {
    bool kl, hidden, distance;
    double lambda;
  };
  for (Variant v : {Variant{false, false, false, 0.9}, Variant{true, false, false, 1.0},
                    Variant{false, true, false, 1.0}, Variant{true, true, false, 0.9},
                    Variant{false, false, true, 0.9}}) {
    DistillConfig cfg;
    cfg.use_logits_kl = v.kl;
    cfg.use_hidden_mse = v.hidden;
    cfg.use_prompt_distance = v.distance;
    cfg.lambda = v.lambda;
    const VanillaPrompt* tp = cfg.distillation_active() ? &teacher : nullptr;
    const DistillationBatchResult r = batch_objective(m, shared, fac, tp, batch, cfg);
    auto loss = [&](const SharedPrompt& s, const TaskFactors& ff) {
      return batch_objective(m, s, ff, tp, batch, cfg).l_total;
    };
    const double eps = 1e-4;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 16; j += 3) {
        SharedPrompt hi = shared, lo = shared;
        hi.matrix(i, j) += eps;
        lo.matrix(i, j) -= eps;
        CHECK(rel_err(r.grad_shared(i, j), (loss(hi, fac) - loss(lo, fac)) / (2 * eps)) < 1e-4);
      }
    const auto& [du, dv] = r.grad_factors.at("t");
    for (std::size_t i = 0; i < 4; ++i) {
      TaskFactors hi = fac, lo = fac;
      hi.u[i] += eps;
      lo.u[i] -= eps;
      CHECK(rel_err(du[i], (loss(shared, hi) - loss(shared, lo)) / (2 * eps)) < 1e-4);
    }
    for (std::size_t j = 0; j < 16; j += 2) {
      TaskFactors hi = fac, lo = fac;
      hi.v[j] += eps;
      lo.v[j] -= eps;
      CHECK(rel_err(dv[j], (loss(shared, hi) - loss(shared, lo)) / (2 * eps)) < 1e-4);
    }
    CHECK(r.l_total == doctest::Approx(r.l_plm + cfg.lambda * (r.l_logits + r.l_hidden)));
  }
}

TEST_CASE("teacher equal to the student gives zero distillation terms") {
  const FrozenModel m = tiny_model(3);
  const SharedPrompt shared{random_matrix(3, 16, 30)};
  const TaskFactors f = identity_factors("t", 3, 16);
  const VanillaPrompt teacher{shared.matrix};
  const std::vector<Example> batch = tiny_batch();
  const DistillationBatchResult r = batch_objective(m, shared, f, &teacher, batch, DistillConfig{});
  CHECK(std::abs(r.l_logits) < 1e-12);
  CHECK(r.l_hidden == 0.0);
  CHECK(r.l_total == doctest::Approx(r.l_plm));
}

TEST_CASE("missing teacher with distillation active is an error") {
  const FrozenModel m = tiny_model(3);
  const SharedPrompt shared{random_matrix(3, 16, 30)};
  const std::vector<Example> batch = tiny_batch();
  CHECK_THROWS_AS(
      batch_objective(m, shared, identity_factors("t", 3, 16), nullptr, batch, DistillConfig{}),
      std::invalid_argument);
}

TEST_CASE("serial and parallel execution are bitwise identical") {
  omp_set_num_threads(4);
  const FrozenModel m = tiny_model(5);
  const Matrix p = random_matrix(5, 16, 40);
  const Matrix t = random_matrix(5, 16, 41);
  std::vector<Example> batch;
  Rng rng(7);
  for (int i = 0; i < 24; ++i) {
    Example e;
    for (int k = 0; k < 5; ++k) e.src.push_back(4 + static_cast<int>(rng.uniform_index(16)));
    for (int k = 0; k < 3; ++k) e.tgt.push_back(4 + static_cast<int>(rng.uniform_index(16)));
    batch.push_back(e);
  }
  const PromptObjective s = prompt_objective(m, p, batch, &t, DistillConfig{}, Exec::kSerial);
  const PromptObjective q = prompt_objective(m, p, batch, &t, DistillConfig{}, Exec::kParallel);
  CHECK(s.grad == q.grad);
  CHECK(s.l_total == q.l_total);
  CHECK(s.l_logits == q.l_logits);
  omp_set_num_threads(1);
}

TEST_CASE("prompt distance is the mean squared prompt difference") {
  const VanillaPrompt t{Matrix{{1, 2}, {3, 4}}};
  const Matrix s{{1, 0}, {3, 8}};
  CHECK(prompt_distance_loss(t, s) == doctest::Approx((4.0 + 16.0) / 4.0));
}
