// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "mpt/binio.hpp"
#include "mpt/prompts.hpp"
#include "support.hpp"

using namespace mpt;
using mpt::test::random_matrix;
using mpt::test::random_vector;
using mpt::test::rel_err;
using mpt::test::tiny_model;

namespace {

SharedPrompt random_shared(std::size_t l, std::size_t d, std::uint64_t seed) {
  return {random_matrix(l, d, seed)};
}

TaskFactors random_factors(std::size_t l, std::size_t d, std::uint64_t seed) {
  return {"t", random_vector(l, seed), random_vector(d, seed + 1)};
}

// Independent formatting oracle: nearest tenth of a thousand, ties away from zero.
std::string tenths_oracle(double count) {
  const long long tenths = std::llround(count / 100.0);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%lldK", tenths / 10, tenths % 10);
  return buf;
}

}  // namespace

TEST_CASE("compose is P* times the rank-one outer product") {
  const SharedPrompt s = random_shared(3, 5, 1);
  const TaskFactors f = random_factors(3, 5, 2);
  const Matrix expect = hadamard(s.matrix, outer(f.u, f.v));
  CHECK(mpt::test::max_abs_diff(compose(s, f), expect) < 1e-15);
}

TEST_CASE("compose examples") {
  const SharedPrompt s{Matrix{{1, 2}, {3, 4}}};
  CHECK(compose(s, identity_factors("a", 2, 2)) == s.matrix);
  const TaskFactors f{"a", Vector{2, 0}, Vector{1, 3}};
  CHECK(compose(s, f) == Matrix{{2, 12}, {0, 0}});
  CHECK_THROWS_AS(compose(s, TaskFactors{"a", Vector{1}, Vector{1, 1}}), ShapeError);
}

TEST_CASE("compress equals compose bitwise") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SharedPrompt s = random_shared(4, 6, 10 + seed);
    const TaskFactors f = random_factors(4, 6, 50 + seed);
    CHECK(compress(s, f).matrix == compose(s, f));
  }
}

TEST_CASE("chain gradients match finite differences of a linear probe") {
  const std::size_t l = 3, d = 4;
  const SharedPrompt s = random_shared(l, d, 3);
  const TaskFactors f = random_factors(l, d, 4);
  const Matrix g = random_matrix(l, d, 5);  // dL/dcomposed for L = <g, compose>
  auto loss = [&](const SharedPrompt& ss, const TaskFactors& ff) {
    const Matrix c = compose(ss, ff);
    double sum = 0;
    for (std::size_t i = 0; i < c.size(); ++i) sum += c.values()[i] * g.values()[i];
    return sum;
  };
  const FactorGradients fg = chain_gradients(g, s, f);
  const double eps = 1e-5;
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      SharedPrompt hi = s, lo = s;
      hi.matrix(i, j) += eps;
      lo.matrix(i, j) -= eps;
      CHECK(rel_err(fg.shared(i, j), (loss(hi, f) - loss(lo, f)) / (2 * eps)) < 1e-8);
    }
  for (std::size_t i = 0; i < l; ++i) {
    TaskFactors hi = f, lo = f;
    hi.u[i] += eps;
    lo.u[i] -= eps;
    CHECK(rel_err(fg.u[i], (loss(s, hi) - loss(s, lo)) / (2 * eps)) < 1e-8);
  }
  for (std::size_t j = 0; j < d; ++j) {
    TaskFactors hi = f, lo = f;
    hi.v[j] += eps;
    lo.v[j] -= eps;
    CHECK(rel_err(fg.v[j], (loss(s, hi) - loss(s, lo)) / (2 * eps)) < 1e-8);
  }
}

TEST_CASE("parameter counts follow l*d + l + d") {
  CHECK(param_count(100, 768) == 77668);
  CHECK(param_count(100, 768, ParamMode::grouped_per_task(8)) == 10468);
  CHECK(param_count(100, 768, ParamMode::grouped_total(8)) == 76800 + 868 * 8);
  CHECK(param_count(8, 16) == 152);
  CHECK(param_count(8, 16, ParamMode::grouped_per_task(2)) == 88);
  CHECK(param_count(1, 1) == 3);
  CHECK(param_count(1, 1, ParamMode::grouped_per_task(1)) == param_count(1, 1));
  // 3*5 / 2 = 7.5 rounds up
  CHECK(param_count(3, 5, ParamMode::grouped_per_task(2)) == 8 + 8);
  CHECK(param_count_exact(3, 5, ParamMode::grouped_per_task(2)) == 15.5);
  CHECK_THROWS_AS(param_count(0, 768), std::invalid_argument);
  CHECK_THROWS_AS(param_count(8, 16, ParamMode::grouped_per_task(0)), std::invalid_argument);
}

TEST_CASE("grouped per-task count never exceeds the single-task count") {
  for (std::size_t l : {1, 8, 100})
    for (std::size_t d : {1, 16, 768})
      for (std::size_t tau : {1, 2, 3, 8})
        CHECK(param_count(l, d, ParamMode::grouped_per_task(tau)) <= param_count(l, d));
}

TEST_CASE("thousands formatting") {
  CHECK(format_param_count(76800) == "76.8K");
  CHECK(format_param_count(10468) == "10.5K");
  CHECK(format_param_count(152) == "152");
  for (double c : {1000.0, 1049.0, 1050.0, 77668.0, 232000.0, 99999.0})
    CHECK(format_param_count(c) == tenths_oracle(c));
}

TEST_CASE("vanilla init copies embedding rows") {
  const FrozenModel m = tiny_model();
  Rng rng(1);
  const VanillaPrompt p = init_vanilla_prompt(m, 6, rng);
  REQUIRE(p.matrix.rows() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    bool found = false;
    for (std::size_t t = 0; t < m.embedding().rows() && !found; ++t)
      found = std::equal(p.matrix.row(i).begin(), p.matrix.row(i).end(), m.embedding().row(t).begin());
    CHECK(found);
  }
  Rng r0(0);
  CHECK_THROWS_AS(init_vanilla_prompt(m, 0, r0), std::invalid_argument);
  CHECK_THROWS_AS(init_vanilla_prompt(m, kMaxPromptLength + 1, r0), std::invalid_argument);
}

TEST_CASE("decomposition init: factors near one, one pair per task") {
  const FrozenModel m = tiny_model();
  Rng rng(2);
  const Decomposition dec = init_decomposition(m, 8, {"a", "b", "c"}, rng);
  REQUIRE(dec.factors.size() == 3);
  for (const auto& f : dec.factors) {
    CHECK(f.u.size() == 8);
    CHECK(f.v.size() == 16);
    for (double x : f.u.values()) CHECK(std::abs(x - 1.0) < 0.1);
  }
  CHECK(dec.factors[0].task_id == "a");
  CHECK_FALSE(dec.factors[0].u == dec.factors[1].u);
  Rng zero(2);
  const Decomposition exact = init_decomposition(m, 8, {"a"}, zero, 0.0);
  CHECK(compose(exact.shared, exact.factors[0]) == exact.shared.matrix);
}

TEST_CASE("average factors") {
  const TaskFactors a{"a", Vector{1, 3}, Vector{2}};
  const TaskFactors b{"b", Vector{3, 5}, Vector{4}};
  const TaskFactors m = average_factors({a, b}, "t");
  CHECK(m.task_id == "t");
  CHECK(m.u == Vector{2, 4});
  CHECK(m.v == Vector{3});
  CHECK_THROWS(average_factors({}));
}

TEST_CASE("checkpoint round trips and rejects other formats") {
  const auto dir = std::filesystem::temp_directory_path() / "mpt_prompts_test";
  std::filesystem::remove_all(dir);
  const SharedPrompt s = random_shared(4, 6, 7);
  const std::vector<TaskFactors> fs{{"copy", random_vector(4, 8), random_vector(6, 9)},
                                    {"reverse", random_vector(4, 10), random_vector(6, 11)}};
  save_decomposition(dir / "d.mptp", s, fs);
  const Decomposition back = load_decomposition(dir / "d.mptp");
  CHECK(back.shared == s);
  REQUIRE(back.factors.size() == 2);
  CHECK(back.factors[1] == fs[1]);

  save_vanilla(dir / "v.mptv", VanillaPrompt{s.matrix});
  CHECK(load_vanilla(dir / "v.mptv").matrix == s.matrix);
  CHECK(checksum(load_vanilla(dir / "v.mptv").matrix) == checksum(s.matrix));
  CHECK_THROWS_AS(load_vanilla(dir / "d.mptp"), FormatError);
  CHECK_THROWS_AS(load_decomposition(dir / "v.mptv"), FormatError);
  std::filesystem::remove_all(dir);
}
