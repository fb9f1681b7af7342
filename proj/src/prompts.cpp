// SPDX-License-Identifier: Apache-2.0

#include "mpt/prompts.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "mpt/binio.hpp"

namespace mpt {

namespace {

void check_factor_shapes(const char* op, const SharedPrompt& shared, const TaskFactors& f) {
  if (f.u.size() != shared.length() || f.v.size() != shared.width())
    throw ShapeError(std::string(op) + ": factors (u=" + std::to_string(f.u.size()) +
                     ", v=" + std::to_string(f.v.size()) + ") do not match shared prompt " +
                     shared.matrix.shape_string());
}

void write_matrix(BinaryWriter& w, const Matrix& m) { w.f64s(m.values()); }

void expect_version(BinaryReader& r, const char* format) {
  const std::uint32_t version = r.u32();
  if (version != kPromptFormatVersion)
    throw FormatError(std::string("unsupported ") + format + " version " + std::to_string(version));
}

}  // namespace

Matrix compose(const SharedPrompt& shared, const TaskFactors& factors) {
  check_factor_shapes("compose", shared, factors);
  Matrix out(shared.length(), shared.width());
  for (std::size_t i = 0; i < shared.length(); ++i)
    for (std::size_t j = 0; j < shared.width(); ++j)
      out(i, j) = shared.matrix(i, j) * (factors.u[i] * factors.v[j]);
  return out;
}

VanillaPrompt compress(const SharedPrompt& shared, const TaskFactors& factors) {
  return VanillaPrompt{compose(shared, factors)};
}

FactorGradients chain_gradients(const Matrix& dl_dcomposed, const SharedPrompt& shared,
                                const TaskFactors& factors) {
  check_factor_shapes("chain_gradients", shared, factors);
  if (!dl_dcomposed.same_shape(shared.matrix))
    throw ShapeError("chain_gradients: gradient " + dl_dcomposed.shape_string() +
                     " vs shared prompt " + shared.matrix.shape_string());
  const std::size_t l = shared.length();
  const std::size_t d = shared.width();
  FactorGradients g{Matrix(l, d), Vector(l), Vector(d)};
  for (std::size_t i = 0; i < l; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double dl = dl_dcomposed(i, j);
      const double p = shared.matrix(i, j);
      g.shared(i, j) = dl * (factors.u[i] * factors.v[j]);
      g.u[i] += dl * p * factors.v[j];
      g.v[j] += dl * p * factors.u[i];
    }
  }
  return g;
}

double param_count_exact(std::size_t l, std::size_t d, ParamMode mode) {
  const double ld = static_cast<double>(l) * static_cast<double>(d);
  const double lpd = static_cast<double>(l + d);
  switch (mode.kind) {
    case ParamMode::Kind::kSingleTask:
      return ld + lpd;
    case ParamMode::Kind::kGroupedPerTask:
      if (mode.group_size == 0) throw std::invalid_argument("param_count: group size must be >= 1");
      return ld / static_cast<double>(mode.group_size) + lpd;
    case ParamMode::Kind::kGroupedTotal:
      if (mode.group_size == 0) throw std::invalid_argument("param_count: group size must be >= 1");
      return ld + lpd * static_cast<double>(mode.group_size);
  }
  return 0.0;
}

std::uint64_t param_count(std::size_t l, std::size_t d, ParamMode mode) {
  if (l == 0 || d == 0) throw std::invalid_argument("param_count: l and d must be >= 1");
  const std::uint64_t ld = static_cast<std::uint64_t>(l) * d;
  const std::uint64_t lpd = l + d;
  switch (mode.kind) {
    case ParamMode::Kind::kSingleTask:
      return ld + lpd;
    case ParamMode::Kind::kGroupedPerTask: {
      const std::uint64_t tau = mode.group_size;
      if (tau == 0) throw std::invalid_argument("param_count: group size must be >= 1");
      // round(ld / tau) with halves rounded up, in exact integer arithmetic
      return (2 * ld + tau) / (2 * tau) + lpd;
    }
    case ParamMode::Kind::kGroupedTotal:
      if (mode.group_size == 0) throw std::invalid_argument("param_count: group size must be >= 1");
      return ld + lpd * mode.group_size;
  }
  return 0;
}

std::string format_param_count(double count) {
  char buf[64];
  if (count < 1000.0) {
    std::snprintf(buf, sizeof buf, "%.0f", std::floor(count + 0.5));
    return buf;
  }
  // Tenths of a thousand, halves rounded up.
  const double tenths = std::floor(count / 100.0 + 0.5);
  std::snprintf(buf, sizeof buf, "%.1fK", tenths / 10.0);
  return buf;
}

VanillaPrompt init_vanilla_prompt(const FrozenModel& model, std::size_t l, Rng& rng) {
  if (l == 0) throw std::invalid_argument("init_vanilla_prompt: l must be >= 1");
  if (l > kMaxPromptLength)
    throw std::invalid_argument("init_vanilla_prompt: l=" + std::to_string(l) +
                                " exceeds maximum " + std::to_string(kMaxPromptLength));
  const Matrix& emb = model.embedding();
  VanillaPrompt p{Matrix(l, emb.cols())};
  for (std::size_t i = 0; i < l; ++i) {
    const auto tok = rng.uniform_index(emb.rows());
    auto src = emb.row(tok);
    std::copy(src.begin(), src.end(), p.matrix.row(i).begin());
  }
  return p;
}

TaskFactors identity_factors(std::string task_id, std::size_t l, std::size_t d) {
  return TaskFactors{std::move(task_id), Vector(l, 1.0), Vector(d, 1.0)};
}

Decomposition init_decomposition(const FrozenModel& model, std::size_t l,
                                 const std::vector<std::string>& task_ids, Rng& rng,
                                 double noise_std) {
  if (task_ids.empty()) throw std::invalid_argument("init_decomposition: empty task list");
  Decomposition dec;
  dec.shared.matrix = init_vanilla_prompt(model, l, rng).matrix;
  const std::size_t d = model.config().d_model;
  for (const auto& id : task_ids) {
    TaskFactors f = identity_factors(id, l, d);
    if (noise_std > 0.0) {
      for (double& x : f.u.values()) x += noise_std * rng.normal();
      for (double& x : f.v.values()) x += noise_std * rng.normal();
    }
    dec.factors.push_back(std::move(f));
  }
  return dec;
}

TaskFactors average_factors(const std::vector<TaskFactors>& factors, std::string task_id) {
  if (factors.empty()) throw std::invalid_argument("average_factors: empty list");
  TaskFactors mean{std::move(task_id), Vector(factors.front().u.size()),
                   Vector(factors.front().v.size())};
  for (const auto& f : factors) {
    if (f.u.size() != mean.u.size() || f.v.size() != mean.v.size())
      throw ShapeError("average_factors: inconsistent factor lengths");
    axpy(mean.u, f.u);
    axpy(mean.v, f.v);
  }
  const double inv = 1.0 / static_cast<double>(factors.size());
  for (double& x : mean.u.values()) x *= inv;
  for (double& x : mean.v.values()) x *= inv;
  return mean;
}

void save_decomposition(const std::filesystem::path& path, const SharedPrompt& shared,
                        const std::vector<TaskFactors>& factors) {
  BinaryWriter w;
  w.magic("MPTP");
  w.u32(kPromptFormatVersion);
  w.u32(static_cast<std::uint32_t>(shared.length()));
  w.u32(static_cast<std::uint32_t>(shared.width()));
  w.u32(static_cast<std::uint32_t>(factors.size()));
  write_matrix(w, shared.matrix);
  for (const auto& f : factors) {
    check_factor_shapes("save_decomposition", shared, f);
    w.str(f.task_id);
    w.f64s(f.u.values());
    w.f64s(f.v.values());
  }
  w.write_file(path);
}

Decomposition load_decomposition(const std::filesystem::path& path) {
  BinaryReader r = BinaryReader::from_file(path);
  r.expect_magic("MPTP");
  expect_version(r, "MPTP");
  const std::size_t l = r.u32();
  const std::size_t d = r.u32();
  const std::size_t count = r.u32();
  Decomposition dec;
  dec.shared.matrix = Matrix(l, d);
  r.f64s(dec.shared.matrix.values());
  for (std::size_t i = 0; i < count; ++i) {
    TaskFactors f{r.str(), Vector(l), Vector(d)};
    r.f64s(f.u.values());
    r.f64s(f.v.values());
    dec.factors.push_back(std::move(f));
  }
  r.expect_end();
  return dec;
}

void save_vanilla(const std::filesystem::path& path, const VanillaPrompt& prompt) {
  BinaryWriter w;
  w.magic("MPTV");
  w.u32(kPromptFormatVersion);
  w.u32(static_cast<std::uint32_t>(prompt.matrix.rows()));
  w.u32(static_cast<std::uint32_t>(prompt.matrix.cols()));
  write_matrix(w, prompt.matrix);
  w.write_file(path);
}

VanillaPrompt load_vanilla(const std::filesystem::path& path) {
  BinaryReader r = BinaryReader::from_file(path);
  r.expect_magic("MPTV");
  expect_version(r, "MPTV");
  const std::size_t l = r.u32();
  const std::size_t d = r.u32();
  VanillaPrompt p{Matrix(l, d)};
  r.f64s(p.matrix.values());
  r.expect_end();
  return p;
}

std::uint64_t checksum(const Matrix& m) {
  auto v = m.values();
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(v.data()), v.size_bytes()));
}

}  // namespace mpt
