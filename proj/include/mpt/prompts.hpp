// SPDX-License-Identifier: Apache-2.0
//
// Prompt decomposition: a task prompt is the shared matrix P* scaled
// elementwise by the rank-one matrix u ⊗ v of its task.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mpt/model.hpp"
#include "mpt/numerics.hpp"
#include "mpt/rng.hpp"

namespace mpt {

struct SharedPrompt {
  Matrix matrix;  // l × d
  std::size_t length() const { return matrix.rows(); }
  std::size_t width() const { return matrix.cols(); }
  bool operator==(const SharedPrompt&) const = default;
};

struct TaskFactors {
  std::string task_id;
  Vector u;  // length l
  Vector v;  // length d
  bool operator==(const TaskFactors&) const = default;
};

struct VanillaPrompt {
  Matrix matrix;  // l × d
  bool operator==(const VanillaPrompt&) const = default;
};

// P* ∘ (u ⊗ v): out[i][j] = P*[i][j] · u[i] · v[j].
Matrix compose(const SharedPrompt& shared, const TaskFactors& factors);

// Collapses a trained decomposition into one deployable l × d prompt.
VanillaPrompt compress(const SharedPrompt& shared, const TaskFactors& factors);

struct FactorGradients {
  Matrix shared;  // dL/dP*
  Vector u;       // dL/du
  Vector v;       // dL/dv
};

// Chain rule through compose() given dL/d(composed prompt).
FactorGradients chain_gradients(const Matrix& dl_dcomposed, const SharedPrompt& shared,
                                const TaskFactors& factors);

// Trainable-parameter accounting.
struct ParamMode {
  enum class Kind { kSingleTask, kGroupedPerTask, kGroupedTotal } kind = Kind::kSingleTask;
  std::size_t group_size = 1;  // τ, for the grouped kinds

  static ParamMode single() { return {}; }
  static ParamMode grouped_per_task(std::size_t tau) { return {Kind::kGroupedPerTask, tau}; }
  static ParamMode grouped_total(std::size_t tau) { return {Kind::kGroupedTotal, tau}; }
};

// single: l·d + l + d.  grouped per task: l·d/τ + (l + d), rounded half up to
// the nearest integer.  grouped total: l·d + (l + d)·τ.
std::uint64_t param_count(std::size_t l, std::size_t d, ParamMode mode = ParamMode::single());
// The exact rational l·d/τ + (l + d) for the grouped per-task report.
double param_count_exact(std::size_t l, std::size_t d, ParamMode mode);
// Thousands with one decimal, e.g. 76800 -> "76.8K". Values under 1000 are
// printed as plain integers.
std::string format_param_count(double count);

// Each row is a copy of a uniformly sampled embedding-table row.
VanillaPrompt init_vanilla_prompt(const FrozenModel& model, std::size_t l, Rng& rng);

struct Decomposition {
  SharedPrompt shared;
  std::vector<TaskFactors> factors;
};

inline constexpr double kFactorInitNoise = 0.01;

// P* from init_vanilla_prompt; every u_k, v_k = 1 + N(0, noise_std²).
Decomposition init_decomposition(const FrozenModel& model, std::size_t l,
                                 const std::vector<std::string>& task_ids, Rng& rng,
                                 double noise_std = kFactorInitNoise);

// All-ones factors: compose(shared, identity) == shared.
TaskFactors identity_factors(std::string task_id, std::size_t l, std::size_t d);

// Elementwise mean of the u's and of the v's.
TaskFactors average_factors(const std::vector<TaskFactors>& factors, std::string task_id = {});

// ---- checkpoints ---------------------------------------------------------------

inline constexpr std::uint32_t kPromptFormatVersion = 1;

void save_decomposition(const std::filesystem::path& path, const SharedPrompt& shared,
                        const std::vector<TaskFactors>& factors);
Decomposition load_decomposition(const std::filesystem::path& path);

void save_vanilla(const std::filesystem::path& path, const VanillaPrompt& prompt);
VanillaPrompt load_vanilla(const std::filesystem::path& path);

std::uint64_t checksum(const Matrix& m);

}  // namespace mpt
