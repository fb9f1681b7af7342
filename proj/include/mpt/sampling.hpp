// SPDX-License-Identifier: Apache-2.0
//
// Multitask batch construction. A source batch first draws how many tasks may
// contribute (K uniform on {2..κ}) and which ones, then fills every slot with
// examples-proportional mixing restricted to that subset.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mpt/rng.hpp"

namespace mpt {

inline constexpr std::size_t kDefaultMixingCap = std::size_t{1} << 15;

struct MixingSpec {
  std::map<std::string, std::size_t> task_sizes;  // task → train example count
  std::size_t cap = kDefaultMixingCap;

  void validate() const;
  std::vector<std::string> task_ids() const;
};

struct BatchSlot {
  std::string task_id;
  std::size_t example_index = 0;
  bool operator==(const BatchSlot&) const = default;
};

struct BatchManifest {
  std::vector<std::string> allowed_tasks;
  std::vector<BatchSlot> slots;
  std::uint64_t seed = 0;
  bool operator==(const BatchManifest&) const = default;

  // Slots grouped by task, in the order tasks first appear in the batch.
  std::vector<std::pair<std::string, std::vector<std::size_t>>> by_task() const;
};

struct TaskSubset {
  std::size_t k = 0;
  std::vector<std::size_t> chosen;  // distinct indices into the task list
};

// K uniform on {2, ..., kappa}, then K distinct tasks uniformly without
// replacement.
TaskSubset stochastic_task_subset(std::size_t kappa, Rng& rng);

// Each slot's task is drawn with probability min(size, cap) / Σ min(size, cap)
// over the allowed tasks, then an example uniformly from that task.
BatchManifest proportional_batch(const MixingSpec& spec, const std::vector<std::string>& allowed,
                                 std::size_t batch_size, Rng& rng);

struct SourceBatchOptions {
  std::size_t batch_size = 16;
  std::size_t steps = 1;
  bool stochastic_tasks = true;  // false: every batch may use all κ tasks
};

std::vector<BatchManifest> make_source_batches(const MixingSpec& spec,
                                               const SourceBatchOptions& opts, Rng& rng);

// One line per batch: `batch_idx<TAB>task_id:example_idx,...`.
void write_manifests(std::ostream& os, const std::vector<BatchManifest>& batches);

}  // namespace mpt
