// SPDX-License-Identifier: Apache-2.0

#include "mpt/sampling.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace mpt {

void MixingSpec::validate() const {
  if (task_sizes.empty()) throw std::invalid_argument("mixing spec has no tasks");
  if (cap < 1) throw std::invalid_argument("mixing cap must be >= 1");
  for (const auto& [id, n] : task_sizes)
    if (n < 1) throw std::invalid_argument("task '" + id + "' has no training examples");
}

std::vector<std::string> MixingSpec::task_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, n] : task_sizes) ids.push_back(id);
  return ids;
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> BatchManifest::by_task() const {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  for (const auto& s : slots) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.first == s.task_id; });
    if (it == groups.end()) {
      groups.push_back({s.task_id, {}});
      it = std::prev(groups.end());
    }
    it->second.push_back(s.example_index);
  }
  return groups;
}

TaskSubset stochastic_task_subset(std::size_t kappa, Rng& rng) {
  if (kappa < 2) throw std::invalid_argument("stochastic_task_subset: need at least 2 tasks");
  TaskSubset s;
  s.k = static_cast<std::size_t>(rng.uniform_int(2, static_cast<std::int64_t>(kappa)));
  // Partial Fisher-Yates: the first k entries are a uniform k-subset.
  std::vector<std::size_t> idx(kappa);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < s.k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(kappa - i));
    std::swap(idx[i], idx[j]);
  }
  s.chosen.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(s.k));
  return s;
}

BatchManifest proportional_batch(const MixingSpec& spec, const std::vector<std::string>& allowed,
                                 std::size_t batch_size, Rng& rng) {
  spec.validate();
  if (allowed.empty()) throw std::invalid_argument("proportional_batch: empty task set");
  if (batch_size < 1) throw std::invalid_argument("proportional_batch: batch size must be >= 1");
  std::vector<double> cumulative;
  std::vector<std::size_t> sizes;
  double total = 0.0;
  for (const auto& id : allowed) {
    auto it = spec.task_sizes.find(id);
    if (it == spec.task_sizes.end()) throw std::invalid_argument("unknown task '" + id + "'");
    sizes.push_back(it->second);
    total += static_cast<double>(std::min(it->second, spec.cap));
    cumulative.push_back(total);
  }
  BatchManifest m;
  m.allowed_tasks = allowed;
  m.seed = rng.seed();
  m.slots.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const double x = rng.uniform() * total;
    auto t = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), x) -
                                      cumulative.begin());
    t = std::min(t, allowed.size() - 1);
    m.slots.push_back({allowed[t], static_cast<std::size_t>(rng.uniform_index(sizes[t]))});
  }
  return m;
}

std::vector<BatchManifest> make_source_batches(const MixingSpec& spec,
                                               const SourceBatchOptions& opts, Rng& rng) {
  spec.validate();
  const std::vector<std::string> ids = spec.task_ids();
  std::vector<BatchManifest> out;
  out.reserve(opts.steps);
  for (std::size_t step = 0; step < opts.steps; ++step) {
    Rng batch_rng = rng.fork(step);
    std::vector<std::string> allowed;
    if (opts.stochastic_tasks && ids.size() >= 2) {
      const TaskSubset sub = stochastic_task_subset(ids.size(), batch_rng);
      for (std::size_t i : sub.chosen) allowed.push_back(ids[i]);
    } else {
      allowed = ids;
    }
    out.push_back(proportional_batch(spec, allowed, opts.batch_size, batch_rng));
    out.back().seed = batch_rng.seed();
  }
  return out;
}

void write_manifests(std::ostream& os, const std::vector<BatchManifest>& batches) {
  for (std::size_t b = 0; b < batches.size(); ++b) {
    os << b << '\t';
    const auto& slots = batches[b].slots;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (i) os << ',';
      os << slots[i].task_id << ':' << slots[i].example_index;
    }
    os << '\n';
  }
}

}  // namespace mpt
