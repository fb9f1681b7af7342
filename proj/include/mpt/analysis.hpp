// SPDX-License-Identifier: Apache-2.0
//
// Post-hoc analysis of trained prompts: task embeddings and their cosine
// similarity matrix, and trainable-parameter reports.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mpt/numerics.hpp"
#include "mpt/prompts.hpp"

namespace mpt {

// compose(), then the mean over the l rows.
Vector prompt_embedding(const SharedPrompt& shared, const TaskFactors& factors);
Vector prompt_embedding(const Matrix& prompt);

struct SimilarityMatrix {
  std::vector<std::string> task_ids;
  Matrix entries;  // τ × τ cosines

  double at(const std::string& a, const std::string& b) const;
  std::size_t index_of(const std::string& task) const;
};

// Pairwise cosines in the given order. Requires >= 2 tasks and nonzero norms.
SimilarityMatrix similarity_matrix(const std::vector<std::pair<std::string, Vector>>& embeddings);
SimilarityMatrix similarity_matrix(const std::map<std::string, Vector>& embeddings);

// Header row of task ids, then one row per task of 4-decimal values.
void write_similarity_text(std::ostream& os, const SimilarityMatrix& sim);
std::string format_similarity_text(const SimilarityMatrix& sim);

// Binary PPM heatmap, `cell` pixels per entry.
void write_heatmap_ppm(const std::filesystem::path& path, const SimilarityMatrix& sim,
                       std::size_t cell = 24);
std::string render_heatmap_ppm(const SimilarityMatrix& sim, std::size_t cell = 24);

// Linear map of [-1, 1] onto blue → white → red.
struct Rgb {
  unsigned char r, g, b;
  bool operator==(const Rgb&) const = default;
};
Rgb heat_color(double value);

struct EfficiencyRow {
  std::string method;
  std::uint64_t params = 0;
  double exact = 0.0;
};

struct EfficiencyReport {
  std::size_t l = 0, d = 0, tau = 1;
  std::vector<EfficiencyRow> rows;  // vanilla, single, grouped per task, compressed

  std::uint64_t params(const std::string& method) const;
};

EfficiencyReport efficiency_report(std::size_t l, std::size_t d, std::size_t tau);
void write_efficiency(std::ostream& os, const EfficiencyReport& report);

}  // namespace mpt
