// SPDX-License-Identifier: Apache-2.0

#include "mpt/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "mpt/binio.hpp"

namespace mpt {

Vector prompt_embedding(const Matrix& prompt) {
  if (prompt.rows() == 0 || prompt.cols() == 0)
    throw ShapeError("prompt_embedding: empty prompt " + prompt.shape_string());
  Vector e(prompt.cols());
  for (std::size_t i = 0; i < prompt.rows(); ++i) {
    auto row = prompt.row(i);
    for (std::size_t j = 0; j < prompt.cols(); ++j) e[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(prompt.rows());
  for (double& x : e.values()) x *= inv;
  return e;
}

Vector prompt_embedding(const SharedPrompt& shared, const TaskFactors& factors) {
  return prompt_embedding(compose(shared, factors));
}

std::size_t SimilarityMatrix::index_of(const std::string& task) const {
  auto it = std::find(task_ids.begin(), task_ids.end(), task);
  if (it == task_ids.end()) throw std::invalid_argument("similarity matrix has no task '" + task + "'");
  return static_cast<std::size_t>(it - task_ids.begin());
}

double SimilarityMatrix::at(const std::string& a, const std::string& b) const {
  return entries(index_of(a), index_of(b));
}

SimilarityMatrix similarity_matrix(const std::vector<std::pair<std::string, Vector>>& embeddings) {
  if (embeddings.size() < 2) throw std::invalid_argument("similarity_matrix: need at least 2 tasks");
  const std::size_t n = embeddings.size();
  SimilarityMatrix sim;
  sim.entries = Matrix(n, n);
  for (const auto& [id, e] : embeddings) {
    if (l2_norm(e) == 0.0)
      throw std::invalid_argument("similarity_matrix: zero-norm embedding for task '" + id + "'");
    sim.task_ids.push_back(id);
  }
  for (std::size_t i = 0; i < n; ++i) {
    sim.entries(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double c = cosine(embeddings[i].second, embeddings[j].second);
      sim.entries(i, j) = c;
      sim.entries(j, i) = c;
    }
  }
  return sim;
}

SimilarityMatrix similarity_matrix(const std::map<std::string, Vector>& embeddings) {
  return similarity_matrix(
      std::vector<std::pair<std::string, Vector>>(embeddings.begin(), embeddings.end()));
}

void write_similarity_text(std::ostream& os, const SimilarityMatrix& sim) {
  const auto flags = os.flags();
  const auto prec = os.precision();
  for (std::size_t i = 0; i < sim.task_ids.size(); ++i) os << (i ? " " : "") << sim.task_ids[i];
  os << '\n' << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < sim.entries.rows(); ++i) {
    for (std::size_t j = 0; j < sim.entries.cols(); ++j) os << (j ? " " : "") << sim.entries(i, j);
    os << '\n';
  }
  os.flags(flags);
  os.precision(prec);
}

std::string format_similarity_text(const SimilarityMatrix& sim) {
  std::ostringstream os;
  write_similarity_text(os, sim);
  return os.str();
}

Rgb heat_color(double value) {
  const double x = std::clamp(value, -1.0, 1.0);
  auto channel = [](double t) { return static_cast<unsigned char>(std::lround(255.0 * t)); };
  if (x < 0.0) {
    const double t = 1.0 + x;  // -1 → 0 (blue), 0 → 1 (white)
    return {channel(t), channel(t), 255};
  }
  const double t = 1.0 - x;
  return {255, channel(t), channel(t)};
}

std::string render_heatmap_ppm(const SimilarityMatrix& sim, std::size_t cell) {
  if (cell == 0) throw std::invalid_argument("render_heatmap_ppm: cell size must be >= 1");
  const std::size_t n = sim.entries.rows();
  const std::size_t side = n * cell;
  std::ostringstream header;
  header << "P6\n# cosine similarity heatmap, rows/cols:";
  for (const auto& id : sim.task_ids) header << ' ' << id;
  header << "\n# color map: linear, -1 = (0,0,255) blue, 0 = (255,255,255) white, "
            "+1 = (255,0,0) red\n"
         << side << ' ' << side << "\n255\n";
  std::string out = header.str();
  out.reserve(out.size() + side * side * 3);
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x) {
      const Rgb c = heat_color(sim.entries(y / cell, x / cell));
      out.push_back(static_cast<char>(c.r));
      out.push_back(static_cast<char>(c.g));
      out.push_back(static_cast<char>(c.b));
    }
  return out;
}

void write_heatmap_ppm(const std::filesystem::path& path, const SimilarityMatrix& sim,
                       std::size_t cell) {
  write_file_bytes(path, render_heatmap_ppm(sim, cell));
}

std::uint64_t EfficiencyReport::params(const std::string& method) const {
  for (const auto& r : rows)
    if (r.method == method) return r.params;
  throw std::invalid_argument("efficiency report has no row '" + method + "'");
}

EfficiencyReport efficiency_report(std::size_t l, std::size_t d, std::size_t tau) {
  if (l == 0 || d == 0) throw std::invalid_argument("efficiency_report: l and d must be >= 1");
  if (tau == 0) throw std::invalid_argument("efficiency_report: tau must be >= 1");
  EfficiencyReport r{l, d, tau, {}};
  const auto vanilla = static_cast<std::uint64_t>(l) * d;
  const std::uint64_t single = param_count(l, d, ParamMode::single());
  const ParamMode grouped = ParamMode::grouped_per_task(tau);
  r.rows.push_back({"pt", vanilla, static_cast<double>(vanilla)});
  r.rows.push_back({"mpt", single, static_cast<double>(single)});
  r.rows.push_back({"mpt-grouped", param_count(l, d, grouped), param_count_exact(l, d, grouped)});
  r.rows.push_back({"compressed", vanilla, static_cast<double>(vanilla)});
  return r;
}

void write_efficiency(std::ostream& os, const EfficiencyReport& report) {
  os << "# l=" << report.l << " d=" << report.d << " tau=" << report.tau << '\n';
  os << "method\tparams_per_task\tformatted\n";
  for (const auto& r : report.rows)
    os << r.method << '\t' << r.params << '\t' << format_param_count(r.exact) << '\n';
}

}  // namespace mpt
