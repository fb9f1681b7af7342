// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "mpt/analysis.hpp"
#include "mpt/binio.hpp"
#include "support.hpp"

using namespace mpt;

namespace {

using Named = std::vector<std::pair<std::string, Vector>>;

}  // namespace

TEST_CASE("prompt embedding is the row mean of the composed prompt") {
  const SharedPrompt s{Matrix{{2, 0}, {0, 2}}};
  CHECK(prompt_embedding(s, identity_factors("t", 2, 2)) == Vector{1, 1});
  const SharedPrompt one{Matrix{{3, -1, 4}}};
  const TaskFactors f{"t", Vector{2}, Vector{1, 1, 0.5}};
  CHECK(prompt_embedding(one, f) == Vector{6, -2, 4});
  CHECK_THROWS_AS(prompt_embedding(s, identity_factors("t", 3, 2)), ShapeError);
}

TEST_CASE("similarity examples") {
  const SimilarityMatrix m =
      similarity_matrix(Named{{"a", Vector{1, 0}}, {"b", Vector{0, 2}}, {"c", Vector{3, 3}}});
  CHECK(m.at("a", "a") == 1.0);
  CHECK(m.at("a", "b") == 0.0);
  CHECK(m.at("a", "c") == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(m.task_ids == std::vector<std::string>{"a", "b", "c"});
  CHECK_THROWS_AS(similarity_matrix(Named{{"a", Vector{1, 0}}}), std::invalid_argument);
  CHECK_THROWS_AS(similarity_matrix(Named{{"a", Vector{1, 0}}, {"z", Vector{0, 0}}}),
                  std::invalid_argument);
}

TEST_CASE("similarity invariants on random embeddings") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::vector<std::pair<std::string, Vector>> e;
    for (int i = 0; i < 6; ++i)
      e.emplace_back("t" + std::to_string(i), mpt::test::random_vector(16, seed * 10 + i));
    const SimilarityMatrix m = similarity_matrix(e);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(std::abs(m.entries(i, i) - 1.0) < 1e-12);
      for (std::size_t j = 0; j < 6; ++j) {
        CHECK(std::abs(m.entries(i, j) - m.entries(j, i)) < 1e-12);
        CHECK((m.entries(i, j) >= -1.0 && m.entries(i, j) <= 1.0));
      }
    }
  }
}

TEST_CASE("text grid format") {
  const SimilarityMatrix m = similarity_matrix(Named{{"x", Vector{1, 0}}, {"y", Vector{1, 1}}});
  CHECK(format_similarity_text(m) == "x y\n1.0000 0.7071\n0.7071 1.0000\n");
}

TEST_CASE("heatmap colors and image layout") {
  CHECK(heat_color(-1.0) == Rgb{0, 0, 255});
  CHECK(heat_color(0.0) == Rgb{255, 255, 255});
  CHECK(heat_color(1.0) == Rgb{255, 0, 0});
  CHECK(heat_color(0.5) == Rgb{255, 128, 128});
  CHECK(heat_color(7.0) == heat_color(1.0));

  const SimilarityMatrix m = similarity_matrix(Named{{"x", Vector{1, 0}}, {"y", Vector{-1, 0}}});
  const std::string img = render_heatmap_ppm(m, 3);
  CHECK(img.rfind("P6\n", 0) == 0);
  CHECK(img.find("# color map") != std::string::npos);
  const std::string dims = "6 6\n255\n";
  const auto at = img.find(dims);
  REQUIRE(at != std::string::npos);
  const std::size_t start = at + dims.size();
  CHECK(img.size() - start == 6 * 6 * 3);
  // Pixel (0, 5) lies in cell (0, 1), cosine -1 → blue.
  const std::size_t px = start + (0 * 6 + 5) * 3;
  CHECK(static_cast<unsigned char>(img[px]) == 0);
  CHECK(static_cast<unsigned char>(img[px + 2]) == 255);

  const auto path = std::filesystem::temp_directory_path() / "mpt_analysis_test" / "h.ppm";
  write_heatmap_ppm(path, m, 3);
  CHECK(read_file_bytes(path) == img);
  std::filesystem::remove_all(path.parent_path());
}

TEST_CASE("efficiency report rows") {
  const EfficiencyReport big = efficiency_report(100, 768, 8);
  CHECK(big.params("pt") == 76800);
  CHECK(big.params("mpt") == 77668);
  CHECK(big.params("mpt-grouped") == 10468);
  CHECK(big.params("compressed") == big.params("pt"));

  const EfficiencyReport small = efficiency_report(8, 16, 2);
  CHECK(small.params("pt") == 128);
  CHECK(small.params("mpt") == 152);
  CHECK(small.params("mpt-grouped") == 88);

  std::ostringstream a, b;
  write_efficiency(a, small);
  write_efficiency(b, efficiency_report(8, 16, 2));
  CHECK(a.str() == b.str());
  CHECK(a.str().find("mpt-grouped\t88\t88") != std::string::npos);
  CHECK_THROWS(efficiency_report(8, 16, 0));
}
