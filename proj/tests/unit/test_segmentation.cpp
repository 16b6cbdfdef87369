#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "neurocat/errors.hpp"
#include "neurocat/oracle.hpp"
#include "neurocat/random.hpp"
#include "neurocat/segmentation.hpp"

using namespace neurocat;
using doctest::Approx;

namespace {
Matrix points_1d(std::vector<double> v) { return Matrix::column(v); }
}  // namespace

TEST_SUITE("segmentation") {
  TEST_CASE("ward dendrogram matches hand-computed merges") {
    const auto w = ward_hclust(points_1d({0, 1, 5, 6, 20}), 1);
    REQUIRE(w.dendrogram.merges.size() == 4);
    const auto& m = w.dendrogram.merges;
    auto pair = [](const Merge& x) { return std::pair{std::min(x.a, x.b), std::max(x.a, x.b)}; };
    CHECK(pair(m[0]) == std::pair<std::size_t, std::size_t>{0, 1});
    CHECK(m[0].height == Approx(1.0));
    CHECK(pair(m[1]) == std::pair<std::size_t, std::size_t>{2, 3});
    CHECK(m[1].height == Approx(1.0));
    CHECK(pair(m[2]) == std::pair<std::size_t, std::size_t>{5, 6});
    CHECK(m[2].height == Approx(std::sqrt(50.0)));
    CHECK(m[2].size == 4);
    CHECK(pair(m[3]) == std::pair<std::size_t, std::size_t>{4, 7});
    CHECK(m[3].height == Approx(std::sqrt(462.4)));
  }

  TEST_CASE("ward cut at k") {
    const auto w = ward_hclust(points_1d({0, 1, 5, 6, 20}), 3);
    CHECK(w.clusters == std::vector<std::vector<std::size_t>>{{0, 1}, {2, 3}, {4}});
    CHECK_THROWS_AS(ward_hclust(points_1d({1, 2}), 3), InvalidArgument);
  }

  TEST_CASE("ward agrees with the greedy brute-force replay") {
    Rng rng(21);
    for (int t = 0; t < 100; ++t) {
      const std::size_t n = 3 + rng.index(6), k = 1 + rng.index(3);
      Matrix m(n, 2);
      for (std::size_t i = 0; i < n; ++i) {
        m(i, 0) = rng.normal();
        m(i, 1) = rng.normal();
      }
      CHECK(oracle::canonical(ward_hclust(m, k).clusters) == oracle::ward_greedy(m, k));
    }
  }

  TEST_CASE("merge heights are non-decreasing") {
    Rng rng(22);
    Matrix m(40, 3);
    for (std::size_t i = 0; i < 40; ++i)
      for (std::size_t d = 0; d < 3; ++d) m(i, d) = rng.normal();
    const auto w = ward_hclust(m, 1);
    for (std::size_t s = 1; s < w.dendrogram.merges.size(); ++s)
      CHECK(w.dendrogram.merges[s].height >= w.dendrogram.merges[s - 1].height - 1e-12);
  }

  TEST_CASE("standardize gives zero mean and unit sample sd; constant columns become zero") {
    Matrix m(4, 2);
    const double a[] = {1, 2, 3, 10};
    for (std::size_t i = 0; i < 4; ++i) {
      m(i, 0) = a[i];
      m(i, 1) = 7.0;
    }
    const auto z = standardize(m);
    double mean = 0, ss = 0;
    for (std::size_t i = 0; i < 4; ++i) mean += z(i, 0);
    for (std::size_t i = 0; i < 4; ++i) ss += z(i, 0) * z(i, 0);
    CHECK(mean == Approx(0.0).epsilon(1e-12));
    CHECK(ss / 3 == Approx(1.0));
    for (std::size_t i = 0; i < 4; ++i) CHECK(z(i, 1) == 0.0);
  }

  TEST_CASE("quartile partition: contiguous, sizes differ by at most one, extras to the lowest groups") {
    std::vector<double> acts;
    for (int i = 0; i < 10; ++i) acts.push_back(i);
    const auto p = quartile_partition(testing::make_neuron(acts), 4);
    REQUIRE(p.groups.size() == 4);
    CHECK(p.groups[0].members.size() == 3);
    CHECK(p.groups[1].members.size() == 3);
    CHECK(p.groups[2].members.size() == 2);
    CHECK(p.groups[3].members.size() == 2);
    CHECK(p.groups[0].label == "G1");
    CHECK(p.groups[0].mean_activation == Approx(1.0));
    CHECK(p.groups[3].mean_activation == Approx(8.5));
    CHECK(p.token_count() == 10);
  }

  TEST_CASE("activation hclust segments are contiguous intervals, labels ascend") {
    Rng rng(23);
    for (int t = 0; t < 100; ++t) {
      std::vector<double> acts(20 + rng.index(81));
      for (auto& a : acts) a = rng.normal() * (rng.uniform() < 0.3 ? 3.0 : 1.0);
      const auto p = activation_hclust_partition(testing::make_neuron(acts), 4);
      REQUIRE(p.groups.size() == 4);
      for (std::size_t g = 1; g < 4; ++g) {
        double prev_max = -1e300, cur_min = 1e300;
        for (const auto& m : p.groups[g - 1].members) prev_max = std::max(prev_max, m.activation);
        for (const auto& m : p.groups[g].members) cur_min = std::min(cur_min, m.activation);
        CHECK(prev_max < cur_min);
        CHECK(p.groups[g].mean_activation > p.groups[g - 1].mean_activation);
      }
    }
  }

  TEST_CASE("categorical partition: planted blobs are recovered and labeled by mean activation") {
    EmbeddingTable emb(2);
    NeuronRecord n;
    const double centers[3][2] = {{10, 0}, {0, 10}, {-10, -10}};
    Rng rng(24);
    for (int b = 0; b < 3; ++b)
      for (int j = 0; j < 6; ++j) {
        const std::string tok = "b" + std::to_string(b) + "_" + std::to_string(j);
        emb.add(tok, {centers[b][0] + 0.1 * rng.normal(), centers[b][1] + 0.1 * rng.normal()});
        n.core_tokens.push_back({tok, 3.0 - b + 0.01 * j});
      }
    sort_core_tokens(n);
    const auto p = categorical_partition(n, emb, 3);
    REQUIRE(p.groups.size() == 3);
    for (std::size_t g = 0; g < 3; ++g) {
      std::set<char> blobs;
      for (const auto& m : p.groups[g].members) blobs.insert(m.token[1]);
      CHECK(blobs.size() == 1);
      CHECK(p.groups[g].label == "K" + std::to_string(g + 1));
    }
    CHECK(p.groups[0].members[0].token[1] == '2');  // lowest activations
  }

  TEST_CASE("categorical partition: tokens without embeddings are left out") {
    EmbeddingTable emb(2);
    auto n = testing::make_neuron({5, 4, 3, 2, 1});
    emb.add("t0", {1, 0});
    emb.add("t1", {1, 0.1});
    emb.add("t2", {0, 1});
    emb.add("t3", {0.1, 1});
    const auto p = categorical_partition(n, emb, 2);
    CHECK(p.token_count() == 4);
  }

  TEST_CASE("categorical partition: fewer distinct embeddings than k is degenerate") {
    EmbeddingTable emb(2);
    auto n = testing::make_neuron({5, 4, 3, 2});
    for (int i = 0; i < 4; ++i) emb.add("t" + std::to_string(i), {1, i < 2 ? 0.0 : 1.0});
    CHECK_THROWS_AS(categorical_partition(n, emb, 3), DegenerateError);
  }
}
