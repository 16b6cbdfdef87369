#include "doctest.h"
#include "helpers.hpp"
#include "neurocat/errors.hpp"
#include "neurocat/interleaving.hpp"

using namespace neurocat;
using testing::group_map;
using testing::make_neuron;
using testing::MapSource;

namespace {

Partition split(const std::vector<double>& acts, const std::vector<int>& group) {
  return MapSource(group_map(group)).partition(make_neuron(acts), 0);
}

}  // namespace

TEST_SUITE("interleaving") {
  TEST_CASE("separated clusters cover only themselves") {
    const auto p = split({1, 2, 3, 4, 5, 6}, {0, 0, 0, 1, 1, 1});
    const auto c = interleave_cell(p, 0);
    CHECK(c.label == "K1");
    CHECK(c.x_min == 1.0);
    CHECK(c.x_max == 3.0);
    CHECK(c.n == 3);
    CHECK(c.m == 3);
    CHECK(c.total == 6);
    CHECK(c.rho == 1.0);
  }

  TEST_CASE("alternating clusters overlap") {
    const auto p = split({1, 2, 3, 4, 5, 6}, {0, 1, 0, 1, 0, 1});
    const auto k1 = interleave_cell(p, 0);
    CHECK(k1.x_min == 1.0);
    CHECK(k1.x_max == 5.0);
    CHECK(k1.n == 5);
    CHECK(k1.rho == doctest::Approx(5.0 / 3.0));
    const auto k2 = interleave_cell(p, 1);
    CHECK(k2.n == 5);
  }

  TEST_CASE("the span is a closed interval") {
    // Token t3 of the other cluster sits exactly on K1's upper bound.
    const auto p = split({1, 2, 3, 3, 5, 6}, {0, 0, 0, 1, 1, 1});
    const auto c = interleave_cell(p, 0);
    CHECK(c.n == 4);
  }

  TEST_CASE("eligibility needs more than five tokens on both counts") {
    CHECK(interleave_eligible(6, 6));
    CHECK_FALSE(interleave_eligible(6, 5));
    CHECK_FALSE(interleave_eligible(5, 6));
    std::vector<double> acts;
    std::vector<int> g;
    for (int i = 0; i < 11; ++i) {
      acts.push_back(i);
      g.push_back(i < 5 ? 0 : 1);
    }
    const auto p = split(acts, g);
    CHECK_FALSE(interleave_cell(p, 0).eligible);
    CHECK(interleave_cell(p, 1).eligible);
  }

  TEST_CASE("single cluster: no chi-square, not eligible") {
    std::vector<double> acts(8);
    for (int i = 0; i < 8; ++i) acts[i] = i;
    const auto p = split(acts, std::vector<int>(8, 0));
    const auto c = interleave_cell(p, 0);
    CHECK_FALSE(c.chi2);
    CHECK_FALSE(c.eligible);
    CHECK(c.rho == 1.0);
  }

  TEST_CASE("hand-computed aggregate over two neurons") {
    std::vector<double> acts;
    std::vector<int> sep, alt;
    for (int i = 0; i < 12; ++i) {
      acts.push_back(i + 1);
      sep.push_back(i < 6 ? 0 : 1);
      alt.push_back(i % 2);
    }
    RunConfig cfg;
    cfg.k_categorical = 2;
    const auto neuron = make_neuron(acts);
    std::vector<NeuronInterleavingResult> rs{
        analyze_neuron_interleaving(neuron, MapSource(group_map(sep)), cfg),
        analyze_neuron_interleaving(neuron, MapSource(group_map(alt)), cfg)};
    for (const auto& r : rs) {
      std::size_t m = 0;
      for (const auto& c : r.cells) m += c.m;
      CHECK(m == 12);
    }
    // Alternating K1 spans [1, 11]: n = 11, observed [11, 1] vs [6, 6].
    const auto& k1 = rs[1].cells[0];
    CHECK(k1.n == 11);
    REQUIRE(k1.chi2);
    CHECK(k1.chi2->statistic == doctest::Approx(25.0 / 3.0));
    CHECK(k1.significant);
    CHECK_FALSE(rs[0].cells[0].significant);

    const auto agg = aggregate_interleaving(rs);
    CHECK(agg.n_neuron == 2);
    REQUIRE(agg.rows.size() == 2);
    CHECK(agg.rows[0].label == "K1");
    CHECK(agg.rows[0].n_cells == 2);
    CHECK(agg.rows[0].mu_rho == doctest::Approx((1.0 + 11.0 / 6.0) / 2));
    CHECK(agg.rows[0].pi_significant == doctest::Approx(50.0));
  }

  TEST_CASE("rho is at least one and at most N / m") {
    for (int seed = 0; seed < 50; ++seed) {
      std::vector<double> acts;
      std::vector<int> g;
      for (int i = 0; i < 30; ++i) {
        acts.push_back((i * 7 + seed * 13) % 17);
        g.push_back((i * 3 + seed) % 4);
      }
      const auto p = split(acts, g);
      for (std::size_t j = 0; j < p.groups.size(); ++j) {
        const auto c = interleave_cell(p, j);
        CHECK(c.rho >= 1.0);
        CHECK(c.rho <= static_cast<double>(c.total) / c.m + 1e-12);
      }
    }
  }

  TEST_CASE("aggregate with a cluster that never qualifies is an error") {
    std::vector<double> acts;
    std::vector<int> g;
    for (int i = 0; i < 11; ++i) {
      acts.push_back(i);
      g.push_back(i < 5 ? 0 : 1);
    }
    RunConfig cfg;
    cfg.k_categorical = 2;
    const std::vector<NeuronInterleavingResult> rs{
        analyze_neuron_interleaving(make_neuron(acts), MapSource(group_map(g)), cfg)};
    CHECK_THROWS_AS(aggregate_interleaving(rs), InvalidArgument);
  }
}
