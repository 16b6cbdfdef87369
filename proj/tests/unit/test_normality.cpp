#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "neurocat/errors.hpp"
#include "neurocat/random.hpp"
#include "neurocat/stats.hpp"

using namespace neurocat;
using doctest::Approx;

TEST_SUITE("normality") {
  TEST_CASE("jarque-bera on a symmetric mesokurtic sample is zero") {
    const std::vector<double> v{-1, -1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0};
    const auto jb = jarque_bera(v);
    CHECK(jb.statistic == Approx(0.0).epsilon(1e-12));
    CHECK(jb.p_value == Approx(1.0));
    CHECK(jb.df == 2);
  }

  TEST_CASE("jarque-bera, skewness and kurtosis against reference values") {
    const std::vector<double> x{0.3, -1.2, 0.8, 2.1, -0.4, 0.05, 1.7, -2.2, 0.9, -0.6};
    const auto rep = normality_battery(x, {.replicates = 2000, .seed = 1, .null_table = nullptr});
    CHECK(rep.skewness == Approx(-0.2064262754778484).epsilon(1e-12));
    CHECK(rep.excess_kurtosis == Approx(-0.6959272045241942).epsilon(1e-12));
    REQUIRE(rep.jarque_bera);
    CHECK(rep.jarque_bera->statistic == Approx(0.2728174595114524).epsilon(1e-12));
    CHECK(rep.jarque_bera->p_value == Approx(0.8724859486313734).epsilon(1e-10));
    REQUIRE(rep.lilliefors);
    CHECK(rep.lilliefors->p_value > 0.2);
  }

  TEST_CASE("minimum sizes") {
    CHECK_THROWS_AS(normality_battery(std::vector<double>{1, 2, 3}), InvalidArgument);
    const auto small = normality_battery(std::vector<double>{1, 2, 3, 5.5, 4}, {.replicates = 200});
    CHECK_FALSE(small.jarque_bera);
    CHECK(small.lilliefors);
  }

  TEST_CASE("QQ series is monotone in both coordinates") {
    Rng rng(12);
    std::vector<double> v(50);
    for (auto& x : v) x = rng.normal() * 2 + 1;
    const auto rep = normality_battery(v, {.replicates = 500});
    REQUIRE(rep.qq.size() == 50);
    for (std::size_t i = 1; i < rep.qq.size(); ++i) {
      CHECK(rep.qq[i].theoretical >= rep.qq[i - 1].theoretical);
      CHECK(rep.qq[i].sample >= rep.qq[i - 1].sample);
    }
  }

  TEST_CASE("lilliefors rejects heavy-tailed samples") {
    Rng rng(13);
    std::vector<double> v(300);
    for (auto& x : v) x = std::pow(rng.normal(), 3);
    const auto rep = normality_battery(v, {.replicates = 2000});
    CHECK(rep.lilliefors->p_value < 0.01);
  }

  TEST_CASE("lilliefors rejection rate under the null is near alpha") {
    // 500 standard-normal samples of n = 1000, one shared 10,000-replicate null table
    const LillieforsNull table(1000, 10000, 99);
    Rng rng(2024);
    int rejected = 0;
    std::vector<double> v(1000);
    for (int r = 0; r < 500; ++r) {
      for (auto& x : v) x = rng.normal();
      if (table.p_value(lilliefors_statistic(v)) < 0.05) ++rejected;
    }
    const double rate = rejected / 500.0;
    CHECK(rate >= 0.03);
    CHECK(rate <= 0.07);
  }

  TEST_CASE("bartlett rejection rate on equal-variance normal groups is near alpha") {
    Rng rng(77);
    int rejected = 0;
    const int reps = 2000;
    for (int r = 0; r < reps; ++r) {
      Groups g(3);
      for (auto& grp : g)
        for (int j = 0; j < 20; ++j) grp.push_back(rng.normal());
      if (variance_homogeneity(g).bartlett.p_value < 0.05) ++rejected;
    }
    const double rate = static_cast<double>(rejected) / reps;
    CHECK(rate >= 0.035);
    CHECK(rate <= 0.065);
  }
}
