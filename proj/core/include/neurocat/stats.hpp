#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "neurocat/data_model.hpp"

namespace neurocat {

enum class TestMethod {
  kruskal_wallis,
  chi2_goodness_of_fit,
  jarque_bera,
  lilliefors,
  levene,
  bartlett,
};

std::string_view to_string(TestMethod m);

struct TestResult {
  double statistic = 0.0;
  double df = 0.0;
  double df2 = 0.0;  // denominator df; only Levene's F uses it
  double p_value = 1.0;
  std::optional<double> effect_size;
  TestMethod method = TestMethod::kruskal_wallis;
};

struct Ranking {
  std::vector<double> ranks;           // 1-based mid-ranks, input order
  std::vector<std::size_t> tie_sizes;  // size of each run of equal values (t >= 1)

  // sum over tie groups of t^3 - t
  double tie_sum() const;
};

Ranking rank_with_ties(std::span<const double> values);

using Groups = std::vector<std::vector<double>>;

// H with tie correction, df = k - 1, p from the chi-square upper tail.
// Groups may have any size >= 1; DegenerateError when every value is equal.
TestResult kruskal_wallis(const Groups& groups);

struct PostHocResult {
  std::pair<std::size_t, std::size_t> pair;  // 0-based group indices, first < second
  double z = 0.0;  // (mean rank of second - mean rank of first) / se
  double p_value = 1.0;
  double adjusted_alpha = 0.0;
  bool significant = false;
};

// Dunn's rank-sum comparisons for all k(k-1)/2 pairs, tie-corrected, with
// the per-pair threshold alpha / (k(k-1)).
std::vector<PostHocResult> dunn_posthoc(const Groups& groups, double alpha);

// (mean(b) - mean(a)) / pooled sample sd.
double cohens_d(std::span<const double> a, std::span<const double> b);

TestResult chi2_gof(std::span<const double> observed, std::span<const double> expected);

double risk_ratio(double n, double m);

// Linear interpolation between order statistics at h = (n - 1) q + 1.
double quantile(std::span<const double> values, double q);
// Same, for input already sorted ascending.
double quantile_sorted(std::span<const double> sorted, double q);

double cosine_similarity(std::span<const double> u, std::span<const double> v);

// Mean over unordered pairs of tokens present in the table. Tokens missing
// from the table are skipped; fewer than two present is an error.
double mean_pairwise_cosine(std::span<const std::string> tokens, const EmbeddingTable& emb);

double mean(std::span<const double> v);
double sample_variance(std::span<const double> v);

// ---------------------------------------------------------------------------
// Preliminary checks: normality and variance homogeneity.

// Monte Carlo null distribution of the Lilliefors statistic for samples of
// size n. Depends only on (n, replicates, seed), so one table can score any
// number of samples of that size.
class LillieforsNull {
 public:
  LillieforsNull(std::size_t n, std::size_t replicates, std::uint64_t seed);

  std::size_t n() const noexcept { return n_; }
  std::size_t replicates() const noexcept { return sorted_.size(); }
  // (#{D* >= d} + 1) / (replicates + 1)
  double p_value(double d) const;

 private:
  std::size_t n_;
  std::vector<double> sorted_;
};

// KS distance between the standardized sample and N(0, 1); mean and
// sample sd (n - 1) are estimated from the data.
double lilliefors_statistic(std::span<const double> values);

struct QQPoint {
  double theoretical;
  double sample;
};

struct NormalityReport {
  std::optional<TestResult> jarque_bera;  // n >= 8
  std::optional<TestResult> lilliefors;   // n >= 4
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  std::vector<QQPoint> qq;
};

struct NormalityOptions {
  std::size_t replicates = 10000;
  std::uint64_t seed = 0x5eed;
  const LillieforsNull* null_table = nullptr;  // reused when n matches
};

TestResult jarque_bera(std::span<const double> values);
// Throws InvalidArgument when n < 4.
NormalityReport normality_battery(std::span<const double> values, const NormalityOptions& options = {});

struct VarianceHomogeneity {
  TestResult levene;
  TestResult bartlett;
};

// Levene on absolute deviations from group means; Bartlett's chi-square.
VarianceHomogeneity variance_homogeneity(const Groups& groups);

}  // namespace neurocat
