#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "neurocat/data_model.hpp"
#include "neurocat/segmentation.hpp"
#include "neurocat/stats.hpp"

// Brute-force counterparts of the main routines. They share no code with the
// implementations they check: no rank helper, no Lance-Williams update, no
// binary search, no cached cosine matrix.
namespace neurocat::oracle {

// H from the textbook rank-sum formula; ranks by counting (less + (equal+1)/2),
// tie correction from explicit value counts. O(N^2).
double kruskal_h(const Groups& groups);

// Monte Carlo permutation p-value for H: (#{H* >= H} + 1) / (R + 1).
double kruskal_permutation_p(const Groups& groups, std::size_t replicates, std::uint64_t seed);

// Exact permutation p-value by enumerating every assignment of the pooled
// values to groups of the observed sizes. Feasible for N <= 12.
double kruskal_exact_p(const Groups& groups);

// Greedy Ward replayed from scratch: at every step each candidate merge is
// scored by recomputing within-cluster sums of squares from the points.
std::vector<std::vector<std::size_t>> ward_greedy(const Matrix& points, std::size_t k);

// Global minimum within-cluster sum of squares over all k-partitions.
std::vector<std::vector<std::size_t>> min_variance_partition(const Matrix& points, std::size_t k);

double within_ss(const Matrix& points, const std::vector<std::vector<std::size_t>>& clusters);

// Clusters as sorted lists, sorted by first element; for comparison.
std::vector<std::vector<std::size_t>> canonical(std::vector<std::vector<std::size_t>> clusters);

// Every group is an interval of the sorted value axis.
bool contiguous_1d(std::span<const double> values, const std::vector<std::vector<std::size_t>>& clusters);

// Mean pairwise cosine by a plain double loop over raw vectors.
double mean_pairwise_cosine(const std::vector<std::vector<double>>& vectors);

// n(K_i) by scanning every clustered token against the span of group g.
std::size_t interleave_count(const Partition& partition, std::size_t g);

struct Check {
  std::string name;
  bool passed = false;
  std::size_t instances = 0;
  double max_abs_deviation = 0.0;
  double tolerance = 0.0;
  std::string detail;
  // Ungated checks are reported but do not fail the suite; they mark a
  // documented limit rather than a defect.
  bool gated = true;
};

struct Report {
  std::vector<Check> checks;

  bool passed() const;
  std::string to_text() const;
};

// Runs every brute-force comparison on seeded random instances.
Report run_suite(std::uint64_t seed = 20240601);

}  // namespace neurocat::oracle
