#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neurocat/config.hpp"
#include "neurocat/partition_source.hpp"
#include "neurocat/stats.hpp"

namespace neurocat {

// One tabulated cluster pair: successive pairs (Ki, Ki+1) plus (K1, Kk).
struct ClusterPairStat {
  std::size_t first = 0;  // 0-based group index, first < second
  std::size_t second = 0;
  double delta = 0.0;      // mean(second) - mean(first), >= 0 by labeling
  double cohens_d = 0.0;
  double p_value = 1.0;    // Dunn post-hoc
  bool significant = false;
};

struct NeuronTopDownResult {
  NeuronId id;
  std::string backend;
  Partition partition;
  std::vector<double> cluster_means;
  bool eligible = false;
  std::optional<TestResult> kw;
  std::vector<PostHocResult> posthoc;  // all k(k-1)/2 pairs
  std::vector<ClusterPairStat> reported;
};

// The tabulated pairs for k clusters, in column order.
std::vector<std::pair<std::size_t, std::size_t>> reported_pairs(std::size_t k);

// Builds the partition, then, if every cluster has at least
// config.min_cluster_size tokens, runs Kruskal-Wallis, Dunn and Cohen's d.
// Partition failures propagate.
NeuronTopDownResult analyze_neuron_topdown(const NeuronRecord& neuron, const PartitionSource& source,
                                           const RunConfig& config);

struct TopDownAggregate {
  std::size_t k = 0;
  std::size_t n_neuron = 0;  // eligible neurons
  double pi_kw = 0.0;        // % with p_KW < alpha
  std::vector<double> mu_cluster;     // mean of mu_Ki
  std::vector<double> mu_delta;       // per reported pair
  std::vector<double> mu_d;           // per reported pair
  std::vector<double> pi_pair;        // % with post-hoc p < alpha'
};

// Means over eligible results. InvalidArgument when none is eligible.
TopDownAggregate aggregate_topdown(std::span<const NeuronTopDownResult> results, double alpha);

}  // namespace neurocat
