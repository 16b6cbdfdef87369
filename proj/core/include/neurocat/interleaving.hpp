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

// Activation-span overlap of one categorical cluster against all clustered
// tokens of the neuron.
struct InterleaveCell {
  std::string label;
  double x_min = 0.0;
  double x_max = 0.0;
  std::size_t n = 0;      // clustered tokens with activation in [x_min, x_max]
  std::size_t m = 0;      // tokens of this cluster
  std::size_t total = 0;  // N, all clustered tokens
  std::optional<TestResult> chi2;  // observed [n, N-n] vs expected [m, N-m]
  double rho = 1.0;                // n / m
  bool eligible = false;
  bool significant = false;
};

// Chi-square is skipped (and the cell ineligible) when N - m == 0.
InterleaveCell interleave_cell(const Partition& partition, std::size_t group, double alpha = 0.05);

// A cell enters the aggregates only if m > 5 and n > 5.
bool interleave_eligible(std::size_t n, std::size_t m);

struct NeuronInterleavingResult {
  NeuronId id;
  std::string backend;
  std::vector<InterleaveCell> cells;
};

NeuronInterleavingResult analyze_neuron_interleaving(const NeuronRecord& neuron, const PartitionSource& source,
                                                     const RunConfig& config);

struct InterleaveRow {
  std::string label;
  std::size_t n_cells = 0;  // eligible cells
  double mu_rho = 0.0;
  double pi_significant = 0.0;
};

struct InterleaveAggregate {
  std::size_t n_neuron = 0;  // neurons with at least one eligible cell
  std::vector<InterleaveRow> rows;
};

// InvalidArgument when some cluster label has no eligible cell.
InterleaveAggregate aggregate_interleaving(std::span<const NeuronInterleavingResult> results);

}  // namespace neurocat
