#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neurocat/bottomup.hpp"
#include "neurocat/interleaving.hpp"
#include "neurocat/topdown.hpp"

namespace neurocat {

struct NeuronFailure {
  NeuronId id;
  std::string message;
};

template <class Result>
struct CorpusOutcome {
  std::vector<Result> results;  // input order, failed neurons omitted
  std::vector<NeuronFailure> failures;
};

// Runs fn(i) for i in [0, n) on `jobs` threads (0 = hardware concurrency).
// fn must be safe to call concurrently for distinct i.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

// Per-neuron analyses over a corpus. A neuron whose analysis throws is
// recorded in `failures` and skipped; results keep input order.
CorpusOutcome<NeuronTopDownResult> run_topdown(std::span<const NeuronRecord> neurons, const PartitionSource& source,
                                               const RunConfig& config, std::size_t jobs = 0);

CorpusOutcome<NeuronInterleavingResult> run_interleaving(std::span<const NeuronRecord> neurons,
                                                         const PartitionSource& source, const RunConfig& config,
                                                         std::size_t jobs = 0);

CorpusOutcome<NeuronBottomUpResult> run_bottomup(std::span<const NeuronRecord> neurons, const EmbeddingTable& emb,
                                                 ActivationSegmentation segmentation, const RunConfig& config,
                                                 std::size_t jobs = 0);

// Neurons whose layer is in `layers`; all of them when `layers` is empty.
std::vector<NeuronRecord> filter_layers(std::span<const NeuronRecord> neurons, std::span<const int> layers);

// Distinct layers in ascending order.
std::vector<int> layers_of(std::span<const NeuronRecord> neurons);

}  // namespace neurocat
