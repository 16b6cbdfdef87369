#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neurocat/data_model.hpp"
#include "neurocat/segmentation.hpp"

namespace neurocat {

enum class SynthMode {
  null,       // activations independent of blobs
  attentive,  // one designated blob shifted up; low activations are less prototypical
  banded,     // each blob occupies its own disjoint activation band
};

std::string_view to_string(SynthMode m);
SynthMode parse_synth_mode(std::string_view s);

struct SynthSpec {
  std::size_t n_neurons = 200;
  std::size_t tokens_per_neuron = 100;
  std::size_t emb_dim = 16;
  std::size_t n_blobs = 5;
  double blob_spread = 1.0;      // sd of token noise around the blob center, per dimension
  double blob_separation = 3.0;  // radius of the sphere holding blob centers
  SynthMode mode = SynthMode::null;
  double activation_offset = 3.0;  // designated-blob shift, in activation sd units
  double activation_mean = 1.8;
  double activation_sd = 0.3;
  // Attentive mode only: token noise is scaled by exp(-focus_gain * z), z the
  // token's standardized activation, so high activations sit nearer their
  // blob center.
  double focus_gain = 0.3;
  int layer = 0;
  std::uint64_t seed = 7;

  void validate() const;  // InvalidArgument
};

struct GroundTruth {
  NeuronId id;
  std::map<std::string, int> blob;  // token -> blob index (0-based)
  int designated = -1;              // attentive mode; -1 otherwise
};

struct SynthCorpus {
  std::vector<NeuronRecord> neurons;
  EmbeddingTable embeddings;
  std::vector<GroundTruth> truth;
};

// All randomness derives from spec.seed; neuron i uses its own derived stream.
SynthCorpus generate(const SynthSpec& spec);

std::string serialize_truth(std::span<const GroundTruth> truth);
std::vector<GroundTruth> parse_truth(std::istream& in);

// Writes neurons.jsonl, embeddings.jsonl and truth.jsonl into `dir`.
void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

// The planted blobs as a categorical partition of the neuron.
Partition ground_truth_partition(const NeuronRecord& neuron, const GroundTruth& truth);

}  // namespace neurocat
