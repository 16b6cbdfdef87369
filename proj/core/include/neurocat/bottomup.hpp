#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neurocat/config.hpp"
#include "neurocat/segmentation.hpp"
#include "neurocat/stats.hpp"

namespace neurocat {

// Symmetric cosine matrix over the tokens of one neuron that have an embedding.
class CosineMatrix {
 public:
  CosineMatrix(std::span<const std::string> tokens, const EmbeddingTable& emb);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::size_t dropped() const noexcept { return dropped_; }

  // Position of a token, or npos when it had no embedding.
  std::size_t position(std::string_view token) const;
  double at(std::size_t i, std::size_t j) const { return values_[i * tokens_.size() + j]; }

  // All C(n, 2) off-diagonal values, row-major upper triangle.
  std::vector<double> upper_triangle() const;
  // Mean over pairs of the given positions; nullopt for fewer than two.
  std::optional<double> mean_pairwise(std::span<const std::size_t> positions) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::vector<std::string> tokens_;
  std::vector<double> values_;
  std::size_t dropped_ = 0;
};

struct NeuronBottomUpResult {
  NeuronId id;
  ActivationSegmentation segmentation = ActivationSegmentation::quartile;
  Partition partition;
  std::vector<std::optional<double>> cos;  // per group; nullopt if < 2 resolvable tokens
  std::vector<std::optional<double>> d;    // cos - q3
  double q3_cos = 0.0;
  std::size_t resolvable = 0;
  std::size_t dropped = 0;
  bool partial = false;  // some group had < 2 resolvable tokens

  bool negative(std::size_t g) const { return d[g] && *d[g] < 0.0; }
};

Partition activation_partition(const NeuronRecord& neuron, ActivationSegmentation segmentation, std::size_t k);

// InvalidArgument when fewer than two core-tokens have embeddings.
NeuronBottomUpResult analyze_neuron_bottomup(const NeuronRecord& neuron, const EmbeddingTable& emb,
                                             ActivationSegmentation segmentation, const RunConfig& config);

struct BottomUpRow {
  std::string label;
  std::size_t n_neuron = 0;
  double mu_cos = 0.0;
  double mu_d = 0.0;
  double pi_negative = 0.0;
  double p_chi2 = 1.0;  // [#neg, #non-neg] vs [N/2, N/2]
};

struct BottomUpAggregate {
  std::size_t n_neuron = 0;
  std::vector<BottomUpRow> rows;
};

BottomUpAggregate aggregate_bottomup(std::span<const NeuronBottomUpResult> results);

// Permutation null for mu(cos_Gk) - mu(cos_G1): within every neuron the
// resolvable tokens are reassigned to groups of the observed sizes at random,
// and the corpus mean difference recomputed.
struct NullBand {
  double observed = 0.0;
  double lower = 0.0;  // 2.5% quantile
  double upper = 0.0;  // 97.5% quantile
  std::size_t replicates = 0;

  bool inside() const { return observed >= lower && observed <= upper; }
};

NullBand permutation_null_band(std::span<const NeuronRecord> neurons, const EmbeddingTable& emb,
                               ActivationSegmentation segmentation, const RunConfig& config,
                               std::size_t replicates, std::uint64_t seed);

}  // namespace neurocat
