#pragma once

#include <cstddef>
#include <string>

#include "neurocat/data_model.hpp"
#include "neurocat/prompt_client.hpp"
#include "neurocat/segmentation.hpp"

namespace neurocat {

// Where categorical clusters K1..Kk come from. Both implementations produce
// the same Partition type, so the analyses never branch on the backend.
class PartitionSource {
 public:
  virtual ~PartitionSource() = default;
  virtual Partition partition(const NeuronRecord& neuron, std::size_t k) const = 0;
  virtual std::string id() const = 0;
};

class EmbeddingPartitionSource : public PartitionSource {
 public:
  explicit EmbeddingPartitionSource(const EmbeddingTable& emb) : emb_(&emb) {}
  Partition partition(const NeuronRecord& neuron, std::size_t k) const override {
    return categorical_partition(neuron, *emb_, k);
  }
  std::string id() const override { return "embedding_hclust"; }

 private:
  const EmbeddingTable* emb_;
};

class PromptPartitionSource : public PartitionSource {
 public:
  PromptPartitionSource(ClusterBackend& backend, std::string template_id)
      : backend_(&backend), template_id_(std::move(template_id)) {}

  Partition partition(const NeuronRecord& neuron, std::size_t k) const override {
    ClusterRequest req;
    req.tokens.reserve(neuron.core_tokens.size());
    for (const auto& t : neuron.core_tokens) req.tokens.push_back(t.token);
    req.k = static_cast<int>(k);
    req.template_id = template_id_;
    return partition_from_response(neuron, backend_->cluster(req));
  }
  std::string id() const override { return "prompt:" + backend_->id() + ":" + template_id_; }

 private:
  ClusterBackend* backend_;
  std::string template_id_;
};

}  // namespace neurocat
