#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "neurocat/data_model.hpp"

namespace neurocat {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  static Matrix column(std::span<const double> values);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Column-wise z-scores with the sample sd; constant columns become zero.
Matrix standardize(const Matrix& points);

struct Merge {
  std::size_t a = 0;  // cluster ids: 0..n-1 are points, n+s is the merge at step s
  std::size_t b = 0;
  double height = 0.0;  // sqrt(2 * increase in within-cluster sum of squares)
  std::size_t size = 0;
};

struct Dendrogram {
  std::vector<Merge> merges;  // n - 1 entries
};

struct WardResult {
  // Point indices per cluster after cutting at k, each ascending; clusters
  // ordered by their smallest member.
  std::vector<std::vector<std::size_t>> clusters;
  Dendrogram dendrogram;
};

// Agglomerative Ward clustering (Euclidean, Lance-Williams update). Among
// equal-cost merges the pair whose smallest member indices are
// lexicographically smallest wins. Throws InvalidArgument when n < k.
WardResult ward_hclust(const Matrix& points, std::size_t k);

enum class PartitionKind { categorical, activation };

struct Group {
  std::string label;  // K1.. or G1..
  std::vector<TokenActivation> members;
  double mean_activation = 0.0;

  std::vector<double> activations() const;
};

// Disjoint groups ordered by ascending mean activation; group 1 is lowest.
struct Partition {
  PartitionKind kind = PartitionKind::categorical;
  std::vector<Group> groups;

  std::size_t token_count() const;
  std::size_t min_group_size() const;
};

// Orders raw groups by mean activation (stable for equal means) and assigns
// K/G labels. Empty groups are dropped.
Partition make_partition(PartitionKind kind, std::vector<std::vector<TokenActivation>> groups);

// Embeddings of the resolvable core-tokens, standardized, Ward-cut at k.
// DegenerateError when fewer than k distinct embeddings remain.
Partition categorical_partition(const NeuronRecord& neuron, const EmbeddingTable& emb, std::size_t k);

// Contiguous split of the activation-sorted tokens into `groups` parts whose
// sizes differ by at most one; the extra tokens go to the lowest groups.
Partition quartile_partition(const NeuronRecord& neuron, std::size_t groups = 4);

// Ward on the standardized 1-D activations.
Partition activation_hclust_partition(const NeuronRecord& neuron, std::size_t k);

}  // namespace neurocat
