#include "neurocat/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "neurocat/errors.hpp"

namespace neurocat {

Matrix Matrix::column(std::span<const double> values) {
  Matrix m(values.size(), 1);
  for (std::size_t i = 0; i < values.size(); ++i) m(i, 0) = values[i];
  return m;
}

Matrix standardize(const Matrix& points) {
  Matrix out(points.rows(), points.cols());
  const std::size_t n = points.rows();
  if (n == 0) return out;
  for (std::size_t c = 0; c < points.cols(); ++c) {
    double m = 0.0;
    for (std::size_t r = 0; r < n; ++r) m += points(r, c);
    m /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) ss += (points(r, c) - m) * (points(r, c) - m);
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    for (std::size_t r = 0; r < n; ++r) out(r, c) = sd > 0.0 ? (points(r, c) - m) / sd : 0.0;
  }
  return out;
}

WardResult ward_hclust(const Matrix& points, std::size_t k) {
  const std::size_t n = points.rows();
  if (k == 0) throw InvalidArgument("ward_hclust: k must be >= 1");
  if (n < k) throw InvalidArgument("ward_hclust: " + std::to_string(n) + " points cannot form " + std::to_string(k) + " clusters");
  for (std::size_t r = 0; r < n; ++r)
    for (double x : points.row(r))
      if (!std::isfinite(x)) throw InvalidArgument("ward_hclust: non-finite coordinate");

  // cost[i*n+j]: increase in within-cluster sum of squares if the clusters in
  // slots i and j merged. A merged cluster lives in the lower slot, so a
  // slot's index is always its smallest member and scanning i < j in order
  // realises the lexicographic tie-break.
  std::vector<double> cost(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < points.cols(); ++c) {
        const double d = points(i, c) - points(j, c);
        d2 += d * d;
      }
      cost[i * n + j] = cost[j * n + i] = d2 / 2.0;
    }
  }

  std::vector<bool> active(n, true);
  std::vector<std::size_t> size(n, 1);
  std::vector<std::size_t> cluster_id(n);
  std::iota(cluster_id.begin(), cluster_id.end(), 0);
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};

  WardResult result;
  auto snapshot = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      auto m = members[i];
      std::sort(m.begin(), m.end());
      result.clusters.push_back(std::move(m));
    }
  };
  if (k == n) snapshot();

  result.dendrogram.merges.reserve(n ? n - 1 : 0);
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (active[j] && cost[i * n + j] < best) {
          best = cost[i * n + j];
          bi = i;
          bj = j;
        }
      }
    }
    const double ni = static_cast<double>(size[bi]);
    const double nj = static_cast<double>(size[bj]);
    for (std::size_t l = 0; l < n; ++l) {
      if (!active[l] || l == bi || l == bj) continue;
      const double nl = static_cast<double>(size[l]);
      const double updated =
          ((ni + nl) * cost[bi * n + l] + (nj + nl) * cost[bj * n + l] - nl * best) / (ni + nj + nl);
      cost[bi * n + l] = cost[l * n + bi] = updated;
    }
    Merge m;
    m.a = std::min(cluster_id[bi], cluster_id[bj]);
    m.b = std::max(cluster_id[bi], cluster_id[bj]);
    m.height = std::sqrt(2.0 * std::max(0.0, best));
    m.size = size[bi] + size[bj];
    result.dendrogram.merges.push_back(m);

    size[bi] += size[bj];
    members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
    members[bj].clear();
    active[bj] = false;
    cluster_id[bi] = n + step;

    if (step + 1 == n - k) snapshot();
  }
  return result;
}

std::vector<double> Group::activations() const {
  std::vector<double> out;
  out.reserve(members.size());
  for (const auto& m : members) out.push_back(m.activation);
  return out;
}

std::size_t Partition::token_count() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.members.size();
  return n;
}

std::size_t Partition::min_group_size() const {
  std::size_t n = std::numeric_limits<std::size_t>::max();
  for (const auto& g : groups) n = std::min(n, g.members.size());
  return groups.empty() ? 0 : n;
}

Partition make_partition(PartitionKind kind, std::vector<std::vector<TokenActivation>> groups) {
  Partition p;
  p.kind = kind;
  for (auto& members : groups) {
    if (members.empty()) continue;
    Group g;
    double sum = 0.0;
    for (const auto& t : members) sum += t.activation;
    g.mean_activation = sum / static_cast<double>(members.size());
    g.members = std::move(members);
    p.groups.push_back(std::move(g));
  }
  std::stable_sort(p.groups.begin(), p.groups.end(),
                   [](const Group& a, const Group& b) { return a.mean_activation < b.mean_activation; });
  const char prefix = kind == PartitionKind::categorical ? 'K' : 'G';
  for (std::size_t i = 0; i < p.groups.size(); ++i) p.groups[i].label = prefix + std::to_string(i + 1);
  return p;
}

namespace {

Partition from_clusters(PartitionKind kind, const std::vector<std::vector<std::size_t>>& clusters,
                        const std::vector<const TokenActivation*>& tokens) {
  std::vector<std::vector<TokenActivation>> groups;
  groups.reserve(clusters.size());
  for (const auto& c : clusters) {
    std::vector<TokenActivation> g;
    g.reserve(c.size());
    for (auto idx : c) g.push_back(*tokens[idx]);
    groups.push_back(std::move(g));
  }
  return make_partition(kind, std::move(groups));
}

}  // namespace

Partition categorical_partition(const NeuronRecord& neuron, const EmbeddingTable& emb, std::size_t k) {
  std::vector<const TokenActivation*> tokens;
  std::vector<const std::vector<double>*> vectors;
  for (const auto& t : neuron.core_tokens) {
    if (const auto* v = emb.find(t.token)) {
      tokens.push_back(&t);
      vectors.push_back(v);
    }
  }
  if (tokens.size() < k) {
    throw InvalidArgument("neuron " + to_string(neuron.id) + ": " + std::to_string(tokens.size()) +
                          " tokens with embeddings, need " + std::to_string(k));
  }
  std::set<std::vector<double>> distinct;
  for (const auto* v : vectors) distinct.insert(*v);
  if (distinct.size() < k) {
    throw DegenerateError("neuron " + to_string(neuron.id) + ": only " + std::to_string(distinct.size()) +
                          " distinct embeddings for " + std::to_string(k) + " clusters");
  }
  Matrix points(tokens.size(), emb.dim());
  for (std::size_t r = 0; r < tokens.size(); ++r) std::copy(vectors[r]->begin(), vectors[r]->end(), points.row(r).begin());
  const auto ward = ward_hclust(standardize(points), k);
  return from_clusters(PartitionKind::categorical, ward.clusters, tokens);
}

Partition quartile_partition(const NeuronRecord& neuron, std::size_t groups) {
  const std::size_t n = neuron.core_tokens.size();
  if (groups == 0) throw InvalidArgument("quartile_partition: groups must be >= 1");
  if (n < groups) {
    throw InvalidArgument("neuron " + to_string(neuron.id) + ": " + std::to_string(n) + " tokens, need at least " +
                          std::to_string(groups));
  }
  std::vector<TokenActivation> sorted(neuron.core_tokens.begin(), neuron.core_tokens.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const TokenActivation& a, const TokenActivation& b) { return a.activation < b.activation; });
  const std::size_t base = n / groups;
  const std::size_t extra = n % groups;
  std::vector<std::vector<TokenActivation>> parts;
  std::size_t pos = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t len = base + (g < extra ? 1 : 0);
    parts.emplace_back(sorted.begin() + static_cast<std::ptrdiff_t>(pos),
                       sorted.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  auto p = make_partition(PartitionKind::activation, std::move(parts));
  return p;
}

Partition activation_hclust_partition(const NeuronRecord& neuron, std::size_t k) {
  const std::size_t n = neuron.core_tokens.size();
  if (n < k) {
    throw InvalidArgument("neuron " + to_string(neuron.id) + ": " + std::to_string(n) + " tokens, need at least " +
                          std::to_string(k));
  }
  std::vector<const TokenActivation*> tokens;
  std::vector<double> values;
  std::set<double> distinct;
  for (const auto& t : neuron.core_tokens) {
    tokens.push_back(&t);
    values.push_back(t.activation);
    distinct.insert(t.activation);
  }
  if (distinct.size() < k) {
    throw DegenerateError("neuron " + to_string(neuron.id) + ": only " + std::to_string(distinct.size()) +
                          " distinct activations for " + std::to_string(k) + " segments");
  }
  const auto ward = ward_hclust(standardize(Matrix::column(values)), k);
  return from_clusters(PartitionKind::activation, ward.clusters, tokens);
}

}  // namespace neurocat
