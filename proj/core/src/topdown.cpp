#include "neurocat/topdown.hpp"

#include "neurocat/errors.hpp"

namespace neurocat {

std::vector<std::pair<std::size_t, std::size_t>> reported_pairs(std::size_t k) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i + 1 < k; ++i) out.emplace_back(i, i + 1);
  if (k > 2) out.emplace_back(0, k - 1);
  return out;
}

NeuronTopDownResult analyze_neuron_topdown(const NeuronRecord& neuron, const PartitionSource& source,
                                           const RunConfig& config) {
  const auto k = static_cast<std::size_t>(config.k_categorical);
  NeuronTopDownResult r;
  r.id = neuron.id;
  r.backend = source.id();
  r.partition = source.partition(neuron, k);
  for (const auto& g : r.partition.groups) r.cluster_means.push_back(g.mean_activation);

  r.eligible = r.partition.groups.size() == k &&
               r.partition.min_group_size() >= static_cast<std::size_t>(config.min_cluster_size);
  if (!r.eligible) return r;

  Groups groups;
  for (const auto& g : r.partition.groups) groups.push_back(g.activations());
  r.kw = kruskal_wallis(groups);
  r.posthoc = dunn_posthoc(groups, config.alpha);

  for (auto [a, b] : reported_pairs(k)) {
    ClusterPairStat s;
    s.first = a;
    s.second = b;
    s.delta = r.cluster_means[b] - r.cluster_means[a];
    s.cohens_d = cohens_d(groups[a], groups[b]);
    for (const auto& ph : r.posthoc) {
      if (ph.pair.first == a && ph.pair.second == b) {
        s.p_value = ph.p_value;
        s.significant = ph.significant;
      }
    }
    r.reported.push_back(s);
  }
  return r;
}

TopDownAggregate aggregate_topdown(std::span<const NeuronTopDownResult> results, double alpha) {
  TopDownAggregate agg;
  for (const auto& r : results) {
    if (!r.eligible) continue;
    if (agg.n_neuron == 0) {
      agg.k = r.cluster_means.size();
      agg.mu_cluster.assign(agg.k, 0.0);
      agg.mu_delta.assign(r.reported.size(), 0.0);
      agg.mu_d.assign(r.reported.size(), 0.0);
      agg.pi_pair.assign(r.reported.size(), 0.0);
    } else if (r.cluster_means.size() != agg.k) {
      throw InvalidArgument("aggregate_topdown: results mix different k");
    }
    ++agg.n_neuron;
    if (r.kw && r.kw->p_value < alpha) agg.pi_kw += 1.0;
    for (std::size_t i = 0; i < agg.k; ++i) agg.mu_cluster[i] += r.cluster_means[i];
    for (std::size_t p = 0; p < r.reported.size(); ++p) {
      agg.mu_delta[p] += r.reported[p].delta;
      agg.mu_d[p] += r.reported[p].cohens_d;
      if (r.reported[p].significant) agg.pi_pair[p] += 1.0;
    }
  }
  if (agg.n_neuron == 0) throw InvalidArgument("aggregate_topdown: no eligible neuron");
  const double n = static_cast<double>(agg.n_neuron);
  agg.pi_kw = 100.0 * agg.pi_kw / n;
  for (auto& v : agg.mu_cluster) v /= n;
  for (auto& v : agg.mu_delta) v /= n;
  for (auto& v : agg.mu_d) v /= n;
  for (auto& v : agg.pi_pair) v = 100.0 * v / n;
  return agg;
}

}  // namespace neurocat
