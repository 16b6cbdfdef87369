#include "neurocat/bottomup.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "neurocat/corpus_runner.hpp"
#include "neurocat/errors.hpp"
#include "neurocat/random.hpp"

namespace neurocat {

CosineMatrix::CosineMatrix(std::span<const std::string> tokens, const EmbeddingTable& emb) {
  std::vector<std::vector<double>> unit;
  for (const auto& t : tokens) {
    const auto* v = emb.find(t);
    if (!v) {
      ++dropped_;
      continue;
    }
    double norm = 0.0;
    for (double x : *v) norm += x * x;
    norm = std::sqrt(norm);
    std::vector<double> u(v->size());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = (*v)[i] / norm;
    unit.push_back(std::move(u));
    tokens_.push_back(t);
  }
  const std::size_t n = tokens_.size();
  values_.assign(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < unit[i].size(); ++c) dot += unit[i][c] * unit[j][c];
      values_[i * n + j] = values_[j * n + i] = std::clamp(dot, -1.0, 1.0);
    }
  }
}

std::size_t CosineMatrix::position(std::string_view token) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    if (tokens_[i] == token) return i;
  return npos;
}

std::vector<double> CosineMatrix::upper_triangle() const {
  const std::size_t n = tokens_.size();
  std::vector<double> out;
  out.reserve(n * (n - (n ? 1 : 0)) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out.push_back(values_[i * n + j]);
  return out;
}

std::optional<double> CosineMatrix::mean_pairwise(std::span<const std::size_t> positions) const {
  if (positions.size() < 2) return std::nullopt;
  const std::size_t n = tokens_.size();
  double sum = 0.0;
  for (std::size_t a = 0; a < positions.size(); ++a)
    for (std::size_t b = a + 1; b < positions.size(); ++b) sum += values_[positions[a] * n + positions[b]];
  const double pairs = static_cast<double>(positions.size() * (positions.size() - 1) / 2);
  return sum / pairs;
}

Partition activation_partition(const NeuronRecord& neuron, ActivationSegmentation segmentation, std::size_t k) {
  return segmentation == ActivationSegmentation::quartile ? quartile_partition(neuron, k)
                                                          : activation_hclust_partition(neuron, k);
}

namespace {

std::vector<std::string> token_strings(const NeuronRecord& neuron) {
  std::vector<std::string> out;
  out.reserve(neuron.core_tokens.size());
  for (const auto& t : neuron.core_tokens) out.push_back(t.token);
  return out;
}

// Positions in the cosine matrix of each group's resolvable members.
std::vector<std::vector<std::size_t>> group_positions(const Partition& p, const CosineMatrix& cos) {
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < cos.size(); ++i) index.emplace(cos.tokens()[i], i);
  std::vector<std::vector<std::size_t>> out(p.groups.size());
  for (std::size_t g = 0; g < p.groups.size(); ++g)
    for (const auto& m : p.groups[g].members)
      if (auto it = index.find(m.token); it != index.end()) out[g].push_back(it->second);
  return out;
}

}  // namespace

NeuronBottomUpResult analyze_neuron_bottomup(const NeuronRecord& neuron, const EmbeddingTable& emb,
                                             ActivationSegmentation segmentation, const RunConfig& config) {
  NeuronBottomUpResult r;
  r.id = neuron.id;
  r.segmentation = segmentation;
  r.partition = activation_partition(neuron, segmentation, static_cast<std::size_t>(config.k_activation));

  const auto tokens = token_strings(neuron);
  const CosineMatrix cos(tokens, emb);
  r.resolvable = cos.size();
  r.dropped = cos.dropped();
  if (r.resolvable < 2) {
    throw InvalidArgument("neuron " + to_string(neuron.id) + ": fewer than two core-tokens have embeddings");
  }
  r.q3_cos = quantile(cos.upper_triangle(), 0.75);

  for (const auto& pos : group_positions(r.partition, cos)) {
    const auto c = cos.mean_pairwise(pos);
    r.cos.push_back(c);
    r.d.push_back(c ? std::optional<double>(*c - r.q3_cos) : std::nullopt);
    if (!c) r.partial = true;
  }
  return r;
}

BottomUpAggregate aggregate_bottomup(std::span<const NeuronBottomUpResult> results) {
  if (results.empty()) throw InvalidArgument("aggregate_bottomup: no results");
  const std::size_t k = results.front().cos.size();
  BottomUpAggregate agg;
  agg.n_neuron = results.size();
  std::vector<std::size_t> negatives(k, 0);
  agg.rows.resize(k);
  for (const auto& r : results) {
    if (r.cos.size() != k) throw InvalidArgument("aggregate_bottomup: results mix different k");
    for (std::size_t g = 0; g < k; ++g) {
      if (!r.cos[g]) continue;
      auto& row = agg.rows[g];
      ++row.n_neuron;
      row.mu_cos += *r.cos[g];
      row.mu_d += *r.d[g];
      if (r.negative(g)) ++negatives[g];
    }
  }
  for (std::size_t g = 0; g < k; ++g) {
    auto& row = agg.rows[g];
    row.label = "G" + std::to_string(g + 1);
    if (row.n_neuron == 0) throw InvalidArgument("aggregate_bottomup: no neuron computed " + row.label);
    const double n = static_cast<double>(row.n_neuron);
    row.mu_cos /= n;
    row.mu_d /= n;
    row.pi_negative = 100.0 * static_cast<double>(negatives[g]) / n;
    const double observed[] = {static_cast<double>(negatives[g]), n - static_cast<double>(negatives[g])};
    const double expected[] = {n / 2.0, n / 2.0};
    row.p_chi2 = chi2_gof(observed, expected).p_value;
  }
  return agg;
}

NullBand permutation_null_band(std::span<const NeuronRecord> neurons, const EmbeddingTable& emb,
                               ActivationSegmentation segmentation, const RunConfig& config,
                               std::size_t replicates, std::uint64_t seed) {
  if (replicates == 0) throw InvalidArgument("permutation_null_band: replicates must be > 0");
  const auto k = static_cast<std::size_t>(config.k_activation);

  struct PerNeuron {
    bool used = false;
    double first = 0.0, last = 0.0;
    std::vector<double> perm_first, perm_last;
  };
  std::vector<PerNeuron> per(neurons.size());

  parallel_for(neurons.size(), 0, [&](std::size_t i) {
    const auto& neuron = neurons[i];
    Partition p;
    try {
      p = activation_partition(neuron, segmentation, k);
    } catch (const Error&) {
      return;
    }
    const auto tokens = token_strings(neuron);
    const CosineMatrix cos(tokens, emb);
    auto groups = group_positions(p, cos);
    if (groups.size() != k || groups.front().size() < 2 || groups.back().size() < 2) return;

    auto& out = per[i];
    out.used = true;
    out.first = *cos.mean_pairwise(groups.front());
    out.last = *cos.mean_pairwise(groups.back());

    std::vector<std::size_t> pool;
    for (const auto& g : groups) pool.insert(pool.end(), g.begin(), g.end());
    const std::size_t n_first = groups.front().size();
    const std::size_t n_last = groups.back().size();
    Rng rng(derive_seed(seed, i));
    out.perm_first.resize(replicates);
    out.perm_last.resize(replicates);
    for (std::size_t r = 0; r < replicates; ++r) {
      rng.shuffle(pool.begin(), pool.end());
      std::span<const std::size_t> all(pool);
      out.perm_first[r] = *cos.mean_pairwise(all.first(n_first));
      out.perm_last[r] = *cos.mean_pairwise(all.last(n_last));
    }
  });

  NullBand band;
  band.replicates = replicates;
  std::vector<double> sum_first(replicates, 0.0), sum_last(replicates, 0.0);
  double obs_first = 0.0, obs_last = 0.0, used = 0.0;
  for (const auto& p : per) {
    if (!p.used) continue;
    used += 1.0;
    obs_first += p.first;
    obs_last += p.last;
    for (std::size_t r = 0; r < replicates; ++r) {
      sum_first[r] += p.perm_first[r];
      sum_last[r] += p.perm_last[r];
    }
  }
  if (used == 0.0) throw InvalidArgument("permutation_null_band: no usable neuron");
  band.observed = (obs_last - obs_first) / used;
  std::vector<double> diffs(replicates);
  for (std::size_t r = 0; r < replicates; ++r) diffs[r] = (sum_last[r] - sum_first[r]) / used;
  std::sort(diffs.begin(), diffs.end());
  band.lower = quantile_sorted(diffs, 0.025);
  band.upper = quantile_sorted(diffs, 0.975);
  return band;
}

}  // namespace neurocat
