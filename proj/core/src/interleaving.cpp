#include "neurocat/interleaving.hpp"

#include <algorithm>
#include <map>

#include "neurocat/errors.hpp"

namespace neurocat {

bool interleave_eligible(std::size_t n, std::size_t m) { return m > 5 && n > 5; }

InterleaveCell interleave_cell(const Partition& partition, std::size_t group, double alpha) {
  if (group >= partition.groups.size()) throw InvalidArgument("interleave_cell: no such cluster");
  const auto& g = partition.groups[group];
  if (g.members.empty()) throw InvalidArgument("interleave_cell: empty cluster " + g.label);

  std::vector<double> all;
  all.reserve(partition.token_count());
  for (const auto& other : partition.groups)
    for (const auto& t : other.members) all.push_back(t.activation);
  std::sort(all.begin(), all.end());

  InterleaveCell c;
  c.label = g.label;
  auto [lo, hi] = std::minmax_element(g.members.begin(), g.members.end(),
                                      [](const auto& a, const auto& b) { return a.activation < b.activation; });
  c.x_min = lo->activation;
  c.x_max = hi->activation;
  // closed interval [x_min, x_max]
  c.n = static_cast<std::size_t>(std::upper_bound(all.begin(), all.end(), c.x_max) -
                                 std::lower_bound(all.begin(), all.end(), c.x_min));
  c.m = g.members.size();
  c.total = all.size();
  c.rho = risk_ratio(static_cast<double>(c.n), static_cast<double>(c.m));

  if (c.total > c.m) {
    const double observed[] = {static_cast<double>(c.n), static_cast<double>(c.total - c.n)};
    const double expected[] = {static_cast<double>(c.m), static_cast<double>(c.total - c.m)};
    c.chi2 = chi2_gof(observed, expected);
    c.chi2->effect_size = c.rho;
    c.eligible = interleave_eligible(c.n, c.m);
    c.significant = c.chi2->p_value < alpha;
  }
  return c;
}

NeuronInterleavingResult analyze_neuron_interleaving(const NeuronRecord& neuron, const PartitionSource& source,
                                                     const RunConfig& config) {
  NeuronInterleavingResult r;
  r.id = neuron.id;
  r.backend = source.id();
  const auto partition = source.partition(neuron, static_cast<std::size_t>(config.k_categorical));
  for (std::size_t g = 0; g < partition.groups.size(); ++g) r.cells.push_back(interleave_cell(partition, g, config.alpha));
  return r;
}

InterleaveAggregate aggregate_interleaving(std::span<const NeuronInterleavingResult> results) {
  std::map<std::size_t, InterleaveRow> rows;  // keyed by label number so K10 sorts after K9
  InterleaveAggregate agg;
  for (const auto& r : results) {
    bool any = false;
    for (const auto& c : r.cells) {
      const auto key = static_cast<std::size_t>(std::stoul(c.label.substr(1)));
      auto& row = rows[key];
      row.label = c.label;
      if (!c.eligible) continue;
      any = true;
      ++row.n_cells;
      row.mu_rho += c.rho;
      if (c.significant) row.pi_significant += 1.0;
    }
    if (any) ++agg.n_neuron;
  }
  if (rows.empty()) throw InvalidArgument("aggregate_interleaving: no cells");
  for (auto& [_, row] : rows) {
    if (row.n_cells == 0) throw InvalidArgument("aggregate_interleaving: no eligible cell for " + row.label);
    row.mu_rho /= static_cast<double>(row.n_cells);
    row.pi_significant = 100.0 * row.pi_significant / static_cast<double>(row.n_cells);
    agg.rows.push_back(row);
  }
  return agg;
}

}  // namespace neurocat
