#include "neurocat/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "neurocat/distributions.hpp"
#include "neurocat/errors.hpp"

namespace neurocat {

std::string_view to_string(TestMethod m) {
  switch (m) {
    case TestMethod::kruskal_wallis: return "kruskal_wallis";
    case TestMethod::chi2_goodness_of_fit: return "chi2_gof";
    case TestMethod::jarque_bera: return "jarque_bera";
    case TestMethod::lilliefors: return "lilliefors";
    case TestMethod::levene: return "levene";
    case TestMethod::bartlett: return "bartlett";
  }
  return "unknown";
}

double Ranking::tie_sum() const {
  double s = 0.0;
  for (auto t : tie_sizes) {
    const double td = static_cast<double>(t);
    s += td * td * td - td;
  }
  return s;
}

Ranking rank_with_ties(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("rank_with_ties: empty input");
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  Ranking r;
  r.ranks.assign(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 (0-based) share the mid-rank
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t p = i; p < j; ++p) r.ranks[order[p]] = mid;
    r.tie_sizes.push_back(j - i);
    i = j;
  }
  return r;
}

namespace {

struct PooledRanks {
  std::vector<double> mean_rank;  // per group
  std::vector<std::size_t> sizes;
  double n_total = 0.0;
  double tie_sum = 0.0;
};

PooledRanks pool_and_rank(const Groups& groups) {
  if (groups.size() < 2) throw InvalidArgument("need at least two groups");
  std::vector<double> pooled;
  PooledRanks out;
  for (const auto& g : groups) {
    if (g.empty()) throw InvalidArgument("empty group");
    for (double x : g) {
      if (!std::isfinite(x)) throw InvalidArgument("non-finite value");
    }
    pooled.insert(pooled.end(), g.begin(), g.end());
    out.sizes.push_back(g.size());
  }
  const auto ranking = rank_with_ties(pooled);
  out.n_total = static_cast<double>(pooled.size());
  out.tie_sum = ranking.tie_sum();
  if (ranking.tie_sizes.size() == 1) throw DegenerateError("all pooled values are identical");
  std::size_t offset = 0;
  for (std::size_t s : out.sizes) {
    double sum = 0.0;
    for (std::size_t i = 0; i < s; ++i) sum += ranking.ranks[offset + i];
    out.mean_rank.push_back(sum / static_cast<double>(s));
    offset += s;
  }
  return out;
}

}  // namespace

TestResult kruskal_wallis(const Groups& groups) {
  const auto pr = pool_and_rank(groups);
  const double n = pr.n_total;
  const double centre = (n + 1.0) / 2.0;
  // Sum of n_i (Rbar_i - (N+1)/2)^2 equals the rank-sum form minus its
  // constant, and is exactly zero when every mean rank is the centre.
  double ss = 0.0;
  for (std::size_t i = 0; i < pr.sizes.size(); ++i) {
    const double dev = pr.mean_rank[i] - centre;
    ss += static_cast<double>(pr.sizes[i]) * dev * dev;
  }
  const double correction = 1.0 - pr.tie_sum / (n * n * n - n);
  if (!(correction > 0.0)) throw DegenerateError("tie correction is zero");
  const double h = 12.0 / (n * (n + 1.0)) * ss / correction;

  TestResult r;
  r.method = TestMethod::kruskal_wallis;
  r.statistic = h;
  r.df = static_cast<double>(groups.size() - 1);
  r.p_value = std::clamp(dist::chi2_sf(h, r.df), 0.0, 1.0);
  return r;
}

std::vector<PostHocResult> dunn_posthoc(const Groups& groups, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  const auto pr = pool_and_rank(groups);
  const double n = pr.n_total;
  const double k = static_cast<double>(groups.size());
  const double base = n * (n + 1.0) / 12.0 - pr.tie_sum / (12.0 * (n - 1.0));
  if (!(base > 0.0)) throw DegenerateError("Dunn variance is zero");
  const double adjusted = alpha / (k * (k - 1.0));

  std::vector<PostHocResult> out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      const double se = std::sqrt(base * (1.0 / static_cast<double>(pr.sizes[i]) + 1.0 / static_cast<double>(pr.sizes[j])));
      PostHocResult r;
      r.pair = {i, j};
      r.z = (pr.mean_rank[j] - pr.mean_rank[i]) / se;
      r.p_value = std::min(1.0, 2.0 * dist::normal_sf(std::fabs(r.z)));
      r.adjusted_alpha = adjusted;
      r.significant = r.p_value < adjusted;
      out.push_back(r);
    }
  }
  return out;
}

double mean(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("mean of empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) throw InvalidArgument("sample variance needs n >= 2");
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

double cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw InvalidArgument("cohens_d needs both groups of size >= 2");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double pooled = ((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / (na + nb - 2.0);
  if (!(pooled > 0.0)) throw DegenerateError("cohens_d: pooled variance is zero");
  return (mean(b) - mean(a)) / std::sqrt(pooled);
}

TestResult chi2_gof(std::span<const double> observed, std::span<const double> expected) {
  if (observed.size() != expected.size()) throw InvalidArgument("chi2_gof: length mismatch");
  if (observed.size() < 2) throw InvalidArgument("chi2_gof: need at least two cells");
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (!(expected[i] > 0.0)) throw InvalidArgument("chi2_gof: expected counts must be > 0");
    if (!(observed[i] >= 0.0)) throw InvalidArgument("chi2_gof: observed counts must be >= 0");
    const double diff = observed[i] - expected[i];
    stat += diff * diff / expected[i];
  }
  TestResult r;
  r.method = TestMethod::chi2_goodness_of_fit;
  r.statistic = stat;
  r.df = static_cast<double>(observed.size() - 1);
  r.p_value = std::clamp(dist::chi2_sf(stat, r.df), 0.0, 1.0);
  return r;
}

double risk_ratio(double n, double m) {
  if (!(m > 0.0)) throw InvalidArgument("risk_ratio: m must be > 0");
  return n / m;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InvalidArgument("quantile of empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("quantile level must lie in [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::span<const double> values, double q) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, q);
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw InvalidArgument("cosine_similarity: dimension mismatch");
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw InvalidArgument("cosine_similarity: zero vector");
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

double mean_pairwise_cosine(std::span<const std::string> tokens, const EmbeddingTable& emb) {
  std::vector<const std::vector<double>*> rows;
  for (const auto& t : tokens) {
    if (const auto* v = emb.find(t)) rows.push_back(v);
  }
  if (rows.size() < 2) throw InvalidArgument("mean_pairwise_cosine: fewer than two tokens with embeddings");
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      sum += cosine_similarity(*rows[i], *rows[j]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

VarianceHomogeneity variance_homogeneity(const Groups& groups) {
  if (groups.size() < 2) throw InvalidArgument("variance_homogeneity: need at least two groups");
  const double k = static_cast<double>(groups.size());
  double n_total = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw InvalidArgument("variance_homogeneity: every group needs n >= 2");
    n_total += static_cast<double>(g.size());
  }

  // Levene: one-way ANOVA on |x - mean_i|.
  std::vector<std::vector<double>> dev(groups.size());
  std::vector<double> dev_mean(groups.size());
  double grand = 0.0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const double m = mean(groups[i]);
    for (double x : groups[i]) dev[i].push_back(std::fabs(x - m));
    dev_mean[i] = mean(dev[i]);
    grand += dev_mean[i] * static_cast<double>(groups[i].size());
  }
  grand /= n_total;
  double between = 0.0, within = 0.0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    between += static_cast<double>(dev[i].size()) * (dev_mean[i] - grand) * (dev_mean[i] - grand);
    for (double z : dev[i]) within += (z - dev_mean[i]) * (z - dev_mean[i]);
  }
  VarianceHomogeneity out;
  out.levene.method = TestMethod::levene;
  out.levene.df = k - 1.0;
  out.levene.df2 = n_total - k;
  if (within == 0.0) {
    if (between != 0.0) throw DegenerateError("Levene: no spread of deviations within groups");
    bool any_spread = false;
    for (const auto& d : dev) any_spread |= std::any_of(d.begin(), d.end(), [](double z) { return z != 0.0; });
    if (!any_spread) throw DegenerateError("Levene: every group is constant");
  }
  out.levene.statistic = within == 0.0 ? 0.0 : (n_total - k) / (k - 1.0) * between / within;
  out.levene.p_value = std::clamp(dist::f_sf(out.levene.statistic, out.levene.df, out.levene.df2), 0.0, 1.0);

  // Bartlett.
  double pooled_num = 0.0, sum_log = 0.0, sum_inv = 0.0;
  for (const auto& g : groups) {
    const double ni1 = static_cast<double>(g.size()) - 1.0;
    const double v = sample_variance(g);
    if (!(v > 0.0)) throw DegenerateError("Bartlett: a group has zero variance");
    pooled_num += ni1 * v;
    sum_log += ni1 * std::log(v);
    sum_inv += 1.0 / ni1;
  }
  const double pooled = pooled_num / (n_total - k);
  const double num = (n_total - k) * std::log(pooled) - sum_log;
  const double den = 1.0 + (sum_inv - 1.0 / (n_total - k)) / (3.0 * (k - 1.0));
  out.bartlett.method = TestMethod::bartlett;
  out.bartlett.statistic = std::max(0.0, num / den);
  out.bartlett.df = k - 1.0;
  out.bartlett.p_value = std::clamp(dist::chi2_sf(out.bartlett.statistic, out.bartlett.df), 0.0, 1.0);
  return out;
}

}  // namespace neurocat
