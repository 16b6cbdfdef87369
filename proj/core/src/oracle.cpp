#include "neurocat/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include "neurocat/errors.hpp"
#include "neurocat/interleaving.hpp"
#include "neurocat/random.hpp"
#include "neurocat/stats.hpp"

namespace neurocat::oracle {

double kruskal_h(const Groups& groups) {
  std::vector<double> pooled;
  for (const auto& g : groups) pooled.insert(pooled.end(), g.begin(), g.end());
  const double n = static_cast<double>(pooled.size());
  auto rank_of = [&](double x) {
    double less = 0.0, equal = 0.0;
    for (double y : pooled) {
      if (y < x) less += 1.0;
      if (y == x) equal += 1.0;
    }
    return less + (equal + 1.0) / 2.0;
  };
  double sum = 0.0;
  for (const auto& g : groups) {
    double r = 0.0;
    for (double x : g) r += rank_of(x);
    sum += r * r / static_cast<double>(g.size());
  }
  const double h = 12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0);
  std::map<double, double> counts;
  for (double x : pooled) counts[x] += 1.0;
  double ties = 0.0;
  for (const auto& [_, t] : counts) ties += t * t * t - t;
  return h / (1.0 - ties / (n * n * n - n));
}

double kruskal_permutation_p(const Groups& groups, std::size_t replicates, std::uint64_t seed) {
  const double observed = kruskal_h(groups);
  std::vector<double> pooled;
  std::vector<std::size_t> sizes;
  for (const auto& g : groups) {
    pooled.insert(pooled.end(), g.begin(), g.end());
    sizes.push_back(g.size());
  }
  Rng rng(seed);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < replicates; ++r) {
    rng.shuffle(pooled.begin(), pooled.end());
    Groups perm;
    std::size_t pos = 0;
    for (auto s : sizes) {
      perm.emplace_back(pooled.begin() + static_cast<std::ptrdiff_t>(pos), pooled.begin() + static_cast<std::ptrdiff_t>(pos + s));
      pos += s;
    }
    if (kruskal_h(perm) >= observed - 1e-9) ++hits;
  }
  return (static_cast<double>(hits) + 1.0) / (static_cast<double>(replicates) + 1.0);
}

double kruskal_exact_p(const Groups& groups) {
  const double observed = kruskal_h(groups);
  std::vector<double> pooled;
  std::vector<std::size_t> remaining;
  for (const auto& g : groups) {
    pooled.insert(pooled.end(), g.begin(), g.end());
    remaining.push_back(g.size());
  }
  if (pooled.size() > 14) throw InvalidArgument("kruskal_exact_p: N too large to enumerate");
  Groups current(groups.size());
  double total = 0.0, hits = 0.0;
  std::function<void(std::size_t)> assign = [&](std::size_t pos) {
    if (pos == pooled.size()) {
      total += 1.0;
      if (kruskal_h(current) >= observed - 1e-9) hits += 1.0;
      return;
    }
    for (std::size_t g = 0; g < current.size(); ++g) {
      if (remaining[g] == 0) continue;
      --remaining[g];
      current[g].push_back(pooled[pos]);
      assign(pos + 1);
      current[g].pop_back();
      ++remaining[g];
    }
  };
  assign(0);
  return hits / total;
}

double within_ss(const Matrix& points, const std::vector<std::vector<std::size_t>>& clusters) {
  double total = 0.0;
  for (const auto& c : clusters) {
    for (std::size_t d = 0; d < points.cols(); ++d) {
      double m = 0.0;
      for (auto i : c) m += points(i, d);
      m /= static_cast<double>(c.size());
      for (auto i : c) total += (points(i, d) - m) * (points(i, d) - m);
    }
  }
  return total;
}

std::vector<std::vector<std::size_t>> canonical(std::vector<std::vector<std::size_t>> clusters) {
  for (auto& c : clusters) std::sort(c.begin(), c.end());
  std::sort(clusters.begin(), clusters.end());
  return clusters;
}

std::vector<std::vector<std::size_t>> ward_greedy(const Matrix& points, std::size_t k) {
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < points.rows(); ++i) clusters.push_back({i});
  while (clusters.size() > k) {
    // clusters stay ordered by smallest member
    std::size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        auto merged = clusters[i];
        merged.insert(merged.end(), clusters[j].begin(), clusters[j].end());
        const double inc = within_ss(points, {merged}) - within_ss(points, {clusters[i]}) - within_ss(points, {clusters[j]});
        if (inc < best) {
          best = inc;
          bi = i;
          bj = j;
        }
      }
    }
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  return canonical(std::move(clusters));
}

std::vector<std::vector<std::size_t>> min_variance_partition(const Matrix& points, std::size_t k) {
  const std::size_t n = points.rows();
  if (n < k || k == 0) throw InvalidArgument("min_variance_partition: need n >= k >= 1");
  std::vector<std::size_t> label(n, 0);
  std::vector<std::vector<std::size_t>> best;
  double best_ss = std::numeric_limits<double>::infinity();
  // restricted growth strings with exactly k blocks
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t used) {
    if (n - i < k - used) return;
    if (i == n) {
      if (used != k) return;
      std::vector<std::vector<std::size_t>> c(k);
      for (std::size_t p = 0; p < n; ++p) c[label[p]].push_back(p);
      const double ss = within_ss(points, c);
      if (ss < best_ss) {
        best_ss = ss;
        best = c;
      }
      return;
    }
    for (std::size_t b = 0; b <= used && b < k; ++b) {
      label[i] = b;
      rec(i + 1, std::max(used, b + 1));
    }
  };
  rec(0, 0);
  return canonical(std::move(best));
}

bool contiguous_1d(std::span<const double> values, const std::vector<std::vector<std::size_t>>& clusters) {
  for (std::size_t a = 0; a < clusters.size(); ++a) {
    for (std::size_t b = 0; b < clusters.size(); ++b) {
      if (a == b) continue;
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (auto i : clusters[a]) {
        lo = std::min(lo, values[i]);
        hi = std::max(hi, values[i]);
      }
      for (auto i : clusters[b])
        if (values[i] > lo && values[i] < hi) return false;
    }
  }
  return true;
}

double mean_pairwise_cosine(const std::vector<std::vector<double>>& vectors) {
  double sum = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t j = 0; j < vectors.size(); ++j) {
      if (j <= i) continue;
      double dot = 0.0, a = 0.0, b = 0.0;
      for (std::size_t d = 0; d < vectors[i].size(); ++d) {
        dot += vectors[i][d] * vectors[j][d];
        a += vectors[i][d] * vectors[i][d];
        b += vectors[j][d] * vectors[j][d];
      }
      sum += dot / std::sqrt(a * b);
      pairs += 1.0;
    }
  }
  return sum / pairs;
}

std::size_t interleave_count(const Partition& partition, std::size_t g) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& t : partition.groups[g].members) {
    lo = std::min(lo, t.activation);
    hi = std::max(hi, t.activation);
  }
  std::size_t n = 0;
  for (const auto& group : partition.groups)
    for (const auto& t : group.members)
      if (t.activation >= lo && t.activation <= hi) ++n;
  return n;
}

bool Report::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed || !c.gated; });
}

std::string Report::to_text() const {
  std::ostringstream o;
  o.precision(3);
  for (const auto& c : checks) {
    o << (c.passed ? "PASS " : c.gated ? "FAIL " : "XFAIL ") << c.name << "  instances=" << c.instances << " max_dev=" << std::scientific
      << c.max_abs_deviation << " tol=" << c.tolerance << std::defaultfloat;
    if (!c.detail.empty()) o << "  " << c.detail;
    o << '\n';
  }
  const auto xfail = std::count_if(checks.begin(), checks.end(), [](const Check& c) { return !c.passed && !c.gated; });
  if (!passed())
    o << "oracle checks FAILED\n";
  else if (xfail)
    o << "all gated oracle checks passed; " << xfail << " ungated check(s) outside tolerance (XFAIL)\n";
  else
    o << "all oracle checks passed\n";
  return o.str();
}

namespace {

Matrix random_points(Rng& rng, std::size_t n, std::size_t d) {
  Matrix m(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) m(r, c) = rng.normal();
  return m;
}

// Small KW instance: 2-3 groups of 3-6 values, N <= 12, values on a coarse
// grid so ties occur.
Groups random_kw_instance(Rng& rng) {
  const std::size_t k = 2 + rng.index(2);
  Groups g(k);
  std::size_t total = 0;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t size = 3 + rng.index(k == 2 ? 4 : 2);
    if (total + size > 12) size = 12 - total;
    total += size;
    const double shift = rng.uniform() * 1.5;
    for (std::size_t j = 0; j < size; ++j) g[i].push_back(std::round((rng.normal() + shift * static_cast<double>(i)) * 4.0) / 4.0);
  }
  return g;
}

bool all_equal(const Groups& g) {
  const double first = g.front().front();
  for (const auto& grp : g)
    for (double x : grp)
      if (x != first) return false;
  return true;
}

}  // namespace

Report run_suite(std::uint64_t seed) {
  Report report;
  Rng rng(seed);

  {
    Check h{"kruskal_wallis H vs rank-sum formula", false, 0, 0.0, 1e-9, {}};
    Check p{"kruskal_wallis p vs exact permutation p (N <= 12)", false, 0, 0.0, 0.02, {}};
    p.gated = false;
    for (int t = 0; t < 200; ++t) {
      auto g = random_kw_instance(rng);
      if (all_equal(g)) continue;
      const auto kw = kruskal_wallis(g);
      h.max_abs_deviation = std::max(h.max_abs_deviation, std::fabs(kw.statistic - kruskal_h(g)));
      p.max_abs_deviation = std::max(p.max_abs_deviation, std::fabs(kw.p_value - kruskal_exact_p(g)));
      ++h.instances;
      ++p.instances;
    }
    h.passed = h.max_abs_deviation <= h.tolerance;
    p.passed = p.max_abs_deviation <= p.tolerance;
    if (!p.passed) p.detail = "chi-square approximation of a discrete permutation law; not a defect";
    report.checks.push_back(h);
    report.checks.push_back(p);
  }

  {
    // The same comparison at the smallest size the pipeline admits (every
    // group >= 6). Reported, not gated: it measures the approximation.
    Check p{"kruskal_wallis p vs Monte Carlo permutation p (5 groups of 6)", false, 0, 0.0, 0.02, {}};
    p.gated = false;
    for (int t = 0; t < 20; ++t) {
      Groups g(5);
      for (std::size_t i = 0; i < 5; ++i)
        for (int j = 0; j < 6; ++j) g[i].push_back(rng.normal() + 0.25 * static_cast<double>(i) * rng.uniform());
      const double mc = kruskal_permutation_p(g, 20000, derive_seed(seed, static_cast<std::uint64_t>(t)));
      p.max_abs_deviation = std::max(p.max_abs_deviation, std::fabs(kruskal_wallis(g).p_value - mc));
      ++p.instances;
    }
    p.passed = p.max_abs_deviation <= p.tolerance;
    if (!p.passed) p.detail = "chi-square approximation error at N = 30";
    report.checks.push_back(p);
  }

  {
    // chi-square p against closed forms: df=1 -> erfc(sqrt(x/2)), df=2 -> exp(-x/2)
    Check c{"chi2_gof statistic and p vs closed forms", false, 0, 0.0, 1e-9, {}};
    for (int t = 0; t < 200; ++t) {
      const std::size_t cells = 2 + rng.index(2);
      std::vector<double> obs(cells), exp(cells);
      for (std::size_t i = 0; i < cells; ++i) {
        obs[i] = static_cast<double>(rng.index(60));
        exp[i] = 1.0 + 59.0 * rng.uniform();
      }
      double stat = 0.0;
      for (std::size_t i = 0; i < cells; ++i) stat += (obs[i] - exp[i]) * (obs[i] - exp[i]) / exp[i];
      const double closed = cells == 2 ? std::erfc(std::sqrt(stat / 2.0)) : std::exp(-stat / 2.0);
      const auto r = chi2_gof(obs, exp);
      c.max_abs_deviation = std::max({c.max_abs_deviation, std::fabs(r.statistic - stat) / std::max(1.0, stat),
                                      std::fabs(r.p_value - closed)});
      ++c.instances;
    }
    c.passed = c.max_abs_deviation <= c.tolerance;
    report.checks.push_back(c);
  }

  {
    Check c{"cohens_d vs two-pass formula", false, 0, 0.0, 1e-9, {}};
    for (int t = 0; t < 200; ++t) {
      std::vector<double> a(2 + rng.index(20)), b(2 + rng.index(20));
      for (auto& x : a) x = rng.normal();
      for (auto& x : b) x = rng.normal(0.5, 2.0);
      auto mv = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        return std::pair{m, ss};
      };
      auto [ma, ssa] = mv(a);
      auto [mb, ssb] = mv(b);
      const double expected = (mb - ma) / std::sqrt((ssa + ssb) / static_cast<double>(a.size() + b.size() - 2));
      c.max_abs_deviation = std::max(c.max_abs_deviation, std::fabs(cohens_d(a, b) - expected));
      ++c.instances;
    }
    c.passed = c.max_abs_deviation <= c.tolerance;
    report.checks.push_back(c);
  }

  {
    Check c{"ward cut vs brute-force greedy merge replay (n <= 8, k <= 3)", false, 0, 0.0, 0.0, {}};
    std::size_t mismatches = 0, global_agree = 0;
    for (int t = 0; t < 300; ++t) {
      const std::size_t n = 3 + rng.index(6);
      const std::size_t k = 1 + rng.index(std::min<std::size_t>(3, n));
      const auto pts = random_points(rng, n, 1 + rng.index(3));
      const auto got = canonical(ward_hclust(pts, k).clusters);
      if (got != ward_greedy(pts, k)) ++mismatches;
      if (std::fabs(within_ss(pts, got) - within_ss(pts, min_variance_partition(pts, k))) < 1e-12) ++global_agree;
      ++c.instances;
    }
    c.max_abs_deviation = static_cast<double>(mismatches);
    c.passed = mismatches == 0;
    c.detail = "global-optimum agreement " + std::to_string(global_agree) + "/" + std::to_string(c.instances);
    report.checks.push_back(c);
  }

  {
    Check c{"1-D ward segments are contiguous intervals", false, 0, 0.0, 0.0, {}};
    std::size_t bad = 0;
    for (int t = 0; t < 500; ++t) {
      const std::size_t n = 8 + rng.index(93);
      const std::size_t k = 2 + rng.index(4);
      std::vector<double> v(n);
      for (auto& x : v) x = rng.normal() * (rng.uniform() < 0.5 ? 1.0 : 3.0);
      const auto w = ward_hclust(standardize(Matrix::column(v)), k);
      if (!contiguous_1d(v, w.clusters)) ++bad;
      ++c.instances;
    }
    c.max_abs_deviation = static_cast<double>(bad);
    c.passed = bad == 0;
    report.checks.push_back(c);
  }

  {
    Check c{"mean pairwise cosine vs double loop", false, 0, 0.0, 1e-12, {}};
    for (int t = 0; t < 100; ++t) {
      const std::size_t n = 2 + rng.index(40), d = 1 + rng.index(16);
      EmbeddingTable emb(d);
      std::vector<std::string> tokens;
      std::vector<std::vector<double>> raw;
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(d);
        for (auto& x : v) x = rng.normal() + 0.3;
        tokens.push_back("tok" + std::to_string(i));
        raw.push_back(v);
        emb.add(tokens.back(), v);
      }
      c.max_abs_deviation =
          std::max(c.max_abs_deviation, std::fabs(neurocat::mean_pairwise_cosine(tokens, emb) - mean_pairwise_cosine(raw)));
      ++c.instances;
    }
    c.passed = c.max_abs_deviation <= c.tolerance;
    report.checks.push_back(c);
  }

  {
    Check c{"interleaving n(K_i) vs scan", false, 0, 0.0, 0.0, {}};
    std::size_t bad = 0;
    for (int t = 0; t < 1000; ++t) {
      const std::size_t n = 5 + rng.index(96), k = 2 + rng.index(4);
      std::vector<std::vector<TokenActivation>> groups(k);
      for (std::size_t i = 0; i < n; ++i) {
        // coarse grid so boundary ties are common
        const double a = std::round(rng.normal() * 8.0) / 8.0;
        groups[i < k ? i : rng.index(k)].push_back({"t" + std::to_string(i), a});
      }
      const auto part = make_partition(PartitionKind::categorical, std::move(groups));
      for (std::size_t g = 0; g < part.groups.size(); ++g) {
        if (interleave_cell(part, g).n != interleave_count(part, g)) ++bad;
        ++c.instances;
      }
    }
    c.max_abs_deviation = static_cast<double>(bad);
    c.passed = bad == 0;
    report.checks.push_back(c);
  }
  return report;
}

}  // namespace neurocat::oracle
