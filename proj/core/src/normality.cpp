#include <algorithm>
#include <cmath>

#include "neurocat/distributions.hpp"
#include "neurocat/errors.hpp"
#include "neurocat/random.hpp"
#include "neurocat/stats.hpp"

namespace neurocat {

namespace {

struct Moments {
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
};

Moments central_moments(std::span<const double> v) {
  const double m = mean(v);
  Moments out;
  for (double x : v) {
    const double d = x - m;
    const double d2 = d * d;
    out.m2 += d2;
    out.m3 += d2 * d;
    out.m4 += d2 * d2;
  }
  const double n = static_cast<double>(v.size());
  out.m2 /= n;
  out.m3 /= n;
  out.m4 /= n;
  if (!(out.m2 > 0.0)) throw DegenerateError("sample has zero variance");
  return out;
}

double ks_against_normal(std::vector<double>& sample) {
  const double n = static_cast<double>(sample.size());
  double m = 0.0;
  for (double x : sample) m += x;
  m /= n;
  double ss = 0.0;
  for (double x : sample) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) throw DegenerateError("sample has zero variance");
  std::sort(sample.begin(), sample.end());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = dist::normal_cdf((sample[i] - m) / sd);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

}  // namespace

double lilliefors_statistic(std::span<const double> values) {
  if (values.size() < 4) throw InvalidArgument("Lilliefors test needs n >= 4");
  std::vector<double> v(values.begin(), values.end());
  return ks_against_normal(v);
}

LillieforsNull::LillieforsNull(std::size_t n, std::size_t replicates, std::uint64_t seed) : n_(n) {
  if (n < 4) throw InvalidArgument("Lilliefors test needs n >= 4");
  if (replicates == 0) throw InvalidArgument("Lilliefors null needs at least one replicate");
  Rng rng(seed);
  std::vector<double> sample(n);
  sorted_.reserve(replicates);
  for (std::size_t r = 0; r < replicates; ++r) {
    for (auto& x : sample) x = rng.normal();
    sorted_.push_back(ks_against_normal(sample));
  }
  std::sort(sorted_.begin(), sorted_.end());
}

double LillieforsNull::p_value(double d) const {
  const auto at_least = static_cast<double>(sorted_.end() - std::lower_bound(sorted_.begin(), sorted_.end(), d));
  return (at_least + 1.0) / (static_cast<double>(sorted_.size()) + 1.0);
}

TestResult jarque_bera(std::span<const double> values) {
  if (values.size() < 8) throw InvalidArgument("Jarque-Bera needs n >= 8");
  const auto mo = central_moments(values);
  const double s = mo.m3 / std::pow(mo.m2, 1.5);
  const double k = mo.m4 / (mo.m2 * mo.m2);
  const double n = static_cast<double>(values.size());
  TestResult r;
  r.method = TestMethod::jarque_bera;
  r.statistic = n / 6.0 * (s * s + (k - 3.0) * (k - 3.0) / 4.0);
  r.df = 2.0;
  r.p_value = std::clamp(dist::chi2_sf(r.statistic, 2.0), 0.0, 1.0);
  return r;
}

NormalityReport normality_battery(std::span<const double> values, const NormalityOptions& options) {
  if (values.size() < 4) throw InvalidArgument("normality battery needs n >= 4");
  NormalityReport rep;
  const auto mo = central_moments(values);
  rep.skewness = mo.m3 / std::pow(mo.m2, 1.5);
  rep.excess_kurtosis = mo.m4 / (mo.m2 * mo.m2) - 3.0;
  if (values.size() >= 8) rep.jarque_bera = jarque_bera(values);

  TestResult lf;
  lf.method = TestMethod::lilliefors;
  lf.statistic = lilliefors_statistic(values);
  if (options.null_table && options.null_table->n() == values.size()) {
    lf.p_value = options.null_table->p_value(lf.statistic);
  } else {
    lf.p_value = LillieforsNull(values.size(), options.replicates, options.seed).p_value(lf.statistic);
  }
  rep.lilliefors = lf;

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  rep.qq.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    rep.qq.push_back({dist::normal_quantile((static_cast<double>(i) + 0.5) / n), sorted[i]});
  }
  return rep;
}

}  // namespace neurocat
