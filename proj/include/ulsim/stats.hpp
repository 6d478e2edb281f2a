#pragma once

// Cross-run statistics: mean/sd summaries, the I95 interval used in the
// result tables, the Wilcoxon rank-sum test and settling time.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

namespace ulsim::stats {

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // n-1 denominator
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

inline Summary summary(std::span<const double> s) {
  if (s.size() < 2) throw std::invalid_argument("summary: need at least 2 samples");
  const double n = static_cast<double>(s.size());
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : s) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

/// Two-sided 97.5% Student-t quantile.
inline double t975(int dof) {
  if (dof < 1) throw std::invalid_argument("t975: dof must be >= 1");
  return boost::math::quantile(boost::math::students_t(static_cast<double>(dof)), 0.975);
}

/// mu +/- t(0.975, n-1) * sigma. This is a spread interval for one run's
/// outcome, not a confidence interval for the mean (see ci95_mean).
inline Interval i95(double mean, double sd, int n) {
  if (n < 2) throw std::invalid_argument("i95: need at least 2 samples");
  const double half = t975(n - 1) * sd;
  return {mean - half, mean + half};
}

inline Interval i95(std::span<const double> s) {
  const auto [mean, sd] = summary(s);
  return i95(mean, sd, static_cast<int>(s.size()));
}

/// Conventional t interval for the mean: mu +/- t * sigma / sqrt(n).
inline Interval ci95_mean(std::span<const double> s) {
  const auto [mean, sd] = summary(s);
  const double half = t975(static_cast<int>(s.size()) - 1) * sd / std::sqrt(static_cast<double>(s.size()));
  return {mean - half, mean + half};
}

enum class Alternative {
  TwoSided,
  Greater,  // first sample tends to be larger
};

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

/// Midranks (1-based) of the pooled sample, ties averaged.
inline std::vector<double> midranks(std::span<const double> pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double r = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline constexpr std::size_t kExactLimit = 12;

namespace detail {

// Exact null distribution of the doubled rank sum of a size-na subset drawn
// from the given doubled midranks. counts[s] = number of subsets with sum s.
inline std::vector<double> subset_sum_counts(const std::vector<long>& doubled, std::size_t na) {
  const long total = std::accumulate(doubled.begin(), doubled.end(), 0L);
  std::vector<std::vector<double>> dp(na + 1, std::vector<double>(static_cast<std::size_t>(total) + 1, 0.0));
  dp[0][0] = 1.0;
  for (long r : doubled) {
    for (std::size_t k = na; k >= 1; --k) {
      auto& cur = dp[k];
      const auto& prev = dp[k - 1];
      for (long s = total; s >= r; --s) cur[static_cast<std::size_t>(s)] += prev[static_cast<std::size_t>(s - r)];
    }
  }
  return dp[na];
}

}  // namespace detail

/// Mann-Whitney/Wilcoxon rank-sum p-value with midranks for ties. Exact
/// enumeration when the pooled size is at most 12, otherwise the normal
/// approximation with tie and continuity corrections.
inline double wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b,
                                Alternative alt = Alternative::TwoSided) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wilcoxon: empty sample");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = midranks(pooled);
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const std::size_t n = na + nb;

  if (n <= kExactLimit) {
    std::vector<long> doubled(n);
    for (std::size_t i = 0; i < n; ++i) doubled[i] = std::lround(2.0 * ranks[i]);
    long observed = 0;
    for (std::size_t i = 0; i < na; ++i) observed += doubled[i];
    const auto counts = detail::subset_sum_counts(doubled, na);
    const double all = std::accumulate(counts.begin(), counts.end(), 0.0);
    // doubled expected rank sum: na * (n + 1)
    const long center = static_cast<long>(na * (n + 1));
    double tail = 0.0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      if (counts[s] == 0.0) continue;
      const long sl = static_cast<long>(s);
      const bool extreme = alt == Alternative::Greater ? sl >= observed
                                                       : std::labs(sl - center) >= std::labs(observed - center);
      if (extreme) tail += counts[s];
    }
    return std::min(1.0, tail / all);
  }

  double ra = 0.0;
  for (std::size_t i = 0; i < na; ++i) ra += ranks[i];
  const double dna = static_cast<double>(na);
  const double dnb = static_cast<double>(nb);
  const double dn = static_cast<double>(n);
  const double u = ra - dna * (dna + 1.0) / 2.0;
  const double mu = dna * dnb / 2.0;

  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  const double var = dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (var <= 0.0) return 1.0;
  const double sigma = std::sqrt(var);
  if (alt == Alternative::Greater) return normal_sf((u - mu - 0.5) / sigma);
  const double z = std::max(0.0, std::fabs(u - mu) - 0.5) / sigma;
  return std::min(1.0, 2.0 * normal_sf(z));
}

/// First time after which every sample stays within band*|final| of the
/// final sample. A zero final value uses an absolute band instead.
inline double settling_time(std::span<const std::pair<double, double>> series, double band = 0.05) {
  if (series.empty()) throw std::invalid_argument("settling_time: empty series");
  const double final_value = series.back().second;
  const double tol = final_value == 0.0 ? band : band * std::fabs(final_value);
  std::size_t first = series.size() - 1;
  for (std::size_t i = series.size(); i-- > 0;) {
    if (std::fabs(series[i].second - final_value) > tol + 1e-12) break;
    first = i;
  }
  return series[first].first;
}

}  // namespace ulsim::stats
