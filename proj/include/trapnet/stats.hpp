#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "trapnet/rng.hpp"

namespace trapnet {

/// Two-sided standard normal quantile for the given confidence level.
inline double normal_critical(double confidence) {
  boost::math::normal z;
  return boost::math::quantile(z, 0.5 + 0.5 * confidence);
}

/// Wilson score interval for k successes in n trials.
inline std::pair<double, double> wilson_interval(std::size_t k, std::size_t n, double confidence = 0.99) {
  if (n == 0) return {0.0, 1.0};
  const double z = normal_critical(confidence);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double denom = 1.0 + z * z / nn;
  const double centre = (p + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

/// Upper tail probability of the chi-square law.
inline double chi_square_sf(double x, double dof) {
  if (!(x > 0.0)) return 1.0;
  boost::math::chi_squared d(dof);
  return boost::math::cdf(boost::math::complement(d, x));
}

/// Pearson statistic for observed counts against expected probabilities.
inline double pearson_statistic(const std::vector<double>& observed, const std::vector<double>& probs) {
  double n = 0.0;
  for (double o : observed) n += o;
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = n * probs[i];
    if (e > 0.0) stat += (observed[i] - e) * (observed[i] - e) / e;
  }
  return stat;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double standard_error(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

/// Percentile bootstrap interval for the mean of `v`, or of v - w when `w`
/// is given (paired resampling, equal lengths).
inline std::pair<double, double> bootstrap_mean_interval(const std::vector<double>& v, RngStream rng, std::size_t resamples = 1000,
                                                         double confidence = 0.95, const std::vector<double>* w = nullptr) {
  const std::size_t n = v.size();
  if (n == 0) return {0.0, 0.0};
  std::vector<double> stats;
  stats.reserve(resamples);
  for (std::size_t b = 0; b < resamples; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = rng.below(n);
      s += w ? v[j] - (*w)[j] : v[j];
    }
    stats.push_back(s / static_cast<double>(n));
  }
  std::sort(stats.begin(), stats.end());
  const double lo_q = 0.5 * (1.0 - confidence), hi_q = 1.0 - lo_q;
  auto at = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(resamples - 1)));
    return stats[std::min(idx, resamples - 1)];
  };
  return {at(lo_q), at(hi_q)};
}

}  // namespace trapnet
