#pragma once

// Small statistical helpers shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <vector>

namespace diffcast::testing {

/// Survival function of the Kolmogorov distribution, P(K > x).
inline double kolmogorov_sf(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 0.2) return 1.0; // series below converges slowly; the tail is 1 to double precision
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test, asymptotic p-value with the
/// Stephens small-sample correction.
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(i / n - j / m));
  }
  const double en = std::sqrt(n * m / (n + m));
  return {d, kolmogorov_sf((en + 0.12 + 0.11 / en) * d)};
}

inline double mean(const std::vector<double> &v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double> &v) {
  const double mu = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return s / static_cast<double>(v.size() - 1);
}

} // namespace diffcast::testing
