#pragma once

#include <cmath>
#include <span>

#include "treerl/common.hpp"

namespace treerl {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
  long n = 0;
};

inline MeanStd mean_std(std::span<const double> xs) {
  MeanStd out;
  out.n = static_cast<long>(xs.size());
  if (out.n == 0) return out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(out.n);
  double var = 0.0;
  for (double x : xs) var += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(var / static_cast<double>(out.n));
  return out;
}

namespace detail {

// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 200;
  constexpr double kEps = 3e-14;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

/// One-sided p-value P(T_df > t) for Student's t.
inline double student_t_sf(double t, double df) {
  if (df <= 0.0) throw ContractViolation("student_t_sf: df must be > 0");
  const double x = df / (df + t * t);
  const double tail = 0.5 * detail::incomplete_beta(df / 2.0, 0.5, x);
  return t >= 0.0 ? tail : 1.0 - tail;
}

struct PairedTTest {
  double t = 0.0;
  double p_one_sided = 1.0;  // P(mean difference > 0)
  double mean_difference = 0.0;
};

/// Paired one-sided t-test that mean(a - b) > 0.
inline PairedTTest paired_t_test(std::span<const double> a,
                                 std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2)
    throw ContractViolation("paired_t_test: need matched samples, n >= 2");
  const long n = static_cast<long>(a.size());
  double mean = 0.0;
  for (long i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (long i = 0; i < n; ++i) {
    const double d = a[i] - b[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n - 1);  // sample variance
  PairedTTest result;
  result.mean_difference = mean;
  if (var == 0.0) {
    result.t = mean > 0.0 ? INFINITY : mean < 0.0 ? -INFINITY : 0.0;
    result.p_one_sided = mean > 0.0 ? 0.0 : 1.0;
    return result;
  }
  result.t = mean / std::sqrt(var / static_cast<double>(n));
  result.p_one_sided = student_t_sf(result.t, static_cast<double>(n - 1));
  return result;
}

}  // namespace treerl
