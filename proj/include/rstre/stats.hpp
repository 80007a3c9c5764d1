#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "error.hpp"

namespace rstre {

struct Estimate {
  double mean = 0;
  double stderr_ = 0;
  std::size_t count = 0;
};

inline Estimate mean_stderr(std::span<const double> x) {
  Estimate e;
  e.count = x.size();
  if (x.empty()) return e;
  // Fixed summation order keeps results bit-stable for a given input order.
  double s = 0;
  for (double v : x) s += v;
  e.mean = s / static_cast<double>(x.size());
  if (x.size() < 2) return e;
  double ss = 0;
  for (double v : x) ss += (v - e.mean) * (v - e.mean);
  e.stderr_ = std::sqrt(ss / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
  return e;
}

inline double median(std::vector<double> x) {
  require(!x.empty(), ErrorKind::InvalidArgument, "median of empty sample");
  std::sort(x.begin(), x.end());
  std::size_t h = x.size() / 2;
  return x.size() % 2 ? x[h] : 0.5 * (x[h - 1] + x[h]);
}

struct LinearFit {
  double slope = 0;
  double intercept = 0;
};

inline LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorKind::InvalidArgument,
          "least squares needs two or more points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

inline double chi_square_pvalue(double statistic, double dof) {
  if (statistic <= 0) return 1;
  return boost::math::gamma_q(dof / 2, statistic / 2);
}

struct ChiSquare {
  double statistic = 0;
  double dof = 0;
  double pvalue = 1;
};

/// Goodness of fit of observed counts to probabilities (cells with zero
/// probability must have zero counts).
inline ChiSquare chi_square_gof(std::span<const std::size_t> counts, std::span<const double> prob) {
  require(counts.size() == prob.size(), ErrorKind::InvalidArgument, "size mismatch");
  double total = 0;
  for (auto c : counts) total += static_cast<double>(c);
  ChiSquare r;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    double expect = total * prob[i];
    if (expect <= 0) {
      if (counts[i] > 0) r.statistic = std::numeric_limits<double>::infinity();
      continue;
    }
    ++cells;
    double d = static_cast<double>(counts[i]) - expect;
    r.statistic += d * d / expect;
  }
  r.dof = cells > 1 ? static_cast<double>(cells - 1) : 1;
  r.pvalue = chi_square_pvalue(r.statistic, r.dof);
  return r;
}

/// Asymptotic Kolmogorov tail Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
inline double kolmogorov_tail(double lambda) {
  if (lambda < 1e-3) return 1;
  double s = 0;
  for (int k = 1; k <= 200; ++k) {
    double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 ? 2 : -2) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0;
  double pvalue = 1;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value (with the
/// usual small-sample correction of the argument).
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), ErrorKind::InvalidArgument, "empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  double ne = na * nb / (na + nb);
  double sq = std::sqrt(ne);
  KsResult r;
  r.statistic = d;
  r.pvalue = kolmogorov_tail((sq + 0.12 + 0.11 / sq) * d);
  return r;
}

}  // namespace rstre
