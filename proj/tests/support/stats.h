#pragma once

// Small self-contained statistics helpers for the test suites.  The
// chi-squared p-value goes through the regularized upper incomplete gamma
// function, computed independently of anything in the library under test.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace testsupport {

namespace detail {

inline double gamma_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_cont_frac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

// Regularized upper incomplete gamma Q(a, x).
inline double gammq(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gammq domain");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_series(a, x);
  return detail::gamma_cont_frac(a, x);
}

inline double chi2_pvalue(double statistic, int dof) {
  return gammq(0.5 * dof, 0.5 * statistic);
}

// Pearson statistic for observed counts against expected probabilities.
inline double chi2_statistic(const std::vector<int64_t>& observed,
                             const std::vector<double>& probs) {
  if (observed.size() != probs.size()) throw std::invalid_argument("chi2 size mismatch");
  int64_t total = 0;
  for (auto o : observed) total += o;
  double stat = 0.0;
  for (size_t i = 0; i < observed.size(); ++i) {
    const double e = probs[i] * static_cast<double>(total);
    if (e <= 0.0) throw std::invalid_argument("chi2 expected count must be positive");
    const double diff = static_cast<double>(observed[i]) - e;
    stat += diff * diff / e;
  }
  return stat;
}

}  // namespace testsupport
