#include "kdetect/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kdetect::stats {

Moments moments(std::span<const double> x) {
  Moments m;
  m.n = static_cast<long>(x.size());
  if (m.n < 2) throw std::invalid_argument("moments: need at least two samples");
  double s = 0.0;
  for (double v : x) s += v;
  m.mean = s / m.n;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : x) {
    const double d = (v - m.mean) * (v - m.mean);
    m2 += d;
    m4 += d * d;
  }
  m.variance = m2 / (m.n - 1);
  const double mu2 = m2 / m.n;
  const double mu4 = m4 / m.n;
  m.variance_se = std::sqrt(std::max(0.0, (mu4 - mu2 * mu2 * (m.n - 3.0) / (m.n - 1.0)) / m.n));
  return m;
}

double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
  if (x.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

double ks_pvalue(double d, long n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = sign * std::exp(-2.0 * j * j * lambda * lambda);
    sum += term;
    if (std::fabs(term) < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double sup_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("sup_distance: size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a[i] - b[i]));
  return d;
}

double binomial_stderr(double p, long trials) {
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(trials));
}

}  // namespace kdetect::stats
