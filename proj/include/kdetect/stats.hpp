#pragma once

#include <functional>
#include <span>
#include <vector>

namespace kdetect::stats {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;       // unbiased sample variance
  double variance_se = 0.0;    // standard error of the sample variance
  long n = 0;
};

// Two-pass moments; the variance standard error uses the fourth central moment.
Moments moments(std::span<const double> x);

// Sup distance between the empirical CDF of x and a model CDF.
double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf);
// Asymptotic Kolmogorov tail P(D_n > d) with the Stephens small-sample correction.
double ks_pvalue(double d, long n);

// Sup distance between two CDFs given as values on a common grid.
double sup_distance(std::span<const double> a, std::span<const double> b);

double binomial_stderr(double p, long trials);

}  // namespace kdetect::stats
