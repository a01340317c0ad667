#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kdetect/deployment.hpp"

namespace kdetect::theory {

struct McValue {
  double value = 0.0;
  double std_error = 0.0;
};

// Desk-scale limits for the subset-enumerating oracles.
inline constexpr int oracle_max_q = 12;
inline constexpr int oracle_max_k = 6;

// Exact A-CPT-F CDF of the relaxed estimate given K: the K-fold Rayleigh integral is averaged
// over every K-subset of the deployment, each by `samples_per_subset` Monte Carlo draws.
// The same draws serve every point of the k_hat grid.
std::vector<McValue> oracle_acptf_exact_cdf(std::span<const double> k_hat, int k, const Deployment& dep,
                                            int n1, int n2, int samples_per_subset, std::uint64_t seed);

// A-CPT-D CDF of K-hat' given K' from the K'-fold Z integral with per-device scaling.
std::vector<McValue> oracle_acptd_exact_cdf(std::span<const double> k_hat, int k_prime,
                                            const Deployment& dep, int n1, int n2, double xi,
                                            int samples_per_subset, std::uint64_t seed);

// All size-k subsets of {0..q-1} in lexicographic order.
std::vector<std::vector<int>> enumerate_subsets(int q, int k);

}  // namespace kdetect::theory
