#include "kdetect/oracles.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "kdetect/rng.hpp"
#include "kdetect/special.hpp"
#include "kdetect/theory.hpp"

namespace kdetect::theory {

std::vector<std::vector<int>> enumerate_subsets(int q, int k) {
  std::vector<std::vector<int>> out;
  if (k < 0 || k > q) return out;
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) idx[static_cast<std::size_t>(j)] = j;
  while (true) {
    out.push_back(idx);
    int j = k - 1;
    while (j >= 0 && idx[static_cast<std::size_t>(j)] == q - k + j) --j;
    if (j < 0) break;
    ++idx[static_cast<std::size_t>(j)];
    for (int m = j + 1; m < k; ++m) idx[static_cast<std::size_t>(m)] = idx[static_cast<std::size_t>(m - 1)] + 1;
  }
  return out;
}

namespace {

void check_scale(const Deployment& dep, int k, int samples, const char* who) {
  if (dep.q() > oracle_max_q || k > oracle_max_k)
    throw std::invalid_argument(std::string(who) + ": desk scale only (Q <= " + std::to_string(oracle_max_q) +
                                ", K <= " + std::to_string(oracle_max_k) + ")");
  if (k < 0 || k > dep.q()) throw std::invalid_argument(std::string(who) + ": K must lie in [0, Q]");
  if (samples < 2) throw std::invalid_argument(std::string(who) + ": need at least 2 samples per subset");
}

// Per-point running mean and spread of 1 - erfc(arg)/2 over all subsets and draws (Welford).
struct Accumulator {
  std::vector<double> mean, m2;
  long n = 0;
  explicit Accumulator(std::size_t points) : mean(points, 0.0), m2(points, 0.0) {}
  void next() { ++n; }
  void add(std::size_t i, double v) {
    const double d = v - mean[i];
    mean[i] += d / n;
    m2[i] += d * (v - mean[i]);
  }
  std::vector<McValue> finish() const {
    std::vector<McValue> out(mean.size());
    for (std::size_t i = 0; i < mean.size(); ++i) out[i] = {mean[i], std::sqrt(m2[i] / (n - 1.0) / n)};
    return out;
  }
};

}  // namespace

std::vector<McValue> oracle_acptf_exact_cdf(std::span<const double> k_hat, int k, const Deployment& dep,
                                            int n1, int n2, int samples_per_subset, std::uint64_t seed) {
  check_scale(dep, k, samples_per_subset, "oracle_acptf_exact_cdf");
  const double gp = dep.gamma_bar_prime;
  const double gc = dep.power.gamma_bar();
  const double upsilon = 2.0 / std::sqrt(std::numbers::pi * (1.0 + 1.0 / (n1 * gp)));
  const auto subsets = enumerate_subsets(dep.q(), k);
  Accumulator acc(k_hat.size());
  for (std::size_t si = 0; si < subsets.size(); ++si) {
    const auto& sub = subsets[si];
    double phi2 = 1.0 / (n2 * gc);
    for (int i : sub) phi2 += 1.0 / (n1 * dep.gamma_bars[static_cast<std::size_t>(i)]);
    const double phi = std::sqrt(phi2);
    Rng rng = Rng::stream(seed, 0xf1, si);
    for (int m = 0; m < samples_per_subset; ++m) {
      // U_i Rayleigh with E[U_i^2] = 2(1 + 1/(N1 gamma_i))
      double su = 0.0;
      for (int i : sub) {
        const double s2 = 1.0 + 1.0 / (n1 * dep.gamma_bars[static_cast<std::size_t>(i)]);
        su += std::sqrt(2.0 * s2 * rng.exponential());
      }
      acc.next();
      for (std::size_t j = 0; j < k_hat.size(); ++j)
        acc.add(j, 1.0 - 0.5 * num::erfc(k_hat[j] / (phi * upsilon) - su / (std::sqrt(2.0) * phi)));
    }
  }
  return acc.finish();
}

std::vector<McValue> oracle_acptd_exact_cdf(std::span<const double> k_hat, int k_prime,
                                            const Deployment& dep, int n1, int n2, double xi,
                                            int samples_per_subset, std::uint64_t seed) {
  check_scale(dep, k_prime, samples_per_subset, "oracle_acptd_exact_cdf");
  const Silencing sil(xi);
  const double gc_prime = sil.rho_over_pbar * dep.power.gamma_bar();
  const double root = std::sqrt(n2 * gc_prime);
  const auto subsets = enumerate_subsets(dep.q(), k_prime);
  Accumulator acc(k_hat.size());
  for (std::size_t si = 0; si < subsets.size(); ++si) {
    const auto& sub = subsets[si];
    Rng rng = Rng::stream(seed, 0xd1, si);
    for (int m = 0; m < samples_per_subset; ++m) {
      double t = 0.0;
      for (int i : sub) {
        const double z = rng.normal() / std::sqrt(sil.c + rng.exponential());
        t += z / std::sqrt(2.0 * (n1 * dep.gamma_bars[static_cast<std::size_t>(i)] + 1.0));
      }
      acc.next();
      for (std::size_t j = 0; j < k_hat.size(); ++j)
        acc.add(j, 1.0 - 0.5 * num::erfc(root * (k_hat[j] - k_prime - t)));
    }
  }
  return acc.finish();
}

}  // namespace kdetect::theory
