#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <shared_mutex>
#include <stdexcept>
#include <tuple>

#include "kdetect/roots.hpp"
#include "kdetect/special.hpp"
#include "kdetect/theory.hpp"

namespace kdetect::theory {

double student_fit_residual(double nu, double omega1, double log_omega2, double t_match) {
  const double x = t_match * std::sqrt(omega1 * (nu - 2.0));
  const double h = 0.5 * nu;
  return (h - 1.0) * std::numbers::ln2 + log_omega2 + std::lgamma(h) -
         (num::log_bessel_k(h, x) + h * std::log(x));
}

namespace {

StudentFit fit_uncached(int k_prime, double xi, double t_match) {
  if (k_prime < 1) throw std::invalid_argument("acptd_student_fit: K' must be >= 1");
  if (!(xi > 0.0 && xi <= 0.5)) throw std::invalid_argument("acptd_student_fit: xi must lie in (0, 0.5]");
  if (!(t_match > 0.0)) throw std::invalid_argument("acptd_student_fit: t_match must be positive");
  const Silencing s(xi);
  StudentFit fit;
  fit.k_prime = k_prime;
  fit.xi = xi;
  fit.t_match = t_match;
  fit.omega1 = k_prime * s.z_variance;
  fit.log_omega2 = k_prime * acptd_z_log_cf(t_match, xi);
  if (!std::isfinite(fit.log_omega2))
    throw std::runtime_error("acptd_student_fit: characteristic function is not positive");
  auto g = [&](double nu) { return student_fit_residual(nu, fit.omega1, fit.log_omega2, t_match); };
  const num::RootResult r = num::brent(g, {2.0 + 1e-6, 200.0, 1e-13});
  fit.nu = r.root;
  fit.residual = std::fabs(g(fit.nu));
  fit.scale = std::sqrt(fit.omega1 * (fit.nu - 2.0) / fit.nu);
  return fit;
}

}  // namespace

StudentFit acptd_student_fit(int k_prime, double xi, double t_match) {
  using Key = std::tuple<int, double, double>;
  static std::map<Key, StudentFit> cache;
  static std::shared_mutex mutex;
  const Key key{k_prime, xi, t_match};
  {
    std::shared_lock lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  StudentFit fit = fit_uncached(k_prime, xi, t_match);
  std::unique_lock lock(mutex);
  return cache.emplace(key, fit).first->second;
}

}  // namespace kdetect::theory
