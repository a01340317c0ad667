#include "kdetect/validation.hpp"

#include <cmath>
#include <fmt/format.h>

#include "kdetect/cpt.hpp"
#include "kdetect/experiments.hpp"
#include "kdetect/stats.hpp"
#include "kdetect/theory.hpp"

namespace kdetect {

int ValidationReport::failures() const {
  int n = 0;
  for (const auto& c : checks) n += c.passed ? 0 : 1;
  return n;
}

namespace {

constexpr double target_gamma = 3908.0;

void add(ValidationReport& r, std::string name, double measured, double expected, double tol,
         std::string detail = {}) {
  const bool ok = std::isfinite(measured) && std::fabs(measured - expected) <= tol;
  r.checks.push_back({std::move(name), ok, measured, expected, tol, std::move(detail)});
}

template <class F>
void guarded(ValidationReport& r, const std::string& name, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    r.checks.push_back({name, false, std::nan(""), std::nan(""), 0.0, std::string("error: ") + e.what()});
  }
}

}  // namespace

ValidationReport run_validation_suite(std::uint64_t seed, long samples) {
  ValidationReport rep;
  const CptParams params;
  const Deployment homo = homogeneous_deployment(100, target_gamma / params.power.varrho(), params.power);
  const double gc = params.power.gamma_bar();

  for (int k : {1, 5, 10}) {
    guarded(rep, fmt::format("ucpt variance K={}", k), [&] {
      const auto s = sample_relaxed(Mechanism::ucpt, homo, params, k, samples, seed);
      const auto m = stats::moments(s.k_real);
      add(rep, fmt::format("ucpt variance K={}", k), m.variance, theory::ucpt_variance(k, params.n, gc),
          3.0 * m.variance_se, "3 standard errors");
    });
    guarded(rep, fmt::format("acptf variance K={}", k), [&] {
      const auto s = sample_relaxed(Mechanism::acptf, homo, params, k, samples, seed);
      const auto m = stats::moments(s.k_real);
      add(rep, fmt::format("acptf variance K={}", k), m.variance,
          theory::acptf_variance(k, params.n1, params.n2(), homo.gamma_bar_prime, gc), 3.0 * m.variance_se,
          "3 standard errors");
    });
    guarded(rep, fmt::format("acptd variance K'={}", k), [&] {
      const auto s = sample_relaxed(Mechanism::acptd, homo, params, k, samples, seed, true);
      const auto m = stats::moments(s.k_real);
      const theory::Silencing sil(params.xi);
      const auto v = theory::acptd_variance_homogeneous(k, params.xi, params.n1 * homo.gamma_bar_prime,
                                                        params.n2(), sil.rho_over_pbar * gc);
      add(rep, fmt::format("acptd variance K'={}", k), m.variance, v.variance, 3.0 * m.variance_se,
          "3 standard errors, slots with K' = K");
    });
    guarded(rep, fmt::format("ucpt estimator mean K={}", k), [&] {
      const auto s = sample_relaxed(Mechanism::ucpt, homo, params, k, samples, seed + 1);
      const auto m = stats::moments(s.k_real);
      add(rep, fmt::format("ucpt estimator mean K={}", k), m.mean, k, 3.0 * std::sqrt(m.variance / m.n));
    });
  }

  for (double xi : {1e-3, 1e-2, 1e-1}) {
    for (int kp : {1, 5, 10}) {
      guarded(rep, fmt::format("acptd variance bound xi={} K'={}", xi, kp), [&] {
        const theory::Silencing sil(xi);
        const auto v = theory::acptd_variance_homogeneous(kp, xi, params.n1 * target_gamma, params.n2(),
                                                          sil.rho_over_pbar * gc);
        rep.checks.push_back({fmt::format("acptd variance bound xi={} K'={}", xi, kp), v.variance < v.bound,
                              v.variance, v.bound, 0.0, "variance below bound"});
      });
    }
  }

  guarded(rep, "silence probability", [&] {
    const auto s = sample_relaxed(Mechanism::acptd, homo, params, 10, samples, seed + 2);
    const double devices = 10.0 * s.drawn;
    const double p = s.silenced / devices;
    add(rep, "silence probability", p, params.xi, 4.0 * std::sqrt(params.xi * (1 - params.xi) / devices),
        "4 sigma binomial band");
  });

  guarded(rep, "average transmit power", [&] {
    const AcptdConfig cfg = configure_acptd(homo, params);
    const double beta = homo.betas.front();
    double acc = 0.0;
    long used = 0;
    Rng rng = Rng::stream(seed, 0x90e7);
    const double err_var = 1.0 / (params.n1 * params.power.varrho());
    for (long i = 0; i < 10 * samples; ++i) {
      const cd hh = rng.complex_normal(beta) + rng.complex_normal(err_var);
      if (std::norm(hh) < cfg.mu.front()) continue;
      acc += cfg.rho / std::norm(hh);
      ++used;
    }
    const double target = params.power.p_bar() / beta;
    add(rep, "average transmit power", acc / used / target, 1.0, 0.02, "relative to p_bar/beta");
  });

  guarded(rep, "student fit at xi=0.4", [&] {
    const auto f = theory::acptd_student_fit(5, 0.4);
    rep.checks.push_back({"student fit at xi=0.4", std::isfinite(f.nu) && f.nu > 2.0 && std::isfinite(f.scale),
                          f.nu, 2.0, 0.0, "nu > 2 and finite"});
  });

  for (int kp : {0, 1, 5, 20}) {
    guarded(rep, fmt::format("K_l residual K'={}", kp), [&] {
      const auto s = solve_kl(kp, params.xi);
      add(rep, fmt::format("K_l residual K'={}", kp), s.residual, 0.0, 1e-8);
    });
  }
  for (int kp : {1, 5, 12}) {
    guarded(rep, fmt::format("student fit residual K'={}", kp), [&] {
      const auto f = theory::acptd_student_fit(kp, params.xi);
      add(rep, fmt::format("student fit residual K'={}", kp), f.residual, 0.0, 1e-8);
    });
  }

  theory::MechanismContext ctx;
  ctx.gamma_prime = target_gamma;
  for (auto m : {Mechanism::ucpt, Mechanism::acptf, Mechanism::acptd}) {
    const std::string name = "cdf monotone and normalised " + theory::to_string(m);
    guarded(rep, name, [&] {
      double prev = 0.0;
      bool mono = true;
      for (int i = 0; i <= 400; ++i) {
        const double x = -1.0 + 0.05 * i;
        const double f = theory::mechanism_cdf(m, x, 5, ctx);
        mono = mono && f >= prev - 1e-12 && f <= 1.0 + 1e-12;
        prev = f;
      }
      const double tail = theory::mechanism_cdf(m, 200.0, 5, ctx);
      rep.checks.push_back({name, mono && std::fabs(tail - 1.0) < 1e-6, tail, 1.0, 1e-6, "grid of 401 points"});
    });
    const std::string pname = "ni pmf sums to one " + theory::to_string(m);
    guarded(rep, pname, [&] {
      const auto pmf = theory::ni_pmf_theory(m, 5, 60, ctx);
      double s = 0.0;
      for (double v : pmf) s += v;
      add(rep, pname, s, 1.0, 1e-12);
    });
  }
  return rep;
}

}  // namespace kdetect
