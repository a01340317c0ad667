#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <set>

#include "kdetect/cpt.hpp"
#include "kdetect/quadrature.hpp"
#include "kdetect/stats.hpp"

using namespace kdetect;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Deployment homogeneous(int q = 50, double gamma = 3908.0) {
  const PowerConfig pw;
  return homogeneous_deployment(q, gamma / pw.varrho(), pw);
}

std::vector<int> first_k(int k) {
  std::vector<int> a(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) a[static_cast<std::size_t>(i)] = i;
  return a;
}

// log f(y; H_k) - log f(y; H_0) by direct integration over the shared fading h' in the plane.
double brute_log_ratio(const std::vector<cd>& y, const std::vector<cd>& s, int k, double p_bar, double s2) {
  const double a = std::sqrt(k * p_bar);
  double y2 = 0.0;
  for (const cd& v : y) y2 += std::norm(v);
  auto integrand = [&](double hr, double hi) {
    const cd h{hr, hi};
    double e = 0.0;
    for (std::size_t n = 0; n < y.size(); ++n) e += std::norm(y[n] - a * h * s[n]);
    return std::exp(-(e - y2) / s2 - std::norm(h)) / std::numbers::pi;
  };
  num::QuadratureSpec spec;
  spec.abs_tol = 1e-13;
  spec.rel_tol = 1e-11;
  spec.max_subdivisions = 2000;
  const double v = num::integrate_1d(
      [&](double hr) {
        return num::integrate_1d([&](double hi) { return integrand(hr, hi); }, -7.0, 7.0, spec,
                                 std::vector<double>{-1.0, 0.0, 1.0});
      },
      -7.0, 7.0, spec, std::vector<double>{-1.0, 0.0, 1.0});
  return std::log(v);
}

}  // namespace

TEST_CASE("pilots have unit modulus and the right lengths", "[cpt]") {
  CptParams p;
  for (auto kind : {PilotKind::ones, PilotKind::chirp}) {
    p.pilot = kind;
    CHECK(p.ucpt_pilot().size() == 6);
    CHECK(p.acpt_pilot().size() == 4);
    CHECK(p.dl_pilot().size() == 2);
    for (const cd& x : p.ucpt_pilot()) CHECK_THAT(std::abs(x), WithinAbs(1.0, 1e-15));
  }
  p.n1 = 6;
  CHECK_THROWS_WITH(p.validate_acpt(), "N1 must satisfy 1 <= N1 < N");
  p.n1 = 0;
  CHECK_THROWS(p.validate_acpt());
}

TEST_CASE("U-CPT received signal and estimator", "[cpt]") {
  const CptParams p;
  const std::vector<cd> zero(6, cd{});
  // noise off, K=1, h'=1
  const auto y1 = ucpt_received(p, 1, cd{1.0, 0.0}, zero);
  for (const cd& v : y1) CHECK_THAT(std::abs(v - std::sqrt(p.power.p_bar())), WithinAbs(0.0, 1e-20));
  CHECK_THAT(estimate_ucpt(zero, p), WithinRel(-1.0 / 60.0, 1e-12));
  const auto y4 = ucpt_received(p, 4, std::polar(1.0, 0.7), zero);
  CHECK_THAT(estimate_ucpt(y4, p), WithinRel(4.0 - 1.0 / 60.0, 1e-12));
  // invariance to a common pilot rotation
  std::vector<cd> rotated(y4);
  for (auto& v : rotated) v *= std::polar(1.0, 1.3);
  CHECK_THAT(estimate_ucpt(rotated, p), WithinRel(estimate_ucpt(y4, p), 1e-12));
  CHECK(detect_ucpt_optimal(zero, p, 1000) == 0);
}

TEST_CASE("U-CPT received statistics", "[cpt][mc]") {
  const CptParams p;
  const Deployment dep = homogeneous();
  const auto act = first_k(5);
  const int n = 100000;
  std::vector<double> energy;
  double acc = 0.0;
  for (int t = 0; t < n; ++t) {
    Rng rng = Rng::stream(11, static_cast<std::uint64_t>(t));
    const auto slot = simulate_ucpt_slot(dep, act, p, rng);
    cd c{};
    for (const cd& v : slot.y) c += v;
    c /= 6.0;
    acc += std::norm(c);
    energy.push_back(std::norm(c));
  }
  const double expect = 5.0 * p.power.p_bar() + p.power.sigma2() / 6.0;
  CHECK_THAT(acc / n, WithinRel(expect, 4.0 / std::sqrt(n)));
  const double d = stats::ks_statistic(energy, [&](double x) { return -std::expm1(-x / expect); });
  CHECK(stats::ks_pvalue(d, n) > 0.01);
}

TEST_CASE("U-CPT optimal metric equals brute-force likelihood integration", "[cpt][oracle]") {
  CptParams p;
  p.n = 2;
  const double pb = p.power.p_bar();
  const double s2 = p.power.sigma2();
  for (auto kind : {PilotKind::ones, PilotKind::chirp}) {
    p.pilot = kind;
    const auto s = p.ucpt_pilot();
    const std::vector<std::vector<cd>> ys = {
        {std::sqrt(2.0 * pb) * cd{0.7, 0.2} * s[0] + std::sqrt(s2) * cd{0.3, -0.1},
         std::sqrt(2.0 * pb) * cd{0.7, 0.2} * s[1] + std::sqrt(s2) * cd{-0.2, 0.4}},
        {std::sqrt(s2) * cd{0.1, 0.05}, std::sqrt(s2) * cd{-0.3, 0.2}},
        {std::sqrt(pb) * cd{1.5, -0.4} * s[0], std::sqrt(pb) * cd{1.4, -0.5} * s[1]}};
    for (const auto& y : ys) {
      const double l0 = ucpt_log_likelihood(y, p, 0);
      for (int k = 1; k <= 3; ++k) {
        const double brute = brute_log_ratio(y, s, k, pb, s2);
        CHECK_THAT(ucpt_log_likelihood(y, p, k) - l0, WithinAbs(brute, 1e-7));
      }
      // argmax over Q = 3 agrees with the brute-force likelihoods
      int best = 0;
      double best_v = 0.0;
      for (int k = 1; k <= 3; ++k) {
        const double v = brute_log_ratio(y, s, k, pb, s2);
        if (v > best_v) best_v = v, best = k;
      }
      CHECK(detect_ucpt_optimal(y, p, 3) == best);
    }
  }
}

TEST_CASE("optimal U-CPT detector coincides with ML rounding", "[cpt]") {
  const CptParams p;
  const Deployment dep = homogeneous();
  const UcptLikelihood lik(p.n, p.power.gamma_bar());
  for (int t = 0; t < 2000; ++t) {
    Rng rng = Rng::stream(5, static_cast<std::uint64_t>(t));
    const auto slot = simulate_ucpt_slot(dep, first_k(1 + t % 9), p, rng);
    CHECK(detect_ucpt_optimal(slot.y, p, 50) == round_ml(estimate_ucpt(slot.y, p), lik, 50));
  }
}

TEST_CASE("A-CPT-F estimator and slot", "[cpt]") {
  const CptParams p;
  const double gp = 3908.0;
  const double scale = std::sqrt(std::numbers::pi * p.power.p_bar() * (1.0 + 1.0 / (p.n1 * gp))) / 2.0;
  std::vector<cd> y(4, cd{scale * 7.0, 0.3});
  CHECK_THAT(estimate_acptf(y, p, gp), WithinRel(7.0, 1e-12));
  CHECK(estimate_acptf(std::vector<cd>(4), p, gp) == 0.0);

  // perfect CSI and no noise: coherent combining gives sqrt(p_bar/beta)|h|
  const Deployment dep = homogeneous(3);
  SlotRealization slot;
  slot.active = {1};
  slot.h = {cd{0.3e-6, -0.4e-6}};
  slot.h_hat = slot.h;
  const auto yy = acptf_received(dep, p, slot, std::vector<cd>(4));
  cd c{};
  for (const cd& v : yy) c += v;
  c /= 4.0;
  CHECK_THAT(c.real(), WithinRel(std::sqrt(p.power.p_bar() / dep.betas[1]) * std::abs(slot.h[0]), 1e-12));
  CHECK(std::fabs(c.imag()) < 1e-12 * c.real());
}

TEST_CASE("A-CPT-F correlation mean matches its closed form", "[cpt][mc]") {
  const CptParams p;
  const Deployment dep = homogeneous();
  const auto act = first_k(5);
  std::vector<double> re;
  for (int t = 0; t < 100000; ++t) {
    Rng rng = Rng::stream(21, static_cast<std::uint64_t>(t));
    const auto slot = simulate_acptf_slot(dep, act, p, rng);
    CHECK(slot.transmitting == slot.active);
    cd c{};
    for (const cd& v : slot.y) c += v;
    re.push_back(c.real() / 4.0);
  }
  const auto m = stats::moments(re);
  const double expect = 5.0 * std::sqrt(std::numbers::pi * p.power.p_bar()) / 2.0 *
                        std::sqrt(1.0 + 1.0 / (p.n1 * dep.gamma_bar_prime));
  CHECK_THAT(m.mean, WithinAbs(expect, 3.0 * std::sqrt(m.variance / m.n)));
}

TEST_CASE("A-CPT-D configuration", "[cpt]") {
  CptParams p;
  const Deployment dep = homogeneous(4);
  const AcptdConfig cfg = configure_acptd(dep, p);
  CHECK_THAT(cfg.rho / p.power.p_bar(), WithinRel(0.24547734634143684, 1e-10));
  CHECK_THAT(cfg.mu[0] / cfg.vartheta[0], WithinRel(0.0100503358535014, 1e-12));
  CHECK_THAT(cfg.psi, WithinRel(1.0001041, 1e-7));
  CHECK_THAT(cfg.gamma_c_prime, WithinRel(cfg.rho / p.power.sigma2(), 1e-15));
  p.xi = 0.0;
  CHECK_THROWS_AS(configure_acptd(dep, p), std::invalid_argument);
}

TEST_CASE("A-CPT-D slot partition and deterministic path", "[cpt]") {
  const CptParams p;
  const Deployment dep = deployment_from_betas({1e-12, 1e-11, 3e-12, 5e-13, 2e-12, 8e-12}, p.power);
  const AcptdConfig cfg = configure_acptd(dep, p);
  for (int t = 0; t < 3000; ++t) {
    Rng rng = Rng::stream(3, static_cast<std::uint64_t>(t));
    const auto act = draw_active_set(6, 1 + t % 6, rng);
    const auto slot = simulate_acptd_slot(dep, act, p, cfg, rng);
    std::set<int> u(slot.transmitting.begin(), slot.transmitting.end());
    for (int i : slot.silent) CHECK(u.insert(i).second);
    CHECK(std::set<int>(act.begin(), act.end()) == u);
    for (std::size_t j = 0; j < act.size(); ++j) {
      const bool silent = std::find(slot.silent.begin(), slot.silent.end(), act[j]) != slot.silent.end();
      CHECK((std::norm(slot.h_hat[j]) < cfg.mu[static_cast<std::size_t>(act[j])]) == silent);
    }
    CHECK(slot.y.size() == 4);
  }
  // perfect CSI, noise off: correlation returns K' exactly
  SlotRealization slot;
  slot.active = {0, 2, 4};
  slot.transmitting = {0, 4};
  slot.silent = {2};
  slot.h = {cd{1e-6, 2e-6}, cd{1e-8, 0}, cd{-3e-6, 1e-6}};
  slot.h_hat = slot.h;
  const auto y = acptd_received(p, cfg, slot, std::vector<cd>(4));
  CHECK_THAT(estimate_acptd(y, cfg, p, AcptdMode::corollary).k_prime, WithinRel(2.0, 1e-12));
}

TEST_CASE("silent-device corrections", "[cpt]") {
  CHECK_THAT(silent_correction_corollary(5.0, 0.01), WithinRel(0.0612182430364249, 1e-12));
  CHECK_THAT(5.0 + silent_correction_corollary(5.0, 0.01), WithinAbs(5.0612, 1e-4));
  CHECK(silent_correction_corollary(3.0, 1e-15) < 1e-14);
  // K_l roots
  const std::pair<double, double> kl[] = {{1.0, 0.16673}, {5.0, 0.53838}, {7.3, 0.68786}, {20.0, 1.28375}};
  for (auto [kp, expect] : kl) {
    const auto s = solve_kl(kp, 0.01);
    CHECK_THAT(s.k_l, WithinAbs(expect, 5e-5));
    CHECK(s.residual < 1e-8);
  }
  // frozen full-MMSE values
  const std::pair<double, double> mm[] = {{1.0, 0.0084715550766986}, {5.0, 0.045373408498681},
                                          {7.3, 0.0672522455394637}, {20.0, 0.190448251074557}};
  for (auto [kp, expect] : mm) CHECK_THAT(silent_correction_mmse(kp, 0.01), WithinRel(expect, 1e-9));
}

TEST_CASE("full MMSE equals full mean minus the tail beyond K_l", "[cpt][oracle]") {
  for (double xi : {0.001, 0.01, 0.05}) {
    for (double kp : {0.0, 0.5, 1.0, 3.0, 5.0, 7.3, 12.0, 20.0}) {
      const double kl = solve_kl(kp, xi).k_l;
      double tail = 0.0;
      for (int j = 0; j < 400; ++j) {
        const double m = j + kl + 1.0;
        const double lc = std::lgamma(kp + m + 1.0) - std::lgamma(m + 1.0) - std::lgamma(kp + 1.0);
        tail += m * std::exp(lc + m * std::log(xi) + kp * std::log1p(-xi));
      }
      const double full = xi * (1.0 + kp) / ((1.0 - xi) * (1.0 - xi));
      CHECK_THAT(silent_correction_mmse(kp, xi), WithinAbs(full - tail, 1e-12 + 1e-10 * full));
    }
  }
}

TEST_CASE("NI rounding", "[cpt]") {
  CHECK(round_ni(5.49, 1000) == 5);
  CHECK(round_ni(5.51, 1000) == 6);
  CHECK(round_ni(5.5, 1000) == 6);
  CHECK(round_ni(-0.3, 1000) == 0);
  CHECK(round_ni(1e9, 1000) == 1000);
  for (int i = 0; i < 1000; ++i) {
    const double x = -3.0 + 0.013 * i;
    const int k = round_ni(x, 10);
    CHECK(std::fabs(k - std::clamp(x, 0.0, 10.0)) <= 0.5);
  }
}

TEST_CASE("ML rounding", "[cpt]") {
  const AcptfLikelihood lf(2, 4, 3908.0, 10.0);
  CHECK(round_ml(0.0, lf, 1000) == 0);
  for (int k = 1; k < 20; ++k) CHECK(std::abs(round_ml(k, lf, 1000) - k) <= 1);
  const UcptLikelihood lu(6, 10.0);
  CHECK(round_ml(-0.01, lu, 1000) == 0);
  // ties go to the smaller k
  struct Flat : Likelihood {
    double log_density(double, int) const override { return 0.0; }
  } flat;
  CHECK(round_ml(3.0, flat, 10) == 0);
  CHECK(round_ml(3.0, flat, 10, 1) == 2);
}
