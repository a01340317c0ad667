// Acceptance gate: one PASS/FAIL line per criterion, details indented beneath.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/hypergeometric_pFq.hpp>
#include <CLI11.hpp>
#include <fmt/format.h>

#include "kdetect/cpt.hpp"
#include "kdetect/csv.hpp"
#include "kdetect/experiments.hpp"
#include "kdetect/oracles.hpp"
#include "kdetect/special.hpp"
#include "kdetect/stats.hpp"
#include "kdetect/theory.hpp"
#include "kdetect/validation.hpp"

using namespace kdetect;

namespace {

struct Outcome {
  bool passed = true;
  std::vector<std::string> lines;

  void check(bool ok, std::string line) {
    passed = passed && ok;
    lines.push_back(fmt::format("{} {}", ok ? "ok  " : "FAIL", line));
  }
  void note(std::string line) { lines.push_back("     " + std::move(line)); }
};

std::uint64_t g_seed = 1;

constexpr double homogeneous_gamma = 3908.0;

Deployment homogeneous(const CptParams& p, int q = 100) {
  return homogeneous_deployment(q, homogeneous_gamma / p.power.varrho(), p.power);
}

// ---- 1: Table 3 ------------------------------------------------------------------------------

Outcome table3() {
  Outcome o;
  Campaign c;
  c.trials = 200000;
  c.redraw_every = 1000;
  c.seed = g_seed;
  const auto t0 = std::chrono::steady_clock::now();
  const CampaignResult r = run_table3(c);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const GridPoint& pt = r.points.front();
  const double tol = 0.015;
  struct Ref {
    Mechanism m;
    double ni, ml;
  };
  for (auto [m, ni, ml] : {Ref{Mechanism::ucpt, 0.0717, 0.0724}, Ref{Mechanism::acptf, 0.3170, 0.3250},
                           Ref{Mechanism::acptd, 0.9169, 0.9270}}) {
    const auto& s = pt.at(m);
    const std::string name = theory::to_string(m);
    o.check(std::fabs(s.success_ni() - ni) <= tol,
            fmt::format("{} NI {:.4f} (se {:.4f}) vs {:.4f} +/- {}", name, s.success_ni(),
                        s.stderr_of(s.success_ni()), ni, tol));
    o.check(std::fabs(s.success_ml() - ml) <= tol,
            fmt::format("{} ML {:.4f} (se {:.4f}) vs {:.4f} +/- {}", name, s.success_ml(),
                        s.stderr_of(s.success_ml()), ml, tol));
  }
  const auto& u = pt.at(Mechanism::ucpt);
  o.check(std::fabs(u.success_opt() - 0.0724) <= tol, fmt::format("ucpt Optimum {:.4f} vs 0.0724 +/- {}", u.success_opt(), tol));
  const double gap = std::fabs(u.success_ml() - u.success_opt());
  o.check(gap <= 2.0 * u.stderr_of(u.success_ml()),
          fmt::format("ucpt |ML - Optimum| = {:.5f} <= 2 se = {:.5f}", gap, 2.0 * u.stderr_of(u.success_ml())));
  o.note(fmt::format("{} slots, {} deployments, {} workers, {:.1f} s", c.trials, c.trials / c.redraw_every,
                     resolve_workers(c.workers), secs));
  return o;
}

// ---- 2: U-CPT closed form ------------------------------------------------------------------

Outcome ucpt_exact() {
  Outcome o;
  theory::MechanismContext ctx;
  const double th = theory::success_probability_theory(Mechanism::ucpt, 5, ctx);
  const double exact = std::exp(-271.0 / 301.0) - std::exp(-331.0 / 301.0);
  o.check(std::fabs(th - exact) <= 1e-14, fmt::format("closed form {:.10f} vs band expression {:.10f}", th, exact));
  o.check(std::fabs(th - 0.07346) <= 1e-5, fmt::format("closed form {:.6f} vs 0.07346 +/- 1e-5", th));
  Campaign c;
  c.mechanisms = {Mechanism::ucpt};
  c.ml = false;
  c.trials = 200000;
  c.seed = g_seed;
  const auto s = run_point(c).at(Mechanism::ucpt);
  o.check(std::fabs(s.success_ni() - th) <= 0.005,
          fmt::format("Monte Carlo {:.4f} (se {:.4f}, {} slots) vs {:.5f} +/- 0.005", s.success_ni(),
                      s.stderr_of(s.success_ni()), s.trials, th));
  return o;
}

// ---- 3: N = 10 point -----------------------------------------------------------------------

Outcome n10() {
  Outcome o;
  Campaign c;
  c.ml = false;
  c.trials = 20000;
  c.seed = g_seed;
  c.sweep = SweepVariable::n;
  c.grid = {10};
  const auto pt = run_sweep(c).points.front();
  struct Ref {
    Mechanism m;
    double v;
  };
  for (auto [m, v] : {Ref{Mechanism::ucpt, 0.075}, Ref{Mechanism::acptf, 0.333}, Ref{Mechanism::acptd, 0.949}}) {
    const auto& s = pt.at(m);
    o.check(std::fabs(s.success_ni() - v) <= 0.03,
            fmt::format("{} {:.4f} (theory {:.4f}, N1={}) vs {} +/- 0.03", theory::to_string(m), s.success_ni(),
                        s.theory_ni, s.best_n1, v));
  }
  return o;
}

// ---- 4: xi structure -----------------------------------------------------------------------

Outcome xi_structure() {
  Outcome o;
  std::vector<double> grid = log_grid(1e-4, 0.5, 25);
  grid.push_back(3e-3);
  std::sort(grid.begin(), grid.end());
  const auto at3 = std::find(grid.begin(), grid.end(), 3e-3) - grid.begin();

  int prev_theory_peak = static_cast<int>(grid.size());
  std::pair<int, int> prev_tie{0, static_cast<int>(grid.size())};
  for (int k : {2, 6, 12}) {
    Campaign c;
    c.mechanisms = {Mechanism::acptd};
    c.ml = false;
    c.trials = 20000;
    c.seed = g_seed;
    c.k = k;
    c.sweep = SweepVariable::xi;
    c.grid = grid;
    const auto r = run_sweep(c);
    std::vector<double> mc, se, th;
    for (const auto& p : r.points) {
      const auto& s = p.at(Mechanism::acptd);
      mc.push_back(s.success_ni());
      se.push_back(s.stderr_of(s.success_ni()));
      th.push_back(s.theory_ni);
    }
    const int n = static_cast<int>(grid.size());

    // theory curve: strictly unimodal
    const int tp = static_cast<int>(std::max_element(th.begin(), th.end()) - th.begin());
    bool th_uni = true;
    for (int i = 0; i + 1 < n; ++i)
      th_uni = th_uni && (i < tp ? th[i] <= th[i + 1] + 1e-12 : th[i + 1] <= th[i] + 1e-12);
    o.check(th_uni, fmt::format("K={} theory unimodal, peak xi={:.3g} ({:.4f})", k, grid[tp], th[tp]));
    for (int i = tp; i + 1 < n; ++i)
      if (th[i + 1] > th[i] + 1e-12) {
        o.note(fmt::format("K={} theory rises again from xi={:.3g} ({:.4f}) to xi={:.3g} ({:.4f})", k, grid[i], th[i],
                           grid[i + 1], th[i + 1]));
        break;
      }

    // Monte Carlo curve: no reversal larger than two combined standard errors
    const int mp = static_cast<int>(std::max_element(mc.begin(), mc.end()) - mc.begin());
    double worst = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
      const double d = i < mp ? mc[i] - mc[i + 1] : mc[i + 1] - mc[i];
      worst = std::max(worst, d / std::hypot(se[i], se[i + 1]));
    }
    o.check(worst <= 2.0, fmt::format("K={} Monte Carlo unimodal, peak xi={:.3g} ({:.4f}), worst reversal {:.2f} se",
                                      k, grid[mp], mc[mp], worst));

    o.check(tp <= prev_theory_peak, fmt::format("K={} theory optimum index {} not above previous", k, tp));
    prev_theory_peak = tp;
    // points statistically tied with the Monte Carlo maximum
    int lo = n, hi = -1;
    for (int i = 0; i < n; ++i)
      if (mc[mp] - mc[i] <= 2.0 * std::hypot(se[mp], se[i])) lo = std::min(lo, i), hi = std::max(hi, i);
    o.check(lo <= prev_tie.second, fmt::format("K={} Monte Carlo optimum range xi [{:.3g}, {:.3g}] compatible with previous K",
                                               k, grid[lo], grid[hi]));
    prev_tie = {lo, hi};

    o.check(mc[at3] >= 0.95 * mc[mp] && th[at3] >= 0.95 * th[tp],
            fmt::format("K={} xi=3e-3 reaches {:.1f}% (theory {:.1f}%) of the optimum", k, 100 * mc[at3] / mc[mp],
                        100 * th[at3] / th[tp]));
  }
  return o;
}

// ---- 5, 6: validation suite subsets -------------------------------------------------------

Outcome from_suite(const std::function<bool(const std::string&)>& pick) {
  Outcome o;
  const auto rep = run_validation_suite(g_seed);
  for (const auto& c : rep.checks) {
    if (!pick(c.name)) continue;
    o.check(c.passed, fmt::format("{}: {:.6g} vs {:.6g} tol {:.3g} ({})", c.name, c.measured, c.expected, c.tolerance,
                                  c.detail));
  }
  return o;
}

Outcome silencing_contract() {
  return from_suite([](const std::string& n) { return n == "silence probability" || n == "average transmit power"; });
}

Outcome variances() {
  return from_suite([](const std::string& n) { return n.find("variance") != std::string::npos; });
}

// ---- 7: distribution fits ------------------------------------------------------------------

Outcome distribution_fits() {
  Outcome o;
  const CptParams p;
  const Deployment homo = homogeneous(p);
  const double gc = p.power.gamma_bar();

  const auto f = sample_relaxed(Mechanism::acptf, homo, p, 5, 20000, g_seed);
  const auto g = theory::acptf_gaussian_model(5, p.n1, p.n2(), homo.gamma_bar_prime, gc);
  const double d_f = stats::ks_statistic(f.k_real, [&](double x) { return g.cdf(x); });
  o.check(d_f < 0.05, fmt::format("acptf estimate vs Gaussian: KS {:.4f} < 0.05 (n=20000)", d_f));

  const double xi = 0.01;
  const int kp = 5;
  const double c = -std::log1p(-xi);
  Rng rng = Rng::stream(g_seed, 0x7e57);
  std::vector<double> t(100000);
  for (auto& v : t) {
    double sum = 0.0;
    for (int i = 0; i < kp; ++i) sum += rng.normal() / std::sqrt(c + rng.exponential());
    v = sum;
  }
  const auto fit = theory::acptd_student_fit(kp, xi);
  const double d_t = stats::ks_statistic(t, [&](double x) { return theory::student_t_cdf(x / fit.scale, fit.nu); });
  o.check(d_t < 0.05, fmt::format("sum of {} Z terms vs scaled t (nu={:.3f}, scale={:.4f}): KS {:.4f} < 0.05 (n=100000)",
                                  kp, fit.nu, fit.scale, d_t));

  // The relaxed U-CPT estimate is an increasing affine map of the correlator energy, so the KS
  // statistic against the shifted exponential equals the one against the exponential.
  const auto u = sample_relaxed(Mechanism::ucpt, homo, p, 5, 20000, g_seed);
  const double d_u = stats::ks_statistic(u.k_real, [&](double x) { return theory::ucpt_cdf(x, 5, p.n, gc); });
  const double pv = stats::ks_pvalue(d_u, 20000);
  o.check(pv > 0.01, fmt::format("ucpt correlator energy vs exponential: KS {:.4f}, p = {:.3f} > 0.01", d_u, pv));
  return o;
}

// ---- 8: oracles ----------------------------------------------------------------------------

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
  return v;
}

double empirical_cdf(const std::vector<double>& sorted, double x) {
  return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin()) / sorted.size();
}

// Pointwise 3-sigma agreement on every 5th grid point, sup distance to the approximation on all.
void compare(Outcome& o, const std::string& name, const std::vector<double>& grid,
             const std::vector<theory::McValue>& oracle, std::vector<double> slots,
             const std::function<double(double)>& approx) {
  std::sort(slots.begin(), slots.end());
  const double n = static_cast<double>(slots.size());
  double worst_sigma = 0.0, sup = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    sup = std::max(sup, std::fabs(oracle[i].value - approx(grid[i])));
    if (i % 5 != 0) continue;
    const double e = empirical_cdf(slots, grid[i]);
    const double se = std::sqrt(e * (1 - e) / n + oracle[i].std_error * oracle[i].std_error);
    const double z = std::fabs(e - oracle[i].value) / std::max(se, 1e-300);
    if (se > 0.0) worst_sigma = std::max(worst_sigma, z);
    else if (e != oracle[i].value) worst_sigma = INFINITY;
  }
  o.check(worst_sigma <= 3.0, fmt::format("{} oracle vs slot simulation: worst {:.2f} sigma over 9 points", name, worst_sigma));
  o.check(sup <= 0.03, fmt::format("{} oracle vs approximate route: sup {:.4f} <= 0.03", name, sup));
}

Outcome oracles() {
  Outcome o;
  CptParams p;
  const Deployment dep = generate_deployment(10, Annulus{}, p.power, g_seed);
  const double gc = p.power.gamma_bar();
  const int k = 3;
  o.note(fmt::format("Q=10 generated deployment, gamma' = {:.1f}, K = {}", dep.gamma_bar_prime, k));

  const auto fgrid = linspace(1.0, 5.0, 41);
  const auto f_or = theory::oracle_acptf_exact_cdf(fgrid, k, dep, p.n1, p.n2(), 1000, g_seed);
  const auto f_sl = sample_relaxed(Mechanism::acptf, dep, p, k, 20000, g_seed);
  const auto g = theory::acptf_gaussian_model(k, p.n1, p.n2(), dep.gamma_bar_prime, gc);
  compare(o, "acptf", fgrid, f_or, f_sl.k_real, [&](double x) { return g.cdf(x); });

  const auto dgrid = linspace(k - 0.6, k + 0.6, 41);
  const auto d_or = theory::oracle_acptd_exact_cdf(dgrid, k, dep, p.n1, p.n2(), p.xi, 1000, g_seed);
  auto d_sl = sample_relaxed(Mechanism::acptd, dep, p, k, 20000, g_seed, true);
  const theory::Silencing sil(p.xi);
  for (double& v : d_sl.k_real) v = (v - sil.offset) / sil.gain;
  theory::AcptdModelParams mp;
  mp.xi = p.xi;
  mp.n1_gamma_prime = p.n1 * dep.gamma_bar_prime;
  mp.n2 = p.n2();
  mp.gamma_c_prime = sil.rho_over_pbar * gc;
  const theory::AcptdModel model(mp);
  compare(o, "acptd", dgrid, d_or, d_sl.k_real, [&](double x) { return model.cdf_given_kprime(x, k); });
  return o;
}

// ---- 9: numerics ---------------------------------------------------------------------------

double rel(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-300); }

Outcome numerics() {
  Outcome o;
  namespace bm = boost::math;
  std::map<std::string, double> worst;
  auto track = [&](const std::string& name, double err) { worst[name] = std::max(worst[name], err); };

  for (double x : log_grid(1e-6, 50.0, 60)) track("E1", rel(num::expint_e1(x), bm::expint(1, x)));
  for (double xi : log_grid(1e-4, 0.5, 40)) track("li", rel(num::log_integral(1.0 - xi), bm::expint(std::log1p(-xi))));
  for (double x = -6.0; x <= 26.0; x += 0.25) track("erfc", rel(num::erfc(x), bm::erfc(x)));
  for (double x : log_grid(1e-4, 200.0, 60)) {
    track("upper gamma", rel(num::gamma_upper(1.5, x), bm::tgamma(1.5, x)));
    for (double s : {0.5, 1.5, 3.0}) track("regularised upper gamma", rel(num::gamma_q(s, x), bm::gamma_q(s, x)));
  }
  for (double x : log_grid(1e-4, 0.999, 30))
    for (double a : {0.5, 1.0, 1.3, 2.5, 11.0, 50.0})
      for (double b : {0.5, 1.0, 6.0, 21.0}) track("incomplete beta", rel(num::reg_inc_beta(x, a, b), bm::ibeta(a, b, x)));
  for (double nu : {1.05, 1.5, 2.2, 3.85, 10.5, 37.0})
    for (double x : log_grid(0.01, 300.0, 30)) {
      const double ref = bm::cyl_bessel_k(nu, x);
      if (ref > 0.0 && std::isfinite(ref)) track("Bessel K", rel(num::bessel_k(nu, x), ref));
      if (ref > 0.0 && std::isfinite(ref)) track("log Bessel K", std::fabs(num::log_bessel_k(nu, x) - std::log(ref)));
    }
  for (double xi : {1e-4, 1e-3, 1e-2, 0.1})
    for (double kl : {0.0, 0.3, 1.0, 2.5})
      for (int kp = 0; kp <= 20; ++kp)
        for (double c : {2.0, 3.0})
          track("2F1", rel(num::hyp2f1(1.0 + kl, -kp, c + kl, xi),
                           bm::hypergeometric_pFq({1.0 + kl, static_cast<double>(-kp)}, {c + kl}, xi)));
  for (const auto& [name, err] : worst) o.check(err <= 1e-8, fmt::format("{}: worst error {:.2e} <= 1e-8", name, err));

  double kl_res = 0.0, fit_res = 0.0;
  for (double xi : {1e-3, 1e-2})
    for (int kp = 0; kp <= 20; ++kp) kl_res = std::max(kl_res, std::fabs(solve_kl(kp, xi).residual));
  for (double xi : {1e-3, 1e-2, 0.1})
    for (int kp = 1; kp <= 20; ++kp) fit_res = std::max(fit_res, std::fabs(theory::acptd_student_fit(kp, xi).residual));
  o.check(kl_res < 1e-8, fmt::format("K_l root residual {:.2e} < 1e-8", kl_res));
  o.check(fit_res < 1e-8, fmt::format("Student-t matching residual {:.2e} < 1e-8", fit_res));

  // symmetric relative difference: the MMSE value is exactly 0 at K' = 0
  double worst_rel = 0.0, at_xi = 0.0, at_k = 0.0;
  for (double xi : {1e-4, 1e-3, 1e-2})
    for (int kp = 0; kp <= 20; ++kp) {
      const double a = silent_correction_corollary(kp, xi), b = silent_correction_mmse(kp, xi);
      const double r = std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-300});
      if (r > worst_rel) worst_rel = r, at_xi = xi, at_k = kp;
    }
  for (int kp : {1, 5, 20})
    o.note(fmt::format("xi=0.01 K'={}: affine {:.6f}, full MMSE {:.6f}", kp, silent_correction_corollary(kp, 0.01),
                       silent_correction_mmse(kp, 0.01)));
  o.check(worst_rel <= 0.01, fmt::format("affine silent correction vs full MMSE: worst relative {:.3f} (xi={}, K'={}) <= 0.01",
                                         worst_rel, at_xi, at_k));
  return o;
}

// ---- 10: reproducibility -------------------------------------------------------------------

Outcome reproducibility() {
  Outcome o;
  auto render = [](int workers) {
    Campaign c;
    c.seed = g_seed;
    c.workers = workers;
    c.trials = 3000;
    c.redraw_every = 500;
    std::ostringstream t, s, f;
    write_table3_csv(t, run_table3(c));
    c.ml = false;
    write_pmf_csv(f, run_pmf(c));
    c.sweep = SweepVariable::k;
    c.grid = {2, 5, 9};
    write_sweep_csv(s, run_sweep(c));
    return std::vector<std::string>{t.str(), f.str(), s.str()};
  };
  const auto base = render(1);
  for (int w : {4, 16}) {
    const auto other = render(w);
    for (std::size_t i = 0; i < base.size(); ++i)
      o.check(other[i] == base[i], fmt::format("{} CSV with {} workers identical to 1 worker ({} bytes)",
                                               std::array{"table3", "pmf", "sweep"}[i], w, base[i].size()));
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance gate"};
  std::vector<int> which;
  app.add_option("--criterion", which, "criteria to run (default: all)")->check(CLI::Range(1, 10));
  app.add_option("--seed", g_seed, "master seed");
  CLI11_PARSE(app, argc, argv);
  if (which.empty()) which = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria{
      {1, {"success table at defaults", table3}},
      {2, {"U-CPT closed form and Monte Carlo", ucpt_exact}},
      {3, {"N = 10 with split optimisation", n10}},
      {4, {"silence probability sweep structure", xi_structure}},
      {5, {"silencing and power contract", silencing_contract}},
      {6, {"estimator variances and bound", variances}},
      {7, {"distribution fits", distribution_fits}},
      {8, {"subset-enumerating oracles", oracles}},
      {9, {"special functions, roots, silent correction", numerics}},
      {10, {"byte-identical CSVs across workers", reproducibility}},
  };
  int failed = 0;
  for (int id : which) {
    const auto& [title, fn] = criteria.at(id);
    Outcome out;
    try {
      out = fn();
    } catch (const std::exception& e) {
      out.check(false, std::string("error: ") + e.what());
    }
    std::cout << fmt::format("criterion {:>2}: {}  {}\n", id, out.passed ? "PASS" : "FAIL", title);
    for (const auto& l : out.lines) std::cout << "    " << l << "\n";
    std::cout.flush();
    failed += out.passed ? 0 : 1;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", which.size() - failed, which.size());
  return failed == 0 ? 0 : 1;
}
