#include "kdetect/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "kdetect/stats.hpp"
#include "kdetect/theory.hpp"

namespace kdetect {

std::string to_string(DeploymentPolicy p) { return p == DeploymentPolicy::fixed ? "fixed" : "redraw"; }

std::string to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::none: return "none";
    case SweepVariable::k: return "K";
    case SweepVariable::xi: return "xi";
    case SweepVariable::n1: return "N1";
    case SweepVariable::n: return "N";
  }
  return "?";
}

DeploymentPolicy deployment_policy_from_string(const std::string& s) {
  if (s == "fixed") return DeploymentPolicy::fixed;
  if (s == "redraw") return DeploymentPolicy::redraw;
  throw std::invalid_argument("deployment policy must be 'fixed' or 'redraw', got '" + s + "'");
}

SweepVariable sweep_variable_from_string(const std::string& s) {
  if (s == "none") return SweepVariable::none;
  if (s == "K" || s == "k") return SweepVariable::k;
  if (s == "xi") return SweepVariable::xi;
  if (s == "N1" || s == "n1") return SweepVariable::n1;
  if (s == "N" || s == "n") return SweepVariable::n;
  throw std::invalid_argument("sweep variable must be one of K, xi, N1, N; got '" + s + "'");
}

void Campaign::validate() const {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (q < 1) throw std::invalid_argument("Q must be >= 1");
  if (k < 0 || k > q) throw std::invalid_argument("K must satisfy 0 <= K <= Q");
  if (redraw_every < 1) throw std::invalid_argument("redraw_every must be >= 1");
  if (mechanisms.empty()) throw std::invalid_argument("at least one mechanism is required");
  if (!(area.r_in_km > 0.0 && area.r_out_km > area.r_in_km))
    throw std::invalid_argument("annulus must satisfy 0 < r_in < r_out");
  if (acptd_ml_window < 0) throw std::invalid_argument("acptd_ml_window must be >= 0");
  if (!(t_match > 0.0)) throw std::invalid_argument("t_match must be positive");
  params.validate_ucpt();
  const bool assisted = std::any_of(mechanisms.begin(), mechanisms.end(),
                                    [](Mechanism m) { return m != Mechanism::ucpt; });
  if (assisted && sweep != SweepVariable::n && sweep != SweepVariable::n1) params.validate_acpt();
  if (sweep != SweepVariable::none) {
    if (grid.empty()) throw std::invalid_argument("sweep grid must be non-empty");
    if (!std::is_sorted(grid.begin(), grid.end())) throw std::invalid_argument("sweep grid must be sorted");
    for (double v : grid) {
      switch (sweep) {
        case SweepVariable::k:
          if (v < 0 || v > q || v != std::floor(v)) throw std::invalid_argument("K grid must hold integers in [0, Q]");
          break;
        case SweepVariable::xi:
          if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument("xi grid must lie in (0, 1)");
          break;
        case SweepVariable::n1:
          if (v < 1 || v >= params.n || v != std::floor(v))
            throw std::invalid_argument("N1 must satisfy 1 <= N1 < N");
          break;
        case SweepVariable::n:
          if (v < 2 || v != std::floor(v)) throw std::invalid_argument("N grid must hold integers >= 2");
          break;
        case SweepVariable::none: break;
      }
    }
  }
  if (policy == DeploymentPolicy::fixed && deployment && deployment->q() != q)
    throw std::invalid_argument("fixed deployment size does not match Q");
}

nlohmann::json to_json(const Campaign& c) {
  nlohmann::json j;
  std::vector<std::string> mech;
  for (auto m : c.mechanisms) mech.push_back(theory::to_string(m));
  j["mechanisms"] = mech;
  j["deployment_policy"] = to_string(c.policy);
  j["redraw_every"] = c.redraw_every;
  j["trials"] = c.trials;
  j["Q"] = c.q;
  j["K"] = c.k;
  j["r_in_km"] = c.area.r_in_km;
  j["r_out_km"] = c.area.r_out_km;
  j["N"] = c.params.n;
  j["N1"] = c.params.n1;
  j["xi"] = c.params.xi;
  j["p_dbm"] = c.params.power.p_dbm();
  j["p_bar_dbm"] = c.params.power.p_bar_dbm();
  j["sigma2_dbm"] = c.params.power.sigma2_dbm();
  j["pilot"] = to_string(c.params.pilot);
  j["channel_model"] = to_string(c.params.channel);
  j["acptd_mode"] = to_string(c.params.acptd_mode);
  j["seed"] = c.seed;
  j["ml"] = c.ml;
  j["acptd_ml_window"] = c.acptd_ml_window;
  j["t_match"] = c.t_match;
  j["sweep"] = to_string(c.sweep);
  j["grid"] = c.grid;
  if (c.deployment) j["deployment_seed"] = c.deployment->seed;
  return j;
}

double MechanismStats::stderr_of(double p) const { return stats::binomial_stderr(p, trials); }

std::map<int, double> MechanismStats::pmf(bool ml) const {
  std::map<int, double> out;
  for (const auto& [k, n] : ml ? pmf_ml : pmf_ni) out[k] = static_cast<double>(n) / trials;
  return out;
}

const MechanismStats& GridPoint::at(Mechanism m) const {
  for (const auto& s : mechanisms)
    if (s.mechanism == m) return s;
  throw std::out_of_range("grid point has no results for " + theory::to_string(m));
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("KDETECT_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
      throw std::invalid_argument(std::string("KDETECT_WORKERS must be a positive integer, got '") + env + "'");
    return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<double> log_grid(double lo, double hi, int points) {
  if (!(lo > 0.0 && hi > lo) || points < 2) throw std::invalid_argument("log_grid: need 0 < lo < hi, points >= 2");
  std::vector<double> g(static_cast<std::size_t>(points));
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (points - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

namespace {

constexpr std::uint64_t key_deployment = 0xde91a7;
constexpr std::uint64_t key_active = 0xac71e;

struct Tally {
  long trials = 0;
  long hits_ni = 0, hits_ml = 0, hits_opt = 0;
  std::map<int, long> pmf_ni, pmf_ml;
};

struct BatchOut {
  std::vector<Tally> per_mech;
  double gamma_prime = 0.0;
};

std::uint64_t mech_key(Mechanism m) { return 1 + static_cast<std::uint64_t>(m); }

Deployment batch_deployment(const Campaign& c, const Deployment* fixed, long b) {
  if (fixed) return *fixed;
  Rng r = Rng::stream(c.seed, key_deployment, static_cast<std::uint64_t>(b));
  return generate_deployment(c.q, c.area, c.params.power, r());
}

BatchOut run_batch(const Campaign& c, const Deployment* fixed, long b) {
  const Deployment dep = batch_deployment(c, fixed, b);
  const CptParams& par = c.params;
  const long first = b * c.redraw_every;
  const long last = std::min(c.trials, first + c.redraw_every);
  BatchOut out;
  out.per_mech.resize(c.mechanisms.size());
  out.gamma_prime = dep.gamma_bar_prime;

  theory::MechanismContext ctx;
  ctx.n = par.n;
  ctx.n1 = par.n1;
  ctx.gamma_bar = par.power.gamma_bar();
  ctx.gamma_prime = dep.gamma_bar_prime;
  ctx.xi = par.xi;
  ctx.t_match = c.t_match;

  const bool need_acptd = std::find(c.mechanisms.begin(), c.mechanisms.end(), Mechanism::acptd) != c.mechanisms.end();
  const bool need_acptf = std::find(c.mechanisms.begin(), c.mechanisms.end(), Mechanism::acptf) != c.mechanisms.end();
  std::optional<AcptdConfig> dcfg;
  std::unique_ptr<Likelihood> lik_d, lik_f;
  const UcptLikelihood lik_u(par.n, par.power.gamma_bar());
  if (need_acptd) {
    dcfg = configure_acptd(dep, par);
    if (c.ml) lik_d = std::make_unique<AcptdLikelihood>(theory::acptd_model(ctx));
  }
  if (need_acptf && c.ml)
    lik_f = std::make_unique<AcptfLikelihood>(par.n1, par.n2(), dep.gamma_bar_prime, par.power.gamma_bar());

  for (long g = first; g < last; ++g) {
    Rng ar = Rng::stream(c.seed, key_active, static_cast<std::uint64_t>(g));
    const auto active = draw_active_set(c.q, c.k, ar);
    for (std::size_t mi = 0; mi < c.mechanisms.size(); ++mi) {
      const Mechanism m = c.mechanisms[mi];
      Rng rng = Rng::stream(c.seed, static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(g), mech_key(m));
      Tally& t = out.per_mech[mi];
      double k_real = 0.0;
      int k_ml = -1;
      int k_opt = -1;
      switch (m) {
        case Mechanism::ucpt: {
          const auto slot = simulate_ucpt_slot(dep, active, par, rng);
          k_real = estimate_ucpt(slot.y, par);
          if (c.ml) {
            k_ml = round_ml(k_real, lik_u, c.q);
            k_opt = detect_ucpt_optimal(slot.y, par, c.q);
          }
          break;
        }
        case Mechanism::acptf: {
          const auto slot = simulate_acptf_slot(dep, active, par, rng);
          k_real = estimate_acptf(slot.y, par, dep.gamma_bar_prime);
          if (c.ml) k_ml = round_ml(k_real, *lik_f, c.q);
          break;
        }
        case Mechanism::acptd: {
          const auto slot = simulate_acptd_slot(dep, active, par, *dcfg, rng);
          k_real = estimate_acptd(slot.y, *dcfg, par, par.acptd_mode).total();
          if (c.ml) k_ml = round_ml(k_real, *lik_d, c.q, c.acptd_ml_window);
          break;
        }
      }
      const int k_ni = round_ni(k_real, c.q);
      ++t.trials;
      ++t.pmf_ni[k_ni];
      if (k_ni == c.k) ++t.hits_ni;
      if (c.ml) {
        ++t.pmf_ml[k_ml];
        if (k_ml == c.k) ++t.hits_ml;
        if (k_opt == c.k) ++t.hits_opt;
      }
    }
  }
  return out;
}

std::vector<BatchOut> run_batches(const Campaign& c) {
  const long nb = (c.trials + c.redraw_every - 1) / c.redraw_every;
  std::optional<Deployment> fixed;
  if (c.policy == DeploymentPolicy::fixed)
    fixed = c.deployment ? *c.deployment : generate_deployment(c.q, c.area, c.params.power, c.seed);
  const Deployment* fp = fixed ? &*fixed : nullptr;

  std::vector<BatchOut> out(static_cast<std::size_t>(nb));
  const int workers = std::min<long>(resolve_workers(c.workers), nb);
  std::atomic<long> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto work = [&] {
    for (long b = next.fetch_add(1); b < nb; b = next.fetch_add(1)) {
      try {
        out[static_cast<std::size_t>(b)] = run_batch(c, fp, b);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!err) err = std::current_exception();
        next.store(nb);
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (err) std::rethrow_exception(err);
  return out;
}

theory::MechanismContext context_for(const Campaign& c, double gamma_prime) {
  theory::MechanismContext ctx;
  ctx.n = c.params.n;
  ctx.n1 = c.params.n1;
  ctx.gamma_bar = c.params.power.gamma_bar();
  ctx.gamma_prime = gamma_prime;
  ctx.xi = c.params.xi;
  ctx.t_match = c.t_match;
  return ctx;
}

GridPoint run_point_impl(const Campaign& c, bool theory_pmf) {
  c.validate();
  const auto batches = run_batches(c);
  GridPoint gp;
  gp.k = c.k;
  // ordered reduction by batch index
  double gsum = 0.0;
  for (const auto& b : batches) gsum += b.gamma_prime;
  gp.mean_gamma_prime = gsum / static_cast<double>(batches.size());
  const auto ctx = context_for(c, gp.mean_gamma_prime);
  for (std::size_t mi = 0; mi < c.mechanisms.size(); ++mi) {
    MechanismStats s;
    s.mechanism = c.mechanisms[mi];
    s.hits_ni = 0;
    s.hits_ml = c.ml ? 0 : -1;
    s.hits_opt = c.ml && s.mechanism == Mechanism::ucpt ? 0 : -1;
    for (const auto& b : batches) {
      const Tally& t = b.per_mech[mi];
      s.trials += t.trials;
      s.hits_ni += t.hits_ni;
      if (c.ml) s.hits_ml += t.hits_ml;
      if (s.hits_opt >= 0) s.hits_opt += t.hits_opt;
      for (const auto& [k, n] : t.pmf_ni) s.pmf_ni[k] += n;
      for (const auto& [k, n] : t.pmf_ml) s.pmf_ml[k] += n;
    }
    if (s.mechanism == Mechanism::ucpt || c.params.n1 < c.params.n) {
      try {
        s.theory_ni = theory::success_probability_theory(s.mechanism, c.k, ctx);
        if (theory_pmf)
          s.theory_pmf = theory::ni_pmf_theory(s.mechanism, c.k, std::min(c.q, 8 * c.k + 10), ctx);
      } catch (const std::exception&) {
        s.theory_ni = std::numeric_limits<double>::quiet_NaN();
      }
    }
    gp.mechanisms.push_back(std::move(s));
  }
  return gp;
}

CampaignResult finish(const Campaign& c, std::vector<GridPoint> pts, std::chrono::steady_clock::time_point t0) {
  CampaignResult r;
  r.config = to_json(c);
  r.points = std::move(pts);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace

RelaxedSamples sample_relaxed(Mechanism m, const Deployment& dep, const CptParams& params, int k, long n,
                              std::uint64_t seed, bool all_transmit) {
  if (n < 1) throw std::invalid_argument("sample_relaxed: n must be >= 1");
  if (k < 0 || k > dep.q()) throw std::invalid_argument("sample_relaxed: K must lie in [0, Q]");
  RelaxedSamples out;
  out.k_real.reserve(static_cast<std::size_t>(n));
  std::optional<AcptdConfig> cfg;
  if (m == Mechanism::acptd) cfg = configure_acptd(dep, params);
  for (std::uint64_t g = 0; static_cast<long>(out.k_real.size()) < n; ++g) {
    Rng rng = Rng::stream(seed, 0x5a3b, g, mech_key(m));
    const auto active = draw_active_set(dep.q(), k, rng);
    ++out.drawn;
    switch (m) {
      case Mechanism::ucpt:
        out.k_real.push_back(estimate_ucpt(simulate_ucpt_slot(dep, active, params, rng).y, params));
        break;
      case Mechanism::acptf:
        out.k_real.push_back(
            estimate_acptf(simulate_acptf_slot(dep, active, params, rng).y, params, dep.gamma_bar_prime));
        break;
      case Mechanism::acptd: {
        const auto slot = simulate_acptd_slot(dep, active, params, *cfg, rng);
        out.silenced += static_cast<long>(slot.silent.size());
        if (all_transmit && !slot.silent.empty()) break;
        out.k_real.push_back(estimate_acptd(slot.y, *cfg, params, params.acptd_mode).total());
        break;
      }
    }
    if (out.drawn > 100 * n + 1000) throw std::runtime_error("sample_relaxed: too many slots redrawn");
  }
  return out;
}

GridPoint run_point(const Campaign& c) { return run_point_impl(c, false); }

CampaignResult run_pmf(const Campaign& c) {
  const auto t0 = std::chrono::steady_clock::now();
  GridPoint gp = run_point_impl(c, true);
  return finish(c, {std::move(gp)}, t0);
}

CampaignResult run_table3(const Campaign& c) {
  const auto t0 = std::chrono::steady_clock::now();
  Campaign t = c;
  t.ml = true;
  GridPoint gp = run_point_impl(t, false);
  return finish(t, {std::move(gp)}, t0);
}

CampaignResult run_sweep(const Campaign& c) {
  if (c.sweep == SweepVariable::none) throw std::invalid_argument("run_sweep: no sweep variable set");
  c.validate();
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<GridPoint> pts;
  for (double v : c.grid) {
    Campaign p = c;
    GridPoint gp;
    switch (c.sweep) {
      case SweepVariable::k: p.k = static_cast<int>(v); break;
      case SweepVariable::xi: p.params.xi = v; break;
      case SweepVariable::n1: p.params.n1 = static_cast<int>(v); break;
      case SweepVariable::n: p.params.n = static_cast<int>(v); break;
      case SweepVariable::none: break;
    }
    if (c.sweep != SweepVariable::n) {
      gp = run_point_impl(p, false);
    } else {
      // U-CPT uses all N symbols; assisted mechanisms take their best (N1, N - N1) split
      const int n = p.params.n;
      for (Mechanism m : c.mechanisms) {
        Campaign pm = p;
        pm.mechanisms = {m};
        MechanismStats best;
        double best_p = -1.0;
        const int lo = m == Mechanism::ucpt ? 0 : 1;
        const int hi = m == Mechanism::ucpt ? 0 : n - 1;
        for (int n1 = lo; n1 <= hi; ++n1) {
          if (m != Mechanism::ucpt) pm.params.n1 = n1;
          else pm.params.n1 = std::min(c.params.n1, n - 1);
          GridPoint one = run_point_impl(pm, false);
          const MechanismStats& s = one.mechanisms.front();
          if (s.success_ni() > best_p) {
            best_p = s.success_ni();
            best = s;
            best.best_n1 = m == Mechanism::ucpt ? 0 : n1;
            gp.k = one.k;
            gp.mean_gamma_prime = one.mean_gamma_prime;
          }
        }
        gp.mechanisms.push_back(std::move(best));
      }
    }
    gp.variable = c.sweep;
    gp.value = v;
    pts.push_back(std::move(gp));
  }
  return finish(c, std::move(pts), t0);
}

}  // namespace kdetect
