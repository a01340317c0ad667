#include "kdetect/cpt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>

#include "kdetect/roots.hpp"
#include "kdetect/special.hpp"

namespace kdetect {

std::string to_string(PilotKind k) { return k == PilotKind::ones ? "ones" : "chirp"; }
std::string to_string(ChannelModel m) {
  return m == ChannelModel::equivalent ? "equivalent" : "explicit";
}
std::string to_string(AcptdMode m) { return m == AcptdMode::corollary ? "corollary" : "full_mmse"; }
std::string to_string(Rounding r) {
  switch (r) {
    case Rounding::ni: return "NI";
    case Rounding::ml: return "ML";
    case Rounding::optimal: return "Optimum";
  }
  return "?";
}

PilotKind pilot_from_string(const std::string& s) {
  if (s == "ones") return PilotKind::ones;
  if (s == "chirp") return PilotKind::chirp;
  throw std::invalid_argument("pilot must be 'ones' or 'chirp', got '" + s + "'");
}

ChannelModel channel_model_from_string(const std::string& s) {
  if (s == "equivalent") return ChannelModel::equivalent;
  if (s == "explicit") return ChannelModel::explicit_estimation;
  throw std::invalid_argument("channel_model must be 'equivalent' or 'explicit', got '" + s + "'");
}

AcptdMode acptd_mode_from_string(const std::string& s) {
  if (s == "corollary") return AcptdMode::corollary;
  if (s == "full_mmse") return AcptdMode::full_mmse;
  throw std::invalid_argument("acptd_mode must be 'corollary' or 'full_mmse', got '" + s + "'");
}

std::vector<cd> make_pilot(PilotKind kind, int length) {
  if (length < 1) throw std::invalid_argument("pilot length must be >= 1");
  std::vector<cd> s(static_cast<std::size_t>(length), cd{1.0, 0.0});
  if (kind == PilotKind::chirp) {
    for (int n = 0; n < length; ++n)
      s[static_cast<std::size_t>(n)] = std::polar(1.0, std::numbers::pi * n * n / length);
  }
  return s;
}

std::vector<cd> CptParams::ucpt_pilot() const { return make_pilot(pilot, n); }
std::vector<cd> CptParams::acpt_pilot() const { return make_pilot(pilot, n2()); }
std::vector<cd> CptParams::dl_pilot() const { return make_pilot(pilot, n1); }

void CptParams::validate_ucpt() const {
  if (n < 1) throw std::invalid_argument("N must be >= 1");
}

void CptParams::validate_acpt() const {
  if (n < 2 || n1 < 1 || n1 >= n) throw std::invalid_argument("N1 must satisfy 1 <= N1 < N");
  if (!(xi >= 0.0 && xi < 1.0)) throw std::invalid_argument("xi must satisfy 0 <= xi < 1");
}

AcptdConfig configure_acptd(const Deployment& dep, const CptParams& params) {
  params.validate_acpt();
  if (params.xi == 0.0)
    throw std::invalid_argument("configure_acptd: xi = 0 leaves the power coefficient undefined");
  const theory::Silencing sil(params.xi);
  AcptdConfig cfg;
  cfg.xi = params.xi;
  cfg.rho = sil.rho_over_pbar * params.power.p_bar();
  cfg.psi = sil.psi;
  cfg.gamma_c_prime = cfg.rho / params.power.sigma2();
  const auto q = dep.betas.size();
  cfg.mu.resize(q);
  cfg.vartheta.resize(q);
  for (std::size_t i = 0; i < q; ++i) {
    cfg.vartheta[i] = dep.betas[i] * (1.0 + 1.0 / (params.n1 * dep.gamma_bars[i]));
    cfg.mu[i] = sil.c * cfg.vartheta[i];
  }
  return cfg;
}

namespace {

std::vector<cd> draw_noise(int len, double sigma2, Rng& rng) {
  std::vector<cd> w(static_cast<std::size_t>(len));
  for (auto& x : w) x = rng.complex_normal(sigma2);
  return w;
}

// DL training: channel estimate from the broadcast pilot observed in noise.
cd estimate_channel(cd h, const CptParams& params, Rng& rng) {
  const auto v = params.dl_pilot();
  const double sp = std::sqrt(params.power.p());
  cd acc{0.0, 0.0};
  for (const cd& vn : v) {
    const cd z = sp * h * vn + rng.complex_normal(params.power.sigma2());
    acc += std::conj(vn) * z;
  }
  return acc / (static_cast<double>(params.n1) * sp);
}

cd correlate(std::span<const cd> s, std::span<const cd> y) {
  cd acc{0.0, 0.0};
  for (std::size_t n = 0; n < y.size(); ++n) acc += std::conj(s[n]) * y[n];
  return acc;
}

}  // namespace

std::vector<cd> ucpt_received(const CptParams& params, int k, cd shared_gain, std::span<const cd> noise) {
  const auto s = params.ucpt_pilot();
  if (noise.size() != s.size()) throw std::invalid_argument("ucpt_received: noise length must equal N");
  const cd a = std::sqrt(k * params.power.p_bar()) * shared_gain;
  std::vector<cd> y(s.size());
  for (std::size_t n = 0; n < s.size(); ++n) y[n] = a * s[n] + noise[n];
  return y;
}

std::vector<cd> acptf_received(const Deployment& dep, const CptParams& params,
                               const SlotRealization& slot, std::span<const cd> noise) {
  const auto s = params.acpt_pilot();
  if (noise.size() != s.size()) throw std::invalid_argument("acptf_received: noise length must equal N2");
  cd amp{0.0, 0.0};
  for (std::size_t j = 0; j < slot.active.size(); ++j) {
    const double beta = dep.betas[static_cast<std::size_t>(slot.active[j])];
    const cd hh = slot.h_hat[j];
    amp += std::sqrt(params.power.p_bar() / beta) * std::conj(hh) * slot.h[j] / std::abs(hh);
  }
  std::vector<cd> y(s.size());
  for (std::size_t n = 0; n < s.size(); ++n) y[n] = amp * s[n] + noise[n];
  return y;
}

std::vector<cd> acptd_received(const CptParams& params, const AcptdConfig& cfg,
                               const SlotRealization& slot, std::span<const cd> noise) {
  const auto s = params.acpt_pilot();
  if (noise.size() != s.size()) throw std::invalid_argument("acptd_received: noise length must equal N2");
  const double sr = std::sqrt(cfg.rho);
  cd amp{0.0, 0.0};
  std::size_t t = 0;
  for (std::size_t j = 0; j < slot.active.size() && t < slot.transmitting.size(); ++j) {
    if (slot.active[j] != slot.transmitting[t]) continue;
    ++t;
    const cd hh = slot.h_hat[j];
    amp += sr * std::conj(hh) * slot.h[j] / std::norm(hh);
  }
  std::vector<cd> y(s.size());
  for (std::size_t n = 0; n < s.size(); ++n) y[n] = amp * s[n] + noise[n];
  return y;
}

SlotRealization simulate_ucpt_slot(const Deployment& dep, std::span<const int> active,
                                   const CptParams& params, Rng& rng) {
  params.validate_ucpt();
  SlotRealization slot;
  slot.mechanism = Mechanism::ucpt;
  slot.active.assign(active.begin(), active.end());
  for (int i : slot.active)
    if (i < 0 || i >= dep.q()) throw std::out_of_range("simulate_ucpt_slot: device index outside deployment");
  slot.transmitting = slot.active;
  // Under statistical inverse power control the K faded contributions sum to sqrt(K p_bar) h'.
  slot.shared_gain = rng.complex_normal(1.0);
  const auto w = draw_noise(params.n, params.power.sigma2(), rng);
  slot.y = ucpt_received(params, static_cast<int>(slot.active.size()), slot.shared_gain, w);
  return slot;
}

SlotRealization simulate_acptf_slot(const Deployment& dep, std::span<const int> active,
                                    const CptParams& params, Rng& rng) {
  params.validate_acpt();
  SlotRealization slot;
  slot.mechanism = Mechanism::acptf;
  slot.active.assign(active.begin(), active.end());
  slot.transmitting = slot.active;
  const std::size_t k = slot.active.size();
  slot.h.resize(k);
  slot.h_hat.resize(k);
  slot.h_err.resize(k);
  const double err_var = 1.0 / (params.n1 * params.power.varrho());
  for (std::size_t j = 0; j < k; ++j) {
    const auto i = static_cast<std::size_t>(slot.active[j]);
    if (slot.active[j] < 0 || i >= dep.betas.size())
      throw std::out_of_range("simulate_acptf_slot: device index outside deployment");
    const double beta = dep.betas[i];
    if (params.channel == ChannelModel::equivalent) {
      const double vartheta = beta * (1.0 + 1.0 / (params.n1 * dep.gamma_bars[i]));
      const cd hh = rng.complex_normal(vartheta);
      const cd err = rng.complex_normal(err_var);
      // choose h so that conj(h_hat) h / |h_hat| = |h_hat| - err exactly
      slot.h_hat[j] = hh;
      slot.h[j] = hh - hh * err / std::abs(hh);
    } else {
      const cd h = rng.complex_normal(beta);
      slot.h[j] = h;
      slot.h_hat[j] = estimate_channel(h, params, rng);
    }
    slot.h_err[j] = slot.h_hat[j] - slot.h[j];
  }
  const auto w = draw_noise(params.n2(), params.power.sigma2(), rng);
  slot.y = acptf_received(dep, params, slot, w);
  return slot;
}

SlotRealization simulate_acptd_slot(const Deployment& dep, std::span<const int> active,
                                    const CptParams& params, const AcptdConfig& cfg, Rng& rng) {
  params.validate_acpt();
  SlotRealization slot;
  slot.mechanism = Mechanism::acptd;
  slot.active.assign(active.begin(), active.end());
  const std::size_t k = slot.active.size();
  slot.h.resize(k);
  slot.h_hat.resize(k);
  slot.h_err.resize(k);
  const double err_var = 1.0 / (params.n1 * params.power.varrho());
  for (std::size_t j = 0; j < k; ++j) {
    const auto i = static_cast<std::size_t>(slot.active[j]);
    if (slot.active[j] < 0 || i >= dep.betas.size())
      throw std::out_of_range("simulate_acptd_slot: device index outside deployment");
    const cd h = rng.complex_normal(dep.betas[i]);
    slot.h[j] = h;
    slot.h_hat[j] = params.channel == ChannelModel::equivalent ? h + rng.complex_normal(err_var)
                                                               : estimate_channel(h, params, rng);
    slot.h_err[j] = slot.h_hat[j] - h;
    if (std::norm(slot.h_hat[j]) >= cfg.mu[i])
      slot.transmitting.push_back(slot.active[j]);
    else
      slot.silent.push_back(slot.active[j]);
  }
  const auto w = draw_noise(params.n2(), params.power.sigma2(), rng);
  slot.y = acptd_received(params, cfg, slot, w);
  return slot;
}

double estimate_ucpt(std::span<const cd> y, const CptParams& params) {
  const auto s = params.ucpt_pilot();
  if (y.size() != s.size()) throw std::invalid_argument("estimate_ucpt: y must have length N");
  const double nn = params.n;
  return (std::norm(correlate(s, y)) / (nn * nn) - params.power.sigma2() / nn) / params.power.p_bar();
}

double estimate_acptf(std::span<const cd> y, const CptParams& params, double gamma_prime) {
  const auto s = params.acpt_pilot();
  if (y.size() != s.size()) throw std::invalid_argument("estimate_acptf: y must have length N2");
  if (!(gamma_prime > 0.0)) throw std::invalid_argument("estimate_acptf: gamma' must be positive");
  const double zeta = correlate(s, y).real() / params.n2();
  return 2.0 * zeta /
         std::sqrt(std::numbers::pi * params.power.p_bar() * (1.0 + 1.0 / (params.n1 * gamma_prime)));
}

double silent_correction_corollary(double k_prime, double xi) {
  return xi * (1.0 + k_prime) / ((1.0 - xi) * (1.0 - xi));
}

KlSolution solve_kl(double k_prime, double xi) {
  if (!(xi > 0.0 && xi < 1.0)) throw std::invalid_argument("solve_kl: xi must lie in (0, 1)");
  const double b = 1.0 + std::max(k_prime, 0.0);
  auto f = [&](double kl) { return num::reg_inc_beta(xi, 1.0 + kl, b) - xi; };
  const double f0 = f(0.0);
  if (f0 <= 0.0) return {0.0, std::fabs(f0)};
  double hi = 1.0;
  while (f(hi) > 0.0) {
    hi *= 2.0;
    if (hi > 1e6) throw num::RootError("solve_kl: no sign change below 1e6");
  }
  const num::RootResult r = num::brent(f, {0.0, hi, 1e-13});
  return {r.root, std::fabs(f(r.root))};
}

double silent_correction_mmse(double k_prime, double xi) {
  const double kp = std::max(k_prime, 0.0);
  const double kl = solve_kl(kp, xi).k_l;
  const double t1 = (xi - 1.0) * (kl + 1.0) * num::binomial_real(1.0 + kl + kp, 1.0 + kl) *
                    num::hyp2f1(1.0 + kl, -kp, 2.0 + kl, xi);
  const double t2 = num::binomial_real(2.0 + kl + kp, 2.0 + kl) * xi *
                    num::hyp2f1(1.0 + kl, -kp, 3.0 + kl, xi);
  return xi / ((1.0 - xi) * (1.0 - xi)) * (std::pow(xi, kl) * (t1 - t2) + kp + 1.0);
}

AcptdEstimate estimate_acptd(std::span<const cd> y, const AcptdConfig& cfg, const CptParams& params,
                             AcptdMode mode) {
  const auto s = params.acpt_pilot();
  if (y.size() != s.size()) throw std::invalid_argument("estimate_acptd: y must have length N2");
  AcptdEstimate e;
  e.k_prime = correlate(s, y).real() / (params.n2() * std::sqrt(cfg.rho));
  e.k_silent = mode == AcptdMode::corollary ? silent_correction_corollary(e.k_prime, cfg.xi)
                                            : silent_correction_mmse(e.k_prime, cfg.xi);
  return e;
}

double ucpt_log_likelihood(std::span<const cd> y, const CptParams& params, int k) {
  const auto s = params.ucpt_pilot();
  if (y.size() != s.size()) throw std::invalid_argument("ucpt_log_likelihood: y must have length N");
  double energy = 0.0;
  for (const cd& v : y) energy += std::norm(v);
  const double s2 = params.power.sigma2();
  return -params.n * std::log(std::numbers::pi * s2) - energy / s2 + ucpt_metric(y, params, k);
}

double ucpt_metric(std::span<const cd> y, const CptParams& params, int k) {
  const auto s = params.ucpt_pilot();
  const double g = params.power.gamma_bar();
  const double nkg = params.n * k * g;
  return -std::log1p(nkg) + k * g * std::norm(correlate(s, y)) / (params.power.sigma2() * (1.0 + nkg));
}

int detect_ucpt_optimal(std::span<const cd> y, const CptParams& params, int q) {
  const auto s = params.ucpt_pilot();
  if (y.size() != s.size()) throw std::invalid_argument("detect_ucpt_optimal: y must have length N");
  const double g = params.power.gamma_bar();
  const double a = g * std::norm(correlate(s, y)) / params.power.sigma2();
  int best = 0;
  double best_v = 0.0;
  for (int k = 1; k <= q; ++k) {
    const double nkg = params.n * k * g;
    const double v = -std::log1p(nkg) + k * a / (1.0 + nkg);
    if (v > best_v) {
      best_v = v;
      best = k;
    }
  }
  return best;
}

int round_ni(double k_real, int q) {
  if (std::isnan(k_real)) throw std::invalid_argument("round_ni: NaN estimate");
  const double c = std::clamp(k_real, 0.0, static_cast<double>(q));
  return std::min(q, static_cast<int>(std::floor(c + 0.5)));
}

std::vector<double> Likelihood::log_densities(double k_real, int lo, int hi) const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (int k = lo; k <= hi; ++k) out.push_back(log_density(k_real, k));
  return out;
}

double UcptLikelihood::log_density(double k_real, int k) const {
  return theory::ucpt_log_pdf(k_real, k, n_, gamma_bar_);
}

double AcptfLikelihood::log_density(double k_real, int k) const {
  return theory::Gaussian{static_cast<double>(k),
                          theory::acptf_variance(k, n1_, n2_, gamma_prime_, gamma_c_)}
      .log_pdf(k_real);
}

double AcptdLikelihood::log_density(double k_real, int k) const {
  return log_densities(k_real, k, k).front();
}

std::vector<double> AcptdLikelihood::log_densities(double k_real, int lo, int hi) const {
  const double x = model_.unmap(k_real);
  const double xi = model_.params().xi;
  std::map<int, double> comp;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (int k = lo; k <= hi; ++k) {
    const auto w = theory::binomial_weights(k, 1.0 - xi);
    const double wmax = *std::max_element(w.begin(), w.end());
    double acc = 0.0;
    for (int j = 0; j <= k; ++j) {
      const double wj = w[static_cast<std::size_t>(j)];
      if (wj < weight_floor_ * wmax) continue;
      auto it = comp.find(j);
      if (it == comp.end()) it = comp.emplace(j, model_.pdf_given_kprime(x, j)).first;
      acc += wj * it->second;
    }
    out.push_back(acc > 0.0 ? std::log(acc / model_.silencing().gain)
                            : -std::numeric_limits<double>::infinity());
  }
  return out;
}

int round_ml(double k_real, const Likelihood& lik, int q, std::optional<int> window) {
  int lo = 0;
  int hi = q;
  if (window) {
    const int c = round_ni(k_real, q);
    lo = std::max(0, c - *window);
    hi = std::min(q, c + *window);
  }
  const auto v = lik.log_densities(k_real, lo, hi);
  int best = lo;
  double best_v = -std::numeric_limits<double>::infinity();
  for (int k = lo; k <= hi; ++k) {
    const double d = v[static_cast<std::size_t>(k - lo)];
    if (d > best_v) {
      best_v = d;
      best = k;
    }
  }
  return best;
}

}  // namespace kdetect
