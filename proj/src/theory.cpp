#include "kdetect/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "kdetect/special.hpp"

namespace kdetect::theory {

std::string to_string(Mechanism m) {
  switch (m) {
    case Mechanism::ucpt: return "ucpt";
    case Mechanism::acptf: return "acptf";
    case Mechanism::acptd: return "acptd";
  }
  return "?";
}

Mechanism mechanism_from_string(const std::string& s) {
  if (s == "ucpt" || s == "U-CPT") return Mechanism::ucpt;
  if (s == "acptf" || s == "A-CPT-F") return Mechanism::acptf;
  if (s == "acptd" || s == "A-CPT-D") return Mechanism::acptd;
  throw std::invalid_argument("unknown mechanism '" + s + "' (expected ucpt, acptf or acptd)");
}

// ---- U-CPT ---------------------------------------------------------------------------------

double ucpt_cdf(double k_hat, double k, int n, double gamma_bar) {
  const double ng = n * gamma_bar;
  const double z = 1.0 + ng * k_hat;
  if (z <= 0.0) return 0.0;
  return -std::expm1(-z / (1.0 + ng * k));
}

double ucpt_log_pdf(double k_hat, double k, int n, double gamma_bar) {
  const double ng = n * gamma_bar;
  const double z = 1.0 + ng * k_hat;
  if (z < 0.0) return -std::numeric_limits<double>::infinity();
  const double scale = 1.0 + ng * k;
  return std::log(ng / scale) - z / scale;
}

double ucpt_pdf(double k_hat, double k, int n, double gamma_bar) {
  return std::exp(ucpt_log_pdf(k_hat, k, n, gamma_bar));
}

double ucpt_variance(double k, int n, double gamma_bar) {
  const double inv = 1.0 / (n * gamma_bar);
  return k * k + 2.0 * k * inv + inv * inv;
}

// ---- A-CPT-F -------------------------------------------------------------------------------

double Gaussian::cdf(double x) const {
  return 0.5 * num::erfc(-(x - mean) / std::sqrt(2.0 * variance));
}

double Gaussian::log_pdf(double x) const {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) - d * d / (2.0 * variance);
}

double Gaussian::pdf(double x) const { return std::exp(log_pdf(x)); }

double acptf_variance(double k, int n1, int n2, double gamma_prime, double gamma_c) {
  const double e = 1.0 / (n1 * gamma_prime);
  const double upsilon2 = 4.0 / (std::numbers::pi * (1.0 + e));
  return upsilon2 * (((1.0 - std::numbers::pi / 4.0) * (1.0 + e) + 0.5 * e) * k + 0.5 / (n2 * gamma_c));
}

double acptf_variance(std::span<const double> active_gamma_bars, int n1, int n2, double gamma_prime,
                      double gamma_c) {
  const double upsilon2 = 4.0 / (std::numbers::pi * (1.0 + 1.0 / (n1 * gamma_prime)));
  double acc = 0.5 / (n2 * gamma_c);
  for (double g : active_gamma_bars) {
    const double e = 1.0 / (n1 * g);
    acc += (1.0 - std::numbers::pi / 4.0) * (1.0 + e) + 0.5 * e;
  }
  return upsilon2 * acc;
}

Gaussian acptf_gaussian_model(double k, int n1, int n2, double gamma_prime, double gamma_c) {
  if (n1 < 1 || n2 < 1 || !(gamma_prime > 0.0) || !(gamma_c > 0.0) || k < 0.0)
    throw std::invalid_argument("acptf_gaussian_model: parameters must be positive");
  return {k, acptf_variance(k, n1, n2, gamma_prime, gamma_c)};
}

// ---- A-CPT-D -------------------------------------------------------------------------------

Silencing::Silencing(double x) : xi(x) {
  if (!(xi > 0.0 && xi < 1.0)) throw std::invalid_argument("silence probability must lie in (0, 1)");
  c = -std::log1p(-xi);
  const double li = num::log_integral(1.0 - xi);
  rho_over_pbar = -(1.0 - xi) / li;
  z_variance = -li / (1.0 - xi);
  const double q = (1.0 - xi) * (1.0 - xi);
  psi = 1.0 + xi * xi / (q * q);
  offset = xi / q;
  gain = 1.0 + offset;
}

double acptd_fz_pdf(double z, double xi) {
  const double c = -std::log1p(-xi);
  const double w = 0.5 * z * z + 1.0;
  return num::gamma_upper(1.5, w * c) / ((1.0 - xi) * std::sqrt(2.0 * std::numbers::pi * w * w * w));
}

double acptd_z_log_cf(double t, double xi) {
  if (!(xi > 0.0 && xi < 1.0)) throw std::invalid_argument("acptd_z_log_cf: xi must lie in (0, 1)");
  if (t == 0.0) return 0.0;
  const double c = -std::log1p(-xi);
  const double a = 0.5 * t * t;
  const double peak = std::max(c, std::sqrt(a));
  const double top = -a / peak - peak;
  const double width = std::sqrt(std::max(peak, 1.0)) * std::max(std::pow(a, 0.25), 1.0);
  const double cuts[] = {peak, peak + 4.0 * width, peak + 16.0 * width, peak + 64.0 * width};
  num::QuadratureSpec spec;
  spec.abs_tol = 1e-15;
  spec.rel_tol = 1e-12;
  spec.max_subdivisions = 2000;
  const double scaled = num::integrate_1d(
      [&](double u) { return std::exp(-a / u - u - top); }, c,
      std::numeric_limits<double>::infinity(), spec, cuts);
  return c + top + std::log(scaled);
}

double acptd_z_cf(double t, double xi) { return std::exp(acptd_z_log_cf(t, xi)); }

num::QuadResult acptd_z_cf_oscillatory(double t, double xi, const num::QuadratureSpec& spec) {
  if (!(t > 0.0)) throw std::invalid_argument("acptd_z_cf_oscillatory: t must be positive");
  num::QuadResult r = num::integrate_oscillatory(
      [&](double z) { return 2.0 * std::cos(t * z) * acptd_fz_pdf(z, xi); }, 0.0,
      std::numbers::pi / t, [&](double z) { return acptd_fz_pdf(z, xi); }, spec);
  return r;
}

double student_t_pdf(double t, double nu) {
  return std::exp(std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                  0.5 * std::log(nu * std::numbers::pi) - 0.5 * (nu + 1.0) * std::log1p(t * t / nu));
}

double student_t_cdf(double t, double nu) {
  const double tail = 0.5 * num::reg_inc_beta(nu / (nu + t * t), 0.5 * nu, 0.5);
  return t > 0.0 ? 1.0 - tail : tail;
}

std::vector<double> binomial_weights(int k, double p) {
  if (k < 0) throw std::invalid_argument("binomial_weights: k must be >= 0");
  std::vector<double> w(static_cast<std::size_t>(k) + 1);
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  for (int j = 0; j <= k; ++j) {
    const double lc = std::lgamma(k + 1.0) - std::lgamma(j + 1.0) - std::lgamma(k - j + 1.0);
    const double lw = lc + (j > 0 ? j * lp : 0.0) + (k - j > 0 ? (k - j) * lq : 0.0);
    w[static_cast<std::size_t>(j)] = std::exp(lw);
  }
  return w;
}

AcptdModel::AcptdModel(const AcptdModelParams& p) : p_(p), sil_(p.xi) {
  if (p.n2 < 1 || !(p.gamma_c_prime > 0.0) || !(p.n1_gamma_prime > 0.0))
    throw std::invalid_argument("AcptdModel: N2, gamma_c' and N1*gamma' must be positive");
  noise_sd_ = std::sqrt(0.5 / (p.n2 * p.gamma_c_prime));
}

double AcptdModel::t_scale(int k_prime) const {
  if (k_prime <= 0) return 0.0;
  const StudentFit fit = acptd_student_fit(k_prime, p_.xi, p_.t_match);
  return fit.scale / std::sqrt(2.0 * (p_.n1_gamma_prime + 1.0));
}

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

num::QuadratureSpec density_spec() {
  num::QuadratureSpec s;
  s.abs_tol = 1e-11;
  s.rel_tol = 1e-9;
  s.max_subdivisions = 400;
  return s;
}

std::vector<double> t_cuts(double t0, double width) {
  std::vector<double> cuts = {-8.0, -1.5, 0.0, 1.5, 8.0};
  for (double m : {-8.0, -3.0, 0.0, 3.0, 8.0}) cuts.push_back(t0 + m * width);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

}  // namespace

double AcptdModel::cdf_given_kprime(double x, int k_prime) const {
  const double d = x - k_prime;
  const double sd = noise_sd_;
  if (k_prime <= 0) return 0.5 * num::erfc(-d / (std::sqrt(2.0) * sd));
  const StudentFit fit = acptd_student_fit(k_prime, p_.xi, p_.t_match);
  const double sc = fit.scale / std::sqrt(2.0 * (p_.n1_gamma_prime + 1.0));
  const double nu = fit.nu;
  const auto cuts = t_cuts(d / sc, sd / sc);
  return num::integrate_1d(
      [&](double t) {
        return 0.5 * num::erfc(-(d - sc * t) / (std::sqrt(2.0) * sd)) * student_t_pdf(t, nu);
      },
      -inf, inf, density_spec(), cuts);
}

double AcptdModel::cdf_given_kprime_v_route(double x, int k_prime) const {
  const double d = x - k_prime;
  const double sd = noise_sd_;
  if (k_prime <= 0) return 0.5 * num::erfc(-d / (std::sqrt(2.0) * sd));
  const StudentFit fit = acptd_student_fit(k_prime, p_.xi, p_.t_match);
  const double sc = fit.scale / std::sqrt(2.0 * (p_.n1_gamma_prime + 1.0));
  std::vector<double> cuts = {-6.0 * sd, -2.0 * sd, 0.0, 2.0 * sd, 6.0 * sd, d - 3.0 * sc, d,
                              d + 3.0 * sc};
  std::sort(cuts.begin(), cuts.end());
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * sd);
  return num::integrate_1d(
      [&](double v) {
        return norm * std::exp(-0.5 * v * v / (sd * sd)) * student_t_cdf((d - v) / sc, fit.nu);
      },
      -inf, inf, density_spec(), cuts);
}

double AcptdModel::pdf_given_kprime(double x, int k_prime) const {
  const double d = x - k_prime;
  const double sd = noise_sd_;
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * sd);
  if (k_prime <= 0) return norm * std::exp(-0.5 * d * d / (sd * sd));
  const StudentFit fit = acptd_student_fit(k_prime, p_.xi, p_.t_match);
  const double sc = fit.scale / std::sqrt(2.0 * (p_.n1_gamma_prime + 1.0));
  const double nu = fit.nu;
  const auto cuts = t_cuts(d / sc, sd / sc);
  return num::integrate_1d(
      [&](double t) {
        const double r = (d - sc * t) / sd;
        return norm * std::exp(-0.5 * r * r) * student_t_pdf(t, nu);
      },
      -inf, inf, density_spec(), cuts);
}

double AcptdModel::cdf(double k_hat, int k) const {
  const auto w = binomial_weights(k, 1.0 - p_.xi);
  const double x = unmap(k_hat);
  double acc = 0.0;
  for (int j = 0; j <= k; ++j) {
    if (w[static_cast<std::size_t>(j)] < 1e-16) continue;
    acc += w[static_cast<std::size_t>(j)] * cdf_given_kprime(x, j);
  }
  return std::clamp(acc, 0.0, 1.0);
}

double AcptdModel::pdf(double k_hat, int k) const {
  const auto w = binomial_weights(k, 1.0 - p_.xi);
  const double x = unmap(k_hat);
  double acc = 0.0;
  for (int j = 0; j <= k; ++j) {
    if (w[static_cast<std::size_t>(j)] < 1e-16) continue;
    acc += w[static_cast<std::size_t>(j)] * pdf_given_kprime(x, j);
  }
  return acc / sil_.gain;
}

double acptd_variance(std::span<const double> transmitting_gamma_bars, int n1, double xi, int n2,
                      double gamma_c_prime) {
  const Silencing s(xi);
  double acc = 0.0;
  for (double g : transmitting_gamma_bars) acc += 1.0 / (1.0 + n1 * g);
  return 0.5 * s.psi * (1.0 / (n2 * gamma_c_prime) + s.z_variance * acc);
}

AcptdVariance acptd_variance_homogeneous(int k_prime, double xi, double n1_gamma_prime, int n2,
                                         double gamma_c_prime) {
  const Silencing s(xi);
  const double noise = 0.5 * s.psi / (n2 * gamma_c_prime);
  const double per = 0.5 * s.psi * k_prime / (1.0 + n1_gamma_prime);
  AcptdVariance v;
  v.variance = noise + per * s.z_variance;
  v.bound = noise + per * std::log(1.0 + 1.0 / s.c);
  v.bound_approx = noise + per * std::log(1.0 + 1.0 / xi);
  return v;
}

// ---- composition ---------------------------------------------------------------------------

AcptdModel acptd_model(const MechanismContext& ctx) {
  const Silencing s(ctx.xi);
  AcptdModelParams p;
  p.xi = ctx.xi;
  p.n1_gamma_prime = ctx.n1 * ctx.gamma_prime;
  p.n2 = ctx.n - ctx.n1;
  p.gamma_c_prime = s.rho_over_pbar * ctx.gamma_bar;
  p.t_match = ctx.t_match;
  return AcptdModel(p);
}

double mechanism_cdf(Mechanism m, double k_hat, int k, const MechanismContext& ctx) {
  switch (m) {
    case Mechanism::ucpt: return ucpt_cdf(k_hat, k, ctx.n, ctx.gamma_bar);
    case Mechanism::acptf:
      return acptf_gaussian_model(k, ctx.n1, ctx.n - ctx.n1, ctx.gamma_prime, ctx.gamma_bar).cdf(k_hat);
    case Mechanism::acptd: return acptd_model(ctx).cdf(k_hat, k);
  }
  throw std::logic_error("mechanism_cdf: unknown mechanism");
}

double mechanism_log_pdf(Mechanism m, double k_hat, int k, const MechanismContext& ctx) {
  switch (m) {
    case Mechanism::ucpt: return ucpt_log_pdf(k_hat, k, ctx.n, ctx.gamma_bar);
    case Mechanism::acptf:
      return acptf_gaussian_model(k, ctx.n1, ctx.n - ctx.n1, ctx.gamma_prime, ctx.gamma_bar)
          .log_pdf(k_hat);
    case Mechanism::acptd: return std::log(acptd_model(ctx).pdf(k_hat, k));
  }
  throw std::logic_error("mechanism_log_pdf: unknown mechanism");
}

double success_probability_theory(Mechanism m, int k, const MechanismContext& ctx) {
  return mechanism_cdf(m, k + 0.5, k, ctx) - mechanism_cdf(m, k - 0.5, k, ctx);
}

std::vector<double> ni_pmf_theory(Mechanism m, int k, int k_max, const MechanismContext& ctx) {
  if (k_max < 0) throw std::invalid_argument("ni_pmf_theory: k_max must be >= 0");
  std::vector<double> cdf(static_cast<std::size_t>(k_max) + 1);
  for (int j = 0; j < k_max; ++j) cdf[static_cast<std::size_t>(j)] = mechanism_cdf(m, j + 0.5, k, ctx);
  cdf[static_cast<std::size_t>(k_max)] = 1.0;
  std::vector<double> pmf(cdf.size());
  double prev = 0.0;
  for (std::size_t j = 0; j < cdf.size(); ++j) {
    pmf[j] = std::max(cdf[j] - prev, 0.0);
    prev = cdf[j];
  }
  return pmf;
}

nlohmann::json dist_model_json(Mechanism m, int k, const MechanismContext& ctx) {
  nlohmann::json j;
  j["mechanism"] = to_string(m);
  j["K"] = k;
  switch (m) {
    case Mechanism::ucpt:
      j["family"] = "shifted_exponential";
      j["N"] = ctx.n;
      j["gamma_bar"] = ctx.gamma_bar;
      j["support_min"] = -1.0 / (ctx.n * ctx.gamma_bar);
      break;
    case Mechanism::acptf: {
      const Gaussian g = acptf_gaussian_model(k, ctx.n1, ctx.n - ctx.n1, ctx.gamma_prime, ctx.gamma_bar);
      j["family"] = "gaussian";
      j["mean"] = g.mean;
      j["variance"] = g.variance;
      break;
    }
    case Mechanism::acptd: {
      const AcptdModel model = acptd_model(ctx);
      j["family"] = "student_t_mixture";
      j["xi"] = ctx.xi;
      j["n1_gamma_prime"] = model.params().n1_gamma_prime;
      j["gamma_c_prime"] = model.params().gamma_c_prime;
      j["noise_sd"] = model.noise_sd();
      j["weights"] = binomial_weights(k, 1.0 - ctx.xi);
      nlohmann::json comps = nlohmann::json::array();
      for (int kp = 1; kp <= k; ++kp) {
        const StudentFit f = acptd_student_fit(kp, ctx.xi, ctx.t_match);
        comps.push_back({{"k_prime", kp}, {"nu", f.nu}, {"scale", f.scale}, {"t_scale", model.t_scale(kp)}});
      }
      j["components"] = comps;
      break;
    }
  }
  return j;
}

}  // namespace kdetect::theory
