#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdetect/quadrature.hpp"

namespace kdetect::theory {

enum class Mechanism { ucpt, acptf, acptd };

std::string to_string(Mechanism m);
Mechanism mechanism_from_string(const std::string& s);

// ---- U-CPT: shifted exponential ----------------------------------------------------------

double ucpt_cdf(double k_hat, double k, int n, double gamma_bar);
double ucpt_pdf(double k_hat, double k, int n, double gamma_bar);
double ucpt_log_pdf(double k_hat, double k, int n, double gamma_bar);
double ucpt_variance(double k, int n, double gamma_bar);

// ---- A-CPT-F: Gaussian approximation -------------------------------------------------------

struct Gaussian {
  double mean = 0.0;
  double variance = 1.0;
  double cdf(double x) const;
  double pdf(double x) const;
  double log_pdf(double x) const;
};

// Homogenised variance with gamma' in place of every device SNR.
double acptf_variance(double k, int n1, int n2, double gamma_prime, double gamma_c);
// Per-device form over the SNRs of the active devices.
double acptf_variance(std::span<const double> active_gamma_bars, int n1, int n2, double gamma_prime,
                      double gamma_c);
Gaussian acptf_gaussian_model(double k, int n1, int n2, double gamma_prime, double gamma_c);

// ---- A-CPT-D: silencing, Z density, Student-t fit ------------------------------------------

// Shared constants of the silencing rule for a given silence probability.
struct Silencing {
  double xi = 0.01;
  double c = 0.0;            // -ln(1 - xi), threshold over channel-estimate variance
  double rho_over_pbar = 0;  // -(1 - xi) / li(1 - xi)
  double z_variance = 0.0;   // -li(1 - xi) / (1 - xi)
  double psi = 1.0;          // 1 + xi^2 / (1 - xi)^4
  double gain = 1.0;         // 1 + xi / (1 - xi)^2, slope of the K'' correction
  double offset = 0.0;       // xi / (1 - xi)^2

  explicit Silencing(double xi);
};

double acptd_fz_pdf(double z, double xi);

// E[cos(tZ)] through the gamma-mixture representation; log form stays finite when the value
// underflows.
double acptd_z_log_cf(double t, double xi);
double acptd_z_cf(double t, double xi);
// The same quantity by half-period panel integration of 2 int_0^inf cos(tz) f_Z(z) dz.
num::QuadResult acptd_z_cf_oscillatory(double t, double xi, const num::QuadratureSpec& spec = {});

struct StudentFit {
  int k_prime = 1;
  double xi = 0.0;
  double t_match = 26.0;
  double nu = 0.0;
  double scale = 0.0;
  double omega1 = 0.0;
  double log_omega2 = 0.0;
  double residual = 0.0;  // log-domain residual of the matching equation at nu
};

// Matches the second moment and the characteristic function at t_match. Results are cached.
StudentFit acptd_student_fit(int k_prime, double xi, double t_match = 26.0);
// Log-domain residual of the matching equation at a given nu.
double student_fit_residual(double nu, double omega1, double log_omega2, double t_match);

double student_t_pdf(double t, double nu);
double student_t_cdf(double t, double nu);

std::vector<double> binomial_weights(int k, double p_success);

struct AcptdModelParams {
  double xi = 0.01;
  double n1_gamma_prime = 0.0;  // N1 * gamma'
  int n2 = 4;
  double gamma_c_prime = 0.0;   // rho / sigma^2
  double t_match = 26.0;
};

// Distribution of the relaxed A-CPT-D estimate: binomial mixture over K' of scaled-t plus
// Gaussian noise, seen through the K'' affine correction.
class AcptdModel {
 public:
  explicit AcptdModel(const AcptdModelParams& p);

  const AcptdModelParams& params() const { return p_; }
  const Silencing& silencing() const { return sil_; }
  double noise_sd() const { return noise_sd_; }
  // Scale of the Student-t term for a given K' (0 for K' = 0).
  double t_scale(int k_prime) const;

  // Distribution of K-hat' given K'. The t route integrates over the Student-t variable
  // with erfc; the v route integrates over the Gaussian noise with the Student-t CDF.
  double cdf_given_kprime(double x, int k_prime) const;
  double cdf_given_kprime_v_route(double x, int k_prime) const;
  double pdf_given_kprime(double x, int k_prime) const;

  // K' value the estimate k_hat corresponds to after undoing the K'' correction.
  double unmap(double k_hat) const { return (k_hat - sil_.offset) / sil_.gain; }

  double cdf(double k_hat, int k) const;
  double pdf(double k_hat, int k) const;

 private:
  AcptdModelParams p_;
  Silencing sil_;
  double noise_sd_;
};

struct AcptdVariance {
  double variance = 0.0;
  double bound = 0.0;         // strict upper bound
  double bound_approx = 0.0;  // small-xi approximation of the bound
};

// Per-device form over the SNRs of the transmitting devices.
double acptd_variance(std::span<const double> transmitting_gamma_bars, int n1, double xi, int n2,
                      double gamma_c_prime);
AcptdVariance acptd_variance_homogeneous(int k_prime, double xi, double n1_gamma_prime, int n2,
                                         double gamma_c_prime);

// ---- composition ---------------------------------------------------------------------------

struct MechanismContext {
  int n = 6;
  int n1 = 2;
  double gamma_bar = 10.0;        // p_bar / sigma^2
  double gamma_prime = 0.0;       // harmonic-mean DL SNR
  double xi = 0.01;
  double t_match = 26.0;
};

AcptdModel acptd_model(const MechanismContext& ctx);

// CDF of the relaxed estimate given K under the mechanism's model.
double mechanism_cdf(Mechanism m, double k_hat, int k, const MechanismContext& ctx);
double mechanism_log_pdf(Mechanism m, double k_hat, int k, const MechanismContext& ctx);

// NI success probability F(K + 1/2) - F(K - 1/2).
double success_probability_theory(Mechanism m, int k, const MechanismContext& ctx);

// Probability mass of the NI-rounded estimate over 0..k_max (k_max absorbs the upper tail).
std::vector<double> ni_pmf_theory(Mechanism m, int k, int k_max, const MechanismContext& ctx);

nlohmann::json dist_model_json(Mechanism m, int k, const MechanismContext& ctx);

}  // namespace kdetect::theory
