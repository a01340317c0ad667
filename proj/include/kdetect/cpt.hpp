#pragma once

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kdetect/deployment.hpp"
#include "kdetect/rng.hpp"
#include "kdetect/theory.hpp"

namespace kdetect {

using cd = std::complex<double>;
using theory::Mechanism;

enum class PilotKind { ones, chirp };
enum class ChannelModel { equivalent, explicit_estimation };
enum class AcptdMode { corollary, full_mmse };
enum class Rounding { ni, ml, optimal };

std::string to_string(PilotKind k);
std::string to_string(ChannelModel m);
std::string to_string(AcptdMode m);
std::string to_string(Rounding r);
PilotKind pilot_from_string(const std::string& s);
ChannelModel channel_model_from_string(const std::string& s);
AcptdMode acptd_mode_from_string(const std::string& s);

struct CptParams {
  int n = 6;
  int n1 = 2;
  double xi = 0.01;
  PilotKind pilot = PilotKind::ones;
  ChannelModel channel = ChannelModel::equivalent;
  AcptdMode acptd_mode = AcptdMode::corollary;
  PowerConfig power;

  int n2() const { return n - n1; }
  // Unit-modulus sequences: UL pilot for U-CPT (length N) and A-CPT (length N2), DL pilot (N1).
  std::vector<cd> ucpt_pilot() const;
  std::vector<cd> acpt_pilot() const;
  std::vector<cd> dl_pilot() const;

  void validate_ucpt() const;
  void validate_acpt() const;
};

std::vector<cd> make_pilot(PilotKind kind, int length);

struct AcptdConfig {
  double xi = 0.0;
  double rho = 0.0;
  std::vector<double> mu;
  std::vector<double> vartheta;
  double psi = 1.0;
  double gamma_c_prime = 0.0;
};

AcptdConfig configure_acptd(const Deployment& dep, const CptParams& params);

struct SlotRealization {
  Mechanism mechanism = Mechanism::ucpt;
  std::vector<int> active;
  std::vector<int> transmitting;
  std::vector<int> silent;
  cd shared_gain{0.0, 0.0};  // U-CPT: common effective fading h'
  std::vector<cd> h;          // per active device, aligned with `active`
  std::vector<cd> h_hat;
  std::vector<cd> h_err;
  std::vector<cd> y;
};

SlotRealization simulate_ucpt_slot(const Deployment& dep, std::span<const int> active,
                                   const CptParams& params, Rng& rng);
SlotRealization simulate_acptf_slot(const Deployment& dep, std::span<const int> active,
                                    const CptParams& params, Rng& rng);
SlotRealization simulate_acptd_slot(const Deployment& dep, std::span<const int> active,
                                    const CptParams& params, const AcptdConfig& cfg, Rng& rng);

// Received sequences from given channel draws and noise; the simulators draw, then call these.
std::vector<cd> ucpt_received(const CptParams& params, int k, cd shared_gain, std::span<const cd> noise);
std::vector<cd> acptf_received(const Deployment& dep, const CptParams& params,
                               const SlotRealization& slot, std::span<const cd> noise);
std::vector<cd> acptd_received(const CptParams& params, const AcptdConfig& cfg,
                               const SlotRealization& slot, std::span<const cd> noise);

double estimate_ucpt(std::span<const cd> y, const CptParams& params);
double estimate_acptf(std::span<const cd> y, const CptParams& params, double gamma_prime);

struct AcptdEstimate {
  double k_prime = 0.0;   // transmitting-device estimate
  double k_silent = 0.0;  // correction for silenced devices
  double total() const { return k_prime + k_silent; }
};

AcptdEstimate estimate_acptd(std::span<const cd> y, const AcptdConfig& cfg, const CptParams& params,
                             AcptdMode mode);

double silent_correction_corollary(double k_prime, double xi);
double silent_correction_mmse(double k_prime, double xi);

struct KlSolution {
  double k_l = 0.0;
  double residual = 0.0;
};
// Lower limit of the truncated posterior sum for the silenced-device count.
KlSolution solve_kl(double k_prime, double xi);

// Full log-likelihood of y under K = k (circular Gaussian after integrating the fading).
double ucpt_log_likelihood(std::span<const cd> y, const CptParams& params, int k);
// Same up to a k-independent constant.
double ucpt_metric(std::span<const cd> y, const CptParams& params, int k);
int detect_ucpt_optimal(std::span<const cd> y, const CptParams& params, int q);

int round_ni(double k_real, int q);

// Log-density family of the relaxed estimate indexed by the hypothesised K.
class Likelihood {
 public:
  virtual ~Likelihood() = default;
  virtual double log_density(double k_real, int k) const = 0;
  // Batch form over k in [lo, hi]; implementations may share work across k.
  virtual std::vector<double> log_densities(double k_real, int lo, int hi) const;
};

class UcptLikelihood final : public Likelihood {
 public:
  UcptLikelihood(int n, double gamma_bar) : n_(n), gamma_bar_(gamma_bar) {}
  double log_density(double k_real, int k) const override;

 private:
  int n_;
  double gamma_bar_;
};

class AcptfLikelihood final : public Likelihood {
 public:
  AcptfLikelihood(int n1, int n2, double gamma_prime, double gamma_c)
      : n1_(n1), n2_(n2), gamma_prime_(gamma_prime), gamma_c_(gamma_c) {}
  double log_density(double k_real, int k) const override;

 private:
  int n1_, n2_;
  double gamma_prime_, gamma_c_;
};

class AcptdLikelihood final : public Likelihood {
 public:
  // Mixture components whose binomial weight falls below weight_floor times the largest are dropped.
  explicit AcptdLikelihood(theory::AcptdModel model, double weight_floor = 1e-10)
      : model_(std::move(model)), weight_floor_(weight_floor) {}
  double log_density(double k_real, int k) const override;
  std::vector<double> log_densities(double k_real, int lo, int hi) const override;

 private:
  theory::AcptdModel model_;
  double weight_floor_;
};

// argmax over k in {0..q} (or a window around the NI value) of the density; ties go to smaller k.
int round_ml(double k_real, const Likelihood& lik, int q, std::optional<int> window = std::nullopt);

struct Estimate {
  Mechanism mechanism = Mechanism::ucpt;
  double k_real = 0.0;
  int k_int = 0;
  Rounding rounding = Rounding::ni;
};

}  // namespace kdetect
