#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdetect/rng.hpp"

namespace kdetect {

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

// Powers in dBm as configured, with the linear quantities fixed at construction.
class PowerConfig {
 public:
  PowerConfig() : PowerConfig(30.0, -110.0, -120.0) {}
  PowerConfig(double p_dbm, double p_bar_dbm, double sigma2_dbm);

  double p_dbm() const { return p_dbm_; }
  double p_bar_dbm() const { return p_bar_dbm_; }
  double sigma2_dbm() const { return sigma2_dbm_; }

  double p() const { return p_; }
  double p_bar() const { return p_bar_; }
  double sigma2() const { return sigma2_; }
  // DL pilot SNR scale p / sigma^2.
  double varrho() const { return p_ / sigma2_; }
  // Target UL receive SNR p_bar / sigma^2.
  double gamma_bar() const { return p_bar_ / sigma2_; }

 private:
  double p_dbm_, p_bar_dbm_, sigma2_dbm_;
  double p_, p_bar_, sigma2_;
};

struct Annulus {
  double r_in_km = 0.025;
  double r_out_km = 0.5;
};

struct Deployment {
  std::uint64_t seed = 0;
  PowerConfig power;
  std::vector<double> distances_km;
  std::vector<double> betas;
  std::vector<double> gamma_bars;
  double gamma_bar_prime = 0.0;

  int q() const { return static_cast<int>(betas.size()); }
};

double pathloss_db(double d_km);
double pathloss_gain(double d_km);

Deployment generate_deployment(int q, Annulus area, const PowerConfig& power, std::uint64_t seed);

// Every device at the same average gain; used for the homogeneous variance checks.
Deployment homogeneous_deployment(int q, double beta, const PowerConfig& power);

// Device set from explicit gains (distances are back-solved from the pathloss law).
Deployment deployment_from_betas(std::vector<double> betas, const PowerConfig& power);

double harmonic_mean_snr(const Deployment& dep);

// Uniform random K-subset, returned in ascending order.
std::vector<int> draw_active_set(int q, int k, Rng& rng);

nlohmann::json to_json(const Deployment& dep);
Deployment deployment_from_json(const nlohmann::json& j);
void save_deployment(const Deployment& dep, const std::string& path);
Deployment load_deployment(const std::string& path);

}  // namespace kdetect
