#include "kdetect/deployment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

namespace kdetect {

PowerConfig::PowerConfig(double p_dbm, double p_bar_dbm, double sigma2_dbm)
    : p_dbm_(p_dbm), p_bar_dbm_(p_bar_dbm), sigma2_dbm_(sigma2_dbm) {
  if (!std::isfinite(p_dbm) || !std::isfinite(p_bar_dbm) || !std::isfinite(sigma2_dbm))
    throw std::invalid_argument("PowerConfig: powers must be finite");
  p_ = dbm_to_watts(p_dbm);
  p_bar_ = dbm_to_watts(p_bar_dbm);
  sigma2_ = dbm_to_watts(sigma2_dbm);
}

double pathloss_db(double d_km) {
  if (!(d_km > 0.0)) throw std::domain_error("pathloss_db: distance must be positive");
  return 130.0 + 37.6 * std::log10(d_km);
}

double pathloss_gain(double d_km) { return std::pow(10.0, -pathloss_db(d_km) / 10.0); }

namespace {

void fill_snr(Deployment& dep) {
  dep.gamma_bars.resize(dep.betas.size());
  for (std::size_t i = 0; i < dep.betas.size(); ++i) {
    if (!(dep.betas[i] > 0.0)) throw std::invalid_argument("deployment: gains must be positive");
    dep.gamma_bars[i] = dep.power.varrho() * dep.betas[i];
  }
  dep.gamma_bar_prime = harmonic_mean_snr(dep);
}

}  // namespace

Deployment generate_deployment(int q, Annulus area, const PowerConfig& power, std::uint64_t seed) {
  if (q < 1) throw std::invalid_argument("generate_deployment: Q must be >= 1");
  if (!(area.r_in_km > 0.0 && area.r_in_km < area.r_out_km))
    throw std::invalid_argument("generate_deployment: requires 0 < r_in < r_out");
  Deployment dep;
  dep.seed = seed;
  dep.power = power;
  Rng rng = Rng::stream(seed, 0xde91);
  const double a2 = area.r_in_km * area.r_in_km;
  const double b2 = area.r_out_km * area.r_out_km;
  dep.distances_km.resize(static_cast<std::size_t>(q));
  dep.betas.resize(static_cast<std::size_t>(q));
  for (int i = 0; i < q; ++i) {
    double d = std::sqrt(a2 + (b2 - a2) * rng.uniform());
    d = std::clamp(d, area.r_in_km, area.r_out_km);
    dep.distances_km[i] = d;
    dep.betas[i] = pathloss_gain(d);
  }
  fill_snr(dep);
  return dep;
}

Deployment deployment_from_betas(std::vector<double> betas, const PowerConfig& power) {
  if (betas.empty()) throw std::invalid_argument("deployment: Q must be >= 1");
  Deployment dep;
  dep.power = power;
  dep.betas = std::move(betas);
  dep.distances_km.resize(dep.betas.size());
  for (std::size_t i = 0; i < dep.betas.size(); ++i) {
    if (!(dep.betas[i] > 0.0)) throw std::invalid_argument("deployment: gains must be positive");
    dep.distances_km[i] = std::pow(10.0, (-10.0 * std::log10(dep.betas[i]) - 130.0) / 37.6);
  }
  fill_snr(dep);
  return dep;
}

Deployment homogeneous_deployment(int q, double beta, const PowerConfig& power) {
  if (q < 1) throw std::invalid_argument("homogeneous_deployment: Q must be >= 1");
  return deployment_from_betas(std::vector<double>(static_cast<std::size_t>(q), beta), power);
}

double harmonic_mean_snr(const Deployment& dep) {
  if (dep.gamma_bars.empty()) throw std::invalid_argument("harmonic_mean_snr: empty deployment");
  double inv = 0.0;
  for (double g : dep.gamma_bars) {
    if (!(g > 0.0)) throw std::invalid_argument("harmonic_mean_snr: SNRs must be positive");
    inv += 1.0 / g;
  }
  return static_cast<double>(dep.gamma_bars.size()) / inv;
}

std::vector<int> draw_active_set(int q, int k, Rng& rng) {
  if (k < 0 || k > q) throw std::invalid_argument("draw_active_set: requires 0 <= K <= Q");
  // Floyd's sampling: K draws regardless of Q.
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  std::unordered_set<int> seen;
  for (int j = q - k; j < q; ++j) {
    const int t = static_cast<int>(rng.uniform() * (j + 1));
    const int pick = seen.count(t) ? j : t;
    seen.insert(pick);
    out.push_back(pick);
  }
  std::sort(out.begin(), out.end());
  return out;
}

nlohmann::json to_json(const Deployment& dep) {
  nlohmann::json j;
  j["Q"] = dep.q();
  j["seed"] = dep.seed;
  j["power"] = {{"p_dbm", dep.power.p_dbm()},
                {"p_bar_dbm", dep.power.p_bar_dbm()},
                {"sigma2_dbm", dep.power.sigma2_dbm()}};
  j["distances_km"] = dep.distances_km;
  j["betas"] = dep.betas;
  j["gamma_bar_prime"] = dep.gamma_bar_prime;
  return j;
}

Deployment deployment_from_json(const nlohmann::json& j) {
  const auto& pw = j.at("power");
  PowerConfig power(pw.at("p_dbm").get<double>(), pw.at("p_bar_dbm").get<double>(),
                    pw.at("sigma2_dbm").get<double>());
  Deployment dep;
  dep.power = power;
  dep.seed = j.at("seed").get<std::uint64_t>();
  dep.betas = j.at("betas").get<std::vector<double>>();
  dep.distances_km = j.at("distances_km").get<std::vector<double>>();
  if (static_cast<int>(dep.betas.size()) != j.at("Q").get<int>() ||
      dep.distances_km.size() != dep.betas.size())
    throw std::invalid_argument("deployment JSON: Q does not match array lengths");
  fill_snr(dep);
  return dep;
}

void save_deployment(const Deployment& dep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  // max_digits10 through nlohmann's round-trip double formatting
  out << to_json(dep).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

Deployment load_deployment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return deployment_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace kdetect
