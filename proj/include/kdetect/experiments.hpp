#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdetect/cpt.hpp"
#include "kdetect/deployment.hpp"

namespace kdetect {

enum class DeploymentPolicy { fixed, redraw };
enum class SweepVariable { none, k, xi, n1, n };

std::string to_string(DeploymentPolicy p);
std::string to_string(SweepVariable v);
DeploymentPolicy deployment_policy_from_string(const std::string& s);
SweepVariable sweep_variable_from_string(const std::string& s);

struct Campaign {
  std::vector<Mechanism> mechanisms{Mechanism::ucpt, Mechanism::acptf, Mechanism::acptd};
  DeploymentPolicy policy = DeploymentPolicy::redraw;
  int redraw_every = 1000;  // slots per deployment under the redraw policy
  long trials = 20000;
  int q = 1000;
  int k = 5;
  Annulus area;
  CptParams params;
  std::uint64_t seed = 1;
  int workers = 0;  // 0: KDETECT_WORKERS, else hardware concurrency
  bool ml = true;   // also run ML (and U-CPT optimal) rounding
  int acptd_ml_window = 4;
  double t_match = 26.0;  // Student-t matching point of the A-CPT-D model
  SweepVariable sweep = SweepVariable::none;
  std::vector<double> grid;
  std::optional<Deployment> deployment;  // used by the fixed policy; generated from seed if absent

  void validate() const;
};

nlohmann::json to_json(const Campaign& c);

struct MechanismStats {
  Mechanism mechanism = Mechanism::ucpt;
  long trials = 0;
  long hits_ni = 0;
  long hits_ml = -1;   // -1 when not computed
  long hits_opt = -1;  // U-CPT optimal detector only
  std::map<int, long> pmf_ni;  // sparse counts of the rounded estimate
  std::map<int, long> pmf_ml;
  double theory_ni = 0.0;           // NI success from the distribution model
  std::vector<double> theory_pmf;   // NI PMF over 0..theory_pmf.size()-1
  int best_n1 = 0;                  // split selected by the N sweep

  double success_ni() const { return static_cast<double>(hits_ni) / trials; }
  double success_ml() const { return static_cast<double>(hits_ml) / trials; }
  double success_opt() const { return static_cast<double>(hits_opt) / trials; }
  double stderr_of(double p) const;
  // Normalised empirical PMF (entries sum to 1).
  std::map<int, double> pmf(bool ml = false) const;
};

struct GridPoint {
  SweepVariable variable = SweepVariable::none;
  double value = 0.0;
  int k = 0;
  double mean_gamma_prime = 0.0;  // average over the deployments used
  std::vector<MechanismStats> mechanisms;

  const MechanismStats& at(Mechanism m) const;
};

struct CampaignResult {
  nlohmann::json config;
  std::vector<GridPoint> points;
  double wall_seconds = 0.0;  // metadata only; never written to CSV
};

int resolve_workers(int requested);

// One campaign point at the campaign's K and params.
GridPoint run_point(const Campaign& c);

CampaignResult run_pmf(const Campaign& c);
CampaignResult run_sweep(const Campaign& c);
CampaignResult run_table3(const Campaign& c);

// Relaxed estimates of n independent slots on a fixed deployment (active set redrawn per slot).
// With all_transmit, A-CPT-D slots with a silenced device are redrawn so K' = K.
struct RelaxedSamples {
  std::vector<double> k_real;
  long silenced = 0;   // A-CPT-D: silenced active devices over all drawn slots
  long drawn = 0;      // slots drawn, including redrawn ones
};
RelaxedSamples sample_relaxed(Mechanism m, const Deployment& dep, const CptParams& params, int k, long n,
                              std::uint64_t seed, bool all_transmit = false);

std::vector<double> log_grid(double lo, double hi, int points);

}  // namespace kdetect
