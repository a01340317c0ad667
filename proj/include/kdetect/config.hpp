#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdetect/experiments.hpp"

namespace kdetect {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Config {
  // slot
  int n = 6;
  int n1 = 2;
  double xi = 0.01;
  double p_dbm = 30.0;
  double p_bar_dbm = -110.0;
  double sigma2_dbm = -120.0;
  std::string pilot = "ones";
  std::string channel_model = "equivalent";
  std::string acptd_mode = "corollary";
  double t_match = 26.0;
  // deployment
  int q = 1000;
  double r_in_km = 0.025;
  double r_out_km = 0.5;
  std::string deployment_policy = "redraw";
  int redraw_every = 1000;
  std::string deployment_file;
  // campaign
  int k = 5;
  long trials = 20000;
  std::uint64_t seed = 1;
  int workers = 0;
  bool ml = true;
  int acptd_ml_window = 4;
  std::vector<std::string> mechanisms{"ucpt", "acptf", "acptd"};
  std::string sweep = "none";
  std::vector<double> grid;

  // Resolved settings that determine results; the worker count is left out.
  nlohmann::json to_json() const;
  // Throws ConfigError naming the offending key and constraint.
  void validate() const;
  Campaign to_campaign() const;
};

// Keys accepted in files and flag overrides.
const std::vector<std::string>& config_keys();

// Flat TOML subset: key = value lines, '#' comments, strings, numbers, booleans, arrays.
nlohmann::json parse_toml_subset(const std::string& text, const std::string& origin);
nlohmann::json load_config_file(const std::string& path);

// Precedence: flags > file > preset > defaults. The result is validated.
Config parse_and_merge(const std::optional<std::string>& config_file, const nlohmann::json& flags,
                       const nlohmann::json& preset = nullptr);

}  // namespace kdetect
