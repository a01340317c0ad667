#include "kdetect/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "kdetect/theory.hpp"

namespace kdetect {

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "N", "N1", "xi", "p_dbm", "p_bar_dbm", "sigma2_dbm", "pilot", "channel_model", "acptd_mode", "t_match",
      "Q", "r_in_km", "r_out_km", "deployment_policy", "redraw_every", "deployment_file", "K", "trials",
      "seed", "workers", "ml", "acptd_ml_window", "mechanisms", "sweep", "grid"};
  return keys;
}

nlohmann::json Config::to_json() const {
  return {{"N", n}, {"N1", n1}, {"xi", xi}, {"p_dbm", p_dbm}, {"p_bar_dbm", p_bar_dbm},
          {"sigma2_dbm", sigma2_dbm}, {"pilot", pilot}, {"channel_model", channel_model},
          {"acptd_mode", acptd_mode}, {"t_match", t_match}, {"Q", q}, {"r_in_km", r_in_km},
          {"r_out_km", r_out_km}, {"deployment_policy", deployment_policy}, {"redraw_every", redraw_every},
          {"deployment_file", deployment_file}, {"K", k}, {"trials", trials}, {"seed", seed},
          {"ml", ml}, {"acptd_ml_window", acptd_ml_window}, {"mechanisms", mechanisms},
          {"sweep", sweep}, {"grid", grid}};
}

namespace {

[[noreturn]] void fail(const std::string& key, const std::string& what) {
  throw ConfigError("config key '" + key + "': " + what);
}

template <class T>
T get_as(const nlohmann::json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(key, "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d != static_cast<double>(static_cast<long long>(d))) fail(key, "expected an integer");
        return static_cast<T>(d);
      }
      if (!v.is_number_integer()) fail(key, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) return v.get<T>();
        if (v.get<long long>() < 0) fail(key, "expected a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(key, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(key, "expected a string");
    }
    return v.get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(key, e.what());
  }
}

void apply(Config& c, const std::string& key, const nlohmann::json& v) {
  if (key == "N") c.n = get_as<int>(v, key);
  else if (key == "N1") c.n1 = get_as<int>(v, key);
  else if (key == "xi") c.xi = get_as<double>(v, key);
  else if (key == "p_dbm") c.p_dbm = get_as<double>(v, key);
  else if (key == "p_bar_dbm") c.p_bar_dbm = get_as<double>(v, key);
  else if (key == "sigma2_dbm") c.sigma2_dbm = get_as<double>(v, key);
  else if (key == "pilot") c.pilot = get_as<std::string>(v, key);
  else if (key == "channel_model") c.channel_model = get_as<std::string>(v, key);
  else if (key == "acptd_mode") c.acptd_mode = get_as<std::string>(v, key);
  else if (key == "t_match") c.t_match = get_as<double>(v, key);
  else if (key == "Q") c.q = get_as<int>(v, key);
  else if (key == "r_in_km") c.r_in_km = get_as<double>(v, key);
  else if (key == "r_out_km") c.r_out_km = get_as<double>(v, key);
  else if (key == "deployment_policy") c.deployment_policy = get_as<std::string>(v, key);
  else if (key == "redraw_every") c.redraw_every = get_as<int>(v, key);
  else if (key == "deployment_file") c.deployment_file = get_as<std::string>(v, key);
  else if (key == "K") c.k = get_as<int>(v, key);
  else if (key == "trials") c.trials = get_as<long>(v, key);
  else if (key == "seed") c.seed = get_as<std::uint64_t>(v, key);
  else if (key == "workers") c.workers = get_as<int>(v, key);
  else if (key == "ml") c.ml = get_as<bool>(v, key);
  else if (key == "acptd_ml_window") c.acptd_ml_window = get_as<int>(v, key);
  else if (key == "mechanisms") {
    if (!v.is_array()) fail(key, "expected an array of mechanism names");
    c.mechanisms.clear();
    for (const auto& e : v) c.mechanisms.push_back(get_as<std::string>(e, key));
  } else if (key == "sweep") c.sweep = get_as<std::string>(v, key);
  else if (key == "grid") {
    if (!v.is_array()) fail(key, "expected an array of numbers");
    c.grid.clear();
    for (const auto& e : v) c.grid.push_back(get_as<double>(e, key));
  } else {
    fail(key, "unknown key");
  }
}

void merge_layer(Config& c, const nlohmann::json& layer, const std::string& origin) {
  if (layer.is_null()) return;
  if (!layer.is_object()) throw ConfigError(origin + ": configuration must be an object of key/value pairs");
  const auto& keys = config_keys();
  for (const auto& [key, value] : layer.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ConfigError("config key '" + key + "' (" + origin + "): unknown key");
    apply(c, key, value);
  }
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

nlohmann::json toml_value(const std::string& raw, const std::string& where) {
  const std::string s = trim(raw);
  if (s.empty()) throw ConfigError(where + ": missing value");
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') throw ConfigError(where + ": unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) {
        const char n = s[++i];
        out += n == 'n' ? '\n' : n == 't' ? '\t' : n;
      } else {
        out += s[i];
      }
    }
    return out;
  }
  if (s.front() == '[') {
    if (s.back() != ']') throw ConfigError(where + ": unterminated array");
    nlohmann::json arr = nlohmann::json::array();
    std::string body = s.substr(1, s.size() - 2);
    std::string item;
    bool in_str = false;
    for (char ch : body) {
      if (ch == '"') in_str = !in_str;
      if (ch == ',' && !in_str) {
        if (!trim(item).empty()) arr.push_back(toml_value(item, where));
        item.clear();
      } else {
        item += ch;
      }
    }
    if (!trim(item).empty()) arr.push_back(toml_value(item, where));
    return arr;
  }
  std::string num;
  for (char ch : s)
    if (ch != '_') num += ch;
  const bool integral = num.find_first_of(".eE") == std::string::npos || num.rfind("0x", 0) == 0;
  try {
    std::size_t used = 0;
    if (integral) {
      const long long v = std::stoll(num, &used, 0);
      if (used == num.size()) return v;
    } else {
      const double v = std::stod(num, &used);
      if (used == num.size()) return v;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError(where + ": cannot parse value '" + s + "'");
}

}  // namespace

nlohmann::json parse_toml_subset(const std::string& text, const std::string& origin) {
  nlohmann::json out = nlohmann::json::object();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[') throw ConfigError(where + ": tables are not supported; use flat key = value pairs");
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    std::string key = trim(body.substr(0, eq));
    if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (out.contains(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    out[key] = toml_value(body.substr(eq + 1), where);
  }
  return out;
}

nlohmann::json load_config_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  const bool json_like = path.ends_with(".json") || (first != std::string::npos && text[first] == '{');
  if (json_like) {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("malformed JSON in '" + path + "': " + e.what());
    }
  }
  return parse_toml_subset(text, path);
}

void Config::validate() const {
  auto check = [](bool ok, const std::string& key, const std::string& what) {
    if (!ok) fail(key, what);
  };
  check(n >= 1, "N", "N must be >= 1");
  const bool n_sweep = sweep == "N" || sweep == "n";
  if (!n_sweep) check(n1 >= 1 && n1 < n, "N1", "N1 must satisfy 1 <= N1 < N (got N1=" + std::to_string(n1) + ", N=" + std::to_string(n) + ")");
  check(xi > 0.0 && xi <= 0.5, "xi", "xi must satisfy 0 < xi <= 0.5");
  check(t_match > 0.0, "t_match", "t_match must be positive");
  check(q >= 1, "Q", "Q must be >= 1");
  check(k >= 0 && k <= q, "K", "K must satisfy 0 <= K <= Q");
  check(r_in_km > 0.0 && r_out_km > r_in_km, "r_out_km", "annulus must satisfy 0 < r_in_km < r_out_km");
  check(trials >= 1, "trials", "trials must be >= 1");
  check(workers >= 0, "workers", "workers must be >= 0 (0 selects automatically)");
  check(redraw_every >= 1, "redraw_every", "redraw_every must be >= 1");
  check(acptd_ml_window >= 0, "acptd_ml_window", "acptd_ml_window must be >= 0");
  check(!mechanisms.empty(), "mechanisms", "at least one mechanism is required");
  for (const auto& m : mechanisms) {
    try {
      theory::mechanism_from_string(m);
    } catch (const std::invalid_argument& e) {
      fail("mechanisms", e.what());
    }
  }
  try {
    pilot_from_string(pilot);
  } catch (const std::invalid_argument& e) {
    fail("pilot", e.what());
  }
  try {
    channel_model_from_string(channel_model);
  } catch (const std::invalid_argument& e) {
    fail("channel_model", e.what());
  }
  try {
    acptd_mode_from_string(acptd_mode);
  } catch (const std::invalid_argument& e) {
    fail("acptd_mode", e.what());
  }
  try {
    deployment_policy_from_string(deployment_policy);
  } catch (const std::invalid_argument& e) {
    fail("deployment_policy", e.what());
  }
  try {
    sweep_variable_from_string(sweep);
  } catch (const std::invalid_argument& e) {
    fail("sweep", e.what());
  }
  try {
    to_campaign().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    const std::string key = sweep != "none" ? "grid" : "config";
    fail(key, e.what());
  }
}

Campaign Config::to_campaign() const {
  Campaign c;
  c.mechanisms.clear();
  for (const auto& m : mechanisms) c.mechanisms.push_back(theory::mechanism_from_string(m));
  c.policy = deployment_policy_from_string(deployment_policy);
  c.redraw_every = redraw_every;
  c.trials = trials;
  c.q = q;
  c.k = k;
  c.area = {r_in_km, r_out_km};
  c.params.n = n;
  c.params.n1 = n1;
  c.params.xi = xi;
  c.params.pilot = pilot_from_string(pilot);
  c.params.channel = channel_model_from_string(channel_model);
  c.params.acptd_mode = acptd_mode_from_string(acptd_mode);
  c.params.power = PowerConfig(p_dbm, p_bar_dbm, sigma2_dbm);
  c.seed = seed;
  c.workers = workers;
  c.ml = ml;
  c.acptd_ml_window = acptd_ml_window;
  c.t_match = t_match;
  c.sweep = sweep_variable_from_string(sweep);
  c.grid = grid;
  if (!deployment_file.empty()) {
    c.deployment = load_deployment(deployment_file);
    c.policy = DeploymentPolicy::fixed;
    c.q = c.deployment->q();
  }
  return c;
}

Config parse_and_merge(const std::optional<std::string>& config_file, const nlohmann::json& flags,
                       const nlohmann::json& preset) {
  Config c;
  merge_layer(c, preset, "preset");
  if (config_file) merge_layer(c, load_config_file(*config_file), *config_file);
  merge_layer(c, flags, "command line");
  c.validate();
  return c;
}

}  // namespace kdetect
