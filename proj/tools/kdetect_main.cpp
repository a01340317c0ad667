#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "kdetect/config.hpp"
#include "kdetect/csv.hpp"
#include "kdetect/experiments.hpp"
#include "kdetect/theory.hpp"
#include "kdetect/validation.hpp"

using namespace kdetect;
using nlohmann::json;

namespace {

// Turns a flag string into a config value: numbers and booleans as such, lists split on commas.
json flag_value(const std::string& key, const std::string& text) {
  auto scalar = [](const std::string& t) -> json {
    if (t == "true") return true;
    if (t == "false") return false;
    try {
      std::size_t used = 0;
      if (t.find_first_of(".eE") == std::string::npos) {
        const long long v = std::stoll(t, &used);
        if (used == t.size()) return v;
      }
      const double d = std::stod(t, &used);
      if (used == t.size()) return d;
    } catch (const std::exception&) {
    }
    return t;
  };
  if (key == "mechanisms" || key == "grid") {
    json arr = json::array();
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      json v = scalar(item);
      if (key == "grid" && !v.is_number()) throw ConfigError("config key 'grid': '" + item + "' is not a number");
      arr.push_back(v);
    }
    return arr;
  }
  return scalar(text);
}

void emit(const std::string& out, const std::string& content) {
  if (out.empty() || out == "-") {
    std::cout << content;
    return;
  }
  write_file(out, content);
  std::cerr << "wrote " << out << "\n";
}

json grid_json(std::initializer_list<double> v) { return json(std::vector<double>(v)); }

json preset_for(const std::string& target) {
  if (target == "table3") return {{"trials", 200000}, {"ml", true}};
  if (target == "fig3") return {{"trials", 100000}, {"ml", true}};
  if (target == "fig4") {
    std::vector<double> g;
    for (int k = 1; k <= 20; ++k) g.push_back(k);
    return {{"trials", 20000}, {"ml", false}, {"sweep", "K"}, {"grid", g}};
  }
  if (target == "fig5")
    return {{"trials", 20000}, {"ml", false}, {"sweep", "xi"}, {"mechanisms", {"acptd"}},
            {"grid", log_grid(1e-4, 0.5, 25)}};
  if (target == "fig6") return {{"trials", 20000}, {"ml", false}, {"sweep", "N1"}, {"grid", grid_json({1, 2, 3, 4, 5})}};
  if (target == "fig7") {
    std::vector<double> g;
    for (int n = 2; n <= 24; n += 2) g.push_back(n);
    return {{"trials", 10000}, {"ml", false}, {"sweep", "N"}, {"grid", g}};
  }
  throw ConfigError("reproduce target must be one of table3, fig3, fig4, fig5, fig6, fig7; got '" + target + "'");
}

std::string render_sweep(const CampaignResult& r) {
  std::ostringstream os;
  write_sweep_csv(os, r);
  return os.str();
}

theory::MechanismContext context_of(const Config& cfg) {
  const Campaign c = cfg.to_campaign();
  const Deployment dep = c.deployment ? *c.deployment : generate_deployment(c.q, c.area, c.params.power, c.seed);
  theory::MechanismContext ctx;
  ctx.n = cfg.n;
  ctx.n1 = cfg.n1;
  ctx.gamma_bar = c.params.power.gamma_bar();
  ctx.gamma_prime = dep.gamma_bar_prime;
  ctx.xi = cfg.xi;
  ctx.t_match = cfg.t_match;
  return ctx;
}

int run(int argc, char** argv) {
  CLI::App app{"Sparsity-level detection for coordinated pilot transmission"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  std::string out;
  std::map<std::string, std::string> raw;
  app.add_option("--config", config_file, "JSON or flat TOML configuration file");
  app.add_option("--out", out, "output CSV path (stdout if omitted)");
  for (const auto& key : config_keys()) {
    const std::string help = key == "workers" ? "worker threads (default: $KDETECT_WORKERS or all cores)"
                                              : "override config key " + key;
    app.add_option("--" + key, raw[key], help);
  }
  app.add_option("--k", raw["K"], "alias of --K");
  app.add_option("--mechanism", raw["mechanisms"], "alias of --mechanisms");

  auto* deploy = app.add_subcommand("deploy", "generate a deployment; CSV of devices");
  std::string json_out;
  deploy->add_option("--json", json_out, "also save the deployment as JSON");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo PMF of the rounded estimate at fixed K");
  auto* theory_cmd = app.add_subcommand("theory", "theoretical NI PMF of the rounded estimate");
  auto* sweep = app.add_subcommand("sweep", "success probability over a grid of K, xi, N1 or N");
  auto* reproduce = app.add_subcommand("reproduce", "preset campaigns: table3, fig3 ... fig7");
  std::string target;
  reproduce->add_option("target", target, "table3, fig3, fig4, fig5, fig6 or fig7")->required();
  auto* validate = app.add_subcommand("validate", "run the validation suite; nonzero exit on failure");

  CLI11_PARSE(app, argc, argv);

  json flags = json::object();
  for (const auto& key : config_keys()) {
    auto* opt = app.get_option("--" + key);
    if (opt->count() > 0) flags[key] = flag_value(key, raw[key]);
  }
  if (app.get_option("--k")->count() > 0) flags["K"] = flag_value("K", raw["K"]);
  if (app.get_option("--mechanism")->count() > 0) flags["mechanisms"] = flag_value("mechanisms", raw["mechanisms"]);
  const std::optional<std::string> file = config_file.empty() ? std::nullopt : std::optional(config_file);

  // a deployment does not depend on K; keep the default from clashing with a small Q
  if (*deploy && !flags.contains("K")) flags["K"] = 0;
  json preset = nullptr;
  if (*reproduce) preset = preset_for(target);
  if (*theory_cmd && flags.contains("mechanisms") && flags["mechanisms"].size() != 1)
    throw ConfigError("config key 'mechanisms': theory takes exactly one mechanism");
  const Config cfg = parse_and_merge(file, flags, preset);
  json resolved = cfg.to_json();

  if (*deploy) {
    const Campaign c = cfg.to_campaign();
    const Deployment dep = c.deployment ? *c.deployment : generate_deployment(c.q, c.area, c.params.power, c.seed);
    if (!json_out.empty()) save_deployment(dep, json_out);
    for (const char* key : {"K", "trials", "ml", "acptd_ml_window", "mechanisms", "sweep", "grid"}) resolved.erase(key);
    std::ostringstream os;
    write_deployment_csv(os, dep, resolved);
    emit(out, os.str());
    return 0;
  }
  if (*simulate) {
    const CampaignResult r = run_pmf(cfg.to_campaign());
    std::ostringstream os;
    write_pmf_csv(os, r);
    emit(out, os.str());
    std::cerr << fmt::format("{} slots in {:.1f} s\n", cfg.trials, r.wall_seconds);
    return 0;
  }
  if (*theory_cmd) {
    const auto ctx = context_of(cfg);
    const auto m = theory::mechanism_from_string(cfg.mechanisms.front());
    const int k_max = std::min(cfg.q, 8 * cfg.k + 10);
    const auto pmf = theory::ni_pmf_theory(m, cfg.k, k_max, ctx);
    resolved["mechanisms"] = {cfg.mechanisms.front()};
    resolved["gamma_prime"] = ctx.gamma_prime;
    std::ostringstream os;
    CsvWriter w(os, resolved, {"k_hat", "pmf_theory"});
    for (std::size_t i = 0; i < pmf.size(); ++i) w.row({static_cast<long long>(i), pmf[i]});
    emit(out, os.str());
    return 0;
  }
  if (*sweep) {
    if (cfg.sweep == "none") throw ConfigError("config key 'sweep': sweep needs one of K, xi, N1, N");
    emit(out, render_sweep(run_sweep(cfg.to_campaign())));
    return 0;
  }
  if (*reproduce) {
    std::ostringstream os;
    if (target == "table3") {
      write_table3_csv(os, run_table3(cfg.to_campaign()));
    } else if (target == "fig3") {
      write_pmf_csv(os, run_pmf(cfg.to_campaign()));
    } else if (target == "fig5" && !flags.contains("K")) {
      // one curve per K on a shared grid
      CampaignResult all;
      for (int k : {2, 6, 12}) {
        Campaign c = cfg.to_campaign();
        c.k = k;
        CampaignResult r = run_sweep(c);
        for (auto& p : r.points) all.points.push_back(std::move(p));
      }
      all.config = to_json(cfg.to_campaign());
      all.config["K"] = {2, 6, 12};
      write_sweep_csv(os, all);
    } else {
      write_sweep_csv(os, run_sweep(cfg.to_campaign()));
    }
    emit(out, os.str());
    return 0;
  }
  if (*validate) {
    const ValidationReport rep = run_validation_suite(cfg.seed);
    std::ostringstream os;
    CsvWriter w(os, resolved, {"check", "passed", "measured", "expected", "tolerance", "detail"});
    for (const auto& c : rep.checks)
      w.row({c.name, static_cast<long long>(c.passed), c.measured, c.expected, c.tolerance, c.detail});
    emit(out, os.str());
    std::cerr << fmt::format("{} checks, {} failed\n", rep.checks.size(), rep.failures());
    return rep.failures() == 0 ? 0 : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
