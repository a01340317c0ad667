#include "kdetect/csv.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

namespace kdetect {

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string s = "\"";
  for (char ch : field) {
    if (ch == '"') s += '"';
    s += ch;
  }
  s += '"';
  return s;
}

std::string csv_format(const CsvCell& cell) {
  if (const auto* s = std::get_if<std::string>(&cell)) return csv_escape(*s);
  if (const auto* i = std::get_if<long long>(&cell)) return fmt::format("{}", *i);
  const double v = std::get<double>(cell);
  if (std::isnan(v)) return "nan";
  return fmt::format("{}", v);
}

CsvWriter::CsvWriter(std::ostream& out, const nlohmann::json& config, std::vector<std::string> header)
    : out_(out), columns_(header.size()) {
  out_ << "# kdetect " << artifact_version << " config=" << config.dump() << "\r\n";
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << csv_escape(header[i]);
  out_ << "\r\n";
}

void CsvWriter::row(const std::vector<CsvCell>& cells) {
  if (cells.size() != columns_) throw std::logic_error("CsvWriter: row width does not match header");
  for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << csv_format(cells[i]);
  out_ << "\r\n";
}

namespace {

double nan() { return std::nan(""); }

}  // namespace

void write_table3_csv(std::ostream& out, const CampaignResult& r) {
  CsvWriter w(out, r.config, {"mechanism", "rounding", "success", "stderr", "trials"});
  for (const auto& gp : r.points) {
    for (const auto& s : gp.mechanisms) {
      const std::string m = theory::to_string(s.mechanism);
      const auto t = static_cast<long long>(s.trials);
      w.row({m, std::string("NI"), s.success_ni(), s.stderr_of(s.success_ni()), t});
      if (s.hits_ml >= 0) w.row({m, std::string("ML"), s.success_ml(), s.stderr_of(s.success_ml()), t});
      if (s.hits_opt >= 0)
        w.row({m, std::string("Optimum"), s.success_opt(), s.stderr_of(s.success_opt()), t});
    }
  }
}

void write_pmf_csv(std::ostream& out, const CampaignResult& r) {
  CsvWriter w(out, r.config, {"mechanism", "k_hat", "pmf_ni", "pmf_ml", "pmf_theory"});
  for (const auto& gp : r.points) {
    for (const auto& s : gp.mechanisms) {
      const auto ni = s.pmf(false);
      const auto ml = s.pmf(true);
      int hi = static_cast<int>(s.theory_pmf.size()) - 1;
      if (!ni.empty()) hi = std::max(hi, ni.rbegin()->first);
      if (!ml.empty()) hi = std::max(hi, ml.rbegin()->first);
      for (int k = 0; k <= hi; ++k) {
        const auto a = ni.find(k);
        const auto b = ml.find(k);
        const double th = k < static_cast<int>(s.theory_pmf.size()) ? s.theory_pmf[static_cast<std::size_t>(k)] : 0.0;
        w.row({theory::to_string(s.mechanism), static_cast<long long>(k), a == ni.end() ? 0.0 : a->second,
               s.hits_ml < 0 ? nan() : (b == ml.end() ? 0.0 : b->second), th});
      }
    }
  }
}

void write_sweep_csv(std::ostream& out, const CampaignResult& r) {
  CsvWriter w(out, r.config,
              {"variable", "value", "K", "mechanism", "success_ni", "stderr_ni", "success_ml", "stderr_ml",
               "theory_ni", "best_n1", "trials"});
  for (const auto& gp : r.points) {
    for (const auto& s : gp.mechanisms) {
      const bool ml = s.hits_ml >= 0;
      w.row({to_string(gp.variable), gp.value, static_cast<long long>(gp.k), theory::to_string(s.mechanism),
             s.success_ni(), s.stderr_of(s.success_ni()), ml ? s.success_ml() : nan(),
             ml ? s.stderr_of(s.success_ml()) : nan(), s.theory_ni, static_cast<long long>(s.best_n1),
             static_cast<long long>(s.trials)});
    }
  }
}

void write_deployment_csv(std::ostream& out, const Deployment& dep, const nlohmann::json& config) {
  CsvWriter w(out, config, {"device", "distance_km", "beta", "gamma_bar"});
  for (int i = 0; i < dep.q(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    w.row({static_cast<long long>(i), dep.distances_km[u], dep.betas[u], dep.gamma_bars[u]});
  }
}

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  const std::filesystem::path tmp = p.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    f << content;
    if (!f.flush()) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, p, ec);
  if (ec) throw std::runtime_error("cannot move output into '" + path + "': " + ec.message());
}

}  // namespace kdetect
