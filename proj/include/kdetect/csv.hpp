#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "kdetect/deployment.hpp"
#include "kdetect/experiments.hpp"

namespace kdetect {

inline constexpr std::string_view artifact_version = "1.0.0";

using CsvCell = std::variant<std::string, double, long long>;

// RFC-4180 style writer: '#' comment line with the resolved config, header row, data rows.
// Numbers use the shortest round-trip form, independent of locale.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const nlohmann::json& config, std::vector<std::string> header);
  void row(const std::vector<CsvCell>& cells);

 private:
  std::ostream& out_;
  std::size_t columns_;
};

std::string csv_escape(std::string_view field);
std::string csv_format(const CsvCell& cell);

void write_table3_csv(std::ostream& out, const CampaignResult& r);
void write_pmf_csv(std::ostream& out, const CampaignResult& r);
void write_sweep_csv(std::ostream& out, const CampaignResult& r);
void write_deployment_csv(std::ostream& out, const Deployment& dep, const nlohmann::json& config);

// Writes through a temporary file; throws with the path in the message on failure.
void write_file(const std::string& path, const std::string& content);

}  // namespace kdetect
