#pragma once

#include "sdfo/app/campaign.hpp"
#include "sdfo/error.hpp"
#include "sdfo/io.hpp"

namespace sdfo::app::detail {

inline SearchSpace resolve_space(const RunConfig& cfg, const BlackBox& bb) {
  if (cfg.space) return *cfg.space;
  auto s = bb.default_space();
  require(s.has_value(), ErrorKind::parameter, "black box '" + bb.name() + "' has no default space; set 'space'");
  return *s;
}

inline fs::path data_path(const RunConfig& cfg, const fs::path& out, const std::string& config) {
  return cfg.data_dir.value_or(out) / ("data_" + config + ".csv");
}

inline fs::path models_path(const RunConfig& cfg, const fs::path& out) {
  return cfg.models.value_or(out / "models.json");
}

inline json report_header(const std::string& command, const RunConfig& cfg) {
  return {{"schema_version", kReportSchemaVersion}, {"command", command}, {"seed", cfg.seed}};
}

inline json vec(const Eigen::VectorXd& v) { return to_json_value(v); }

// null for non-finite values so reports stay valid JSON
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace sdfo::app::detail
