#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "sdfo/data.hpp"
#include "sdfo/gp.hpp"
#include "sdfo/nn.hpp"
#include "sdfo/solve.hpp"

// JSON forms of the library types. Every top-level document written by the
// tools carries "schema_version"; the nested values below do not.
namespace sdfo {

inline constexpr int kModelSchemaVersion = 1;

using json = nlohmann::json;

json to_json_value(const Eigen::VectorXd& v);
json to_json_value(const Eigen::MatrixXd& m);  // array of rows
Eigen::VectorXd vector_from_json(const json& j);
Eigen::MatrixXd matrix_from_json(const json& j);

void to_json(json& j, const SearchSpace& s);
void from_json(const json& j, SearchSpace& s);
void to_json(json& j, const Scaler& s);
void from_json(const json& j, Scaler& s);
void to_json(json& j, const NetworkParams& p);
void from_json(const json& j, NetworkParams& p);
void to_json(json& j, const GprModel& m);
void from_json(const json& j, GprModel& m);
void to_json(json& j, const GpcModel& m);
void from_json(const json& j, GpcModel& m);
void to_json(json& j, const Solution& s);

json read_json(const std::filesystem::path& path);
/// Pretty-printed, newline-terminated.
void write_json(const std::filesystem::path& path, const json& j);

}  // namespace sdfo
