#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "parapot/constants.hpp"
#include "parapot/measures.hpp"
#include "parapot/potentials.hpp"
#include "parapot/solver.hpp"
#include "parapot/verify.hpp"

namespace parapot::io {

using json = nlohmann::json;

/// 17-significant-digit float serialization (reproducible artifacts).
std::string format17(double v);

/// FNV-1a 64-bit hash of the raw config bytes, hex-encoded.
std::string config_hash(const std::string& bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

Domain load_domain(const json& j);
SpatialMeasure load_spatial_measure(const json& j);
SpaceTimeMeasure load_spacetime_measure(const json& j);
PotentialParams load_potential_params(const json& j, const Domain& dom);
GreenConfig load_green_config(const json& j);
ProblemSpec load_problem_spec(const json& j);

json report_to_json(const CheckReport& rep);
json solution_to_json(const Solution& sol);
json constants_to_json(const ConstantsTable& table);

/// Provenance comment block embedded at the top of every CSV artifact.
std::string artifact_header(const std::string& hash, const ConstantsTable& table);

void write_field_csv(const std::string& path, const PotentialField& field,
                     const std::string& header);
void write_constants_csv(const std::string& path, const ConstantsTable& table,
                         const std::string& hash);

}  // namespace parapot::io
