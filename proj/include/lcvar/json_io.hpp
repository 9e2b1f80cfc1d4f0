#pragma once

#include <json.hpp>
#include <string>

#include "lcvar/cov_estimator.hpp"
#include "lcvar/model_check.hpp"
#include "lcvar/types.hpp"
#include "lcvar/vem.hpp"

namespace lcvar {

using Json = nlohmann::json;

Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);

// VarParams: explicit block names "B", "C", "D", "E", "sigma".
Json to_json(const VarParams& p);
VarParams var_params_from_json(const Json& j);

// GmmNoiseModel under key "noise": list of {weights, means, variances}.
Json to_json(const GmmNoiseModel& m);
GmmNoiseModel noise_from_json(const Json& j);

// Combined system document: blocks plus "noise".
Json system_to_json(const VarParams& p, const GmmNoiseModel& noise);
std::pair<VarParams, GmmNoiseModel> system_from_json(const Json& j);

Json to_json(const SolventSet& s);  // roots as {re, im} pairs
Json to_json(const ResidualAnsatz& a);
Json to_json(const EstimationReport& r);
Json to_json(const ElboTrace& t);
Json to_json(const CheckReport& r);
Json to_json(const VemParams& p);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace lcvar
