#pragma once

#include <json.hpp>

#include "snarf/config.hpp"
#include "snarf/model.hpp"
#include "snarf/rootfind.hpp"

namespace snarf::detail {

nlohmann::json to_json(const SolverSettings& s);
nlohmann::json to_json(const CompositionSettings& s);
SolverSettings solver_from_json(const nlohmann::json& j, const std::string& path = "solver");
CompositionSettings composition_from_json(const nlohmann::json& j, const std::string& path = "composition");

nlohmann::json to_json(const ExperimentConfig& c);

}  // namespace snarf::detail
