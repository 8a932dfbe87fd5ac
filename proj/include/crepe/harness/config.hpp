#pragma once

#include "crepe/pt/ctmc_system.hpp"
#include "crepe/pt/engine.hpp"
#include "crepe/pt/gaussian_system.hpp"
#include "crepe/smc/smc.hpp"

#include <json.hpp>

#include <string>
#include <variant>
#include <vector>

namespace crepe::harness {

using nlohmann::json;

json default_config();
json load_config_file(const std::string& path);
// Recursive merge: values in `patch` win.
json merge(json base, const json& patch);
// "a.b.c=value"; value parsed as JSON when possible, otherwise taken as a string.
void apply_override(json& cfg, const std::string& assignment);
// Defaults merged in and the result schema-checked.
json resolve_config(const json& user);
std::string config_hash(const json& resolved);
std::vector<std::string> diff_summary(const json& a, const json& b, const std::string& prefix = "");

models::ModelPtr build_continuous_model(const json& spec);
std::shared_ptr<const models::ExactDiscreteModel> build_discrete_model(const json& spec);
std::shared_ptr<const control::TerminalReward> build_reward(const json& spec, int dim);
TimeGrid build_grid(const json& spec);
control::ControlTask build_task(const json& spec, int dim);

bool is_discrete(const json& resolved);
pt::GaussianSystemConfig build_gaussian_config(const json& resolved);
pt::CtmcSystemConfig build_ctmc_config(const json& resolved);
pt::EngineConfig build_engine_config(const json& resolved);
smc::SmcConfig build_smc_config(const json& resolved);

}  // namespace crepe::harness
