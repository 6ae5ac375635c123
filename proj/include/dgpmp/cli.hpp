#pragma once

#include "dgpmp/env.hpp"
#include "dgpmp/expert.hpp"
#include "dgpmp/learn/train.hpp"
#include "dgpmp/planner.hpp"

#include <json.hpp>

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace dgpmp::cli {

enum ExitCode { kOk = 0, kUsage = 1, kRuntime = 2, kGradcheckFailed = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Built-in defaults for every section of the run configuration.
nlohmann::json default_config();

/// defaults < config file < "--set a.b=value" overrides. Values parse as
/// JSON when possible and as strings otherwise.
nlohmann::json layer_config(const nlohmann::json& base, const nlohmann::json& file,
                            const std::vector<std::string>& overrides);

PlannerConfig planner_config_from_json(const nlohmann::json& j, PlannerConfig base = {});
nlohmann::json to_json(const PlannerConfig& c);
ExpertConfig expert_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExpertConfig& c);
learn::TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const learn::TrainConfig& c);
/// Starts from the kind's defaults and applies the keys present in j.
EnvSpec env_spec_from_json(EnvKind kind, const nlohmann::json& j);

/// Kind of environment i of a mixed dataset: `first` for i where
/// ceil((i + 1) * ratio) > ceil(i * ratio), `second` otherwise.
EnvKind mixed_kind(int i, double ratio, EnvKind first, EnvKind second);

/// Entry point used by the executable. Errors are reported on `err` as
/// "error[<category>]: message".
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dgpmp::cli
