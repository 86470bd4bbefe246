#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "moce/data.hpp"
#include "moce/metacognition.hpp"
#include "moce/model.hpp"
#include "moce/training.hpp"

namespace moce::cli {

/// Everything a command may read from the flat `key = value` config.
struct RunConfig {
    model::ModelConfig model;
    training::TrainConfig train;
    data::SyntheticOptions synthetic;
    model::TaskKind task = model::TaskKind::Classification;
    std::string schema_file;  // overrides `task` when set
    metacog::Statistic statistic = metacog::Statistic::Entropy;
    model::BudgetScope scope = model::BudgetScope::AllLayers;
    bool influence_from_logits = false;
    std::string split = "test";

    data::ConceptSchema schema() const;
};

struct ConfigKey {
    std::string name;
    std::string section;  // data, model, train, eval
    std::string description;
    std::string default_value;
};

/// Registered keys in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Parses `key = value` lines; `#` starts a comment. Unknown keys and
/// malformed lines raise ConfigError naming the line.
std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& source);

/// Applies `values` over the defaults. Throws ConfigError on unknown keys or
/// values that do not parse.
RunConfig resolve_config(const std::map<std::string, std::string>& values);

/// Every key with its resolved value, as recorded in run manifests.
std::map<std::string, std::string> snapshot(const RunConfig& config);

/// Markdown reference of every subcommand flag and config key.
std::string config_reference();

/// Entry point of the `moce` binary; returns the process exit code
/// (0 success, 1 usage or config error, 2 runtime error).
int run(int argc, char** argv);

}  // namespace moce::cli
