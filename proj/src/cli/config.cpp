#include <algorithm>
#include <charconv>
#include <functional>
#include <sstream>

#include "moce/cli.hpp"
#include "moce/errors.hpp"

namespace moce::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string real_str(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

double parse_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
    return out;
}

std::uint64_t parse_count(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

struct Key {
    ConfigKey info;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class T>
Key count_key(std::string name, std::string section, std::string description, T RunConfig::*group,
              std::size_t T::*field) {
    Key k;
    k.info = {name, std::move(section), std::move(description), ""};
    k.set = [name, group, field](RunConfig& c, const std::string& v) {
        (c.*group).*field = static_cast<std::size_t>(parse_count(name, v));
    };
    k.get = [group, field](const RunConfig& c) { return std::to_string((c.*group).*field); };
    return k;
}

template <class T>
Key real_key(std::string name, std::string section, std::string description, T RunConfig::*group,
             double T::*field) {
    Key k;
    k.info = {name, std::move(section), std::move(description), ""};
    k.set = [name, group, field](RunConfig& c, const std::string& v) { (c.*group).*field = parse_real(name, v); };
    k.get = [group, field](const RunConfig& c) { return real_str((c.*group).*field); };
    return k;
}

template <class T>
Key bool_key(std::string name, std::string section, std::string description, T RunConfig::*group,
             bool T::*field) {
    Key k;
    k.info = {name, std::move(section), std::move(description), ""};
    k.set = [name, group, field](RunConfig& c, const std::string& v) { (c.*group).*field = parse_bool(name, v); };
    k.get = [group, field](const RunConfig& c) { return bool_str((c.*group).*field); };
    return k;
}

Key custom_key(std::string name, std::string section, std::string description,
               std::function<void(RunConfig&, const std::string&)> set,
               std::function<std::string(const RunConfig&)> get) {
    return {{std::move(name), std::move(section), std::move(description), ""}, std::move(set), std::move(get)};
}

std::vector<Key> build_keys() {
    using M = model::ModelConfig;
    using T = training::TrainConfig;
    using S = data::SyntheticOptions;
    std::vector<Key> keys;

    keys.push_back(custom_key(
        "task", "data", "Task of the built-in schema: classification (5 rating classes) or regression (score 0..9).",
        [](RunConfig& c, const std::string& v) {
            try {
                c.task = model::task_kind_from_string(v);
            } catch (const Error&) {
                throw ConfigError("config key 'task': expected classification or regression, got '" + v + "'");
            }
        },
        [](const RunConfig& c) { return model::to_string(c.task); }));
    keys.push_back(custom_key(
        "schema_file", "data", "Schema JSON used instead of the built-in schema (gen-data, flops).",
        [](RunConfig& c, const std::string& v) { c.schema_file = v; },
        [](const RunConfig& c) { return c.schema_file; }));
    keys.push_back(count_key("train_size", "data", "Generated training examples.", &RunConfig::synthetic, &S::train_size));
    keys.push_back(count_key("dev_size", "data", "Generated dev examples.", &RunConfig::synthetic, &S::dev_size));
    keys.push_back(count_key("test_size", "data", "Generated test examples.", &RunConfig::synthetic, &S::test_size));
    keys.push_back(real_key("noise_rate", "data", "Probability of corrupting a generated task label, in [0, 0.5).",
                            &RunConfig::synthetic, &S::noise_rate));
    keys.push_back(custom_key(
        "data_seed", "data", "Seed of the synthetic generator.",
        [](RunConfig& c, const std::string& v) { c.synthetic.seed = parse_count("data_seed", v); },
        [](const RunConfig& c) { return std::to_string(c.synthetic.seed); }));

    keys.push_back(count_key("max_seq_len", "model", "Token sequences are truncated to this length.", &RunConfig::model,
                             &M::max_seq_len));
    keys.push_back(count_key("embed_dim", "model", "Embedding width E.", &RunConfig::model, &M::embed_dim));
    keys.push_back(count_key("num_heads", "model", "Attention heads; must divide embed_dim.", &RunConfig::model,
                             &M::num_heads));
    keys.push_back(count_key("num_attention_layers", "model", "Plain attention blocks before the MoCE layers.",
                             &RunConfig::model, &M::num_attention_layers));
    keys.push_back(count_key("num_moce_layers", "model", "MoCE layers (attention plus routed experts).",
                             &RunConfig::model, &M::num_moce_layers));
    keys.push_back(count_key("num_experts", "model", "Shared experts per MoCE layer (M).", &RunConfig::model,
                             &M::num_experts));
    keys.push_back(count_key("experts_active", "model", "Experts per concept at inference (T).", &RunConfig::model,
                             &M::experts_active));
    keys.push_back(count_key("experts_intervention", "model", "Experts per flagged concept during intervention (T').",
                             &RunConfig::model, &M::experts_intervention));
    keys.push_back(count_key("router_hidden_dim", "model", "Hidden width of each concept router.", &RunConfig::model,
                             &M::router_hidden_dim));
    keys.push_back(count_key("expert_hidden_dim", "model", "Hidden width of each expert MLP.", &RunConfig::model,
                             &M::expert_hidden_dim));
    keys.push_back(bool_key("renormalize_gates", "model", "Renormalise the surviving top-T gates to sum to 1.",
                            &RunConfig::model, &M::renormalize_gates));
    keys.push_back(bool_key("concept_pathways", "model",
                            "Each concept projector reads its own final-layer expert mixture.", &RunConfig::model,
                            &M::concept_pathways));

    keys.push_back(custom_key(
        "strategy", "train", "vanilla, independent, sequential or joint.",
        [](RunConfig& c, const std::string& v) { c.train.strategy = training::strategy_from_string(v); },
        [](const RunConfig& c) { return training::to_string(c.train.strategy); }));
    keys.push_back(real_key("gamma", "train", "Weight of the summed concept losses.", &RunConfig::train, &T::gamma));
    keys.push_back(real_key("balance_coefficient", "train", "Weight of the expert balancing loss.", &RunConfig::train,
                            &T::balance_coefficient));
    keys.push_back(real_key("learning_rate", "train", "Step size.", &RunConfig::train, &T::learning_rate));
    keys.push_back(count_key("batch_size", "train", "Minibatch size.", &RunConfig::train, &T::batch_size));
    keys.push_back(count_key("max_epochs", "train", "Epoch limit.", &RunConfig::train, &T::max_epochs));
    keys.push_back(count_key("patience", "train", "Epochs without dev improvement before stopping.",
                             &RunConfig::train, &T::patience));
    keys.push_back(bool_key("pseudo_intervention", "train",
                            "Ramp the training budget from T to T' over the second half of training.",
                            &RunConfig::train, &T::pseudo_intervention));
    keys.push_back(custom_key(
        "seed", "train", "Seed of parameter initialisation and batch shuffling.",
        [](RunConfig& c, const std::string& v) { c.train.seed = parse_count("seed", v); },
        [](const RunConfig& c) { return std::to_string(c.train.seed); }));
    keys.push_back(custom_key(
        "optimizer", "train", "rms, adam or sgd.",
        [](RunConfig& c, const std::string& v) { c.train.optimizer = training::optimizer_from_string(v); },
        [](const RunConfig& c) { return training::to_string(c.train.optimizer); }));
    keys.push_back(real_key("rms_decay", "train", "Second-moment decay of rms and adam.", &RunConfig::train,
                            &T::rms_decay));
    keys.push_back(real_key("epsilon", "train", "Denominator floor of rms and adam.", &RunConfig::train, &T::epsilon));
    keys.push_back(count_key("train_limit", "train", "Train on the first n examples only (0 = all).",
                             &RunConfig::train, &T::train_limit));

    keys.push_back(custom_key(
        "statistic", "eval", "Scrutinised quantity: entropy or max_probability (fixed at training time).",
        [](RunConfig& c, const std::string& v) {
            try {
                c.statistic = metacog::statistic_from_string(v);
            } catch (const Error&) {
                throw ConfigError("config key 'statistic': expected entropy or max_probability, got '" + v + "'");
            }
        },
        [](const RunConfig& c) { return metacog::to_string(c.statistic); }));
    keys.push_back(custom_key(
        "budget_scope", "eval", "MoCE layers that receive T' during intervention: all or final.",
        [](RunConfig& c, const std::string& v) {
            if (v == "all") {
                c.scope = model::BudgetScope::AllLayers;
            } else if (v == "final") {
                c.scope = model::BudgetScope::FinalLayer;
            } else {
                throw ConfigError("config key 'budget_scope': expected all or final, got '" + v + "'");
            }
        },
        [](const RunConfig& c) { return std::string(c.scope == model::BudgetScope::AllLayers ? "all" : "final"); }));
    keys.push_back(custom_key(
        "influence_source", "eval", "Concept activations used for influence: probabilities or logits.",
        [](RunConfig& c, const std::string& v) {
            if (v != "probabilities" && v != "logits") {
                throw ConfigError("config key 'influence_source': expected probabilities or logits, got '" + v + "'");
            }
            c.influence_from_logits = v == "logits";
        },
        [](const RunConfig& c) { return std::string(c.influence_from_logits ? "logits" : "probabilities"); }));
    keys.push_back(custom_key(
        "split", "eval", "Split evaluated or explained: train, dev or test.",
        [](RunConfig& c, const std::string& v) {
            if (v != "train" && v != "dev" && v != "test") {
                throw ConfigError("config key 'split': expected train, dev or test, got '" + v + "'");
            }
            c.split = v;
        },
        [](const RunConfig& c) { return c.split; }));

    const RunConfig defaults;
    for (auto& k : keys) k.info.default_value = k.get(defaults);
    return keys;
}

const std::vector<Key>& keys() {
    static const std::vector<Key> all = build_keys();
    return all;
}

}  // namespace

data::ConceptSchema RunConfig::schema() const {
    if (!schema_file.empty()) return data::ConceptSchema::load(schema_file);
    return task == model::TaskKind::Classification ? data::ConceptSchema::restaurant_reviews()
                                                   : data::ConceptSchema::restaurant_scores();
}

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> infos = [] {
        std::vector<ConfigKey> out;
        for (const auto& k : keys()) out.push_back(k.info);
        return out;
    }();
    return infos;
}

std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& source) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = source + ":" + std::to_string(number);
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto& ks = keys();
        if (std::none_of(ks.begin(), ks.end(), [&](const Key& k) { return k.info.name == key; })) {
            throw ConfigError(where + ": unknown config key '" + key + "'");
        }
        if (out.count(key)) throw ConfigError(where + ": key '" + key + "' given twice");
        out[key] = value;
    }
    return out;
}

RunConfig resolve_config(const std::map<std::string, std::string>& values) {
    RunConfig config;
    for (const auto& [name, value] : values) {
        const auto& ks = keys();
        const auto it = std::find_if(ks.begin(), ks.end(), [&](const Key& k) { return k.info.name == name; });
        if (it == ks.end()) throw ConfigError("unknown config key '" + name + "'");
        it->set(config, value);
    }
    config.train.validate();
    if (config.synthetic.noise_rate < 0.0 || config.synthetic.noise_rate >= 0.5) {
        throw ConfigError("config key 'noise_rate': must lie in [0, 0.5), got " + real_str(config.synthetic.noise_rate));
    }
    return config;
}

std::map<std::string, std::string> snapshot(const RunConfig& config) {
    std::map<std::string, std::string> out;
    for (const auto& k : keys()) out[k.info.name] = k.get(config);
    return out;
}

}  // namespace moce::cli
