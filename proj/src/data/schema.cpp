#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "moce/data.hpp"
#include "moce/errors.hpp"

namespace moce::data {

using nlohmann::json;

namespace {

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::vector<ConceptSpec> restaurant_concepts() {
    const std::vector<std::string> values = {"negative", "positive", "unknown"};
    return {{"food", values}, {"ambiance", values}, {"service", values}, {"noise", values}};
}

}  // namespace

std::vector<std::size_t> ConceptSchema::arities() const {
    std::vector<std::size_t> out;
    out.reserve(concepts.size());
    for (const auto& c : concepts) out.push_back(c.values.size());
    return out;
}

std::optional<std::size_t> ConceptSchema::value_index(std::size_t k, const std::string& value) const {
    const auto& values = concepts.at(k).values;
    const std::string wanted = lower(value);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (lower(values[i]) == wanted) return i;
    }
    return std::nullopt;
}

void ConceptSchema::validate() const {
    if (concepts.empty()) throw SchemaError("schema: no concepts");
    std::set<std::string> names;
    for (const auto& c : concepts) {
        if (c.name.empty()) throw SchemaError("schema: empty concept name");
        if (!names.insert(c.name).second) throw SchemaError("schema: duplicate concept name '" + c.name + "'");
        if (c.values.size() < 2) {
            throw SchemaError("schema: concept '" + c.name + "' needs at least 2 values");
        }
        std::set<std::string> seen;
        for (const auto& v : c.values) {
            if (v.empty()) throw SchemaError("schema: concept '" + c.name + "' has an empty value name");
            if (!seen.insert(lower(v)).second) {
                throw SchemaError("schema: concept '" + c.name + "' repeats value '" + v + "'");
            }
        }
    }
    if (task.kind == model::TaskKind::Classification) {
        if (task.classes.size() < 2) throw SchemaError("schema: classification needs at least 2 classes");
        std::set<std::string> seen(task.classes.begin(), task.classes.end());
        if (seen.size() != task.classes.size()) throw SchemaError("schema: duplicate class name");
    } else if (!(task.min_value < task.max_value)) {
        throw SchemaError("schema: regression range must satisfy min < max");
    }
}

std::string ConceptSchema::to_json() const {
    json j;
    j["concepts"] = json::array();
    for (const auto& c : concepts) j["concepts"].push_back({{"name", c.name}, {"values", c.values}});
    j["task"]["kind"] = model::to_string(task.kind);
    if (task.kind == model::TaskKind::Classification) {
        j["task"]["classes"] = task.classes;
    } else {
        j["task"]["min"] = task.min_value;
        j["task"]["max"] = task.max_value;
    }
    return j.dump(2);
}

ConceptSchema ConceptSchema::from_json(const std::string& text) {
    ConceptSchema s;
    try {
        const json j = json::parse(text);
        for (const auto& c : j.at("concepts")) {
            s.concepts.push_back({c.at("name").get<std::string>(), c.at("values").get<std::vector<std::string>>()});
        }
        const auto& t = j.at("task");
        s.task.kind = model::task_kind_from_string(t.at("kind").get<std::string>());
        if (s.task.kind == model::TaskKind::Classification) {
            s.task.classes = t.at("classes").get<std::vector<std::string>>();
        } else {
            s.task.min_value = t.value("min", 0.0);
            s.task.max_value = t.value("max", 9.0);
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("schema: ") + e.what());
    }
    s.validate();
    return s;
}

ConceptSchema ConceptSchema::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open schema file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return from_json(ss.str());
    } catch (const SchemaError& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

void ConceptSchema::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InputError("cannot write schema file " + path);
    out << to_json() << '\n';
}

ConceptSchema ConceptSchema::restaurant_reviews() {
    ConceptSchema s;
    s.concepts = restaurant_concepts();
    s.task.kind = model::TaskKind::Classification;
    s.task.classes = {"1", "2", "3", "4", "5"};
    return s;
}

ConceptSchema ConceptSchema::restaurant_scores() {
    ConceptSchema s;
    s.concepts = restaurant_concepts();
    s.task.kind = model::TaskKind::Regression;
    s.task.min_value = 0.0;
    s.task.max_value = 9.0;
    return s;
}

bool ConceptSchema::operator==(const ConceptSchema& o) const {
    if (concepts.size() != o.concepts.size()) return false;
    for (std::size_t k = 0; k < concepts.size(); ++k) {
        if (concepts[k].name != o.concepts[k].name || concepts[k].values != o.concepts[k].values) return false;
    }
    return task.kind == o.task.kind && task.classes == o.task.classes && task.min_value == o.task.min_value &&
           task.max_value == o.task.max_value;
}

void DatasetSplit::validate() const {
    schema.validate();
    const auto arities = schema.arities();
    std::set<std::size_t> ids;
    for (const auto* part : {&train, &dev, &test}) {
        for (const auto& ex : *part) {
            if (!ids.insert(ex.id).second) {
                throw ContractError("dataset: example id " + std::to_string(ex.id) + " appears twice");
            }
            if (ex.concepts) {
                if (ex.concepts->size() != arities.size()) {
                    throw ContractError("dataset: example " + std::to_string(ex.id) + " has wrong concept count");
                }
                for (std::size_t k = 0; k < arities.size(); ++k) {
                    if ((*ex.concepts)[k] >= arities[k]) {
                        throw ContractError("dataset: example " + std::to_string(ex.id) +
                                            " concept value out of range");
                    }
                }
            }
            if (ex.label && schema.task.kind == model::TaskKind::Classification &&
                (*ex.label < 0 || *ex.label >= static_cast<double>(schema.num_classes()))) {
                throw ContractError("dataset: example " + std::to_string(ex.id) + " label out of range");
            }
        }
    }
}

}  // namespace moce::data
