#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moce/data.hpp"
#include "moce/model.hpp"

namespace moce::account {

/// Snapshot of the linear task head, so reports never need the model.
struct LinearHead {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weight;  // [inputs x outputs], row-major
    std::vector<double> bias;    // [outputs]

    static LinearHead from_model(const model::MoceModel& model);
    std::vector<double> apply(std::span<const double> activations) const;

    bool operator==(const LinearHead&) const = default;
};

struct InfluenceReport {
    std::size_t task_class = 0;       // output row (0 for regression)
    bool from_logits = false;         // activations were concept logits
    std::vector<double> influence;    // per concept
    double bias = 0.0;
    double reconstructed = 0.0;       // sum of influences + bias
    std::vector<std::vector<double>> per_class;  // [class][concept]
};

/// I(c_k) = activations of concept k . head weights of concept k for `task_class`.
InfluenceReport concept_influence(std::span<const double> activations, const LinearHead& head,
                                  std::span<const std::size_t> arities, std::size_t task_class,
                                  bool from_logits = false);

struct LayerGates {
    std::vector<std::size_t> selected;
    std::vector<double> gates;  // gate value of each selected expert

    bool operator==(const LayerGates&) const = default;
};

struct ConceptNode {
    std::string name;
    std::size_t predicted_value = 0;
    std::string value_name;
    double probability = 0.0;
    std::vector<double> probabilities;
    std::size_t budget = 0;
    double influence = 0.0;
    std::vector<LayerGates> layers;
    std::vector<std::string> evidence;  // phrase-bank matches in the text

    bool operator==(const ConceptNode&) const = default;
};

struct PathwayTrace {
    std::size_t example_id = 0;
    std::string stage;  // "pre" or "post"
    std::string text;
    std::vector<std::string> tokens;
    std::string task_kind;
    std::vector<double> task_logits;
    std::size_t predicted_class = 0;  // classification only
    std::string predicted_label;
    double predicted_value = 0.0;  // regression only
    std::vector<ConceptNode> concepts;
    std::size_t influence_class = 0;
    double head_bias = 0.0;
    std::vector<std::string> influence_ranking;  // concept names by |influence|, descending

    bool operator==(const PathwayTrace&) const = default;
};

/// Assembles the pathway of one recorded example. Throws ContractError when
/// the trace carries no gate records.
PathwayTrace backtrack(const data::Example& example, const model::ExampleTrace& trace, const LinearHead& head,
                       const data::ConceptSchema& schema, const std::string& stage,
                       const data::PhraseBank* bank = nullptr);

struct ConceptDiff {
    std::string name;
    std::size_t budget_before = 0;
    std::size_t budget_after = 0;
    std::vector<std::vector<std::size_t>> experts_before;  // per layer
    std::vector<std::vector<std::size_t>> experts_after;
    std::vector<std::vector<std::size_t>> experts_added;
    std::vector<std::vector<double>> gate_deltas;  // per layer, per expert of experts_after
    std::size_t value_before = 0;
    std::size_t value_after = 0;
    std::string value_name_before;
    std::string value_name_after;
    std::vector<double> probability_shift;  // after - before, per value

    bool operator==(const ConceptDiff&) const = default;
};

struct InterventionDiff {
    std::size_t example_id = 0;
    std::vector<ConceptDiff> concepts;  // only concepts whose budget or prediction changed
    std::string task_before;
    std::string task_after;
    bool task_changed = false;

    bool empty() const { return concepts.empty() && !task_changed; }
    bool operator==(const InterventionDiff&) const = default;
};

/// Throws ContractError when the two traces describe different examples.
InterventionDiff diff_interventions(const PathwayTrace& pre, const PathwayTrace& post);

/// `format` is "json" or "text"; anything else is a UsageError.
std::string emit_report(const PathwayTrace& pathway, const std::string& format);
std::string emit_report(const InterventionDiff& diff, const std::string& format);

PathwayTrace parse_pathway(const std::string& json_text);
InterventionDiff parse_diff(const std::string& json_text);

}  // namespace moce::account
