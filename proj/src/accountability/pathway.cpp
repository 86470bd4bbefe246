#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "moce/accountability.hpp"
#include "moce/errors.hpp"

namespace moce::account {

LinearHead LinearHead::from_model(const model::MoceModel& model) {
    LinearHead h;
    h.inputs = model.task_linear.weight.rows();
    h.outputs = model.task_linear.weight.cols();
    h.weight.assign(model.task_linear.weight.values().begin(), model.task_linear.weight.values().end());
    h.bias.assign(model.task_linear.bias.values().begin(), model.task_linear.bias.values().end());
    return h;
}

std::vector<double> LinearHead::apply(std::span<const double> activations) const {
    if (activations.size() != inputs) throw ShapeError("linear head: wrong input width");
    std::vector<double> out(outputs, 0.0);
    // Same accumulation order as the model's matmul followed by the bias add.
    for (std::size_t j = 0; j < outputs; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < inputs; ++i) s += activations[i] * weight[i * outputs + j];
        out[j] = s + bias[j];
    }
    return out;
}

InfluenceReport concept_influence(std::span<const double> activations, const LinearHead& head,
                                  std::span<const std::size_t> arities, std::size_t task_class, bool from_logits) {
    const std::size_t width = std::accumulate(arities.begin(), arities.end(), std::size_t{0});
    if (activations.size() != width || head.inputs != width) {
        throw ShapeError("concept_influence: activation width does not match the head");
    }
    if (task_class >= head.outputs) throw IndexError("concept_influence: task class out of range");
    InfluenceReport r;
    r.task_class = task_class;
    r.from_logits = from_logits;
    for (std::size_t c = 0; c < head.outputs; ++c) {
        std::vector<double> row;
        std::size_t off = 0;
        for (std::size_t a : arities) {
            double s = 0.0;
            for (std::size_t v = 0; v < a; ++v) s += activations[off + v] * head.weight[(off + v) * head.outputs + c];
            row.push_back(s);
            off += a;
        }
        r.per_class.push_back(std::move(row));
    }
    r.influence = r.per_class[task_class];
    r.bias = head.bias[task_class];
    r.reconstructed = std::accumulate(r.influence.begin(), r.influence.end(), 0.0) + r.bias;
    return r;
}

namespace {

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

PathwayTrace backtrack(const data::Example& example, const model::ExampleTrace& trace, const LinearHead& head,
                       const data::ConceptSchema& schema, const std::string& stage, const data::PhraseBank* bank) {
    if (!trace.has_gates || trace.layers.empty()) {
        throw ContractError("backtrack: trace was recorded without gate records");
    }
    const auto arities = schema.arities();
    if (trace.concept_probs.size() != head.inputs) throw ShapeError("backtrack: trace does not match the head");

    PathwayTrace p;
    p.example_id = example.id;
    p.stage = stage;
    p.text = example.text;
    const auto words = data::split_words(example.text);
    for (std::size_t i = 0; i < example.tokens.size(); ++i) {
        const bool unknown = example.tokens[i] == data::Vocabulary::kUnk || i >= words.size();
        p.tokens.push_back(unknown ? data::Vocabulary::kUnkToken : words[i]);
    }
    p.task_kind = model::to_string(schema.task.kind);
    p.task_logits = trace.task_logits;
    if (schema.task.kind == model::TaskKind::Classification) {
        p.predicted_class = static_cast<std::size_t>(
            std::max_element(trace.task_logits.begin(), trace.task_logits.end()) - trace.task_logits.begin());
        p.predicted_label = schema.task.classes.at(p.predicted_class);
        p.influence_class = p.predicted_class;
    } else {
        p.predicted_value = trace.task_logits.at(0);
        p.predicted_label = format_value(p.predicted_value);
        p.influence_class = 0;
    }

    const InfluenceReport infl = concept_influence(trace.concept_probs, head, arities, p.influence_class);
    p.head_bias = infl.bias;
    std::size_t off = 0;
    for (std::size_t k = 0; k < arities.size(); ++k) {
        ConceptNode node;
        node.name = schema.concepts[k].name;
        node.probabilities.assign(trace.concept_probs.begin() + static_cast<std::ptrdiff_t>(off),
                                  trace.concept_probs.begin() + static_cast<std::ptrdiff_t>(off + arities[k]));
        node.predicted_value = static_cast<std::size_t>(
            std::max_element(node.probabilities.begin(), node.probabilities.end()) - node.probabilities.begin());
        node.value_name = schema.concepts[k].values[node.predicted_value];
        node.probability = node.probabilities[node.predicted_value];
        node.budget = trace.budgets.at(k);
        node.influence = infl.influence[k];
        for (const auto& layer : trace.layers) {
            const auto& g = layer.at(k);
            LayerGates lg;
            lg.selected = g.selected;
            for (std::size_t m : g.selected) lg.gates.push_back(g.gates.at(m));
            node.layers.push_back(std::move(lg));
        }
        if (bank) node.evidence = bank->matches(k, example.text);
        p.concepts.push_back(std::move(node));
        off += arities[k];
    }
    std::vector<std::size_t> order(p.concepts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(p.concepts[a].influence) > std::abs(p.concepts[b].influence);
    });
    for (std::size_t k : order) p.influence_ranking.push_back(p.concepts[k].name);
    return p;
}

InterventionDiff diff_interventions(const PathwayTrace& pre, const PathwayTrace& post) {
    if (pre.example_id != post.example_id) {
        throw ContractError("diff_interventions: traces describe examples " + std::to_string(pre.example_id) +
                            " and " + std::to_string(post.example_id));
    }
    if (pre.concepts.size() != post.concepts.size()) throw ContractError("diff_interventions: concept count differs");
    InterventionDiff d;
    d.example_id = pre.example_id;
    d.task_before = pre.predicted_label;
    d.task_after = post.predicted_label;
    d.task_changed = pre.predicted_label != post.predicted_label;
    for (std::size_t k = 0; k < pre.concepts.size(); ++k) {
        const auto& a = pre.concepts[k];
        const auto& b = post.concepts[k];
        if (a.budget == b.budget && a.predicted_value == b.predicted_value && a.layers == b.layers) continue;
        ConceptDiff c;
        c.name = a.name;
        c.budget_before = a.budget;
        c.budget_after = b.budget;
        for (std::size_t l = 0; l < std::min(a.layers.size(), b.layers.size()); ++l) {
            auto before = a.layers[l].selected, after = b.layers[l].selected;
            std::vector<std::size_t> added;
            for (std::size_t m : after) {
                if (std::find(before.begin(), before.end(), m) == before.end()) added.push_back(m);
            }
            std::vector<double> deltas;
            for (std::size_t j = 0; j < after.size(); ++j) {
                double old = 0.0;
                const auto it = std::find(before.begin(), before.end(), after[j]);
                if (it != before.end()) old = a.layers[l].gates[static_cast<std::size_t>(it - before.begin())];
                deltas.push_back(b.layers[l].gates[j] - old);
            }
            c.experts_before.push_back(std::move(before));
            c.experts_after.push_back(std::move(after));
            c.experts_added.push_back(std::move(added));
            c.gate_deltas.push_back(std::move(deltas));
        }
        c.value_before = a.predicted_value;
        c.value_after = b.predicted_value;
        c.value_name_before = a.value_name;
        c.value_name_after = b.value_name;
        for (std::size_t v = 0; v < a.probabilities.size(); ++v) {
            c.probability_shift.push_back(b.probabilities.at(v) - a.probabilities[v]);
        }
        d.concepts.push_back(std::move(c));
    }
    return d;
}

}  // namespace moce::account
