#include <cstdio>

#include "json.hpp"

#include "moce/accountability.hpp"
#include "moce/errors.hpp"

namespace moce::account {

using nlohmann::json;

namespace {

json layers_json(const std::vector<LayerGates>& layers) {
    json out = json::array();
    for (const auto& l : layers) out.push_back({{"selected", l.selected}, {"gates", l.gates}});
    return out;
}

json to_json(const PathwayTrace& p) {
    json concepts = json::array();
    for (const auto& c : p.concepts) {
        concepts.push_back({{"name", c.name},
                            {"predicted_value", c.predicted_value},
                            {"value_name", c.value_name},
                            {"probability", c.probability},
                            {"probabilities", c.probabilities},
                            {"budget", c.budget},
                            {"influence", c.influence},
                            {"layers", layers_json(c.layers)},
                            {"evidence", c.evidence}});
    }
    return {{"kind", "pathway"},
            {"example_id", p.example_id},
            {"stage", p.stage},
            {"text", p.text},
            {"tokens", p.tokens},
            {"task_kind", p.task_kind},
            {"task_logits", p.task_logits},
            {"predicted_class", p.predicted_class},
            {"predicted_label", p.predicted_label},
            {"predicted_value", p.predicted_value},
            {"concepts", concepts},
            {"influence_class", p.influence_class},
            {"head_bias", p.head_bias},
            {"influence_ranking", p.influence_ranking}};
}

json to_json(const InterventionDiff& d) {
    json concepts = json::array();
    for (const auto& c : d.concepts) {
        concepts.push_back({{"name", c.name},
                            {"budget_before", c.budget_before},
                            {"budget_after", c.budget_after},
                            {"experts_before", c.experts_before},
                            {"experts_after", c.experts_after},
                            {"experts_added", c.experts_added},
                            {"gate_deltas", c.gate_deltas},
                            {"value_before", c.value_before},
                            {"value_after", c.value_after},
                            {"value_name_before", c.value_name_before},
                            {"value_name_after", c.value_name_after},
                            {"probability_shift", c.probability_shift}});
    }
    return {{"kind", "intervention_diff"},
            {"example_id", d.example_id},
            {"concepts", concepts},
            {"task_before", d.task_before},
            {"task_after", d.task_after},
            {"task_changed", d.task_changed}};
}

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string signed_fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.4f", v);
    return buf;
}

template <class T>
std::string join(const std::vector<T>& xs, std::string (*fmt)(T)) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + fmt(xs[i]);
    return out;
}

std::string index_str(std::size_t v) { return std::to_string(v); }

std::string to_text(const PathwayTrace& p) {
    std::string out;
    out += "example " + std::to_string(p.example_id) + " (" + p.stage + ")\n";
    out += "text: " + p.text + "\n";
    out += "prediction: " + p.predicted_label + " [" + p.task_kind + "]\n";
    out += "concepts:\n";
    for (const auto& c : p.concepts) {
        out += "  " + c.name + " = " + c.value_name + " (p=" + fixed(c.probability) + ", budget " +
               std::to_string(c.budget) + ", influence " + signed_fixed(c.influence) + ")\n";
        for (std::size_t l = 0; l < c.layers.size(); ++l) {
            out += "    layer " + std::to_string(l) + ":";
            for (std::size_t j = 0; j < c.layers[l].selected.size(); ++j) {
                out += " e" + std::to_string(c.layers[l].selected[j]) + "=" + fixed(c.layers[l].gates[j]);
            }
            out += "\n";
        }
        if (!c.evidence.empty()) {
            out += "    evidence:";
            for (std::size_t i = 0; i < c.evidence.size(); ++i) out += (i ? ", \"" : " \"") + c.evidence[i] + "\"";
            out += "\n";
        }
    }
    out += "head bias: " + signed_fixed(p.head_bias) + "\n";
    out += "ranking:";
    for (const auto& n : p.influence_ranking) out += " " + n;
    out += "\n";
    return out;
}

std::string to_text(const InterventionDiff& d) {
    std::string out = "example " + std::to_string(d.example_id) + ": task " + d.task_before + " -> " +
                      d.task_after + (d.task_changed ? " (changed)" : " (unchanged)") + "\n";
    if (d.concepts.empty()) out += "  no concept changed\n";
    for (const auto& c : d.concepts) {
        out += "  " + c.name + ": budget " + std::to_string(c.budget_before) + " -> " +
               std::to_string(c.budget_after) + ", value " + c.value_name_before + " -> " + c.value_name_after +
               "\n";
        for (std::size_t l = 0; l < c.experts_after.size(); ++l) {
            out += "    layer " + std::to_string(l) + ": [" + join(c.experts_before[l], index_str) + "] -> [" +
                   join(c.experts_after[l], index_str) + "], added [" + join(c.experts_added[l], index_str) +
                   "], gate deltas [" + join(c.gate_deltas[l], signed_fixed) + "]\n";
        }
        out += "    probability shift [" + join(c.probability_shift, signed_fixed) + "]\n";
    }
    return out;
}

void check_format(const std::string& format) {
    if (format != "json" && format != "text") {
        throw UsageError("unknown report format '" + format + "' (expected json or text)");
    }
}

json parse_kind(const std::string& text, const std::string& kind) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("report: ") + e.what());
    }
    if (!j.is_object() || j.value("kind", "") != kind) throw SchemaError("report: expected kind '" + kind + "'");
    return j;
}

}  // namespace

std::string emit_report(const PathwayTrace& pathway, const std::string& format) {
    check_format(format);
    return format == "json" ? to_json(pathway).dump(2) + "\n" : to_text(pathway);
}

std::string emit_report(const InterventionDiff& diff, const std::string& format) {
    check_format(format);
    return format == "json" ? to_json(diff).dump(2) + "\n" : to_text(diff);
}

PathwayTrace parse_pathway(const std::string& json_text) {
    const json j = parse_kind(json_text, "pathway");
    try {
        PathwayTrace p;
        j.at("example_id").get_to(p.example_id);
        j.at("stage").get_to(p.stage);
        j.at("text").get_to(p.text);
        j.at("tokens").get_to(p.tokens);
        j.at("task_kind").get_to(p.task_kind);
        j.at("task_logits").get_to(p.task_logits);
        j.at("predicted_class").get_to(p.predicted_class);
        j.at("predicted_label").get_to(p.predicted_label);
        j.at("predicted_value").get_to(p.predicted_value);
        j.at("influence_class").get_to(p.influence_class);
        j.at("head_bias").get_to(p.head_bias);
        j.at("influence_ranking").get_to(p.influence_ranking);
        for (const auto& c : j.at("concepts")) {
            ConceptNode n;
            c.at("name").get_to(n.name);
            c.at("predicted_value").get_to(n.predicted_value);
            c.at("value_name").get_to(n.value_name);
            c.at("probability").get_to(n.probability);
            c.at("probabilities").get_to(n.probabilities);
            c.at("budget").get_to(n.budget);
            c.at("influence").get_to(n.influence);
            c.at("evidence").get_to(n.evidence);
            for (const auto& l : c.at("layers")) {
                LayerGates g;
                l.at("selected").get_to(g.selected);
                l.at("gates").get_to(g.gates);
                n.layers.push_back(std::move(g));
            }
            p.concepts.push_back(std::move(n));
        }
        return p;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("pathway report: ") + e.what());
    }
}

InterventionDiff parse_diff(const std::string& json_text) {
    const json j = parse_kind(json_text, "intervention_diff");
    try {
        InterventionDiff d;
        j.at("example_id").get_to(d.example_id);
        j.at("task_before").get_to(d.task_before);
        j.at("task_after").get_to(d.task_after);
        j.at("task_changed").get_to(d.task_changed);
        for (const auto& c : j.at("concepts")) {
            ConceptDiff x;
            c.at("name").get_to(x.name);
            c.at("budget_before").get_to(x.budget_before);
            c.at("budget_after").get_to(x.budget_after);
            c.at("experts_before").get_to(x.experts_before);
            c.at("experts_after").get_to(x.experts_after);
            c.at("experts_added").get_to(x.experts_added);
            c.at("gate_deltas").get_to(x.gate_deltas);
            c.at("value_before").get_to(x.value_before);
            c.at("value_after").get_to(x.value_after);
            c.at("value_name_before").get_to(x.value_name_before);
            c.at("value_name_after").get_to(x.value_name_after);
            c.at("probability_shift").get_to(x.probability_shift);
            d.concepts.push_back(std::move(x));
        }
        return d;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("diff report: ") + e.what());
    }
}

}  // namespace moce::account
