#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>
#include <utility>

#include "json.hpp"
#include "moce/errors.hpp"
#include "moce/metacognition.hpp"

namespace moce::metacog {

std::string to_string(Statistic s) { return s == Statistic::Entropy ? "entropy" : "max_probability"; }

Statistic statistic_from_string(const std::string& text) {
    if (text == "entropy") return Statistic::Entropy;
    if (text == "max_probability") return Statistic::MaxProbability;
    throw ConfigError("unknown scrutiny statistic '" + text + "' (expected entropy or max_probability)");
}

std::string to_string(InterventionMode m) {
    switch (m) {
        case InterventionMode::Null: return "null";
        case InterventionMode::Metacognitive: return "metacog";
        case InterventionMode::Oracle: return "oracle";
        case InterventionMode::Max: return "max";
    }
    return "null";
}

InterventionMode mode_from_string(const std::string& text) {
    if (text == "null") return InterventionMode::Null;
    if (text == "metacog" || text == "metacognitive") return InterventionMode::Metacognitive;
    if (text == "oracle") return InterventionMode::Oracle;
    if (text == "max") return InterventionMode::Max;
    throw UsageError("unknown intervention mode '" + text + "' (expected null, metacog, oracle or max)");
}

double shannon_entropy(std::span<const double> logits) {
    if (logits.size() < 2) throw ContractError("shannon_entropy: needs at least 2 logits");
    const double m = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double l : logits) s += std::exp(l - m);
    const double log_s = std::log(s);
    double h = 0.0;
    for (double l : logits) {
        const double p = std::exp(l - m) / s;
        if (p > 0.0) h -= p * ((l - m) - log_s);
    }
    return std::max(h, 0.0);
}

double uncertainty(std::span<const double> logits, Statistic statistic) {
    if (statistic == Statistic::Entropy) return shannon_entropy(logits);
    if (logits.size() < 2) throw ContractError("uncertainty: needs at least 2 logits");
    const double m = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double l : logits) s += std::exp(l - m);
    return 1.0 - 1.0 / s;
}

ClusterFit two_means(std::span<const double> values) {
    if (values.empty()) throw DegenerateFitError("two_means: no values");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    if (!(*lo_it < *hi_it)) throw DegenerateFitError("two_means: all values are identical");
    for (double v : values) {
        if (!std::isfinite(v)) throw NumericError("two_means: non-finite value");
    }

    ClusterFit fit;
    std::vector<char> high(values.size(), 0);
    auto lloyd = [&](double lo, double hi) {
        for (std::size_t iter = 1; iter <= 100; ++iter) {
            bool changed = iter == 1;
            for (std::size_t i = 0; i < values.size(); ++i) {
                const char h = std::abs(values[i] - hi) < std::abs(values[i] - lo) ? 1 : 0;
                if (h != high[i]) changed = true;
                high[i] = h;
            }
            fit.iterations += 1;
            if (!changed) break;
            double s_lo = 0.0, s_hi = 0.0;
            std::size_t n_lo = 0, n_hi = 0;
            for (std::size_t i = 0; i < values.size(); ++i) {
                if (high[i]) {
                    s_hi += values[i];
                    ++n_hi;
                } else {
                    s_lo += values[i];
                    ++n_lo;
                }
            }
            lo = s_lo / static_cast<double>(n_lo);
            hi = s_hi / static_cast<double>(n_hi);
        }
        return std::pair{lo, hi};
    };
    auto [lo, hi] = lloyd(*lo_it, *hi_it);

    // Lloyd can stop in a local optimum. The optimal 2-partition of a line is
    // a split of the sorted values and is itself a fixpoint, so scan the
    // splits and restart from the best one when it beats the fixpoint found.
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const auto sse = [&](double a, double b) {
        double total = 0.0;
        for (double v : values) {
            const double c = std::abs(v - b) < std::abs(v - a) ? b : a;
            total += (v - c) * (v - c);
        }
        return total;
    };
    double prefix = 0.0, total_sum = 0.0;
    for (double v : sorted) total_sum += v;
    double best = sse(lo, hi), best_lo = lo, best_hi = hi;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        prefix += sorted[i - 1];
        if (sorted[i] == sorted[i - 1]) continue;
        const double a = prefix / static_cast<double>(i);
        const double b = (total_sum - prefix) / static_cast<double>(sorted.size() - i);
        const double candidate = sse(a, b);
        if (candidate < best * (1.0 - 1e-12)) {
            best = candidate;
            best_lo = a;
            best_hi = b;
        }
    }
    if (best_lo != lo || best_hi != hi) std::tie(lo, hi) = lloyd(best_lo, best_hi);

    fit.low_centroid = lo;
    fit.high_centroid = hi;
    fit.threshold = 0.5 * (lo + hi);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double c = high[i] ? hi : lo;
        fit.inertia += (values[i] - c) * (values[i] - c);
    }
    return fit;
}

namespace {

nlohmann::json fit_json(const std::optional<ClusterFit>& f) {
    if (!f) return nullptr;
    return {{"threshold", f->threshold},       {"low_centroid", f->low_centroid},
            {"high_centroid", f->high_centroid}, {"iterations", f->iterations},
            {"inertia", f->inertia}};
}

std::optional<ClusterFit> fit_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    ClusterFit f;
    f.threshold = j.at("threshold").get<double>();
    f.low_centroid = j.at("low_centroid").get<double>();
    f.high_centroid = j.at("high_centroid").get<double>();
    f.iterations = j.at("iterations").get<std::size_t>();
    f.inertia = j.at("inertia").get<double>();
    return f;
}

std::optional<ClusterFit> try_fit(const std::vector<double>& values) {
    try {
        return two_means(values);
    } catch (const DegenerateFitError&) {
        return std::nullopt;
    }
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

std::string Thresholds::to_json() const {
    nlohmann::json j;
    j["statistic"] = to_string(statistic);
    j["concepts"] = nlohmann::json::array();
    for (const auto& c : concepts) {
        j["concepts"].push_back({{"routing", fit_json(c.routing)}, {"concept", fit_json(c.concept_fit)}});
    }
    return j.dump(2);
}

Thresholds Thresholds::from_json(const std::string& text) {
    Thresholds t;
    try {
        const auto j = nlohmann::json::parse(text);
        t.statistic = statistic_from_string(j.at("statistic").get<std::string>());
        for (const auto& c : j.at("concepts")) {
            t.concepts.push_back({fit_from_json(c.at("routing")), fit_from_json(c.at("concept"))});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("thresholds: ") + e.what());
    }
    return t;
}

EntropyRecord entropy_record(std::size_t example_id, const model::ExampleTrace& trace,
                             const model::ModelConfig& config, Statistic statistic) {
    if (!trace.has_gates || trace.layers.empty()) {
        throw ContractError("entropy_record: trace was recorded without gates");
    }
    EntropyRecord r;
    r.example_id = example_id;
    const auto& final_layer = trace.layers.back();
    for (std::size_t k = 0; k < config.num_concepts(); ++k) {
        r.routing.push_back(uncertainty(final_layer.at(k).router_logits, statistic));
        const std::size_t off = config.concept_offset(k);
        r.concept_values.push_back(uncertainty(
            std::span<const double>(trace.concept_logits).subspan(off, config.concept_arities[k]), statistic));
    }
    return r;
}

std::vector<EntropyRecord> entropy_records(const std::vector<data::Example>& examples,
                                           const model::ForwardTrace& trace, const model::ModelConfig& config,
                                           Statistic statistic) {
    if (examples.size() != trace.examples.size()) throw ContractError("entropy_records: count mismatch");
    std::vector<EntropyRecord> out;
    out.reserve(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        out.push_back(entropy_record(examples[i].id, trace.examples[i], config, statistic));
    }
    return out;
}

Thresholds fit_thresholds(const std::vector<EntropyRecord>& records, std::size_t num_concepts,
                          Statistic statistic) {
    Thresholds t;
    t.statistic = statistic;
    for (std::size_t k = 0; k < num_concepts; ++k) {
        std::vector<double> routing, concept_values;
        for (const auto& r : records) {
            routing.push_back(r.routing.at(k));
            concept_values.push_back(r.concept_values.at(k));
        }
        t.concepts.push_back({try_fit(routing), try_fit(concept_values)});
    }
    return t;
}

bool flag_rule(double routing, double concept_value, const ConceptThresholds& thresholds) {
    if (!thresholds.routing || !thresholds.concept_fit) return false;
    return routing > thresholds.routing->threshold && concept_value > thresholds.concept_fit->threshold;
}

ScrutinyReport flag(const std::vector<EntropyRecord>& records, const Thresholds& thresholds) {
    ScrutinyReport report;
    report.records = records;
    report.thresholds = thresholds;
    for (const auto& r : records) {
        if (r.routing.size() != thresholds.concepts.size()) {
            throw ContractError("flag: thresholds were fitted for a different concept count");
        }
        std::vector<bool> row;
        for (std::size_t k = 0; k < r.routing.size(); ++k) {
            row.push_back(flag_rule(r.routing[k], r.concept_values[k], thresholds.concepts[k]));
            report.flagged += row.back();
        }
        report.flags.push_back(std::move(row));
    }
    return report;
}

std::string ScrutinyReport::to_csv(const data::ConceptSchema& schema) const {
    std::string out = "example_id,concept,routing_" + to_string(thresholds.statistic) + ",routing_threshold,concept_" +
                      to_string(thresholds.statistic) + ",concept_threshold,flagged\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
        for (std::size_t k = 0; k < records[i].routing.size(); ++k) {
            const auto& t = thresholds.concepts[k];
            out += std::to_string(records[i].example_id) + ',' + schema.concepts.at(k).name + ',' +
                   fmt(records[i].routing[k]) + ',' + (t.routing ? fmt(t.routing->threshold) : "") + ',' +
                   fmt(records[i].concept_values[k]) + ',' + (t.concept_fit ? fmt(t.concept_fit->threshold) : "") +
                   ',' + (flags[i][k] ? "1" : "0") + '\n';
        }
    }
    return out;
}

std::string entropy_values_csv(const std::vector<EntropyRecord>& records, const data::ConceptSchema& schema) {
    std::string out = "example_id,concept,quantity,value\n";
    for (const auto& r : records) {
        for (std::size_t k = 0; k < r.routing.size(); ++k) {
            const std::string prefix = std::to_string(r.example_id) + ',' + schema.concepts.at(k).name + ',';
            out += prefix + "routing," + fmt(r.routing[k]) + '\n';
            out += prefix + "concept," + fmt(r.concept_values[k]) + '\n';
        }
    }
    return out;
}

}  // namespace moce::metacog
