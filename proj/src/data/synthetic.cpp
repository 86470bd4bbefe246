#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "json.hpp"
#include "moce/data.hpp"
#include "moce/errors.hpp"

namespace moce::data {

namespace {

enum class Polarity { Negative, Positive, Absent, Other };

Polarity polarity_of(const std::string& value) {
    std::string v;
    for (char c : value) v += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (v.rfind("neg", 0) == 0) return Polarity::Negative;
    if (v.rfind("pos", 0) == 0) return Polarity::Positive;
    if (v == "unknown" || v == "none" || v == "absent" || v == "n/a" || v == "na") return Polarity::Absent;
    return Polarity::Other;
}

double polarity_sign(Polarity p) {
    switch (p) {
        case Polarity::Negative: return -1.0;
        case Polarity::Positive: return 1.0;
        default: return 0.0;
    }
}

struct Lexicon {
    std::vector<std::string> aspects;
    std::vector<std::string> positive;
    std::vector<std::string> negative;
};

Lexicon lexicon_for(const std::string& concept_name) {
    static const std::map<std::string, Lexicon> known = {
        {"food",
         {{"food", "meal", "dishes"}, {"delicious", "tasty", "flavorful", "fresh"}, {"bland", "stale", "greasy", "tasteless"}}},
        {"ambiance",
         {{"ambiance", "decor", "atmosphere"}, {"cozy", "charming", "elegant", "inviting"}, {"dreary", "drab", "gloomy", "tacky"}}},
        {"service",
         {{"service", "staff", "waiter"}, {"friendly", "attentive", "prompt", "helpful"}, {"rude", "slow", "careless", "unhelpful"}}},
        {"noise",
         {{"noise", "music", "volume"}, {"quiet", "calm", "peaceful", "soothing"}, {"loud", "deafening", "noisy", "blaring"}}},
        {"acting",
         {{"acting", "cast", "performances"}, {"convincing", "moving", "natural", "gripping"}, {"wooden", "stiff", "hammy", "flat"}}},
        {"storyline",
         {{"story", "plot", "script"}, {"clever", "engaging", "original", "coherent"}, {"predictable", "confusing", "thin", "messy"}}},
    };
    std::string key;
    for (char c : concept_name) key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const auto it = known.find(key);
    if (it != known.end()) return it->second;
    for (char& c : key) {
        if (c == '_' || c == '-') c = ' ';
    }
    return {{key}, {"good", "great", "excellent", "lovely"}, {"bad", "awful", "terrible", "poor"}};
}

const std::vector<std::string> kFillers = {
    "we came here last week",     "it was a busy evening",   "my friend recommended it",
    "we had a table for two",     "we stayed for an hour",   "parking was easy to find",
    "it was my first visit here", "we ordered the specials",
};
const std::vector<std::string> kConnectors = {". ", ", ", " and ", ", but "};

std::vector<std::string> render_phrases(const Lexicon& lex, const std::string& aspect, Polarity polarity,
                                        const std::string& value) {
    std::vector<std::string> out;
    const bool plural = aspect == "dishes" || aspect == "performances" || aspect == "visuals";
    const std::string was = plural ? " were " : " was ";
    const auto& same = polarity == Polarity::Positive ? lex.positive : lex.negative;
    const auto& opposite = polarity == Polarity::Positive ? lex.negative : lex.positive;
    switch (polarity) {
        case Polarity::Positive:
        case Polarity::Negative:
            for (const auto& adj : same) {
                out.push_back("the " + aspect + was + adj);
                out.push_back(adj + " " + aspect);
                out.push_back("the " + aspect + was + "really " + adj);
            }
            for (const auto& adj : opposite) out.push_back("the " + aspect + was + "not " + adj);
            break;
        case Polarity::Absent:
            out.push_back("no opinion about the " + aspect);
            out.push_back("did not notice the " + aspect);
            break;
        case Polarity::Other:
            out.push_back("the " + aspect + was + value);
            out.push_back(value + " " + aspect);
            break;
    }
    return out;
}

// Whole-word phrase occurrences as [begin, end) token spans.
std::vector<std::pair<std::size_t, std::size_t>> find_spans(const std::vector<std::string>& words,
                                                            const std::vector<std::string>& phrase) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    if (phrase.empty() || phrase.size() > words.size()) return spans;
    for (std::size_t i = 0; i + phrase.size() <= words.size(); ++i) {
        if (std::equal(phrase.begin(), phrase.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) {
            spans.emplace_back(i, i + phrase.size());
        }
    }
    return spans;
}

}  // namespace

double LabelFunction::score(const std::vector<std::size_t>& concepts) const {
    if (concepts.size() != weights.size()) throw ContractError("label function: wrong concept count");
    double s = 0.0;
    for (std::size_t k = 0; k < concepts.size(); ++k) s += weights[k].at(concepts[k]);
    return s;
}

double LabelFunction::label(const std::vector<std::size_t>& concepts, const TaskSpec& task) const {
    const double s = score(concepts);
    const double span = score_max - score_min;
    const double unit = span > 0.0 ? (s - score_min) / span : 0.5;
    if (task.kind == model::TaskKind::Classification) {
        const auto classes = static_cast<double>(task.classes.size());
        return std::min(std::floor(unit * classes), classes - 1.0);
    }
    return std::clamp(task.min_value + unit * (task.max_value - task.min_value), task.min_value, task.max_value);
}

LabelFunction LabelFunction::for_schema(const ConceptSchema& schema) {
    static const double kConceptWeights[] = {2.0, 1.0, 1.5, 0.5};
    LabelFunction f;
    for (std::size_t k = 0; k < schema.num_concepts(); ++k) {
        const double w = kConceptWeights[k % 4];
        std::vector<double> row;
        for (const auto& v : schema.concepts[k].values) row.push_back(w * polarity_sign(polarity_of(v)));
        f.score_min += *std::min_element(row.begin(), row.end());
        f.score_max += *std::max_element(row.begin(), row.end());
        f.weights.push_back(std::move(row));
    }
    return f;
}

PhraseBank PhraseBank::for_schema(const ConceptSchema& schema) {
    PhraseBank bank;
    for (const auto& c : schema.concepts) {
        const Lexicon lex = lexicon_for(c.name);
        std::vector<std::vector<std::string>> per_value;
        for (const auto& v : c.values) {
            const Polarity p = polarity_of(v);
            std::vector<std::string> phrases;
            if (p == Polarity::Absent) phrases.emplace_back();  // not mentioned
            for (const auto& a : lex.aspects) {
                for (auto& ph : render_phrases(lex, a, p, v)) phrases.push_back(std::move(ph));
            }
            per_value.push_back(std::move(phrases));
        }
        bank.bank_.push_back(std::move(per_value));
    }
    return bank;
}

std::vector<std::string> PhraseBank::matches(std::size_t concept_index, const std::string& text) const {
    const auto words = split_words(text);
    struct Hit {
        std::size_t begin, end;
        std::string phrase;
    };
    std::vector<Hit> hits;
    for (const auto& phrases : bank_.at(concept_index)) {
        for (const auto& phrase : phrases) {
            for (const auto& [b, e] : find_spans(words, split_words(phrase))) hits.push_back({b, e, phrase});
        }
    }
    std::vector<std::string> out;
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        return a.begin != b.begin ? a.begin < b.begin : a.end > b.end;
    });
    std::size_t covered_end = 0;
    for (const auto& h : hits) {
        if (!out.empty() && h.end <= covered_end) continue;  // inside a longer match
        out.push_back(h.phrase);
        covered_end = std::max(covered_end, h.end);
    }
    return out;
}

SyntheticDataset generate_synthetic(const ConceptSchema& schema, const SyntheticOptions& options) {
    schema.validate();
    if (!(options.noise_rate >= 0.0 && options.noise_rate < 0.5)) {
        throw ConfigError("noise_rate must lie in [0, 0.5), got " + std::to_string(options.noise_rate));
    }
    SyntheticDataset out;
    out.label_function = LabelFunction::for_schema(schema);
    const PhraseBank bank = PhraseBank::for_schema(schema);
    const auto arities = schema.arities();
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

    std::size_t next_id = 0;
    auto make = [&](std::size_t n) {
        std::vector<Example> examples;
        examples.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            Example ex;
            ex.id = next_id++;
            std::vector<std::size_t> values(arities.size());
            std::vector<std::string> parts;
            for (std::size_t k = 0; k < arities.size(); ++k) {
                values[k] = pick(arities[k]);
                const auto& phrases = bank.phrases(k, values[k]);
                std::string phrase = phrases[pick(phrases.size())];
                if (!phrase.empty()) parts.push_back(std::move(phrase));
            }
            const std::size_t fillers = pick(3);
            for (std::size_t f = 0; f < fillers; ++f) parts.push_back(kFillers[pick(kFillers.size())]);
            std::shuffle(parts.begin(), parts.end(), rng);
            if (parts.empty()) parts.push_back(kFillers[pick(kFillers.size())]);

            std::string text;
            for (std::size_t p = 0; p < parts.size(); ++p) {
                if (p > 0) text += kConnectors[pick(kConnectors.size())];
                std::string part = parts[p];
                if (text.empty() || text.ends_with(". ")) {
                    part[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(part[0])));
                }
                text += part;
            }
            text += '.';
            ex.text = std::move(text);

            double label = out.label_function.label(values, schema.task);
            if (options.noise_rate > 0.0 && unit(rng) < options.noise_rate) {
                if (schema.task.kind == model::TaskKind::Classification) {
                    const std::size_t shift = 1 + pick(schema.num_classes() - 1);
                    label = static_cast<double>((static_cast<std::size_t>(label) + shift) % schema.num_classes());
                } else {
                    const double range = schema.task.max_value - schema.task.min_value;
                    const double delta = (0.1 + 0.2 * unit(rng)) * range * (unit(rng) < 0.5 ? -1.0 : 1.0);
                    label = std::clamp(label + delta, schema.task.min_value, schema.task.max_value);
                }
            }
            ex.concepts = std::move(values);
            ex.label = label;
            examples.push_back(std::move(ex));
        }
        return examples;
    };

    out.split.schema = schema;
    out.split.train = make(options.train_size);
    out.split.dev = make(options.dev_size);
    out.split.test = make(options.test_size);
    out.split.provenance = "synthetic seed=" + std::to_string(options.seed);
    out.split.validate();

    nlohmann::json m;
    m["generator"] = "planted-phrases";
    m["generator_version"] = 1;
    m["seed"] = options.seed;
    m["noise_rate"] = options.noise_rate;
    m["sizes"] = {{"train", options.train_size}, {"dev", options.dev_size}, {"test", options.test_size}};
    m["label_function"] = {{"weights", out.label_function.weights},
                           {"score_min", out.label_function.score_min},
                           {"score_max", out.label_function.score_max},
                           {"task_kind", model::to_string(schema.task.kind)}};
    out.manifest = m.dump(2);
    return out;
}

}  // namespace moce::data
