#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "moce/accountability.hpp"
#include "moce/errors.hpp"
#include "moce/metacognition.hpp"

namespace moce {
namespace {

using account::LinearHead;

LinearHead head_of(std::size_t inputs, std::size_t outputs, std::vector<double> weight, std::vector<double> bias) {
    return {inputs, outputs, std::move(weight), std::move(bias)};
}

TEST(Influence, Example) {
    const auto head = head_of(3, 1, {-1.0, 0.0, 1.0}, {0.25});
    const std::vector<double> act{0.1, 0.2, 0.7};
    const std::vector<std::size_t> arities{3};
    const auto r = account::concept_influence(act, head, arities, 0);
    ASSERT_EQ(r.influence.size(), 1u);
    EXPECT_NEAR(r.influence[0], 0.6, 1e-15);
    EXPECT_NEAR(r.reconstructed, 0.85, 1e-15);
}

TEST(Influence, ZeroWeightsLeaveOnlyTheBias) {
    const auto head = head_of(5, 2, std::vector<double>(10, 0.0), {0.3, -0.4});
    const std::vector<double> act{0.5, 0.5, 0.2, 0.3, 0.5};
    const std::vector<std::size_t> arities{2, 3};
    const auto r = account::concept_influence(act, head, arities, 1);
    EXPECT_EQ(r.influence, (std::vector<double>{0.0, 0.0}));
    EXPECT_DOUBLE_EQ(r.reconstructed, -0.4);
}

TEST(Influence, DecomposesEveryClassLogit) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    const std::vector<std::size_t> arities{3, 2, 4};
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> w(9 * 5), b(5), act(9);
        for (auto& v : w) v = g(rng);
        for (auto& v : b) v = g(rng);
        for (auto& v : act) v = g(rng);
        const auto head = head_of(9, 5, w, b);
        const auto logits = head.apply(act);
        for (std::size_t c = 0; c < 5; ++c) {
            const auto r = account::concept_influence(act, head, arities, c);
            EXPECT_NEAR(r.reconstructed, logits[c], 1e-12);
            EXPECT_EQ(r.per_class[c], r.influence);
        }
    }
}

TEST(Influence, RejectsBadShapes) {
    const auto head = head_of(3, 2, std::vector<double>(6, 1.0), {0.0, 0.0});
    const std::vector<double> act{0.1, 0.2, 0.7};
    const std::vector<std::size_t> arities{3}, wrong{2};
    EXPECT_THROW(account::concept_influence(act, head, wrong, 0), ShapeError);
    EXPECT_THROW(account::concept_influence(act, head, arities, 2), IndexError);
    EXPECT_THROW(head.apply(std::vector<double>{1.0}), ShapeError);
}

TEST(LinearHead, MatchesModelHead) {
    const auto& f = test::trained_fixture();
    const auto head = LinearHead::from_model(f.model);
    std::vector<double> probs(head.inputs);
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = 0.1 * static_cast<double>(i % 4);
    const auto a = head.apply(probs), b = f.model.task_predict(probs);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

// ---------------------------------------------------------------------------
// Hand-built traces
// ---------------------------------------------------------------------------

data::ConceptSchema one_concept_schema() {
    data::ConceptSchema s;
    s.concepts = {{"food", {"negative", "positive", "unknown"}}};
    s.task.classes = {"bad", "good"};
    return s;
}

model::ExampleTrace one_concept_trace(std::vector<std::size_t> selected, std::vector<double> gates,
                                      std::vector<double> probs, std::size_t budget) {
    model::ExampleTrace t;
    t.budgets = {budget};
    model::GateRecord g;
    g.router_logits = {0.0, 0.0, 0.0, 0.0};
    g.probs = {0.25, 0.25, 0.25, 0.25};
    g.gates = std::vector<double>(4, 0.0);
    for (std::size_t j = 0; j < selected.size(); ++j) g.gates[selected[j]] = gates[j];
    g.selected = std::move(selected);
    t.layers = {{g}};
    t.concept_logits = probs;
    t.concept_probs = probs;
    return t;
}

data::Example one_concept_example() {
    data::Example ex;
    ex.id = 7;
    ex.text = "the food was great";
    ex.tokens = {4, 0, 5, 6};
    return ex;
}

TEST(Backtrack, SingleConceptPathway) {
    const auto schema = one_concept_schema();
    const auto head = head_of(3, 2, {1.0, -1.0, -2.0, 2.0, 0.0, 0.0}, {0.1, -0.1});
    auto trace = one_concept_trace({2, 0}, {0.6, 0.3}, {0.1, 0.8, 0.1}, 2);
    trace.task_logits = head.apply(trace.concept_probs);
    const auto p = account::backtrack(one_concept_example(), trace, head, schema, "pre");
    EXPECT_EQ(p.example_id, 7u);
    EXPECT_EQ(p.tokens, (std::vector<std::string>{"the", "<unk>", "was", "great"}));
    EXPECT_EQ(p.predicted_label, "good");
    EXPECT_EQ(p.influence_class, 1u);
    ASSERT_EQ(p.concepts.size(), 1u);
    const auto& c = p.concepts[0];
    EXPECT_EQ(c.value_name, "positive");
    EXPECT_DOUBLE_EQ(c.probability, 0.8);
    EXPECT_EQ(c.budget, 2u);
    ASSERT_EQ(c.layers.size(), 1u);
    EXPECT_EQ(c.layers[0].selected, (std::vector<std::size_t>{2, 0}));
    EXPECT_EQ(c.layers[0].gates, (std::vector<double>{0.6, 0.3}));
    // class 1 column: 0.1*-1 + 0.8*2 + 0.1*0 = 1.5
    EXPECT_NEAR(c.influence, 1.5, 1e-15);
    EXPECT_NEAR(c.influence + p.head_bias, p.task_logits[1], 1e-12);
    EXPECT_EQ(p.influence_ranking, (std::vector<std::string>{"food"}));
}

TEST(Backtrack, NeedsGateRecords) {
    auto trace = one_concept_trace({0}, {1.0}, {0.1, 0.8, 0.1}, 1);
    trace.has_gates = false;
    trace.task_logits = {0.0, 0.0};
    const auto head = head_of(3, 2, std::vector<double>(6, 0.0), {0.0, 0.0});
    EXPECT_THROW(account::backtrack(one_concept_example(), trace, head, one_concept_schema(), "pre"),
                 ContractError);
}

TEST(Diff, IdenticalTracesGiveAnEmptyDiff) {
    const auto schema = one_concept_schema();
    const auto head = head_of(3, 2, {1.0, -1.0, -2.0, 2.0, 0.0, 0.0}, {0.1, -0.1});
    auto trace = one_concept_trace({2, 0}, {0.6, 0.3}, {0.1, 0.8, 0.1}, 2);
    trace.task_logits = head.apply(trace.concept_probs);
    const auto p = account::backtrack(one_concept_example(), trace, head, schema, "pre");
    const auto d = account::diff_interventions(p, p);
    EXPECT_TRUE(d.empty());
    EXPECT_NE(account::emit_report(d, "text").find("no concept changed"), std::string::npos);
    auto other = p;
    other.example_id = 8;
    EXPECT_THROW(account::diff_interventions(p, other), ContractError);
}

TEST(Diff, FlippedConcept) {
    const auto schema = one_concept_schema();
    const auto head = head_of(3, 2, {1.0, -1.0, -2.0, 2.0, 0.0, 0.0}, {0.1, -0.1});
    auto before = one_concept_trace({2, 0}, {0.5, 0.3}, {0.2, 0.5, 0.3}, 2);
    before.task_logits = head.apply(before.concept_probs);
    auto after = one_concept_trace({2, 0, 3}, {0.45, 0.25, 0.2}, {0.7, 0.2, 0.1}, 3);
    after.task_logits = head.apply(after.concept_probs);
    const auto pre = account::backtrack(one_concept_example(), before, head, schema, "pre");
    const auto post = account::backtrack(one_concept_example(), after, head, schema, "post");
    const auto d = account::diff_interventions(pre, post);
    ASSERT_EQ(d.concepts.size(), 1u);
    const auto& c = d.concepts[0];
    EXPECT_EQ(c.budget_before, 2u);
    EXPECT_EQ(c.budget_after, 3u);
    EXPECT_EQ(c.experts_added[0], (std::vector<std::size_t>{3}));
    ASSERT_EQ(c.gate_deltas[0].size(), 3u);
    EXPECT_NEAR(c.gate_deltas[0][0], -0.05, 1e-15);
    EXPECT_NEAR(c.gate_deltas[0][1], -0.05, 1e-15);
    EXPECT_NEAR(c.gate_deltas[0][2], 0.2, 1e-15);
    EXPECT_EQ(c.value_name_before, "positive");
    EXPECT_EQ(c.value_name_after, "negative");
    EXPECT_NEAR(c.probability_shift[0], 0.5, 1e-15);
    EXPECT_TRUE(d.task_changed);
    EXPECT_EQ(d.task_before, "good");
    EXPECT_EQ(d.task_after, "bad");
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

TEST(Report, JsonRoundTripAndFormats) {
    const auto schema = one_concept_schema();
    const auto head = head_of(3, 2, {1.0, -1.0, -2.0, 2.0, 0.0, 0.0}, {0.1, -0.1});
    auto trace = one_concept_trace({1, 3}, {0.55, 0.2}, {0.3, 0.3, 0.4}, 2);
    trace.task_logits = head.apply(trace.concept_probs);
    const auto p = account::backtrack(one_concept_example(), trace, head, schema, "pre");
    EXPECT_EQ(account::parse_pathway(account::emit_report(p, "json")), p);
    const auto text = account::emit_report(p, "text");
    EXPECT_NE(text.find("food"), std::string::npos);
    EXPECT_THROW(account::emit_report(p, "yaml"), UsageError);
    EXPECT_THROW(account::parse_pathway("{not json"), ParseError);
    EXPECT_THROW(account::parse_pathway("{\"kind\": \"intervention_diff\"}"), SchemaError);
    EXPECT_THROW(account::parse_diff(account::emit_report(p, "json")), SchemaError);
}

// ---------------------------------------------------------------------------
// Trained model
// ---------------------------------------------------------------------------

struct Traced {
    model::ForwardTrace pre;
    metacog::InterventionResult result;
};

const Traced& traced() {
    static const Traced t = [] {
        const auto& f = test::trained_fixture();
        const auto& cfg = f.model.config();
        Traced out;
        out.pre = training::predict(f.model, f.data.split.test, f.model.uniform_budgets(cfg.experts_active));
        const auto thresholds = metacog::fit_on_split(f.model, f.data.split.dev, metacog::Statistic::Entropy);
        const auto flags =
            metacog::flag(metacog::entropy_records(f.data.split.test, out.pre, cfg, thresholds.statistic), thresholds)
                .flags;
        out.result = metacog::intervene(f.model, f.data.split.test, out.pre.examples, flags,
                                        {metacog::InterventionMode::Metacognitive, cfg.experts_active,
                                         cfg.experts_intervention, model::BudgetScope::AllLayers});
        return out;
    }();
    return t;
}

TEST(Backtrack, InfluenceReproducesTaskLogitOnEveryReport) {
    const auto& f = test::trained_fixture();
    const auto head = LinearHead::from_model(f.model);
    const auto& t = traced();
    for (std::size_t i = 0; i < f.data.split.test.size(); ++i) {
        for (const auto* trace : {&t.result.pre[i], &t.result.post[i]}) {
            const auto p = account::backtrack(f.data.split.test[i], *trace, head, f.data.split.schema, "pre");
            double sum = p.head_bias;
            for (const auto& c : p.concepts) sum += c.influence;
            ASSERT_NEAR(sum, p.task_logits[p.influence_class], 1e-9) << i;
        }
    }
}

TEST(Backtrack, ReplayIsIdentical) {
    const auto& f = test::trained_fixture();
    const auto head = LinearHead::from_model(f.model);
    const auto& ex = f.data.split.test[3];
    const auto again = training::predict(f.model, {ex}, f.model.uniform_budgets(f.model.config().experts_active));
    const auto a = account::backtrack(ex, traced().pre.examples[3], head, f.data.split.schema, "pre");
    const auto b = account::backtrack(ex, again.examples[0], head, f.data.split.schema, "pre");
    EXPECT_EQ(a, b);
    EXPECT_EQ(account::emit_report(a, "json"), account::emit_report(b, "json"));
}

TEST(Backtrack, EvidenceNamesThePlantedPhrase) {
    const auto& f = test::trained_fixture();
    const auto head = LinearHead::from_model(f.model);
    const auto bank = data::PhraseBank::for_schema(f.data.split.schema);
    std::size_t checked = 0;
    for (std::size_t i = 0; i < f.data.split.test.size(); ++i) {
        const auto& ex = f.data.split.test[i];
        const auto p = account::backtrack(ex, traced().pre.examples[i], head, f.data.split.schema, "pre", &bank);
        for (std::size_t k = 0; k < p.concepts.size(); ++k) {
            // "unknown" covers concepts the text never mentions.
            if (f.data.split.schema.concepts[k].values[(*ex.concepts)[k]] == "unknown") continue;
            std::vector<std::string> planted;
            for (const auto& phrase : bank.phrases(k, (*ex.concepts)[k])) {
                if (!phrase.empty()) planted.push_back(phrase);
            }
            if (planted.empty()) continue;
            const auto& ev = p.concepts[k].evidence;
            const bool found = std::any_of(ev.begin(), ev.end(), [&](const std::string& e) {
                return std::find(planted.begin(), planted.end(), e) != planted.end();
            });
            EXPECT_TRUE(found) << "example " << ex.id << " concept " << p.concepts[k].name << ": " << ex.text;
            ++checked;
        }
    }
    EXPECT_GT(checked, 0u);
}

TEST(Diff, InterventionOnlyGrowsExpertSets) {
    const auto& f = test::trained_fixture();
    const auto head = LinearHead::from_model(f.model);
    const auto& t = traced();
    std::size_t changed = 0;
    for (std::size_t i = 0; i < f.data.split.test.size(); ++i) {
        const auto& ex = f.data.split.test[i];
        const auto pre = account::backtrack(ex, t.result.pre[i], head, f.data.split.schema, "pre");
        const auto post = account::backtrack(ex, t.result.post[i], head, f.data.split.schema, "post");
        const auto d = account::diff_interventions(pre, post);
        if (t.result.post[i] == t.result.pre[i]) {
            EXPECT_TRUE(d.empty());
        }
        for (const auto& c : d.concepts) {
            ++changed;
            EXPECT_GE(c.budget_after, c.budget_before);
            for (std::size_t l = 0; l < c.experts_before.size(); ++l) {
                for (std::size_t m : c.experts_before[l]) {
                    EXPECT_NE(std::find(c.experts_after[l].begin(), c.experts_after[l].end(), m),
                              c.experts_after[l].end());
                }
                EXPECT_EQ(c.experts_added[l].size(), c.experts_after[l].size() - c.experts_before[l].size());
            }
        }
        EXPECT_EQ(account::parse_diff(account::emit_report(d, "json")), d);
    }
    EXPECT_GT(changed, 0u);
}

}  // namespace
}  // namespace moce
