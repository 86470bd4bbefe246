#pragma once

#include <random>
#include <vector>

#include "moce/data.hpp"
#include "moce/model.hpp"
#include "moce/training.hpp"

namespace moce::test {

inline model::ModelConfig tiny_config(std::size_t vocab = 20) {
    model::ModelConfig c;
    c.vocab_size = vocab;
    c.max_seq_len = 12;
    c.embed_dim = 8;
    c.num_heads = 2;
    c.num_attention_layers = 1;
    c.num_moce_layers = 1;
    c.num_experts = 4;
    c.experts_active = 2;
    c.experts_intervention = 3;
    c.concept_arities = {3, 3};
    c.num_classes = 3;
    c.router_hidden_dim = 6;
    c.expert_hidden_dim = 8;
    return c;
}

inline std::vector<model::TokenSeq> random_batch(std::size_t n, std::size_t vocab, std::size_t max_len,
                                                 std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> len(2, max_len), tok(0, vocab - 1);
    std::vector<model::TokenSeq> out(n);
    for (auto& seq : out) {
        seq.resize(len(rng));
        for (auto& t : seq) t = tok(rng);
    }
    return out;
}

/// A small synthetic dataset with tokens assigned, plus its vocabulary.
struct SmallData {
    data::DatasetSplit split;
    data::Vocabulary vocab;
};

inline SmallData small_data(std::size_t train = 160, std::size_t dev = 64, std::size_t test = 64,
                            std::uint64_t seed = 0) {
    const auto schema = data::ConceptSchema::restaurant_reviews();
    auto ds = data::generate_synthetic(schema, {train, dev, test, 0.0, seed});
    SmallData out{std::move(ds.split), {}};
    out.vocab = data::Vocabulary::build(out.split.train);
    data::assign_tokens(out.split, out.vocab, 48);
    return out;
}

inline model::ModelConfig small_model_config(const SmallData& d) {
    model::ModelConfig c;
    c.vocab_size = d.vocab.size();
    c.embed_dim = 16;
    c.num_heads = 2;
    c.concept_arities = d.split.schema.arities();
    c.num_classes = d.split.schema.num_classes();
    return c;
}

/// Briefly trained model shared by the metacognition and accountability suites.
struct TrainedFixture {
    SmallData data;
    model::MoceModel model;
};

inline const TrainedFixture& trained_fixture() {
    static const TrainedFixture fixture = [] {
        auto d = small_data();
        auto m = model::MoceModel::create(small_model_config(d), 3);
        training::TrainConfig tc;
        tc.max_epochs = 6;
        tc.learning_rate = 3e-3;
        tc.patience = 6;
        training::train(m, d.split, tc);
        return TrainedFixture{std::move(d), std::move(m)};
    }();
    return fixture;
}

}  // namespace moce::test
