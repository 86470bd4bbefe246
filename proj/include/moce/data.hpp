#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "moce/model.hpp"

namespace moce::data {

// ---------------------------------------------------------------------------
// Schema and examples
// ---------------------------------------------------------------------------

struct ConceptSpec {
    std::string name;
    std::vector<std::string> values;  // e.g. negative / positive / unknown
};

struct TaskSpec {
    model::TaskKind kind = model::TaskKind::Classification;
    std::vector<std::string> classes;  // classification only
    double min_value = 0.0;            // regression range
    double max_value = 9.0;
};

struct ConceptSchema {
    std::vector<ConceptSpec> concepts;
    TaskSpec task;

    std::vector<std::size_t> arities() const;
    std::size_t num_concepts() const { return concepts.size(); }
    std::size_t num_classes() const { return task.classes.size(); }
    /// Value index of `value` for concept `k`, or nullopt.
    std::optional<std::size_t> value_index(std::size_t k, const std::string& value) const;

    /// Throws SchemaError on duplicate names or arities below 2.
    void validate() const;

    std::string to_json() const;
    static ConceptSchema from_json(const std::string& text);
    static ConceptSchema load(const std::string& path);
    void save(const std::string& path) const;

    /// Four restaurant-review concepts (food, ambiance, service, noise) with
    /// negative/positive/unknown values and a 5-way rating task.
    static ConceptSchema restaurant_reviews();
    /// Same concepts, task replaced by a [0, 9] score regression.
    static ConceptSchema restaurant_scores();

    bool operator==(const ConceptSchema&) const;
};

struct Example {
    std::size_t id = 0;
    std::string text;
    model::TokenSeq tokens;
    /// One value index per concept; absent when the file carries no concept columns.
    std::optional<std::vector<std::size_t>> concepts;
    /// Class index (classification) or real target; absent for unlabeled rows.
    std::optional<double> label;

    bool operator==(const Example&) const = default;
};

struct DatasetSplit {
    ConceptSchema schema;
    std::vector<Example> train;
    std::vector<Example> dev;
    std::vector<Example> test;
    std::string provenance;

    /// Disjoint ids across splits and labels within schema bounds.
    void validate() const;
};

// ---------------------------------------------------------------------------
// CSV files
// ---------------------------------------------------------------------------

/// Parses one CSV file. Header: `text,concept:<name>...,label`. Either all
/// concept columns are present or none; the label column is optional.
/// Ids are assigned from `first_id` upward in row order.
std::vector<Example> read_examples(const std::string& path, const ConceptSchema& schema,
                                   std::size_t first_id = 0);
std::vector<Example> parse_examples(const std::string& csv_text, const ConceptSchema& schema,
                                    std::size_t first_id = 0, const std::string& source = "<memory>");

/// Canonical CSV rendering (LF line ends, quoting only where needed).
std::string format_examples(const std::vector<Example>& examples, const ConceptSchema& schema);
void write_examples(const std::string& path, const std::vector<Example>& examples,
                    const ConceptSchema& schema);

/// Reads `train.csv`, `dev.csv`, `test.csv` from `dir` (tokens left empty).
DatasetSplit load_dataset(const std::string& dir, const ConceptSchema& schema);
void save_dataset(const std::string& dir, const DatasetSplit& split);

// ---------------------------------------------------------------------------
// Tokenisation
// ---------------------------------------------------------------------------

/// Lowercased word tokens; each punctuation character is its own token.
std::vector<std::string> split_words(const std::string& text);

class Vocabulary {
public:
    static constexpr std::size_t kUnk = 0;
    static constexpr const char* kUnkToken = "<unk>";

    Vocabulary();
    /// Sorted word list of the given examples' texts, plus `<unk>` at index 0.
    static Vocabulary build(const std::vector<Example>& examples);
    static Vocabulary from_words(std::vector<std::string> words);

    std::size_t size() const { return words_.size(); }
    std::size_t index(const std::string& word) const;
    const std::string& word(std::size_t index) const { return words_.at(index); }
    const std::vector<std::string>& words() const { return words_; }

private:
    std::vector<std::string> words_;
};

/// Token indices of `text`, truncated to `max_len`; never empty.
model::TokenSeq tokenize(const std::string& text, const Vocabulary& vocab, std::size_t max_len);

/// Fills `tokens` on every example of every split.
void assign_tokens(DatasetSplit& split, const Vocabulary& vocab, std::size_t max_len);

/// Fraction of non-UNK tokens over the given examples.
double vocabulary_coverage(const std::vector<Example>& examples, const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

struct SyntheticOptions {
    std::size_t train_size = 1755;
    std::size_t dev_size = 1673;
    std::size_t test_size = 1685;
    double noise_rate = 0.0;
    std::uint64_t seed = 0;
};

/// Deterministic concept -> task map: score = sum_k weights[k][value_k],
/// binned evenly into classes or mapped linearly onto the regression range.
struct LabelFunction {
    std::vector<std::vector<double>> weights;  // [concept][value]
    double score_min = 0.0;
    double score_max = 0.0;

    double score(const std::vector<std::size_t>& concepts) const;
    double label(const std::vector<std::size_t>& concepts, const TaskSpec& task) const;

    static LabelFunction for_schema(const ConceptSchema& schema);
};

/// Phrases that express each (concept, value) pair; an empty phrase means
/// the concept is simply not mentioned.
class PhraseBank {
public:
    static PhraseBank for_schema(const ConceptSchema& schema);

    const std::vector<std::string>& phrases(std::size_t concept_index, std::size_t value) const {
        return bank_.at(concept_index).at(value);
    }
    /// Non-empty bank phrases of concept `k` found in `text` (whole words,
    /// longest matches only), in order of appearance.
    std::vector<std::string> matches(std::size_t concept_index, const std::string& text) const;

private:
    std::vector<std::vector<std::vector<std::string>>> bank_;
};

struct SyntheticDataset {
    DatasetSplit split;
    LabelFunction label_function;
    /// JSON manifest: seed, noise rate, sizes, label-function weights.
    std::string manifest;
};

SyntheticDataset generate_synthetic(const ConceptSchema& schema, const SyntheticOptions& options);

}  // namespace moce::data
