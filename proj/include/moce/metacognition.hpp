#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moce/data.hpp"
#include "moce/model.hpp"
#include "moce/training.hpp"

namespace moce::metacog {

/// Scrutinised quantity. Entropy is the default; MaxProbability uses
/// 1 - max softmax so that larger still means less confident.
enum class Statistic { Entropy, MaxProbability };
enum class InterventionMode { Null, Metacognitive, Oracle, Max };

std::string to_string(Statistic s);
Statistic statistic_from_string(const std::string& text);
std::string to_string(InterventionMode m);
InterventionMode mode_from_string(const std::string& text);

/// Shannon entropy (nats) of softmax(logits); needs at least two logits.
double shannon_entropy(std::span<const double> logits);
double uncertainty(std::span<const double> logits, Statistic statistic);

// ---------------------------------------------------------------------------
// Threshold fitting
// ---------------------------------------------------------------------------

struct ClusterFit {
    double threshold = 0.0;
    double low_centroid = 0.0;
    double high_centroid = 0.0;  // the "suspect" cluster
    std::size_t iterations = 0;
    double inertia = 0.0;  // within-cluster sum of squares
};

/// 1-D two-means: centroids start at min and max, Lloyd iterations until the
/// assignment is a fixpoint (at most 100); threshold is the centroid
/// midpoint. A sorted-split scan then moves a local fixpoint to the optimal
/// one. Throws DegenerateFitError when all values are equal.
ClusterFit two_means(std::span<const double> values);

struct ConceptThresholds {
    std::optional<ClusterFit> routing;  // absent: degenerate fit, no flagging
    std::optional<ClusterFit> concept_fit;
};

struct Thresholds {
    Statistic statistic = Statistic::Entropy;
    std::vector<ConceptThresholds> concepts;

    std::string to_json() const;
    static Thresholds from_json(const std::string& text);
};

/// Per-concept routing (final MoCE layer, pre-mask softmax over M) and
/// concept-prediction uncertainty of one example.
struct EntropyRecord {
    std::size_t example_id = 0;
    std::vector<double> routing;
    std::vector<double> concept_values;
};

EntropyRecord entropy_record(std::size_t example_id, const model::ExampleTrace& trace,
                             const model::ModelConfig& config, Statistic statistic);
std::vector<EntropyRecord> entropy_records(const std::vector<data::Example>& examples,
                                           const model::ForwardTrace& trace, const model::ModelConfig& config,
                                           Statistic statistic);

/// Fits one routing and one concept threshold per concept.
Thresholds fit_thresholds(const std::vector<EntropyRecord>& records, std::size_t num_concepts,
                          Statistic statistic);

// ---------------------------------------------------------------------------
// Flagging
// ---------------------------------------------------------------------------

/// Flagged iff both quantities exceed their thresholds.
bool flag_rule(double routing, double concept_value, const ConceptThresholds& thresholds);

struct ScrutinyReport {
    std::vector<EntropyRecord> records;
    Thresholds thresholds;
    std::vector<std::vector<bool>> flags;  // [example][concept]
    std::size_t flagged = 0;

    /// One row per (example, concept).
    std::string to_csv(const data::ConceptSchema& schema) const;
};

ScrutinyReport flag(const std::vector<EntropyRecord>& records, const Thresholds& thresholds);

/// Raw values for external plotting: example_id,concept,quantity,value.
std::string entropy_values_csv(const std::vector<EntropyRecord>& records, const data::ConceptSchema& schema);

// ---------------------------------------------------------------------------
// Intervention
// ---------------------------------------------------------------------------

struct InterventionPolicy {
    InterventionMode mode = InterventionMode::Metacognitive;
    std::size_t t = 2;
    std::size_t t_prime = 4;
    model::BudgetScope scope = model::BudgetScope::AllLayers;

    void validate(const model::ModelConfig& config) const;
};

struct InterventionResult {
    std::vector<model::ExampleTrace> pre;
    std::vector<model::ExampleTrace> post;
    std::vector<std::vector<bool>> reallocated;  // [example][concept]
    std::size_t rerun_examples = 0;
};

/// Re-runs flagged concepts with budget T' and merges: reallocated concepts
/// take the re-run prediction, the rest keep their original one, and the task
/// head is re-applied to the merged probabilities. Max mode re-runs every
/// concept of every example at budget M. Parameters are never written.
InterventionResult intervene(const model::MoceModel& model, const std::vector<data::Example>& examples,
                             const std::vector<model::ExampleTrace>& pre,
                             const std::vector<std::vector<bool>>& flags, const InterventionPolicy& policy);

/// True concept-error indicators of `pre`; needs concept labels.
std::vector<std::vector<bool>> oracle_flags(const std::vector<data::Example>& examples,
                                            const std::vector<model::ExampleTrace>& pre,
                                            const model::ModelConfig& config);

struct ModeEvaluation {
    training::Metrics pre;
    training::Metrics post;
    ScrutinyReport scrutiny;
    InterventionResult intervention;
};

/// Full scrutiny + intervention pass over a split at base budget T.
ModeEvaluation evaluate_mode(const model::MoceModel& model, const std::vector<data::Example>& examples,
                             const Thresholds& thresholds, const InterventionPolicy& policy);

/// Thresholds fitted on a split (normally dev) at base budget T.
Thresholds fit_on_split(const model::MoceModel& model, const std::vector<data::Example>& examples,
                        Statistic statistic);

}  // namespace moce::metacog
