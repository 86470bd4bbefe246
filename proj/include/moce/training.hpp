#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "moce/data.hpp"
#include "moce/model.hpp"

namespace moce::training {

using model::MoceModel;
using num::Tape;
using num::Tensor;

enum class Strategy { Vanilla, Independent, Sequential, Joint };
enum class OptimizerKind { Rms, Adam, Sgd };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& text);
std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& text);

struct TrainConfig {
    Strategy strategy = Strategy::Joint;
    double gamma = 5.0;                 // concept-loss weight
    double balance_coefficient = 0.01;  // lambda_b
    double learning_rate = 3e-3;
    std::size_t batch_size = 8;
    std::size_t max_epochs = 30;
    std::size_t patience = 5;
    bool pseudo_intervention = true;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::Rms;
    double rms_decay = 0.999;
    double epsilon = 1e-8;
    /// Use only the first n training examples (0 = all).
    std::size_t train_limit = 0;

    void validate() const;
};

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

struct LossBreakdown {
    double task = 0.0;
    std::vector<double> concepts;  // one cross-entropy per concept
    double balance = 0.0;
    double total = 0.0;
};

struct LossTerms {
    Tensor task;
    std::vector<Tensor> concepts;
    Tensor balance;  // undefined unless added
    Tensor total;

    LossBreakdown breakdown() const;
};

/// Task CE (or RMSE for regression) + gamma * sum_k CE(concept k). Concept
/// terms are skipped when `concepts` is empty; the task term when `labels` is.
LossTerms joint_loss(const model::ForwardOutput& out, const model::ModelConfig& config,
                     const std::vector<std::vector<std::size_t>>& concepts,
                     const std::vector<double>& labels, double gamma, Tape* tape);

/// Sum over layers and concepts of CV^2 of per-expert importance, where
/// importance is the batch sum of the pre-mask router softmax.
Tensor balance_loss(const std::vector<std::vector<Tensor>>& router_probs, Tape* tape);

/// Budget used at training epoch `epoch` (1-based) when pseudo intervention
/// is on: T through the halfway mark, then a linear ramp to T' at epoch E.
std::size_t pseudo_intervention_budget(std::size_t epoch, std::size_t max_epochs, std::size_t t,
                                       std::size_t t_prime);

// ---------------------------------------------------------------------------
// Optimisers
// ---------------------------------------------------------------------------

class Optimizer {
public:
    Optimizer(OptimizerKind kind, double learning_rate, double decay, double epsilon);
    /// Applies one update from the accumulated gradients.
    void step(const std::vector<Tensor>& params);

private:
    OptimizerKind kind_;
    double lr_, decay_, eps_;
    std::size_t steps_ = 0;
    std::vector<std::vector<double>> first_, second_;
};

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Unweighted mean of per-class F1. F1 is 0 when precision + recall = 0;
/// classes absent from both truth and prediction are skipped.
double macro_f1(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                std::size_t num_classes);
double root_mean_squared_error(const std::vector<double>& truth, const std::vector<double>& predicted);

struct Metrics {
    std::vector<double> concept_f1;  // per concept; empty without concept labels
    double concept_f1_mean = 0.0;
    std::optional<double> task_f1;
    std::optional<double> task_rmse;
    std::size_t count = 0;

    /// Task F1 for classification, RMSE for regression.
    double task_metric() const;
};

/// Task class index (argmax) or regression output of one trace.
double task_prediction(const model::ExampleTrace& trace, const model::ModelConfig& config);

Metrics compute_metrics(const std::vector<model::ExampleTrace>& traces,
                        const std::vector<data::Example>& examples, const model::ModelConfig& config);

/// Gradient-free inference in batches, one budget vector for all examples.
model::ForwardTrace predict(const MoceModel& model, const std::vector<data::Example>& examples,
                            const model::Budgets& budgets, std::size_t batch_size = 64);
model::ForwardTrace predict(const MoceModel& model, const std::vector<data::Example>& examples,
                            const std::vector<model::Budgets>& budgets, std::size_t batch_size = 64);

/// Null-mode evaluation at the base budget T.
Metrics evaluate(const MoceModel& model, const std::vector<data::Example>& examples);

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochRecord {
    std::size_t epoch = 0;
    std::string phase;  // "joint", "concepts" or "head" (sequential), ...
    std::size_t budget = 0;
    double train_loss = 0.0;
    double train_task = 0.0;
    double train_concepts = 0.0;
    double train_balance = 0.0;
    double dev_loss = 0.0;
    double dev_concept_f1 = 0.0;
    double dev_task_metric = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::size_t selected_epoch = 0;  // 1-based
    std::string selection_metric;    // "dev_task_f1" or "dev_task_rmse"
    bool higher_is_better = true;
    /// Where the task head's training input came from: "concept_probs",
    /// "ground_truth_concepts" or "detached_concept_probs".
    std::string head_input_source;
    double wall_clock_seconds = 0.0;

    /// Deterministic per-epoch table (no timing column).
    std::string to_csv() const;
    std::string summary_json() const;
};

/// Trains `model` in place and leaves it at the best dev epoch. Examples
/// must carry tokens. Throws TrainingError on a non-finite loss.
TrainReport train(MoceModel& model, const data::DatasetSplit& data, const TrainConfig& config);

/// Parameter value snapshot, for restoring the best epoch.
std::vector<std::vector<double>> snapshot(const MoceModel& model);
void restore(const MoceModel& model, const std::vector<std::vector<double>>& values);

}  // namespace moce::training
