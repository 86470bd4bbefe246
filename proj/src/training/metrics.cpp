#include <algorithm>
#include <cmath>

#include "moce/errors.hpp"
#include "moce/training.hpp"

namespace moce::training {

double macro_f1(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                std::size_t num_classes) {
    if (truth.size() != predicted.size()) throw ContractError("macro_f1: length mismatch");
    if (truth.empty()) throw ContractError("macro_f1: empty input");
    std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= num_classes || predicted[i] >= num_classes) {
            throw IndexError("macro_f1: class index out of range");
        }
        if (truth[i] == predicted[i]) {
            ++tp[truth[i]];
        } else {
            ++fp[predicted[i]];
            ++fn[truth[i]];
        }
    }
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (tp[c] + fp[c] + fn[c] == 0) continue;
        const double denom = 2.0 * static_cast<double>(tp[c]) + static_cast<double>(fp[c] + fn[c]);
        total += 2.0 * static_cast<double>(tp[c]) / denom;
        ++counted;
    }
    return total / static_cast<double>(counted);
}

double root_mean_squared_error(const std::vector<double>& truth, const std::vector<double>& predicted) {
    if (truth.size() != predicted.size()) throw ContractError("rmse: length mismatch");
    if (truth.empty()) throw ContractError("rmse: empty input");
    double sq = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) sq += (truth[i] - predicted[i]) * (truth[i] - predicted[i]);
    return std::sqrt(sq / static_cast<double>(truth.size()));
}

double Metrics::task_metric() const {
    if (task_f1) return *task_f1;
    if (task_rmse) return *task_rmse;
    throw ContractError("metrics: no task labels were evaluated");
}

double task_prediction(const model::ExampleTrace& trace, const model::ModelConfig& config) {
    if (config.task_kind == model::TaskKind::Regression) return trace.task_logits.at(0);
    const auto it = std::max_element(trace.task_logits.begin(), trace.task_logits.end());
    return static_cast<double>(it - trace.task_logits.begin());
}

Metrics compute_metrics(const std::vector<model::ExampleTrace>& traces,
                        const std::vector<data::Example>& examples, const model::ModelConfig& config) {
    if (traces.size() != examples.size()) throw ContractError("compute_metrics: trace/example count mismatch");
    if (examples.empty()) throw ContractError("compute_metrics: empty split");
    Metrics m;
    m.count = examples.size();

    const bool has_concepts = std::all_of(examples.begin(), examples.end(),
                                          [](const data::Example& e) { return e.concepts.has_value(); });
    if (has_concepts) {
        for (std::size_t k = 0; k < config.num_concepts(); ++k) {
            std::vector<std::size_t> truth, pred;
            for (std::size_t i = 0; i < examples.size(); ++i) {
                truth.push_back((*examples[i].concepts)[k]);
                pred.push_back(model::predicted_concepts(traces[i].concept_probs, config.concept_arities)[k]);
            }
            m.concept_f1.push_back(macro_f1(truth, pred, config.concept_arities[k]));
        }
        double s = 0.0;
        for (double f : m.concept_f1) s += f;
        m.concept_f1_mean = s / static_cast<double>(m.concept_f1.size());
    }

    const bool has_labels = std::all_of(examples.begin(), examples.end(),
                                        [](const data::Example& e) { return e.label.has_value(); });
    if (has_labels) {
        std::vector<double> truth, pred;
        for (std::size_t i = 0; i < examples.size(); ++i) {
            truth.push_back(*examples[i].label);
            pred.push_back(task_prediction(traces[i], config));
        }
        if (config.task_kind == model::TaskKind::Classification) {
            std::vector<std::size_t> t(truth.begin(), truth.end()), p(pred.begin(), pred.end());
            m.task_f1 = macro_f1(t, p, config.num_classes);
        } else {
            m.task_rmse = root_mean_squared_error(truth, pred);
        }
    }
    return m;
}

model::ForwardTrace predict(const MoceModel& model, const std::vector<data::Example>& examples,
                            const std::vector<model::Budgets>& budgets, std::size_t batch_size) {
    if (budgets.size() != examples.size()) throw ContractError("predict: budget/example count mismatch");
    model::ForwardTrace trace;
    trace.examples.reserve(examples.size());
    for (std::size_t begin = 0; begin < examples.size(); begin += batch_size) {
        const std::size_t end = std::min(examples.size(), begin + batch_size);
        std::vector<model::TokenSeq> batch;
        for (std::size_t i = begin; i < end; ++i) batch.push_back(examples[i].tokens);
        const std::span<const model::Budgets> b(budgets.data() + begin, end - begin);
        auto out = model.forward(batch, b);
        for (auto& ex : out.trace.examples) trace.examples.push_back(std::move(ex));
    }
    return trace;
}

model::ForwardTrace predict(const MoceModel& model, const std::vector<data::Example>& examples,
                            const model::Budgets& budgets, std::size_t batch_size) {
    return predict(model, examples, std::vector<model::Budgets>(examples.size(), budgets), batch_size);
}

Metrics evaluate(const MoceModel& model, const std::vector<data::Example>& examples) {
    const auto trace = predict(model, examples, model.uniform_budgets(model.config().experts_active));
    return compute_metrics(trace.examples, examples, model.config());
}

}  // namespace moce::training
