#include <algorithm>

#include "moce/errors.hpp"
#include "moce/metacognition.hpp"

namespace moce::metacog {

void InterventionPolicy::validate(const model::ModelConfig& config) const {
    if (t < 1 || t > config.num_experts) throw ConfigError("intervention: T outside [1, M]");
    if (mode == InterventionMode::Null) return;
    if (mode != InterventionMode::Max && !(t_prime > t && t_prime <= config.num_experts)) {
        throw ConfigError("intervention: T' must satisfy T < T' <= M");
    }
}

std::vector<std::vector<bool>> oracle_flags(const std::vector<data::Example>& examples,
                                            const std::vector<model::ExampleTrace>& pre,
                                            const model::ModelConfig& config) {
    if (examples.size() != pre.size()) throw ContractError("oracle_flags: count mismatch");
    std::vector<std::vector<bool>> flags;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (!examples[i].concepts) {
            throw ContractError("oracle intervention needs concept labels; example " +
                                std::to_string(examples[i].id) + " has none");
        }
        const auto predicted = model::predicted_concepts(pre[i].concept_probs, config.concept_arities);
        std::vector<bool> row;
        for (std::size_t k = 0; k < predicted.size(); ++k) row.push_back(predicted[k] != (*examples[i].concepts)[k]);
        flags.push_back(std::move(row));
    }
    return flags;
}

InterventionResult intervene(const model::MoceModel& model, const std::vector<data::Example>& examples,
                             const std::vector<model::ExampleTrace>& pre,
                             const std::vector<std::vector<bool>>& flags, const InterventionPolicy& policy) {
    const auto& config = model.config();
    policy.validate(config);
    if (examples.size() != pre.size()) throw ContractError("intervene: example/trace count mismatch");
    const std::size_t n = examples.size(), concepts = config.num_concepts();

    InterventionResult result;
    result.pre = pre;
    result.post = pre;
    result.reallocated.assign(n, std::vector<bool>(concepts, false));
    if (policy.mode == InterventionMode::Null) return result;

    std::vector<std::vector<bool>> chosen;
    if (policy.mode == InterventionMode::Max) {
        chosen.assign(n, std::vector<bool>(concepts, true));
    } else if (policy.mode == InterventionMode::Oracle) {
        chosen = oracle_flags(examples, pre, config);
    } else {
        if (flags.size() != n) throw ContractError("intervene: flag/example count mismatch");
        chosen = flags;
    }

    std::vector<std::size_t> rerun;
    std::vector<model::Budgets> budgets;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::none_of(chosen[i].begin(), chosen[i].end(), [](bool b) { return b; })) continue;
        model::Budgets b(concepts);
        for (std::size_t k = 0; k < concepts; ++k) {
            b[k] = policy.mode == InterventionMode::Max ? config.num_experts : (chosen[i][k] ? policy.t_prime : policy.t);
        }
        rerun.push_back(i);
        budgets.push_back(std::move(b));
    }
    result.reallocated = chosen;
    result.rerun_examples = rerun.size();

    const model::ForwardOptions options{true, policy.scope, false};
    const std::size_t chunk = 64;
    for (std::size_t begin = 0; begin < rerun.size(); begin += chunk) {
        const std::size_t end = std::min(rerun.size(), begin + chunk);
        std::vector<model::TokenSeq> batch;
        for (std::size_t j = begin; j < end; ++j) batch.push_back(examples[rerun[j]].tokens);
        auto out = model.forward(batch, std::span<const model::Budgets>(budgets.data() + begin, end - begin), nullptr,
                                 options);
        for (std::size_t j = begin; j < end; ++j) {
            const std::size_t i = rerun[j];
            model::ExampleTrace post = std::move(out.trace.examples[j - begin]);
            if (policy.mode != InterventionMode::Max) {
                // Concepts that were not reallocated keep their original prediction.
                for (std::size_t k = 0; k < concepts; ++k) {
                    if (chosen[i][k]) continue;
                    const std::size_t off = config.concept_offset(k), len = config.concept_arities[k];
                    std::copy_n(pre[i].concept_logits.begin() + static_cast<std::ptrdiff_t>(off), len,
                                post.concept_logits.begin() + static_cast<std::ptrdiff_t>(off));
                    std::copy_n(pre[i].concept_probs.begin() + static_cast<std::ptrdiff_t>(off), len,
                                post.concept_probs.begin() + static_cast<std::ptrdiff_t>(off));
                }
                post.task_logits = model.task_predict(post.concept_probs);
            }
            result.post[i] = std::move(post);
        }
    }
    return result;
}

ModeEvaluation evaluate_mode(const model::MoceModel& model, const std::vector<data::Example>& examples,
                             const Thresholds& thresholds, const InterventionPolicy& policy) {
    const auto& config = model.config();
    policy.validate(config);
    const auto pre = training::predict(model, examples, model.uniform_budgets(policy.t));
    ModeEvaluation ev;
    ev.scrutiny = flag(entropy_records(examples, pre, config, thresholds.statistic), thresholds);
    ev.intervention = intervene(model, examples, pre.examples, ev.scrutiny.flags, policy);
    ev.pre = training::compute_metrics(ev.intervention.pre, examples, config);
    ev.post = training::compute_metrics(ev.intervention.post, examples, config);
    return ev;
}

Thresholds fit_on_split(const model::MoceModel& model, const std::vector<data::Example>& examples,
                        Statistic statistic) {
    const auto& config = model.config();
    const auto trace = training::predict(model, examples, model.uniform_budgets(config.experts_active));
    return fit_thresholds(entropy_records(examples, trace, config, statistic), config.num_concepts(), statistic);
}

}  // namespace moce::metacog
