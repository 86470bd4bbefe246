#include <cmath>

#include "moce/errors.hpp"
#include "moce/ops.hpp"
#include "moce/training.hpp"

namespace moce::training {

LossBreakdown LossTerms::breakdown() const {
    LossBreakdown b;
    if (task.defined()) b.task = task.item();
    for (const auto& c : concepts) b.concepts.push_back(c.item());
    if (balance.defined()) b.balance = balance.item();
    b.total = total.item();
    return b;
}

LossTerms joint_loss(const model::ForwardOutput& out, const model::ModelConfig& config,
                     const std::vector<std::vector<std::size_t>>& concepts,
                     const std::vector<double>& labels, double gamma, Tape* tape) {
    const std::size_t n = out.trace.examples.size();
    if (!labels.empty() && labels.size() != n) {
        throw ContractError("joint_loss: " + std::to_string(labels.size()) + " labels for a batch of " +
                            std::to_string(n));
    }
    if (!concepts.empty() && concepts.size() != n) {
        throw ContractError("joint_loss: " + std::to_string(concepts.size()) +
                            " concept label rows for a batch of " + std::to_string(n));
    }
    if (labels.empty() && concepts.empty()) throw ContractError("joint_loss: nothing to supervise");

    LossTerms terms;
    if (!labels.empty()) {
        if (config.task_kind == model::TaskKind::Classification) {
            std::vector<std::size_t> targets(n);
            for (std::size_t i = 0; i < n; ++i) targets[i] = static_cast<std::size_t>(labels[i]);
            terms.task = num::cross_entropy(out.task_logits, targets, tape);
        } else {
            terms.task = num::rmse(out.task_logits, labels, tape);
        }
        terms.total = terms.task;
    }
    if (!concepts.empty()) {
        Tensor concept_sum;
        for (std::size_t k = 0; k < config.num_concepts(); ++k) {
            std::vector<std::size_t> targets(n);
            for (std::size_t i = 0; i < n; ++i) {
                if (concepts[i].size() != config.num_concepts()) {
                    throw ContractError("joint_loss: concept label row has wrong length");
                }
                targets[i] = concepts[i][k];
            }
            const std::size_t begin = config.concept_offset(k);
            const Tensor logits =
                num::slice_cols(out.concept_logits, begin, begin + config.concept_arities[k], tape);
            terms.concepts.push_back(num::cross_entropy(logits, targets, tape));
            concept_sum = concept_sum.defined() ? num::add(concept_sum, terms.concepts.back(), tape)
                                                : terms.concepts.back();
        }
        const Tensor weighted = num::scale(concept_sum, gamma, tape);
        terms.total = terms.total.defined() ? num::add(terms.total, weighted, tape) : weighted;
    }
    return terms;
}

Tensor balance_loss(const std::vector<std::vector<Tensor>>& router_probs, Tape* tape) {
    Tensor total;
    for (const auto& layer : router_probs) {
        for (const auto& probs : layer) {
            // CV^2 is scale invariant, so the batch mean stands in for the batch sum.
            const Tensor term = num::cv_squared(num::mean_rows(probs, tape), tape);
            total = total.defined() ? num::add(total, term, tape) : term;
        }
    }
    if (!total.defined()) throw ContractError("balance_loss: no routed layers");
    return total;
}

std::size_t pseudo_intervention_budget(std::size_t epoch, std::size_t max_epochs, std::size_t t,
                                       std::size_t t_prime) {
    if (epoch < 1 || epoch > max_epochs) {
        throw ContractError("pseudo_intervention_budget: epoch " + std::to_string(epoch) + " outside [1, " +
                            std::to_string(max_epochs) + "]");
    }
    const std::size_t half = max_epochs / 2;
    if (epoch <= half || t_prime <= t) return t;
    // Integer round-half-up of T + (T'-T)(e-half)/(E-half).
    const std::size_t num = (t_prime - t) * (epoch - half);
    const std::size_t den = max_epochs - half;
    return t + (2 * num + den) / (2 * den);
}

}  // namespace moce::training
