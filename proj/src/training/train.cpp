#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "json.hpp"
#include "moce/errors.hpp"
#include "moce/ops.hpp"
#include "moce/training.hpp"

namespace moce::training {

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Vanilla: return "vanilla";
        case Strategy::Independent: return "independent";
        case Strategy::Sequential: return "sequential";
        case Strategy::Joint: return "joint";
    }
    return "joint";
}

Strategy strategy_from_string(const std::string& text) {
    if (text == "vanilla") return Strategy::Vanilla;
    if (text == "independent") return Strategy::Independent;
    if (text == "sequential") return Strategy::Sequential;
    if (text == "joint") return Strategy::Joint;
    throw ConfigError("unknown strategy '" + text + "' (expected vanilla, independent, sequential or joint)");
}

std::string to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::Rms: return "rms";
        case OptimizerKind::Adam: return "adam";
        case OptimizerKind::Sgd: return "sgd";
    }
    return "rms";
}

OptimizerKind optimizer_from_string(const std::string& text) {
    if (text == "rms") return OptimizerKind::Rms;
    if (text == "adam") return OptimizerKind::Adam;
    if (text == "sgd") return OptimizerKind::Sgd;
    throw ConfigError("unknown optimizer '" + text + "' (expected rms, adam or sgd)");
}

void TrainConfig::validate() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be >= 0");
    if (!(balance_coefficient >= 0.0) || !std::isfinite(balance_coefficient)) {
        throw ConfigError("balance_coefficient must be >= 0");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (!(rms_decay >= 0.0 && rms_decay < 1.0)) throw ConfigError("rms_decay must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (strategy == Strategy::Sequential && max_epochs < 2) {
        throw ConfigError("sequential strategy needs max_epochs >= 2");
    }
}

std::vector<std::vector<double>> snapshot(const MoceModel& model) {
    std::vector<std::vector<double>> out;
    for (const auto& p : model.parameters()) out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
    return out;
}

void restore(const MoceModel& model, const std::vector<std::vector<double>>& values) {
    const auto params = model.parameters();
    if (params.size() != values.size()) throw ContractError("restore: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto dst = params[i].tensor.mutable_values();
        if (dst.size() != values[i].size()) throw ContractError("restore: parameter size mismatch");
        std::copy(values[i].begin(), values[i].end(), dst.begin());
    }
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

enum class Phase { All, Concepts, Head };

struct DevResult {
    double loss = 0.0;
    Metrics metrics;
};

void check_compatible(const MoceModel& model, const data::DatasetSplit& data) {
    const auto& mc = model.config();
    if (data.schema.arities() != mc.concept_arities) {
        throw ContractError("train: dataset concept arities do not match the model");
    }
    if (data.schema.task.kind != mc.task_kind) throw ContractError("train: dataset task kind does not match the model");
    if (mc.task_kind == model::TaskKind::Classification && data.schema.num_classes() != mc.num_classes) {
        throw ContractError("train: dataset class count does not match the model");
    }
}

std::vector<Tensor> tensors(const std::vector<model::NamedTensor>& named) {
    std::vector<Tensor> out;
    for (const auto& n : named) out.push_back(n.tensor);
    return out;
}

Tensor one_hot_concepts(const std::vector<std::vector<std::size_t>>& concepts, const model::ModelConfig& mc) {
    const std::size_t width = mc.concept_width();
    std::vector<double> v(concepts.size() * width, 0.0);
    for (std::size_t i = 0; i < concepts.size(); ++i) {
        for (std::size_t k = 0; k < mc.num_concepts(); ++k) v[i * width + mc.concept_offset(k) + concepts[i][k]] = 1.0;
    }
    return Tensor::matrix(concepts.size(), width, std::move(v));
}

DevResult dev_pass(const MoceModel& model, const std::vector<data::Example>& dev, double gamma) {
    const auto& mc = model.config();
    const model::Budgets base = model.uniform_budgets(mc.experts_active);
    DevResult r;
    std::vector<model::ExampleTrace> traces;
    traces.reserve(dev.size());
    double loss_sum = 0.0;
    const std::size_t chunk = 64;
    for (std::size_t begin = 0; begin < dev.size(); begin += chunk) {
        const std::size_t end = std::min(dev.size(), begin + chunk);
        std::vector<model::TokenSeq> batch;
        std::vector<std::vector<std::size_t>> concepts;
        std::vector<double> labels;
        for (std::size_t i = begin; i < end; ++i) {
            batch.push_back(dev[i].tokens);
            if (dev[i].concepts) concepts.push_back(*dev[i].concepts);
            if (dev[i].label) labels.push_back(*dev[i].label);
        }
        if (concepts.size() != batch.size()) concepts.clear();
        if (labels.size() != batch.size()) labels.clear();
        auto out = model.forward(batch, base, nullptr, {false, model::BudgetScope::AllLayers, false});
        if (!concepts.empty() || !labels.empty()) {
            loss_sum += joint_loss(out, mc, gamma > 0.0 ? concepts : std::vector<std::vector<std::size_t>>{},
                                   labels, gamma, nullptr)
                            .total.item() *
                        static_cast<double>(batch.size());
        }
        for (auto& ex : out.trace.examples) traces.push_back(std::move(ex));
    }
    r.loss = loss_sum / static_cast<double>(dev.size());
    r.metrics = compute_metrics(traces, dev, mc);
    return r;
}

}  // namespace

TrainReport train(MoceModel& model, const data::DatasetSplit& data, const TrainConfig& config) {
    const auto started = std::chrono::steady_clock::now();
    config.validate();
    check_compatible(model, data);
    const auto& mc = model.config();
    if (data.dev.empty()) throw ContractError("train: empty dev split");

    std::vector<data::Example> train_set = data.train;
    if (config.train_limit > 0 && train_set.size() > config.train_limit) train_set.resize(config.train_limit);
    if (train_set.empty()) throw ContractError("train: empty training split");
    for (const auto& ex : train_set) {
        if (ex.tokens.empty()) throw ContractError("train: examples must be tokenised first");
        if (!ex.label) throw ContractError("train: training example " + std::to_string(ex.id) + " has no label");
        const bool needs_concepts = config.strategy != Strategy::Vanilla &&
                                    (config.gamma > 0.0 || config.strategy != Strategy::Joint);
        if (needs_concepts && !ex.concepts) {
            throw ContractError("train: strategy " + to_string(config.strategy) +
                                " needs concept labels; example " + std::to_string(ex.id) + " has none");
        }
    }

    const bool concept_supervision = config.strategy != Strategy::Vanilla &&
                                     (config.gamma > 0.0 || config.strategy != Strategy::Joint);
    // Concept-only phases need a positive weight even when gamma is 0.
    const double concept_weight =
        config.strategy == Strategy::Joint ? config.gamma : (config.gamma > 0.0 ? config.gamma : 1.0);
    const bool classification = mc.task_kind == model::TaskKind::Classification;

    TrainReport report;
    report.selection_metric = classification ? "dev_task_f1" : "dev_task_rmse";
    report.higher_is_better = classification;
    report.head_input_source = config.strategy == Strategy::Independent  ? "ground_truth_concepts"
                               : config.strategy == Strategy::Sequential ? "detached_concept_probs"
                                                                         : "concept_probs";

    const std::size_t concept_epochs =
        config.strategy == Strategy::Sequential ? (config.max_epochs + 1) / 2 : 0;
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    const auto all_params = tensors(model.parameters());
    std::optional<Optimizer> optimizer;
    Phase current = Phase::All;

    auto better = [](double a, double b, bool higher) { return higher ? a > b : a < b; };
    bool has_best = false;
    double best = 0.0;
    std::vector<std::vector<double>> best_values;
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Phase phase = Phase::All;
        if (config.strategy == Strategy::Sequential) phase = epoch <= concept_epochs ? Phase::Concepts : Phase::Head;
        if (!optimizer || phase != current) {
            if (phase == Phase::Head && current == Phase::Concepts) {
                // Leave the concept phase at its best epoch, then select afresh.
                if (!best_values.empty()) restore(model, best_values);
                has_best = false;
                best_values.clear();
                since_best = 0;
            }
            optimizer.emplace(config.optimizer, config.learning_rate, config.rms_decay, config.epsilon);
            current = phase;
        }
        if (phase == Phase::Concepts && since_best >= config.patience) continue;  // concept phase stopped early
        const std::vector<Tensor> params = phase == Phase::Concepts ? tensors(model.encoder_parameters())
                                           : phase == Phase::Head   ? tensors(model.head_parameters())
                                                                    : all_params;

        const std::size_t budget =
            config.pseudo_intervention
                ? pseudo_intervention_budget(epoch, config.max_epochs, mc.experts_active, mc.experts_intervention)
                : mc.experts_active;
        const model::Budgets budgets = model.uniform_budgets(budget);
        model::ForwardOptions options{false, model::BudgetScope::AllLayers, phase == Phase::Head};

        std::shuffle(order.begin(), order.end(), rng);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.phase = phase == Phase::Concepts ? "concepts" : phase == Phase::Head ? "head" : to_string(config.strategy);
        rec.budget = budget;
        double seen = 0.0;
        for (std::size_t begin = 0, batch_index = 0; begin < order.size(); begin += config.batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            std::vector<model::TokenSeq> batch;
            std::vector<std::vector<std::size_t>> concepts;
            std::vector<double> labels;
            for (std::size_t i = begin; i < end; ++i) {
                const auto& ex = train_set[order[i]];
                batch.push_back(ex.tokens);
                if (ex.concepts) concepts.push_back(*ex.concepts);
                labels.push_back(*ex.label);
            }

            for (const auto& p : all_params) p.zero_grad();
            Tape tape;
            const auto out = model.forward(batch, budgets, &tape, options);
            LossTerms terms;
            Tensor head_term;
            switch (phase) {
                case Phase::Concepts:
                    terms = joint_loss(out, mc, concepts, {}, concept_weight, &tape);
                    break;
                case Phase::Head:
                    terms = joint_loss(out, mc, {}, labels, 0.0, &tape);
                    break;
                case Phase::All:
                    if (config.strategy == Strategy::Independent) {
                        terms = joint_loss(out, mc, concepts, {}, concept_weight, &tape);
                        const Tensor logits = model.task_head(one_hot_concepts(concepts, mc), &tape);
                        if (classification) {
                            std::vector<std::size_t> targets(labels.begin(), labels.end());
                            head_term = num::cross_entropy(logits, targets, &tape);
                        } else {
                            head_term = num::rmse(logits, labels, &tape);
                        }
                        terms.task = head_term;
                        terms.total = num::add(terms.total, head_term, &tape);
                    } else {
                        terms = joint_loss(out, mc, concept_supervision ? concepts : std::vector<std::vector<std::size_t>>{},
                                           labels, concept_weight, &tape);
                    }
                    break;
            }
            if (phase != Phase::Head && config.balance_coefficient > 0.0) {
                terms.balance = balance_loss(out.router_probs, &tape);
                terms.total = num::add(terms.total, num::scale(terms.balance, config.balance_coefficient, &tape), &tape);
            }
            const double loss = terms.total.item();
            if (!std::isfinite(loss)) {
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batch_index + 1));
            }
            tape.backward(terms.total);
            optimizer->step(params);

            const auto b = terms.breakdown();
            const double w = static_cast<double>(batch.size());
            seen += w;
            rec.train_loss += b.total * w;
            rec.train_task += b.task * w;
            double csum = 0.0;
            for (double c : b.concepts) csum += c;
            rec.train_concepts += csum * w;
            rec.train_balance += b.balance * w;
        }
        rec.train_loss /= seen;
        rec.train_task /= seen;
        rec.train_concepts /= seen;
        rec.train_balance /= seen;

        const DevResult dev = dev_pass(model, data.dev, concept_supervision ? concept_weight : 0.0);
        rec.dev_loss = dev.loss;
        rec.dev_concept_f1 = dev.metrics.concept_f1_mean;
        rec.dev_task_metric = dev.metrics.task_metric();
        report.epochs.push_back(rec);

        const bool concept_phase = phase == Phase::Concepts;
        const double score = concept_phase ? rec.dev_concept_f1 : rec.dev_task_metric;
        const bool higher = concept_phase || classification;
        if (!has_best || better(score, best, higher)) {
            has_best = true;
            best = score;
            best_values = snapshot(model);
            if (!concept_phase) report.selected_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
        }
        if (!concept_phase && since_best >= config.patience) break;
    }
    if (!best_values.empty()) restore(model, best_values);
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

std::string TrainReport::to_csv() const {
    std::string out =
        "epoch,phase,budget,train_loss,train_task,train_concepts,train_balance,dev_loss,dev_concept_f1,"
        "dev_task_metric\n";
    for (const auto& e : epochs) {
        out += std::to_string(e.epoch) + ',' + e.phase + ',' + std::to_string(e.budget) + ',' + fmt(e.train_loss) +
               ',' + fmt(e.train_task) + ',' + fmt(e.train_concepts) + ',' + fmt(e.train_balance) + ',' +
               fmt(e.dev_loss) + ',' + fmt(e.dev_concept_f1) + ',' + fmt(e.dev_task_metric) + '\n';
    }
    return out;
}

std::string TrainReport::summary_json() const {
    nlohmann::json j;
    j["epochs_run"] = epochs.size();
    j["selected_epoch"] = selected_epoch;
    j["selection_metric"] = selection_metric;
    j["higher_is_better"] = higher_is_better;
    j["head_input_source"] = head_input_source;
    j["wall_clock_seconds"] = wall_clock_seconds;
    for (const auto& e : epochs) {
        if (e.epoch == selected_epoch) {
            j["selected_dev_task_metric"] = e.dev_task_metric;
            j["selected_dev_concept_f1"] = e.dev_concept_f1;
        }
    }
    return j.dump(2);
}

}  // namespace moce::training
