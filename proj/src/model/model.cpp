#include "moce/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"
#include "moce/errors.hpp"
#include "moce/ops.hpp"

namespace moce::model {

namespace num = moce::num;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

std::string to_string(TaskKind kind) {
    return kind == TaskKind::Classification ? "classification" : "regression";
}

TaskKind task_kind_from_string(const std::string& text) {
    if (text == "classification") return TaskKind::Classification;
    if (text == "regression") return TaskKind::Regression;
    throw ConfigError("unknown task kind '" + text + "'");
}

std::size_t ModelConfig::concept_width() const {
    return std::accumulate(concept_arities.begin(), concept_arities.end(), std::size_t{0});
}

std::size_t ModelConfig::concept_offset(std::size_t concept_index) const {
    return std::accumulate(concept_arities.begin(),
                           concept_arities.begin() + static_cast<std::ptrdiff_t>(concept_index),
                           std::size_t{0});
}

std::size_t ModelConfig::task_outputs() const {
    return task_kind == TaskKind::Classification ? num_classes : 1;
}

void ModelConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
    if (vocab_size < 2) fail("vocab_size must be >= 2");
    if (max_seq_len < 1) fail("max_seq_len must be >= 1");
    if (embed_dim < 1) fail("embed_dim must be >= 1");
    if (num_heads < 1 || embed_dim % num_heads != 0) fail("num_heads must divide embed_dim");
    if (num_moce_layers < 1) fail("num_moce_layers must be >= 1");
    if (num_experts < 1) fail("num_experts must be >= 1");
    if (!(experts_active >= 1 && experts_active < experts_intervention &&
          experts_intervention <= num_experts)) {
        fail("need 1 <= experts_active < experts_intervention <= num_experts, got T=" +
             std::to_string(experts_active) + " T'=" + std::to_string(experts_intervention) +
             " M=" + std::to_string(num_experts));
    }
    if (concept_arities.empty()) fail("at least one concept is required");
    for (std::size_t a : concept_arities) {
        if (a < 2) fail("every concept arity must be >= 2");
    }
    if (task_kind == TaskKind::Classification && num_classes < 2) fail("num_classes must be >= 2");
    if (router_hidden_dim < 1 || expert_hidden_dim < 1) fail("hidden dims must be >= 1");
}

std::string ModelConfig::to_json() const {
    json j;
    j["vocab_size"] = vocab_size;
    j["max_seq_len"] = max_seq_len;
    j["embed_dim"] = embed_dim;
    j["num_heads"] = num_heads;
    j["num_attention_layers"] = num_attention_layers;
    j["num_moce_layers"] = num_moce_layers;
    j["num_experts"] = num_experts;
    j["experts_active"] = experts_active;
    j["experts_intervention"] = experts_intervention;
    j["concept_arities"] = concept_arities;
    j["task_kind"] = to_string(task_kind);
    j["num_classes"] = num_classes;
    j["router_hidden_dim"] = router_hidden_dim;
    j["expert_hidden_dim"] = expert_hidden_dim;
    j["renormalize_gates"] = renormalize_gates;
    j["concept_pathways"] = concept_pathways;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        ModelConfig c;
        c.vocab_size = j.at("vocab_size").get<std::size_t>();
        c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
        c.embed_dim = j.at("embed_dim").get<std::size_t>();
        c.num_heads = j.at("num_heads").get<std::size_t>();
        c.num_attention_layers = j.at("num_attention_layers").get<std::size_t>();
        c.num_moce_layers = j.at("num_moce_layers").get<std::size_t>();
        c.num_experts = j.at("num_experts").get<std::size_t>();
        c.experts_active = j.at("experts_active").get<std::size_t>();
        c.experts_intervention = j.at("experts_intervention").get<std::size_t>();
        c.concept_arities = j.at("concept_arities").get<std::vector<std::size_t>>();
        c.task_kind = task_kind_from_string(j.at("task_kind").get<std::string>());
        c.num_classes = j.at("num_classes").get<std::size_t>();
        c.router_hidden_dim = j.at("router_hidden_dim").get<std::size_t>();
        c.expert_hidden_dim = j.at("expert_hidden_dim").get<std::size_t>();
        c.renormalize_gates = j.at("renormalize_gates").get<bool>();
        c.concept_pathways = j.value("concept_pathways", true);
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model config json: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Parameter blocks
// ---------------------------------------------------------------------------

Tensor Linear::forward(const Tensor& x, Tape* tape) const {
    return num::add_row(num::matmul(x, weight, tape), bias, tape);
}

Tensor LayerNormParams::forward(const Tensor& x, Tape* tape) const {
    return num::layer_norm(x, gain, bias, 1e-5, tape);
}

Tensor AttentionBlock::forward(const Tensor& x, Tape* tape) const {
    const Tensor h = norm.forward(x, tape);
    const Tensor q = query.forward(h, tape);
    const Tensor k = key.forward(h, tape);
    const Tensor v = value.forward(h, tape);
    const std::size_t width = x.cols() / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(width));
    std::vector<Tensor> head_out;
    head_out.reserve(heads);
    for (std::size_t hd = 0; hd < heads; ++hd) {
        const std::size_t b = hd * width, e = b + width;
        const Tensor qh = heads == 1 ? q : num::slice_cols(q, b, e, tape);
        const Tensor kh = heads == 1 ? k : num::slice_cols(k, b, e, tape);
        const Tensor vh = heads == 1 ? v : num::slice_cols(v, b, e, tape);
        const Tensor scores = num::scale(num::matmul(qh, num::transpose(kh, tape), tape), inv_sqrt, tape);
        const Tensor attn = num::softmax(scores, -1, tape);
        head_out.push_back(num::matmul(attn, vh, tape));
    }
    const Tensor merged = heads == 1 ? head_out[0] : num::concat_cols(head_out, tape);
    return num::add(x, output.forward(merged, tape), tape);
}

Tensor Router::logits(const Tensor& pooled, Tape* tape) const {
    return out.forward(num::gelu(hidden.forward(pooled, tape), tape), tape);
}

Tensor ExpertMlp::forward(const Tensor& x, Tape* tape) const {
    return down.forward(num::gelu(up.forward(x, tape), tape), tape);
}

// ---------------------------------------------------------------------------
// Routing
// ---------------------------------------------------------------------------

std::vector<std::size_t> top_t_indices(std::span<const double> probs, std::size_t budget) {
    std::vector<std::size_t> order(probs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // stable_sort keeps lower indices first among equal values.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
    order.resize(std::min(budget, order.size()));
    return order;
}

RouteResult route(const Tensor& router_logits, std::size_t budget, bool renormalize, Tape* tape) {
    const std::size_t m = router_logits.numel();
    if (budget < 1 || budget > m) {
        throw ConfigError("route: budget " + std::to_string(budget) + " outside [1, " +
                          std::to_string(m) + "]");
    }
    RouteResult r;
    r.logits = router_logits;
    r.probs = num::softmax(router_logits, -1, tape);
    r.selected = top_t_indices(r.probs.values(), budget);
    std::vector<double> keep(m, 0.0);
    for (std::size_t i : r.selected) keep[i] = 1.0;
    r.gates = num::mask(r.probs, keep, tape);
    if (renormalize) r.gates = num::normalize_rows(r.gates, tape);
    return r;
}

MoceLayerOutput moce_layer_forward(const MoceLayer& layer, const Tensor& x, const Budgets& budgets,
                                   bool renormalize, Tape* tape, bool concept_outputs) {
    if (budgets.size() != layer.routers.size()) {
        throw ConfigError("moce layer: " + std::to_string(budgets.size()) + " budgets for " +
                          std::to_string(layer.routers.size()) + " concepts");
    }
    const Tensor attended = layer.attention.forward(x, tape);
    const Tensor normed = layer.expert_norm.forward(attended, tape);
    const Tensor pooled = num::mean_rows(normed, tape);

    MoceLayerOutput out;
    out.routes.reserve(layer.routers.size());
    Tensor combined;
    std::vector<bool> used(layer.experts.size(), false);
    for (std::size_t k = 0; k < layer.routers.size(); ++k) {
        out.routes.push_back(route(layer.routers[k].logits(pooled, tape), budgets[k], renormalize, tape));
        const Tensor& gates = out.routes.back().gates;
        combined = combined.defined() ? num::add(combined, gates, tape) : gates;
        for (std::size_t m : out.routes.back().selected) used[m] = true;
    }

    std::vector<Tensor> expert_outputs;
    std::vector<std::size_t> expert_ids;
    for (std::size_t m = 0; m < layer.experts.size(); ++m) {
        if (!used[m]) continue;
        expert_outputs.push_back(layer.experts[m].forward(normed, tape));
        expert_ids.push_back(m);
    }
    out.output = num::add(attended, num::weighted_sum(expert_outputs, combined, expert_ids, tape), tape);
    if (concept_outputs) {
        for (const RouteResult& r : out.routes) {
            std::vector<Tensor> items;
            for (std::size_t m : r.selected) {
                items.push_back(expert_outputs[static_cast<std::size_t>(
                    std::find(expert_ids.begin(), expert_ids.end(), m) - expert_ids.begin())]);
            }
            out.concept_outputs.push_back(num::weighted_sum(items, r.gates, r.selected, tape));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model construction
// ---------------------------------------------------------------------------

namespace {

class Initializer {
public:
    explicit Initializer(std::uint64_t seed) : rng_(seed) {}

    Tensor normal(num::Shape shape, double stddev) {
        std::normal_distribution<double> dist(0.0, stddev);
        std::vector<double> v(num::shape_numel(shape));
        for (double& x : v) x = dist(rng_);
        return Tensor(std::move(shape), std::move(v), true);
    }

    Tensor constant(num::Shape shape, double value) {
        return Tensor(shape, std::vector<double>(num::shape_numel(shape), value), true);
    }

    Linear linear(std::size_t in, std::size_t out, double gain = 1.0) {
        return Linear{normal({in, out}, gain / std::sqrt(static_cast<double>(in))),
                      constant({out}, 0.0)};
    }

    LayerNormParams layer_norm(std::size_t n) { return {constant({n}, 1.0), constant({n}, 0.0)}; }

    AttentionBlock attention(std::size_t e, std::size_t heads) {
        AttentionBlock a;
        a.norm = layer_norm(e);
        a.query = linear(e, e);
        a.key = linear(e, e);
        a.value = linear(e, e);
        a.output = linear(e, e, 0.5);
        a.heads = heads;
        return a;
    }

private:
    std::mt19937_64 rng_;
};

// Trainable, initialised to the usual sine/cosine table so that relative
// offsets are linear maps of the embedding.
Tensor sinusoidal_positions(std::size_t len, std::size_t dim) {
    std::vector<double> v(len * dim);
    for (std::size_t p = 0; p < len; ++p) {
        for (std::size_t i = 0; i < dim; ++i) {
            const double rate = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(dim));
            const double angle = static_cast<double>(p) * rate;
            v[p * dim + i] = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    }
    return Tensor({len, dim}, std::move(v), true);
}

void append_linear(std::vector<NamedTensor>& out, const std::string& prefix, const Linear& l) {
    out.push_back({prefix + ".weight", l.weight});
    out.push_back({prefix + ".bias", l.bias});
}

void append_norm(std::vector<NamedTensor>& out, const std::string& prefix, const LayerNormParams& n) {
    out.push_back({prefix + ".gain", n.gain});
    out.push_back({prefix + ".bias", n.bias});
}

void append_attention(std::vector<NamedTensor>& out, const std::string& prefix,
                      const AttentionBlock& a) {
    append_norm(out, prefix + ".norm", a.norm);
    append_linear(out, prefix + ".query", a.query);
    append_linear(out, prefix + ".key", a.key);
    append_linear(out, prefix + ".value", a.value);
    append_linear(out, prefix + ".output", a.output);
}

}  // namespace

MoceModel MoceModel::create(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    MoceModel model(config);
    Initializer init(seed);
    const std::size_t e = config.embed_dim;
    model.token_embedding = init.normal({config.vocab_size, e}, 0.5);
    model.position_embedding = sinusoidal_positions(config.max_seq_len, e);
    for (std::size_t i = 0; i < config.num_attention_layers; ++i) {
        model.attention_layers.push_back(init.attention(e, config.num_heads));
    }
    for (std::size_t i = 0; i < config.num_moce_layers; ++i) {
        MoceLayer layer;
        layer.attention = init.attention(e, config.num_heads);
        layer.expert_norm = init.layer_norm(e);
        for (std::size_t k = 0; k < config.num_concepts(); ++k) {
            layer.routers.push_back(Router{init.linear(e, config.router_hidden_dim),
                                           init.linear(config.router_hidden_dim, config.num_experts)});
        }
        for (std::size_t m = 0; m < config.num_experts; ++m) {
            layer.experts.push_back(ExpertMlp{init.linear(e, config.expert_hidden_dim),
                                              init.linear(config.expert_hidden_dim, e, 0.5)});
        }
        model.moce_layers.push_back(std::move(layer));
    }
    model.final_norm = init.layer_norm(e);
    for (std::size_t a : config.concept_arities) model.concept_heads.push_back(init.linear(e, a));
    model.task_linear = init.linear(config.concept_width(), config.task_outputs());
    return model;
}

std::vector<NamedTensor> MoceModel::encoder_parameters() const {
    std::vector<NamedTensor> out;
    out.push_back({"embed.token", token_embedding});
    out.push_back({"embed.position", position_embedding});
    for (std::size_t i = 0; i < attention_layers.size(); ++i) {
        append_attention(out, "attn." + std::to_string(i), attention_layers[i]);
    }
    for (std::size_t i = 0; i < moce_layers.size(); ++i) {
        const std::string p = "moce." + std::to_string(i);
        const MoceLayer& layer = moce_layers[i];
        append_attention(out, p + ".attn", layer.attention);
        append_norm(out, p + ".expert_norm", layer.expert_norm);
        for (std::size_t k = 0; k < layer.routers.size(); ++k) {
            const std::string r = p + ".router." + std::to_string(k);
            append_linear(out, r + ".hidden", layer.routers[k].hidden);
            append_linear(out, r + ".out", layer.routers[k].out);
        }
        for (std::size_t m = 0; m < layer.experts.size(); ++m) {
            const std::string x = p + ".expert." + std::to_string(m);
            append_linear(out, x + ".up", layer.experts[m].up);
            append_linear(out, x + ".down", layer.experts[m].down);
        }
    }
    append_norm(out, "final_norm", final_norm);
    for (std::size_t k = 0; k < concept_heads.size(); ++k) {
        append_linear(out, "projector." + std::to_string(k), concept_heads[k]);
    }
    return out;
}

std::vector<NamedTensor> MoceModel::head_parameters() const {
    std::vector<NamedTensor> out;
    append_linear(out, "head", task_linear);
    return out;
}

std::vector<NamedTensor> MoceModel::parameters() const {
    auto out = encoder_parameters();
    for (auto& p : head_parameters()) out.push_back(std::move(p));
    return out;
}

Budgets MoceModel::uniform_budgets(std::size_t budget) const {
    return Budgets(config_.num_concepts(), budget);
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

std::vector<Tensor> MoceModel::encode_example(const TokenSeq& tokens, const Budgets& budgets, Tape* tape,
                                 const ForwardOptions& options, ExampleTrace& trace,
                                 std::vector<std::vector<Tensor>>& router_probs) const {
    if (tokens.empty()) throw InputError("forward: empty token sequence");
    if (tokens.size() > config_.max_seq_len) {
        throw InputError("forward: sequence of " + std::to_string(tokens.size()) +
                         " tokens exceeds max_seq_len " + std::to_string(config_.max_seq_len));
    }
    for (std::size_t t : tokens) {
        if (t >= config_.vocab_size) {
            throw InputError("forward: unknown token index " + std::to_string(t));
        }
    }
    if (budgets.size() != config_.num_concepts()) {
        throw ConfigError("forward: expected " + std::to_string(config_.num_concepts()) +
                          " budgets, got " + std::to_string(budgets.size()));
    }
    for (std::size_t b : budgets) {
        if (b < 1 || b > config_.num_experts) {
            throw ConfigError("forward: budget " + std::to_string(b) + " outside [1, " +
                              std::to_string(config_.num_experts) + "]");
        }
    }

    std::vector<std::size_t> positions(tokens.size());
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    Tensor x = num::add(num::gather_rows(token_embedding, tokens, tape),
                        num::gather_rows(position_embedding, positions, tape), tape);
    for (const auto& block : attention_layers) x = block.forward(x, tape);

    const Budgets base = uniform_budgets(config_.experts_active);
    std::vector<Tensor> concept_streams;
    trace.budgets = budgets;
    trace.has_gates = options.record_gates;
    for (std::size_t li = 0; li < moce_layers.size(); ++li) {
        const bool final_layer = li + 1 == moce_layers.size();
        const Budgets& layer_budgets =
            (options.scope == BudgetScope::AllLayers || final_layer) ? budgets : base;
        MoceLayerOutput out = moce_layer_forward(moce_layers[li], x, layer_budgets, config_.renormalize_gates,
                                                 tape, final_layer && config_.concept_pathways);
        x = out.output;
        if (!out.concept_outputs.empty()) concept_streams = std::move(out.concept_outputs);
        std::vector<GateRecord> records;
        for (std::size_t k = 0; k < out.routes.size(); ++k) {
            const RouteResult& r = out.routes[k];
            router_probs[li][k] = r.probs;
            if (options.record_gates) {
                GateRecord g;
                g.router_logits.assign(r.logits.values().begin(), r.logits.values().end());
                g.probs.assign(r.probs.values().begin(), r.probs.values().end());
                g.gates.assign(r.gates.values().begin(), r.gates.values().end());
                g.selected = r.selected;
                records.push_back(std::move(g));
            }
        }
        if (options.record_gates) trace.layers.push_back(std::move(records));
    }
    if (concept_streams.empty()) {
        return std::vector<Tensor>(config_.num_concepts(), num::mean_rows(final_norm.forward(x, tape), tape));
    }
    std::vector<Tensor> pooled;
    for (const Tensor& h : concept_streams) pooled.push_back(num::mean_rows(final_norm.forward(h, tape), tape));
    return pooled;
}

ForwardOutput MoceModel::forward(std::span<const TokenSeq> batch, const Budgets& budgets,
                                 Tape* tape, const ForwardOptions& options) const {
    std::vector<Budgets> per_example(batch.size(), budgets);
    return forward(batch, std::span<const Budgets>(per_example), tape, options);
}

ForwardOutput MoceModel::forward(std::span<const TokenSeq> batch, std::span<const Budgets> budgets,
                                 Tape* tape, const ForwardOptions& options) const {
    if (batch.empty()) throw InputError("forward: empty batch");
    if (budgets.size() != batch.size()) {
        throw ContractError("forward: " + std::to_string(budgets.size()) + " budget vectors for " +
                            std::to_string(batch.size()) + " examples");
    }
    const std::size_t n = batch.size();
    const std::size_t layers = moce_layers.size(), concepts = config_.num_concepts();

    ForwardOutput out;
    out.trace.examples.resize(n);
    std::vector<std::vector<Tensor>> pooled(n);
    // [example][layer][concept] router probabilities, regrouped below.
    std::vector<std::vector<std::vector<Tensor>>> probs(
        n, std::vector<std::vector<Tensor>>(layers, std::vector<Tensor>(concepts)));
    for (std::size_t i = 0; i < n; ++i) {
        pooled[i] = encode_example(batch[i], budgets[i], tape, options, out.trace.examples[i], probs[i]);
    }
    std::vector<Tensor> z(concepts);
    for (std::size_t k = 0; k < concepts; ++k) {
        if (n == 1) {
            z[k] = pooled[0][k];
        } else if (k > 0 && pooled[0][k].same_storage(pooled[0][k - 1])) {
            z[k] = z[k - 1];
        } else {
            std::vector<Tensor> rows(n);
            for (std::size_t i = 0; i < n; ++i) rows[i] = pooled[i][k];
            z[k] = num::concat_rows(rows, tape);
        }
    }

    out.router_probs.assign(layers, std::vector<Tensor>(concepts));
    for (std::size_t li = 0; li < layers; ++li) {
        for (std::size_t k = 0; k < concepts; ++k) {
            std::vector<Tensor> rows(n);
            for (std::size_t i = 0; i < n; ++i) rows[i] = probs[i][li][k];
            out.router_probs[li][k] = n == 1 ? rows[0] : num::concat_rows(rows, tape);
        }
    }

    std::vector<Tensor> logits, group_probs;
    for (std::size_t k = 0; k < concepts; ++k) {
        logits.push_back(concept_heads[k].forward(z[k], tape));
        group_probs.push_back(num::softmax(logits.back(), -1, tape));
    }
    out.concept_logits = num::concat_cols(logits, tape);
    out.concept_probs = num::concat_cols(group_probs, tape);
    const Tensor head_input = options.detach_concepts ? out.concept_probs.detach() : out.concept_probs;
    out.task_logits = task_head(head_input, tape);

    const std::size_t width = config_.concept_width(), outputs = config_.task_outputs();
    const auto cl = out.concept_logits.values();
    const auto cp = out.concept_probs.values();
    const auto tl = out.task_logits.values();
    for (std::size_t i = 0; i < n; ++i) {
        auto& ex = out.trace.examples[i];
        ex.concept_logits.assign(cl.begin() + static_cast<std::ptrdiff_t>(i * width),
                                 cl.begin() + static_cast<std::ptrdiff_t>((i + 1) * width));
        ex.concept_probs.assign(cp.begin() + static_cast<std::ptrdiff_t>(i * width),
                                cp.begin() + static_cast<std::ptrdiff_t>((i + 1) * width));
        ex.task_logits.assign(tl.begin() + static_cast<std::ptrdiff_t>(i * outputs),
                              tl.begin() + static_cast<std::ptrdiff_t>((i + 1) * outputs));
    }
    return out;
}

Tensor MoceModel::task_head(const Tensor& concept_probs, Tape* tape) const {
    return task_linear.forward(concept_probs, tape);
}

std::vector<double> MoceModel::task_predict(std::span<const double> concept_probs) const {
    if (concept_probs.size() != config_.concept_width()) {
        throw ShapeError("task_predict: " + std::to_string(concept_probs.size()) +
                         " probabilities, expected " + std::to_string(config_.concept_width()));
    }
    const Tensor in = Tensor::matrix(1, concept_probs.size(),
                                     std::vector<double>(concept_probs.begin(), concept_probs.end()));
    const Tensor out = task_head(in);
    return {out.values().begin(), out.values().end()};
}

std::vector<double> concept_probabilities(std::span<const double> concept_logits,
                                          std::span<const std::size_t> arities) {
    std::vector<double> out;
    out.reserve(concept_logits.size());
    std::size_t offset = 0;
    for (std::size_t a : arities) {
        if (offset + a > concept_logits.size()) {
            throw ShapeError("concept_probabilities: logits shorter than the arities require");
        }
        const Tensor group = Tensor::matrix(
            1, a, std::vector<double>(concept_logits.begin() + static_cast<std::ptrdiff_t>(offset),
                                      concept_logits.begin() + static_cast<std::ptrdiff_t>(offset + a)));
        const Tensor p = num::softmax(group);
        out.insert(out.end(), p.values().begin(), p.values().end());
        offset += a;
    }
    if (offset != concept_logits.size()) {
        throw ShapeError("concept_probabilities: logits longer than the arities require");
    }
    return out;
}

std::vector<std::size_t> predicted_concepts(std::span<const double> concept_probs,
                                            std::span<const std::size_t> arities) {
    std::vector<std::size_t> out;
    std::size_t offset = 0;
    for (std::size_t a : arities) {
        std::size_t best = 0;
        for (std::size_t v = 1; v < a; ++v) {
            if (concept_probs[offset + v] > concept_probs[offset + best]) best = v;
        }
        out.push_back(best);
        offset += a;
    }
    return out;
}

// ---------------------------------------------------------------------------
// FLOPs
// ---------------------------------------------------------------------------

FlopBreakdown count_flops(const ModelConfig& config, const Budgets& budgets) {
    config.validate();
    if (budgets.size() != config.num_concepts()) {
        throw ConfigError("count_flops: expected " + std::to_string(config.num_concepts()) + " budgets");
    }
    for (std::size_t b : budgets) {
        if (b < 1 || b > config.num_experts) {
            throw ConfigError("count_flops: budget " + std::to_string(b) + " outside [1, " +
                              std::to_string(config.num_experts) + "]");
        }
    }
    const double e = static_cast<double>(config.embed_dim);
    const double len = static_cast<double>(config.max_seq_len);
    const double layers_with_attention =
        static_cast<double>(config.num_attention_layers + config.num_moce_layers);
    const double moce_layers = static_cast<double>(config.num_moce_layers);
    const double k = static_cast<double>(config.num_concepts());
    const double m = static_cast<double>(config.num_experts);
    const double hr = static_cast<double>(config.router_hidden_dim);
    const double he = static_cast<double>(config.expert_hidden_dim);
    const double budget_sum =
        static_cast<double>(std::accumulate(budgets.begin(), budgets.end(), std::size_t{0}));

    FlopBreakdown f;
    // Q, K, V, O projections plus score and value mixing against `len` keys.
    f.attention = 2.0 * layers_with_attention * (4.0 * e * e + 2.0 * len * e);
    f.routers = 2.0 * moce_layers * k * (e * hr + hr * m) / len;
    f.experts = 2.0 * moce_layers * budget_sum * (2.0 * e * he);
    f.projector = 2.0 * e * static_cast<double>(config.concept_width()) / len;
    f.head = 2.0 * static_cast<double>(config.concept_width() * config.task_outputs()) / len;
    return f;
}

FlopBreakdown dense_moe_flops(const ModelConfig& config) {
    return count_flops(config, Budgets(config.num_concepts(), config.num_experts));
}

}  // namespace moce::model
