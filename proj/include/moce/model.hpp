#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "moce/tensor.hpp"

namespace moce::model {

using num::Tape;
using num::Tensor;

enum class TaskKind { Classification, Regression };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& text);

/// Which MoCE layers honour a per-concept budget that differs from the base T.
enum class BudgetScope { AllLayers, FinalLayer };

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t max_seq_len = 48;
    std::size_t embed_dim = 24;
    std::size_t num_heads = 4;
    std::size_t num_attention_layers = 1;
    std::size_t num_moce_layers = 1;
    std::size_t num_experts = 8;           // M
    std::size_t experts_active = 1;        // T
    std::size_t experts_intervention = 4;  // T'
    std::vector<std::size_t> concept_arities;
    TaskKind task_kind = TaskKind::Classification;
    std::size_t num_classes = 5;  // ignored for regression
    std::size_t router_hidden_dim = 16;
    std::size_t expert_hidden_dim = 32;
    bool renormalize_gates = false;
    /// Projector k reads concept k's own final-layer expert mixture
    /// sum_m r_k(x)_m e_m(x) instead of the shared residual stream.
    bool concept_pathways = true;

    std::size_t num_concepts() const { return concept_arities.size(); }
    /// Total width of the concatenated concept probability vector.
    std::size_t concept_width() const;
    std::size_t concept_offset(std::size_t concept_index) const;
    std::size_t task_outputs() const;

    /// Throws ConfigError naming the first violated invariant.
    void validate() const;

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

/// Per-concept expert budget (active_T for each concept).
using Budgets = std::vector<std::size_t>;

// ---------------------------------------------------------------------------
// Parameter blocks
// ---------------------------------------------------------------------------

struct Linear {
    Tensor weight;  // [in x out]
    Tensor bias;    // [out]
    Tensor forward(const Tensor& x, Tape* tape) const;
};

struct LayerNormParams {
    Tensor gain;
    Tensor bias;
    Tensor forward(const Tensor& x, Tape* tape) const;
};

/// Pre-norm multi-head self-attention with a residual connection.
struct AttentionBlock {
    LayerNormParams norm;
    Linear query, key, value, output;
    std::size_t heads = 1;
    Tensor forward(const Tensor& x, Tape* tape) const;
};

/// Shallow per-concept router: pooled embedding -> hidden -> M logits.
struct Router {
    Linear hidden;
    Linear out;
    Tensor logits(const Tensor& pooled, Tape* tape) const;
};

/// Two-layer expert MLP (E -> hidden -> E).
struct ExpertMlp {
    Linear up;
    Linear down;
    Tensor forward(const Tensor& x, Tape* tape) const;
};

struct MoceLayer {
    AttentionBlock attention;
    LayerNormParams expert_norm;
    std::vector<Router> routers;      // one per concept
    std::vector<ExpertMlp> experts;   // shared across concepts
};

// ---------------------------------------------------------------------------
// Routing and traces
// ---------------------------------------------------------------------------

/// Indices of the `budget` largest probabilities, ties to the lower index,
/// sorted by descending probability.
std::vector<std::size_t> top_t_indices(std::span<const double> probs, std::size_t budget);

struct RouteResult {
    Tensor logits;  // [1 x M]
    Tensor probs;   // softmax of logits
    Tensor gates;   // probs with all but the top-T zeroed (optionally renormalised)
    std::vector<std::size_t> selected;
};

/// Softmax over router logits followed by top-T masking. Surviving gates keep
/// their softmax value unless `renormalize` is set.
RouteResult route(const Tensor& router_logits, std::size_t budget, bool renormalize, Tape* tape);

struct GateRecord {
    std::vector<double> router_logits;
    std::vector<double> probs;
    std::vector<double> gates;
    std::vector<std::size_t> selected;

    bool operator==(const GateRecord&) const = default;
};

struct MoceLayerOutput {
    Tensor output;                     // [seq x E]
    std::vector<RouteResult> routes;   // one per concept
    /// sum_m r_k(x)_m e_m(x) per concept; filled on request.
    std::vector<Tensor> concept_outputs;
};

/// Attention, then per-concept top-T routing over shared experts applied as
/// a residual: x' = attn(x) + sum_k sum_m r_k(x)_m e_m(norm(attn(x))).
MoceLayerOutput moce_layer_forward(const MoceLayer& layer, const Tensor& x, const Budgets& budgets,
                                   bool renormalize, Tape* tape, bool concept_outputs = false);

/// Everything one example's inference records.
struct ExampleTrace {
    Budgets budgets;
    bool has_gates = true;
    std::vector<std::vector<GateRecord>> layers;  // [moce layer][concept]
    std::vector<double> concept_logits;           // concatenated over concepts
    std::vector<double> concept_probs;            // per-concept softmax, concatenated
    std::vector<double> task_logits;              // class logits, or one real output

    bool operator==(const ExampleTrace&) const = default;
};

struct ForwardTrace {
    std::vector<ExampleTrace> examples;
};

struct ForwardOptions {
    bool record_gates = true;
    BudgetScope scope = BudgetScope::AllLayers;
    /// Stops gradients between the projector and the task head.
    bool detach_concepts = false;
};

/// Differentiable outputs of a batch forward pass plus its trace.
struct ForwardOutput {
    ForwardTrace trace;
    Tensor concept_logits;  // [b x concept_width]
    Tensor concept_probs;   // [b x concept_width]
    Tensor task_logits;     // [b x task_outputs]
    /// Pre-mask router softmax per [moce layer][concept], each [b x M].
    std::vector<std::vector<Tensor>> router_probs;
};

using TokenSeq = std::vector<std::size_t>;

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

class MoceModel {
public:
    /// Randomly initialised model; deterministic for a given seed.
    static MoceModel create(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }

    /// Every learnable tensor with a stable name (checkpoint keys).
    std::vector<NamedTensor> parameters() const;
    /// Parameters of the concept encoder (embedding through projector).
    std::vector<NamedTensor> encoder_parameters() const;
    std::vector<NamedTensor> head_parameters() const;

    /// Forward pass over a batch with one budget vector per example.
    ForwardOutput forward(std::span<const TokenSeq> batch, std::span<const Budgets> budgets,
                          Tape* tape = nullptr, const ForwardOptions& options = {}) const;
    /// Forward pass with the same budget vector for every example.
    ForwardOutput forward(std::span<const TokenSeq> batch, const Budgets& budgets,
                          Tape* tape = nullptr, const ForwardOptions& options = {}) const;

    /// Task head over concatenated concept probabilities [b x concept_width].
    Tensor task_head(const Tensor& concept_probs, Tape* tape = nullptr) const;
    /// Replays the task head for one stored probability vector.
    std::vector<double> task_predict(std::span<const double> concept_probs) const;

    Budgets uniform_budgets(std::size_t budget) const;

    // Parameter blocks, exposed for tests and accountability.
    Tensor token_embedding;     // [vocab x E]
    Tensor position_embedding;  // [max_seq_len x E]
    std::vector<AttentionBlock> attention_layers;
    std::vector<MoceLayer> moce_layers;
    LayerNormParams final_norm;
    std::vector<Linear> concept_heads;  // psi_k: E -> arity(k)
    Linear task_linear;                 // phi: concept_width -> task outputs

private:
    explicit MoceModel(ModelConfig config) : config_(std::move(config)) {}

    /// Pooled representation read by each concept's projector.
    std::vector<Tensor> encode_example(const TokenSeq& tokens, const Budgets& budgets, Tape* tape,
                          const ForwardOptions& options, ExampleTrace& trace,
                          std::vector<std::vector<Tensor>>& router_probs) const;

    ModelConfig config_;
};

/// Concept probabilities: softmax within each concept's group of logits.
std::vector<double> concept_probabilities(std::span<const double> concept_logits,
                                          std::span<const std::size_t> arities);

/// Argmax value index per concept of a concatenated probability vector.
std::vector<std::size_t> predicted_concepts(std::span<const double> concept_probs,
                                            std::span<const std::size_t> arities);

// ---------------------------------------------------------------------------
// FLOPs
// ---------------------------------------------------------------------------

/// Analytic FLOP estimate (2 x multiply-adds of the dense maps) per token at
/// sequence length max_seq_len. Pooled, once-per-sequence work (routers,
/// projector, head) is amortised over the sequence.
struct FlopBreakdown {
    double attention = 0.0;
    double routers = 0.0;
    double experts = 0.0;
    double projector = 0.0;
    double head = 0.0;
    double total() const { return attention + routers + experts + projector + head; }
};

/// Expert term counts each concept's active experts separately, so it is
/// linear in the sum of the budgets.
FlopBreakdown count_flops(const ModelConfig& config, const Budgets& budgets);
/// Count for a dense mixture where every concept uses all M experts.
FlopBreakdown dense_moe_flops(const ModelConfig& config);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

/// Writes config, parameters and an opaque metadata document to a versioned
/// little-endian container with a trailing FNV-1a checksum.
void save_checkpoint(const std::string& path, const MoceModel& model, const std::string& metadata);

struct LoadedCheckpoint {
    MoceModel model;
    std::string metadata;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

/// FNV-1a 64 over the bytes of a file, as 16 hex digits.
std::string file_checksum(const std::string& path);
std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace moce::model
