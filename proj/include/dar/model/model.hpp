#pragma once

#include "dar/algo/trajectory.hpp"
#include "dar/autodiff/parameters.hpp"
#include "dar/autodiff/tape.hpp"
#include "dar/graph/flow_network.hpp"
#include "dar/model/config.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dar {

using ArcList = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

inline constexpr std::size_t kNodeFeatures = 4;     // is_s, is_t, out-flow, in-flow
inline constexpr std::size_t kEdgeBaseFeatures = 3; // residual weight, flow, edge flag
inline constexpr std::size_t kEdgeCapFeatures = 2;  // C(i, j), C(j, i)
inline constexpr std::size_t kSurrogateFeatures = 3;

/// Per-pair stand-ins for capacity: two noisy capacity readings and one pure
/// noise channel, n*n rows of kSurrogateFeatures. Zero off the support.
std::vector<double> surrogate_edge_features(const FlowNetwork& net, std::uint64_t seed);

/// Static per-graph quantities reused by every step of an episode.
struct GraphView {
    explicit GraphView(const FlowNetwork& net);

    const FlowNetwork* net;
    std::size_t n;
    /// Ordered pairs (i, j) with an edge in either direction, sorted.
    ArcList support;
    /// net.edges as index pairs.
    ArcList edges;
    std::vector<double> envelope;
    /// index_of[i * n + j] = position of (i, j) in support, or -1.
    std::vector<std::int32_t> index_of;
};

/// Edge embeddings Z_E = sum_k X_k W_k + b kept in factored form. Every
/// consumer multiplies Z_E by a weight matrix M, evaluated as
/// sum_k X_k (W_k M) + b M so the wide m x d x d product never happens.
struct EdgeEmbedding {
    std::vector<std::pair<ad::Var, ad::Var>> terms; // (features m x f, weights f x d)
    ad::Var bias;                                   // 1 x d

    std::size_t rows() const { return terms.front().first.rows(); }
    ad::Var materialize() const;
    /// Z_E M kept factored: the sum of `parts` (m x d each) plus the `bias` row.
    struct Projection {
        std::vector<ad::Var> parts;
        ad::Var bias;
    };
    Projection project(ad::Var M) const;
    EdgeEmbedding plus(ad::Var features, ad::Var weights) const;
};

/// One step of a rolled-out episode. Vars live on the caller's tape.
struct StepOutputs {
    ad::Var pointer_logits; // n x n, row i scores predecessors of i
    ad::Var raw_flow;       // n x n
    ad::Var flow;           // n x n, antisymmetric and capacity-bounded
    ad::Var cut_logits;     // n x 1; invalid for primal / no_algo
    ad::Var H;              // n x hidden_dim
    Predecessors pred;      // row argmax of pointer_logits
};

struct EpisodeOptions {
    /// Ground truth fed forward in place of predictions when set.
    const Trajectory* teacher = nullptr;
    /// n*n*kSurrogateFeatures values; required when edge_inputs is surrogate.
    const std::vector<double>* surrogate = nullptr;
    /// Routes PGN message passing through the dense masked aggregation.
    bool dense_route = false;
};

/// Encode-process-decode network imitating Ford-Fulkerson one augmentation
/// per step, with an optional min-cut head.
class DarModel {
public:
    DarModel(ModelConfig config, std::uint64_t seed);
    DarModel(ModelConfig config, ad::ParameterStore params);

    const ModelConfig& config() const { return config_; }
    ad::ParameterStore& params() { return params_; }
    const ad::ParameterStore& params() const { return params_; }

    /// Rolls out T steps (a single pass for no_algo regardless of T).
    std::vector<StepOutputs> run_episode(ad::Tape& tape, const FlowNetwork& net, std::size_t T,
                                         const EpisodeOptions& opt = {});

    /// Swaps the capacity block of the edge encoder for a freshly initialised
    /// surrogate encoder and freezes every other weight.
    void prepare_reconstruction(std::uint64_t seed);

    /// Linear node and edge embeddings of the inputs given the current flow.
    /// `prefix` selects the encoder set ("" main, "pc_" cut pipeline); arcs
    /// are (dst, src) pairs and describe the pair (src, dst).
    std::pair<ad::Var, EdgeEmbedding> encode(ad::Tape& tape, const std::string& prefix,
                                       const GraphView& g, const ArcList& arcs,
                                       std::span<const double> flow);

    /// Rescaled flow: tanh(raw - raw^T) bounded by the capacity envelope.
    static ad::Var rescale_flow(ad::Var raw, const FlowNetwork& net);

private:
    struct Route {
        ArcList arcs;                   // (dst, src), sorted
        std::vector<std::uint32_t> dst; // per arc
        std::vector<std::uint32_t> src; // per arc
        std::vector<std::uint8_t> mask; // n*n, mask[i*n+j]: j sends to i
        std::vector<std::int32_t> pos;  // n*n, arc index of (dst, src) or -1
        bool dense = false;
    };

    Route make_route(const GraphView& g, bool dense_route) const;
    ad::Var process(ad::Tape& tape, const std::string& prefix, ad::Var z, const EdgeEmbedding& ze,
                    ad::Var h, const Route& r);
    ad::Var decode_pointers(ad::Tape& tape, ad::Var z, ad::Var h, const GraphView& g);
    ad::Var decode_flow(ad::Tape& tape, ad::Var h, const EdgeEmbedding& ze, const GraphView& g,
                        const Route& r);
    ad::Var pointer_node_embedding(ad::Tape& tape, const Predecessors& pred);
    EdgeEmbedding with_pointer_edges(ad::Tape& tape, const EdgeEmbedding& ze,
                                     const Predecessors& pred, const Route& r);
    ad::Var run_cut_pipeline(ad::Tape& tape, const GraphView& g, const Route& r);

    void init_processor(const std::string& prefix, std::uint64_t seed);
    ad::Var p(ad::Tape& tape, const std::string& name) { return tape.param(params_.at(name)); }

    ModelConfig config_;
    ad::ParameterStore params_;
    const std::vector<double>* surrogate_ = nullptr;
};

Predecessors argmax_rows(ad::Var logits);

/// run_episode with surrogate edge features drawn from `feature_seed` when
/// the model reads them.
std::vector<StepOutputs> rollout(DarModel& model, ad::Tape& tape, const FlowNetwork& net,
                                 std::size_t T, std::uint64_t feature_seed,
                                 const Trajectory* teacher = nullptr);

/// {"config": ModelConfig, "parameters": ParameterStore checkpoint}.
nlohmann::json checkpoint_to_json(const DarModel& m);
DarModel checkpoint_from_json(const nlohmann::json& j);

} // namespace dar
