#include "dar/model/model.hpp"

#include "dar/error.hpp"
#include "dar/graph/generators.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace dar {

using ad::Tape;
using ad::Var;
using ad::concat_cols;
using ad::linear;
using ad::relu;

std::vector<double> surrogate_edge_features(const FlowNetwork& net, std::uint64_t seed) {
    const std::size_t n = net.n;
    std::vector<double> out(n * n * kSurrogateFeatures, 0.0);
    std::mt19937_64 rng(mix_seed(seed, 0x5u));
    std::normal_distribution<double> noise(0.0, 0.1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (auto [i, j] : net.symmetric_support()) {
        double* row = out.data() + (i * n + j) * kSurrogateFeatures;
        row[0] = net.cap(i, j) + noise(rng);
        row[1] = net.cap(j, i) + noise(rng);
        row[2] = unif(rng);
    }
    return out;
}

GraphView::GraphView(const FlowNetwork& g)
    : net(&g), n(g.n), envelope(g.capacity_envelope()), index_of(g.n * g.n, -1) {
    for (auto [i, j] : g.symmetric_support()) {
        index_of[i * n + j] = static_cast<std::int32_t>(support.size());
        support.emplace_back(i, j);
    }
    for (const Edge& e : g.edges) edges.emplace_back(e.from, e.to);
}

Predecessors argmax_rows(Var logits) {
    const std::size_t n = logits.rows(), m = logits.cols();
    auto v = logits.value();
    Predecessors out(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t arg = i;
        for (std::size_t j = 0; j < m; ++j)
            if (v[i * m + j] > best) {
                best = v[i * m + j];
                arg = j;
            }
        out[i] = static_cast<NodeId>(arg);
    }
    return out;
}

Var EdgeEmbedding::materialize() const {
    std::vector<ad::GatherTerm> parts;
    for (const auto& [x, w] : terms) parts.push_back({matmul(x, w)});
    return ad::gather_sum(parts, bias);
}

EdgeEmbedding::Projection EdgeEmbedding::project(Var M) const {
    Projection out;
    for (const auto& [x, w] : terms) out.parts.push_back(matmul(x, matmul(w, M)));
    out.bias = matmul(bias, M);
    return out;
}

EdgeEmbedding EdgeEmbedding::plus(Var features, Var weights) const {
    EdgeEmbedding out = *this;
    out.terms.emplace_back(features, weights);
    return out;
}

// ---------------------------------------------------------------------------
// Construction

DarModel::DarModel(ModelConfig config, std::uint64_t seed) : config_(config) {
    config_.validate();
    const std::size_t d = config_.hidden_dim;
    auto encoders = [&](const std::string& pre) {
        params_.add(pre + "enc_node_w", kNodeFeatures, d, seed);
        params_.add(pre + "enc_node_b", 1, d, seed);
        params_.add(pre + "enc_edge_w", kEdgeBaseFeatures, d, seed);
        params_.add(pre + "enc_edge_cap_w", kEdgeCapFeatures, d, seed);
        params_.add(pre + "enc_edge_b", 1, d, seed);
    };
    encoders("");
    init_processor("bf_", seed);
    init_processor("f_", seed);
    params_.add("flow_p", d, d, seed);
    params_.add("flow_q", d, d, seed);
    params_.add("flow_r", d, d, seed);
    params_.add("flow_b", 1, d, seed);
    params_.add("flow_out", d, 1, seed);
    params_.add("flow_out_b", 1, 1, seed);
    if (config_.has_pointer_head()) {
        params_.add("ptr_u", 2 * d, d, seed);
        params_.add("ptr_v", 2 * d, d, seed);
        params_.add("ptr_b", 1, d, seed);
        params_.add("ptr_out", d, 1, seed);
        params_.add("enc_ptr_node_w", 2, d, seed);
        params_.add("enc_ptr_edge_w", 2, d, seed);
    }
    if (config_.variant == Variant::dual) {
        params_.add("enc_node_cut_w", 1, d, seed);
        params_.add("cut_w", d, 1, seed);
        params_.add("cut_b", 1, 1, seed);
    }
    if (config_.variant == Variant::pipeline) {
        encoders("pc_");
        init_processor("pc_", seed);
        params_.add("pc_cut_w", d, 1, seed);
        params_.add("pc_cut_b", 1, 1, seed);
        params_.add("enc_node_pc_w", 1, d, seed);
    }
    if (config_.edge_inputs == EdgeInputs::surrogate) {
        params_.add("enc_edge_recon_w", kSurrogateFeatures, d, seed);
        if (config_.variant == Variant::pipeline)
            params_.add("pc_enc_edge_recon_w", kSurrogateFeatures, d, seed);
    }
}

DarModel::DarModel(ModelConfig config, ad::ParameterStore params)
    : config_(config), params_(std::move(params)) {
    config_.validate();
    DarModel reference(config_, 0);
    for (const auto& [name, t] : reference.params_) {
        if (!params_.contains(name))
            throw ParseError("checkpoint is missing parameter '" + name + "'");
        if (params_.at(name).shape() != t.shape())
            throw ParseError("checkpoint parameter '" + name + "' has shape " +
                             ad::shape_str(params_.at(name).shape()) + ", expected " +
                             ad::shape_str(t.shape()));
    }
}

void DarModel::init_processor(const std::string& pre, std::uint64_t seed) {
    const std::size_t d = config_.hidden_dim;
    params_.add(pre + "msg_a", 2 * d, d, seed);
    params_.add(pre + "msg_b", 2 * d, d, seed);
    params_.add(pre + "msg_e", d, d, seed);
    params_.add(pre + "msg1_b", 1, d, seed);
    params_.add(pre + "msg2_w", d, d, seed);
    params_.add(pre + "msg2_b", 1, d, seed);
    params_.add(pre + "upd1_w", 3 * d, d, seed);
    params_.add(pre + "upd1_b", 1, d, seed);
    params_.add(pre + "upd2_w", d, d, seed);
    params_.add(pre + "upd2_b", 1, d, seed);
}

void DarModel::prepare_reconstruction(std::uint64_t seed) {
    params_.freeze_all();
    const std::size_t d = config_.hidden_dim;
    params_.add("enc_edge_recon_w", kSurrogateFeatures, d, seed);
    if (config_.variant == Variant::pipeline)
        params_.add("pc_enc_edge_recon_w", kSurrogateFeatures, d, seed);
    config_.edge_inputs = EdgeInputs::surrogate;
}

// ---------------------------------------------------------------------------
// Building blocks

DarModel::Route DarModel::make_route(const GraphView& g, bool dense) const {
    const std::size_t n = g.n;
    Route r;
    r.dense = dense || config_.processor == Processor::mpnn_dense;
    r.mask.assign(n * n, 0);
    r.pos.assign(n * n, -1);
    if (config_.processor == Processor::mpnn_dense) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) r.mask[i * n + j] = i != j;
    } else {
        // Support is symmetric, so (i, j) sorted doubles as (dst, src) sorted.
        for (auto [i, j] : g.support) r.mask[i * n + j] = 1;
    }
    if (r.dense) {
        for (std::uint32_t i = 0; i < n; ++i)
            for (std::uint32_t j = 0; j < n; ++j) r.arcs.emplace_back(i, j);
    } else {
        r.arcs = g.support;
    }
    for (std::size_t k = 0; k < r.arcs.size(); ++k) {
        auto [dst, src] = r.arcs[k];
        r.dst.push_back(dst);
        r.src.push_back(src);
        r.pos[dst * n + src] = static_cast<std::int32_t>(k);
    }
    return r;
}

std::pair<Var, EdgeEmbedding> DarModel::encode(Tape& tape, const std::string& pre, const GraphView& g,
                                     const ArcList& arcs, std::span<const double> flow) {
    const std::size_t n = g.n;
    const FlowNetwork& net = *g.net;
    if (flow.size() != n * n)
        throw ShapeError("encode: flow of " + std::to_string(flow.size()) + " entries for n = " +
                         std::to_string(n));
    std::vector<double> xv(n * kNodeFeatures, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = xv.data() + i * kNodeFeatures;
        row[0] = i == net.source;
        row[1] = i == net.sink;
        for (std::size_t j = 0; j < n; ++j) {
            const double f = flow[i * n + j];
            if (f > 0.0) row[2] += f;
            else row[3] -= f;
        }
    }
    Var zv = linear(tape.constant(n, kNodeFeatures, std::move(xv)), p(tape, pre + "enc_node_w"),
                    p(tape, pre + "enc_node_b"));

    const std::size_t m = arcs.size();
    const bool surrogate = config_.edge_inputs == EdgeInputs::surrogate;
    const std::size_t wide = surrogate ? kSurrogateFeatures : kEdgeCapFeatures;
    if (surrogate && (surrogate_ == nullptr || surrogate_->size() != n * n * kSurrogateFeatures))
        throw DataError("encode: surrogate edge features missing or mis-sized");
    std::vector<double> eb(m * kEdgeBaseFeatures, 0.0), ec(m * wide, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        // Arc k carries messages src -> dst and describes the pair (src, dst).
        const auto [dst, src] = arcs[k];
        if (src == dst || g.index_of[src * n + dst] < 0) continue;
        double* b = eb.data() + k * kEdgeBaseFeatures;
        b[0] = net.residual_weight(src, dst);
        b[1] = flow[src * n + dst];
        b[2] = net.has_edge(src, dst);
        double* c = ec.data() + k * wide;
        if (surrogate) {
            const double* s = surrogate_->data() + (src * n + dst) * kSurrogateFeatures;
            for (std::size_t q = 0; q < kSurrogateFeatures; ++q) c[q] = s[q];
        } else {
            c[0] = net.cap(src, dst);
            c[1] = net.cap(dst, src);
        }
    }
    EdgeEmbedding ze;
    ze.terms.emplace_back(tape.constant(m, kEdgeBaseFeatures, std::move(eb)), p(tape, pre + "enc_edge_w"));
    ze.terms.emplace_back(tape.constant(m, wide, std::move(ec)),
                          p(tape, pre + (surrogate ? "enc_edge_recon_w" : "enc_edge_cap_w")));
    ze.bias = p(tape, pre + "enc_edge_b");
    return {zv, ze};
}

Var DarModel::process(Tape& tape, const std::string& pre, Var z, const EdgeEmbedding& ze, Var h,
                      const Route& r) {
    const std::size_t n = z.rows();
    Var x = concat_cols({z, h});
    auto proj = ze.project(p(tape, pre + "msg_e"));
    std::vector<ad::GatherTerm> terms{{matmul(x, p(tape, pre + "msg_a")), &r.dst},
                                      {matmul(x, p(tape, pre + "msg_b")), &r.src}};
    for (Var part : proj.parts) terms.push_back({part});
    Var hidden = ad::gather_sum(terms, add(proj.bias, p(tape, pre + "msg1_b")), true);
    Var msgs = linear(hidden, p(tape, pre + "msg2_w"), p(tape, pre + "msg2_b"));
    Var agg = r.dense ? masked_aggregate(msgs, r.mask, n, config_.aggregator)
                      : segment_aggregate(msgs, r.dst, n, config_.aggregator);
    Var u = linear(concat_cols({z, h, agg}), p(tape, pre + "upd1_w"), p(tape, pre + "upd1_b"), true);
    // tanh keeps the state carried across steps bounded.
    return ad::tanh(linear(u, p(tape, pre + "upd2_w"), p(tape, pre + "upd2_b")));
}

Var DarModel::decode_pointers(Tape& tape, Var z, Var h, const GraphView& g) {
    const std::size_t n = g.n;
    Var x = concat_cols({z, h});
    Var pair = ad::outer_add(matmul(x, p(tape, "ptr_u")), matmul(x, p(tape, "ptr_v")),
                             p(tape, "ptr_b"), true);
    Var logits = reshape(matmul(pair, p(tape, "ptr_out")), n, n);
    if (config_.processor != Processor::pgn) return logits;
    std::vector<std::uint8_t> allowed(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) allowed[i * n + i] = 1;
    for (auto [i, j] : g.support) allowed[i * n + j] = 1;
    return mask_fill(logits, allowed, -std::numeric_limits<double>::infinity());
}

Var DarModel::decode_flow(Tape& tape, Var h, const EdgeEmbedding& ze, const GraphView& g,
                          const Route& r) {
    const std::size_t n = g.n;
    std::vector<std::uint32_t> from, to, arc;
    for (auto [i, j] : g.support) {
        from.push_back(i);
        to.push_back(j);
        arc.push_back(static_cast<std::uint32_t>(r.pos[j * n + i]));
    }
    if (g.support.empty()) return tape.zeros(n, n);
    auto proj = ze.project(p(tape, "flow_r"));
    std::vector<ad::GatherTerm> terms{{matmul(h, p(tape, "flow_p")), &from},
                                      {matmul(h, p(tape, "flow_q")), &to}};
    for (Var part : proj.parts) terms.push_back({part, &arc});
    Var hidden = ad::gather_sum(terms, add(proj.bias, p(tape, "flow_b")), true);
    Var raw = linear(hidden, p(tape, "flow_out"), p(tape, "flow_out_b"));
    return scatter_entries(raw, g.support, n);
}

Var DarModel::rescale_flow(Var raw, const FlowNetwork& net) {
    return antisymmetric_tanh_scale(raw, net.capacity_envelope());
}

Var DarModel::pointer_node_embedding(Tape& tape, const Predecessors& pred) {
    const std::size_t n = pred.size();
    std::vector<double> x(n * 2, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (pred[i] == i) continue;
        x[i * 2] = 1.0;
        x[pred[i] * 2 + 1] = 1.0;
    }
    return matmul(tape.constant(n, 2, std::move(x)), p(tape, "enc_ptr_node_w"));
}

EdgeEmbedding DarModel::with_pointer_edges(Tape& tape, const EdgeEmbedding& ze,
                                           const Predecessors& pred, const Route& r) {
    const std::size_t m = r.arcs.size();
    std::vector<double> x(m * 2, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        const auto [dst, src] = r.arcs[k];
        if (dst == src) continue;
        x[k * 2] = pred[dst] == src;
        x[k * 2 + 1] = pred[src] == dst;
    }
    return ze.plus(tape.constant(m, 2, std::move(x)), p(tape, "enc_ptr_edge_w"));
}

Var DarModel::run_cut_pipeline(Tape& tape, const GraphView& g, const Route& r) {
    const std::size_t n = g.n;
    const std::vector<double> zero(n * n, 0.0);
    auto [z, ze] = encode(tape, "pc_", g, r.arcs, zero);
    Var h = tape.zeros(n, config_.hidden_dim);
    for (std::size_t round = 0; round < n; ++round) h = process(tape, "pc_", z, ze, h, r);
    return linear(h, p(tape, "pc_cut_w"), p(tape, "pc_cut_b"));
}

// ---------------------------------------------------------------------------
// Episodes

std::vector<StepOutputs> DarModel::run_episode(Tape& tape, const FlowNetwork& net, std::size_t T,
                                               const EpisodeOptions& opt) {
    const std::size_t n = net.n;
    const std::size_t d = config_.hidden_dim;
    if (opt.teacher != nullptr && opt.teacher->T() < T)
        throw DataError("run_episode: teacher trajectory has " + std::to_string(opt.teacher->T()) +
                        " steps, " + std::to_string(T) + " requested");
    surrogate_ = opt.surrogate;
    const GraphView g(net);
    const Route r = make_route(g, opt.dense_route);
    std::vector<StepOutputs> out;

    if (config_.variant == Variant::no_algo) {
        const std::vector<double> zero(n * n, 0.0);
        auto [z, ze] = encode(tape, "", g, r.arcs, zero);
        Var hbf = process(tape, "bf_", z, ze, tape.zeros(n, d), r);
        Var hf = process(tape, "f_", z, ze, hbf, r);
        StepOutputs s;
        s.raw_flow = decode_flow(tape, hf, ze, g, r);
        s.flow = rescale_flow(s.raw_flow, net);
        s.H = hf;
        out.push_back(std::move(s));
        surrogate_ = nullptr;
        return out;
    }

    Var pc_logits, pc_feature;
    if (config_.variant == Variant::pipeline) {
        pc_logits = run_cut_pipeline(tape, g, r);
        pc_feature = detach(sigmoid(pc_logits));
    }
    std::vector<double> flow_in(n * n, 0.0);
    Var h = tape.zeros(n, d);
    Var cut_feedback = tape.zeros(n, 1);
    for (std::size_t t = 0; t < T; ++t) {
        auto [z, ze] = encode(tape, "", g, r.arcs, flow_in);
        if (config_.variant == Variant::dual)
            z = add(z, matmul(cut_feedback, p(tape, "enc_node_cut_w")));
        if (config_.variant == Variant::pipeline)
            z = add(z, matmul(pc_feature, p(tape, "enc_node_pc_w")));

        StepOutputs s;
        Var hbf = process(tape, "bf_", z, ze, h, r);
        s.pointer_logits = decode_pointers(tape, z, hbf, g);
        s.pred = argmax_rows(s.pointer_logits);
        const Predecessors& used = opt.teacher ? opt.teacher->steps[t].pred : s.pred;

        Var zf = add(z, pointer_node_embedding(tape, used));
        EdgeEmbedding zef = with_pointer_edges(tape, ze, used, r);
        s.H = process(tape, "f_", zf, zef, hbf, r);
        s.raw_flow = decode_flow(tape, s.H, zef, g, r);
        s.flow = rescale_flow(s.raw_flow, net);
        if (config_.variant == Variant::dual) {
            s.cut_logits = linear(s.H, p(tape, "cut_w"), p(tape, "cut_b"));
            cut_feedback = sigmoid(s.cut_logits);
        } else if (config_.variant == Variant::pipeline) {
            s.cut_logits = pc_logits;
        }
        h = s.H;
        if (opt.teacher) {
            flow_in = opt.teacher->steps[t].flow;
        } else {
            auto v = s.flow.value();
            flow_in.assign(v.begin(), v.end());
        }
        out.push_back(std::move(s));
    }
    surrogate_ = nullptr;
    return out;
}

std::vector<StepOutputs> rollout(DarModel& model, Tape& tape, const FlowNetwork& net, std::size_t T,
                                 std::uint64_t feature_seed, const Trajectory* teacher) {
    EpisodeOptions opt;
    opt.teacher = teacher;
    std::vector<double> surrogate;
    if (model.config().edge_inputs == EdgeInputs::surrogate) {
        surrogate = surrogate_edge_features(net, feature_seed);
        opt.surrogate = &surrogate;
    }
    return model.run_episode(tape, net, T, opt);
}

// ---------------------------------------------------------------------------
// Checkpoints

nlohmann::json checkpoint_to_json(const DarModel& m) {
    return {{"config", config_to_json(m.config())}, {"parameters", m.params().to_json()}};
}

DarModel checkpoint_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("config") || !j.contains("parameters"))
        throw ParseError("checkpoint: expected {\"config\", \"parameters\"}");
    return DarModel(config_from_json(j.at("config")), ad::ParameterStore::from_json(j.at("parameters")));
}

} // namespace dar
