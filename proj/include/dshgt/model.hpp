#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dshgt/embedder.hpp"
#include "dshgt/method_cpg.hpp"
#include "dshgt/tensor.hpp"

namespace dshgt {

enum class AggregateKind { Sum, Mean };
enum class ClassifierKind { SingleLayer, TwoLayer };

struct ModelConfig {
    std::int64_t feature_dim = 64;  // width of the initial node features
    std::int64_t hidden_dim = 64;   // layer width d
    std::int64_t heads = 4;
    std::int64_t layers = 3;
    float dropout = 0.5f;
    float lambda = 0.2f;
    bool homogeneous = false;  // single parameter set for all types/relations
    AggregateKind aggregate = AggregateKind::Sum;
    ClassifierKind classifier = ClassifierKind::SingleLayer;

    void validate() const {
        if (layers < 1) throw ConfigError("layer count must be at least 1");
        if (heads < 1 || hidden_dim % heads != 0)
            throw ConfigError("hidden width " + std::to_string(hidden_dim) +
                              " must divide evenly into " + std::to_string(heads) + " heads");
        if (lambda < 0.0f || lambda > 1.0f)
            throw ConfigError("lambda must lie in [0,1], got " + std::to_string(lambda));
        if (dropout < 0.0f || dropout >= 1.0f)
            throw ConfigError("dropout must lie in [0,1), got " + std::to_string(dropout));
        if (feature_dim < 1 || hidden_dim < 1) throw ConfigError("widths must be positive");
    }
};

// One stacked attention layer: per node type query/key/value/output
// projections, per relation attention and message matrices (stored as h blocks
// of dh x dh), and the learnable per-triplet prior.
struct HgtLayerParams {
    std::vector<Tensor> q_linear, k_linear, v_linear, a_linear;  // (d, d) per type
    std::vector<Tensor> w_att, w_msg;                            // (h, dh, dh) per relation
    Tensor mu;                                                   // (A, 2E, A), ones at init
};

struct DshgtModel {
    ModelConfig config;
    TypeRegistry registry;
    Tensor input_projection;  // (D, d)
    std::vector<HgtLayerParams> layers;
    Tensor readout_w1, readout_b1;  // (D+d, d), (d)
    Tensor readout_w2, readout_b2;  // (d, d), (d)
    Tensor classifier_hidden_w, classifier_hidden_b;  // TwoLayer variant only
    Tensor classifier_w, classifier_b;                // (d, 2), (2)

    std::size_t type_count() const {
        return config.homogeneous ? 1 : registry.node_type_count();
    }
    std::size_t relation_count() const {
        return config.homogeneous ? 1 : registry.relation_count();
    }
    std::size_t type_index(TypeId t) const { return config.homogeneous ? 0 : t; }
    std::size_t relation_index(TypeId r) const { return config.homogeneous ? 0 : r; }

    std::int64_t mu_flat_index(TypeId src_type, TypeId relation, TypeId dst_type) const {
        const std::int64_t a = static_cast<std::int64_t>(type_index(src_type));
        const std::int64_t r = static_cast<std::int64_t>(relation_index(relation));
        const std::int64_t b = static_cast<std::int64_t>(type_index(dst_type));
        const std::int64_t nr = static_cast<std::int64_t>(relation_count());
        const std::int64_t nt = static_cast<std::int64_t>(type_count());
        return (a * nr + r) * nt + b;
    }

    static DshgtModel init(const TypeRegistry& registry, const ModelConfig& config,
                           std::uint64_t seed) {
        config.validate();
        DshgtModel m;
        m.config = config;
        m.registry = registry;
        Rng rng(seed);
        const std::int64_t d = config.hidden_dim, dd = config.feature_dim;
        const std::int64_t h = config.heads, dh = d / h;
        const auto nt = static_cast<std::int64_t>(m.type_count());
        const auto nr = static_cast<std::int64_t>(m.relation_count());

        m.input_projection = xavier_uniform({dd, d}, dd, d, rng);
        m.layers.resize(static_cast<std::size_t>(config.layers));
        for (auto& layer : m.layers) {
            for (std::int64_t t = 0; t < nt; ++t) {
                layer.q_linear.push_back(xavier_uniform({d, d}, d, d, rng));
                layer.k_linear.push_back(xavier_uniform({d, d}, d, d, rng));
                layer.v_linear.push_back(xavier_uniform({d, d}, d, d, rng));
                layer.a_linear.push_back(xavier_uniform({d, d}, d, d, rng));
            }
            for (std::int64_t r = 0; r < nr; ++r) {
                layer.w_att.push_back(xavier_uniform({h, dh, dh}, dh, dh, rng));
                layer.w_msg.push_back(xavier_uniform({h, dh, dh}, dh, dh, rng));
            }
            layer.mu = Tensor::full({nt, nr, nt}, 1.0f, true);
        }
        m.readout_w1 = xavier_uniform({dd + d, d}, dd + d, d, rng);
        m.readout_b1 = Tensor::zeros({d}, true);
        m.readout_w2 = xavier_uniform({d, d}, d, d, rng);
        m.readout_b2 = Tensor::zeros({d}, true);
        if (config.classifier == ClassifierKind::TwoLayer) {
            m.classifier_hidden_w = xavier_uniform({d, d}, d, d, rng);
            m.classifier_hidden_b = Tensor::zeros({d}, true);
        }
        m.classifier_w = xavier_uniform({d, 2}, d, 2, rng);
        m.classifier_b = Tensor::zeros({2}, true);
        return m;
    }

    // Fixed enumeration order; checkpoint payloads and optimizer state follow it.
    std::vector<std::pair<std::string, Tensor>> named_parameters() const {
        std::vector<std::pair<std::string, Tensor>> out;
        out.emplace_back("input_projection", input_projection);
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const std::string p = "layers." + std::to_string(l) + ".";
            const HgtLayerParams& layer = layers[l];
            for (std::size_t t = 0; t < layer.q_linear.size(); ++t) {
                const std::string s = std::to_string(t);
                out.emplace_back(p + "q_linear." + s, layer.q_linear[t]);
                out.emplace_back(p + "k_linear." + s, layer.k_linear[t]);
                out.emplace_back(p + "v_linear." + s, layer.v_linear[t]);
                out.emplace_back(p + "a_linear." + s, layer.a_linear[t]);
            }
            for (std::size_t r = 0; r < layer.w_att.size(); ++r) {
                out.emplace_back(p + "w_att." + std::to_string(r), layer.w_att[r]);
                out.emplace_back(p + "w_msg." + std::to_string(r), layer.w_msg[r]);
            }
            out.emplace_back(p + "mu", layer.mu);
        }
        out.emplace_back("readout.w1", readout_w1);
        out.emplace_back("readout.b1", readout_b1);
        out.emplace_back("readout.w2", readout_w2);
        out.emplace_back("readout.b2", readout_b2);
        if (config.classifier == ClassifierKind::TwoLayer) {
            out.emplace_back("classifier.hidden_w", classifier_hidden_w);
            out.emplace_back("classifier.hidden_b", classifier_hidden_b);
        }
        out.emplace_back("classifier.w", classifier_w);
        out.emplace_back("classifier.b", classifier_b);
        return out;
    }

    std::int64_t parameter_count() const {
        std::int64_t n = 0;
        for (const auto& [name, t] : named_parameters()) n += t.numel();
        return n;
    }
};

// Ablation view: one shared parameter set for all node types and relations,
// with the prior collapsed to a scalar. Shared tensors are taken from the
// first slot of each group.
inline DshgtModel homogeneous_mode(const DshgtModel& model) {
    DshgtModel homo;
    homo.config = model.config;
    homo.config.homogeneous = true;
    homo.registry = model.registry;
    homo.input_projection = model.input_projection;
    for (const HgtLayerParams& src : model.layers) {
        HgtLayerParams layer;
        layer.q_linear.push_back(src.q_linear.front());
        layer.k_linear.push_back(src.k_linear.front());
        layer.v_linear.push_back(src.v_linear.front());
        layer.a_linear.push_back(src.a_linear.front());
        layer.w_att.push_back(src.w_att.front());
        layer.w_msg.push_back(src.w_msg.front());
        layer.mu = Tensor::full({1, 1, 1}, src.mu.values()[0], true);
        homo.layers.push_back(std::move(layer));
    }
    homo.readout_w1 = model.readout_w1;
    homo.readout_b1 = model.readout_b1;
    homo.readout_w2 = model.readout_w2;
    homo.readout_b2 = model.readout_b2;
    homo.classifier_hidden_w = model.classifier_hidden_w;
    homo.classifier_hidden_b = model.classifier_hidden_b;
    homo.classifier_w = model.classifier_w;
    homo.classifier_b = model.classifier_b;
    return homo;
}

// Graph resolved against a model's registry: row-indexed node types and
// per-target source lists with direction-aware relation ids.
struct PreparedGraph {
    std::int64_t n = 0;
    std::vector<TypeId> node_type;  // per row
    struct Source {
        std::int64_t row;
        TypeId src_type;
        TypeId relation;
    };
    std::vector<std::vector<Source>> sources;  // per target row
};

inline PreparedGraph prepare_graph(const DshgtModel& model, const MethodCpg& method) {
    const Cpg& g = method.graph;
    std::vector<NodeId> ids = g.sorted_node_ids();
    if (ids.empty()) throw GraphError("empty graph");
    std::map<NodeId, std::int64_t> row_of;
    for (std::size_t i = 0; i < ids.size(); ++i) row_of[ids[i]] = static_cast<std::int64_t>(i);

    std::set<std::string> unknown_nodes, unknown_edges;
    PreparedGraph pg;
    pg.n = static_cast<std::int64_t>(ids.size());
    pg.node_type.resize(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const std::string& name = g.registry().node_type_name(g.node(ids[i]).node_type);
        auto t = model.registry.node_type(name);
        if (!t) {
            unknown_nodes.insert(name);
            continue;
        }
        pg.node_type[i] = *t;
    }
    pg.sources.resize(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (const IncidentSource& s : g.incident_sources(ids[i])) {
            const std::string& ename = g.registry().edge_type_name(s.edge_type);
            auto et = model.registry.edge_type(ename);
            if (!et) {
                unknown_edges.insert(ename);
                continue;
            }
            PreparedGraph::Source src;
            src.row = row_of.at(s.source);
            src.src_type = pg.node_type[static_cast<std::size_t>(src.row)];
            src.relation = s.reversed ? model.registry.reversed_relation(*et) : *et;
            pg.sources[i].push_back(src);
        }
    }
    if (!unknown_nodes.empty() || !unknown_edges.empty()) {
        std::string msg = "graph uses types absent from the model registry:";
        for (const auto& n : unknown_nodes) msg += " node " + n;
        for (const auto& e : unknown_edges) msg += " edge " + e;
        throw SchemaError(msg);
    }
    return pg;
}

namespace detail {

inline Tensor head_view(const Tensor& row_1d, std::int64_t h, std::int64_t dh) {
    return reshape(row_1d, {h, dh});
}

// Eq. 1/2/6 style projection of one node row through a per-type matrix,
// split into heads.
inline Tensor project_heads(const Tensor& h_prev, std::int64_t row_ix, const Tensor& mat,
                            std::int64_t h, std::int64_t dh) {
    return head_view(matmul(row(h_prev, row_ix), mat), h, dh);
}

// Pre-softmax per-head scores for one (source, target) pair: the key/query
// bilinear form through the relation matrix, scaled by the per-triplet prior
// over sqrt(d).
inline Tensor pair_scores(const DshgtModel& model, const HgtLayerParams& layer, const Tensor& k,
                          const Tensor& q, TypeId src_type, TypeId relation, TypeId dst_type) {
    const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(model.config.hidden_dim));
    return relation_scores(k, layer.w_att[model.relation_index(relation)], q, layer.mu,
                           model.mu_flat_index(src_type, relation, dst_type), inv_sqrt_d);
}

// Attention matrix for one target given projected keys: (S, h), softmax over
// sources per head.
inline Tensor attention_from_projections(const DshgtModel& model, const HgtLayerParams& layer,
                                         const Tensor& q, const std::vector<Tensor>& ks,
                                         const std::vector<PreparedGraph::Source>& srcs,
                                         TypeId dst_type) {
    const std::int64_t h = model.config.heads;
    if (srcs.empty()) return Tensor::zeros({0, h});
    std::vector<Tensor> rows;
    rows.reserve(srcs.size());
    for (std::size_t s = 0; s < srcs.size(); ++s)
        rows.push_back(pair_scores(model, layer, ks[s], q, srcs[s].src_type, srcs[s].relation,
                                   dst_type));
    return softmax(stack_rows(rows), 0);
}

// Eq. 7/8: per-source message matrices (h, dh).
inline std::vector<Tensor> messages_from_projections(const DshgtModel& model,
                                                     const HgtLayerParams& layer,
                                                     const std::vector<Tensor>& vs,
                                                     const std::vector<PreparedGraph::Source>& srcs) {
    std::vector<Tensor> out;
    out.reserve(srcs.size());
    for (std::size_t s = 0; s < srcs.size(); ++s)
        out.push_back(multi_head_transform(vs[s], layer.w_msg[model.relation_index(srcs[s].relation)]));
    return out;
}

// Eq. 9/10/11: attention-weighted message sum, output projection with relu,
// residual from the previous layer. Zero-source targets keep their embedding.
inline Tensor aggregate_from(const DshgtModel& model, const HgtLayerParams& layer,
                             const Tensor& h_prev, std::int64_t t_row, TypeId t_type,
                             const Tensor& attn, const std::vector<Tensor>& msgs) {
    Tensor residual = row(h_prev, t_row);
    if (msgs.empty()) return residual;
    const std::int64_t h = model.config.heads;
    const std::int64_t d = model.config.hidden_dim;
    std::vector<Tensor> weighted;
    weighted.reserve(msgs.size());
    for (std::size_t s = 0; s < msgs.size(); ++s) {
        Tensor a_s = row_vec(attn, static_cast<std::int64_t>(s));
        weighted.push_back(scale_rows(msgs[s], a_s));
    }
    (void)h;
    Tensor summed = add_n(weighted);
    if (model.config.aggregate == AggregateKind::Mean)
        summed = scalar_mul(summed, 1.0f / static_cast<float>(msgs.size()));
    Tensor flat = reshape(summed, {1, d});
    Tensor projected = relu(matmul(flat, layer.a_linear[model.type_index(t_type)]));
    return add(projected, residual);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// modular per-target operations (the documented decomposition)
// ---------------------------------------------------------------------------

namespace detail {

struct TargetContext {
    PreparedGraph pg;
    std::int64_t t_row = 0;
};

inline TargetContext target_context(const DshgtModel& model, const MethodCpg& g, NodeId t) {
    TargetContext ctx;
    ctx.pg = prepare_graph(model, g);
    std::vector<NodeId> ids = g.graph.sorted_node_ids();
    auto it = std::find(ids.begin(), ids.end(), t);
    if (it == ids.end()) throw GraphError("unknown node " + std::to_string(t));
    ctx.t_row = static_cast<std::int64_t>(it - ids.begin());
    return ctx;
}

}  // namespace detail

// Per-source attention vectors for target t: one row per incident source, one
// column per head; each head column sums to one over the sources.
inline Tensor attention_weights(const DshgtModel& model, int layer_index, const MethodCpg& g,
                                const Tensor& h_prev, NodeId t) {
    const auto ctx = detail::target_context(model, g, t);
    const HgtLayerParams& layer = model.layers.at(static_cast<std::size_t>(layer_index));
    const std::int64_t h = model.config.heads, dh = model.config.hidden_dim / h;
    const auto& srcs = ctx.pg.sources[static_cast<std::size_t>(ctx.t_row)];
    const TypeId t_type = ctx.pg.node_type[static_cast<std::size_t>(ctx.t_row)];
    Tensor q = detail::project_heads(h_prev, ctx.t_row,
                                     model.layers[layer_index].q_linear[model.type_index(t_type)],
                                     h, dh);
    std::vector<Tensor> ks;
    for (const auto& s : srcs)
        ks.push_back(detail::project_heads(h_prev, s.row,
                                           layer.k_linear[model.type_index(s.src_type)], h, dh));
    return detail::attention_from_projections(model, layer, q, ks, srcs, t_type);
}

// Per-source message matrices (h, dh) for target t, aligned with
// attention_weights row order.
inline std::vector<Tensor> messages(const DshgtModel& model, int layer_index, const MethodCpg& g,
                                    const Tensor& h_prev, NodeId t) {
    const auto ctx = detail::target_context(model, g, t);
    const HgtLayerParams& layer = model.layers.at(static_cast<std::size_t>(layer_index));
    const std::int64_t h = model.config.heads, dh = model.config.hidden_dim / h;
    const auto& srcs = ctx.pg.sources[static_cast<std::size_t>(ctx.t_row)];
    std::vector<Tensor> vs;
    for (const auto& s : srcs)
        vs.push_back(detail::project_heads(h_prev, s.row,
                                           layer.v_linear[model.type_index(s.src_type)], h, dh));
    return detail::messages_from_projections(model, layer, vs, srcs);
}

// New embedding row for target t from its attention matrix and messages.
inline Tensor aggregate(const DshgtModel& model, int layer_index, const MethodCpg& g,
                        const Tensor& h_prev, NodeId t, const Tensor& attn,
                        const std::vector<Tensor>& msgs) {
    const auto ctx = detail::target_context(model, g, t);
    const HgtLayerParams& layer = model.layers.at(static_cast<std::size_t>(layer_index));
    const TypeId t_type = ctx.pg.node_type[static_cast<std::size_t>(ctx.t_row)];
    return detail::aggregate_from(model, layer, h_prev, ctx.t_row, t_type, attn, msgs);
}

// ---------------------------------------------------------------------------
// whole-graph forward
// ---------------------------------------------------------------------------

struct ForwardOptions {
    bool training = false;
    std::uint64_t rng_seed = 0;  // base seed for dropout masks
};

struct ForwardResult {
    Tensor z_g;     // (1, d) graph embedding
    Tensor logits;  // (2)
};

// One synchronous layer sweep: every target reads the previous layer's rows.
inline Tensor layer_forward(const DshgtModel& model, int layer_index, const PreparedGraph& pg,
                            const Tensor& h_prev) {
    const HgtLayerParams& layer = model.layers.at(static_cast<std::size_t>(layer_index));
    const std::int64_t h = model.config.heads, dh = model.config.hidden_dim / h;

    // project every node once per layer
    std::vector<Tensor> qs(pg.n), ks(pg.n), vs(pg.n);
    for (std::int64_t i = 0; i < pg.n; ++i) {
        const std::size_t ti = model.type_index(pg.node_type[static_cast<std::size_t>(i)]);
        qs[i] = detail::project_heads(h_prev, i, layer.q_linear[ti], h, dh);
        ks[i] = detail::project_heads(h_prev, i, layer.k_linear[ti], h, dh);
        vs[i] = detail::project_heads(h_prev, i, layer.v_linear[ti], h, dh);
    }

    std::vector<Tensor> rows;
    rows.reserve(static_cast<std::size_t>(pg.n));
    for (std::int64_t t = 0; t < pg.n; ++t) {
        const auto& srcs = pg.sources[static_cast<std::size_t>(t)];
        const TypeId t_type = pg.node_type[static_cast<std::size_t>(t)];
        std::vector<Tensor> src_ks, src_vs;
        src_ks.reserve(srcs.size());
        src_vs.reserve(srcs.size());
        for (const auto& s : srcs) {
            src_ks.push_back(ks[s.row]);
            src_vs.push_back(vs[s.row]);
        }
        Tensor attn = detail::attention_from_projections(model, layer, qs[t], src_ks, srcs, t_type);
        std::vector<Tensor> msgs = detail::messages_from_projections(model, layer, src_vs, srcs);
        rows.push_back(detail::aggregate_from(model, layer, h_prev, t, t_type, attn, msgs));
    }
    return concat(rows, 0);
}

inline ForwardResult forward(const DshgtModel& model, const PreparedGraph& pg, const Tensor& x,
                             const ForwardOptions& opts = {}) {
    if (pg.n == 0) throw GraphError("empty graph");
    if (x.rank() != 2 || x.dim(0) != pg.n || x.dim(1) != model.config.feature_dim)
        throw ShapeError("feature matrix " + shape_str(x.shape()) + " does not match graph (" +
                         std::to_string(pg.n) + "," +
                         std::to_string(model.config.feature_dim) + ")");

    std::uint64_t seed_counter = opts.rng_seed;
    auto maybe_dropout = [&](Tensor t) {
        if (!opts.training || model.config.dropout == 0.0f) return t;
        return dropout(t, model.config.dropout, seed_counter++);
    };

    Tensor h = matmul(x, model.input_projection);
    for (int l = 0; l < static_cast<int>(model.layers.size()); ++l)
        h = maybe_dropout(layer_forward(model, l, pg, h));

    // readout: concatenate initial features with final embeddings per node,
    // push through the two-layer MLP, then mean over nodes
    Tensor cat = concat(x, h, 1);
    Tensor hidden = relu(add_rowvec(matmul(cat, model.readout_w1), model.readout_b1));
    hidden = maybe_dropout(hidden);
    Tensor per_node = add_rowvec(matmul(hidden, model.readout_w2), model.readout_b2);
    Tensor z_g = mean_rows(per_node);

    Tensor cls_in = z_g;
    if (model.config.classifier == ClassifierKind::TwoLayer)
        cls_in = relu(add_rowvec(matmul(cls_in, model.classifier_hidden_w),
                                 model.classifier_hidden_b));
    Tensor logits = reshape(add_rowvec(matmul(cls_in, model.classifier_w), model.classifier_b),
                            {2});
    return {z_g, logits};
}

inline ForwardResult forward(const DshgtModel& model, const MethodCpg& g, const Tensor& x,
                             const ForwardOptions& opts = {}) {
    return forward(model, prepare_graph(model, g), x, opts);
}

// Eq.-13-style fusion: (1-lambda) * classification loss + lambda * annotation
// loss. Without an annotation loss the classification loss passes through
// untouched.
inline Tensor fused_loss(const Tensor& logits, int label,
                         const std::optional<Tensor>& loss_sup, float lambda) {
    if (lambda < 0.0f || lambda > 1.0f)
        throw ConfigError("lambda must lie in [0,1], got " + std::to_string(lambda));
    if (label != 0 && label != 1) throw ConfigError("label must be 0 or 1");
    Tensor loss_main = cross_entropy(logits, label);
    if (!loss_sup) return loss_main;
    return add(scalar_mul(loss_main, 1.0f - lambda), scalar_mul(*loss_sup, lambda));
}

}  // namespace dshgt
