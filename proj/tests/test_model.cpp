#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dshgt/model.hpp"
#include "support/dense_reference.hpp"
#include "support/test_graphs.hpp"

using namespace dshgt;
using Catch::Approx;

namespace {

TypeRegistry tiny_registry() {
    TypeRegistry r{TypeRegistry::Empty{}};
    r.add_node_type("X");
    r.add_node_type("Y");
    r.add_node_type("Z");
    r.add_edge_type("P");
    r.add_edge_type("Q");
    return r;
}

MethodCpg random_method(const TypeRegistry& reg, std::size_t n_nodes, std::size_t n_edges,
                        std::uint64_t seed) {
    Rng rng(seed);
    Cpg g(reg);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        CpgNode n;
        n.id = static_cast<NodeId>(i + 1);
        n.node_type = static_cast<TypeId>(rng.uniform_int(reg.node_type_count()));
        g.add_node(n);
    }
    std::size_t added = 0, tries = 0;
    while (added < n_edges && tries < 20 * n_edges) {
        ++tries;
        CpgEdge e;
        e.src = static_cast<NodeId>(1 + rng.uniform_int(n_nodes));
        e.dst = static_cast<NodeId>(1 + rng.uniform_int(n_nodes));
        e.edge_type = static_cast<TypeId>(rng.uniform_int(reg.edge_type_count()));
        e.label = "l" + std::to_string(rng.uniform_int(3));
        try {
            g.add_edge(e);
            ++added;
        } catch (const GraphError&) {
        }
    }
    MethodCpg m;
    m.method_node = 1;
    m.graph = std::move(g);
    return m;
}

Tensor random_features(std::int64_t rows, std::int64_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t = Tensor::zeros({rows, cols});
    for (float& v : t.values_mut()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return t;
}

ModelConfig small_config(std::int64_t d = 8, std::int64_t h = 2, std::int64_t L = 2) {
    ModelConfig c;
    c.feature_dim = d;
    c.hidden_dim = d;
    c.heads = h;
    c.layers = L;
    c.dropout = 0.0f;
    return c;
}

}  // namespace

TEST_CASE("a single source receives full attention on every head") {
    TypeRegistry reg = tiny_registry();
    Cpg g(reg);
    for (NodeId id : {1, 2}) {
        CpgNode n;
        n.id = id;
        n.node_type = reg.node_type_checked(id == 1 ? "X" : "Y");
        g.add_node(n);
    }
    g.add_edge({1, 2, reg.edge_type_checked("P"), ""});
    MethodCpg m;
    m.method_node = 1;
    m.graph = g;

    DshgtModel model = DshgtModel::init(reg, small_config(), 1);
    Tensor h_prev = random_features(2, 8, 3);
    Tensor attn = attention_weights(model, 0, m, h_prev, 2);
    REQUIRE(attn.shape() == Shape{1, 2});
    CHECK(attn.at(0, 0) == Approx(1.0f));
    CHECK(attn.at(0, 1) == Approx(1.0f));
}

TEST_CASE("twin sources with equal type, relation and embedding split attention evenly") {
    TypeRegistry reg = tiny_registry();
    Cpg g(reg);
    auto add = [&](NodeId id, const char* t) {
        CpgNode n;
        n.id = id;
        n.node_type = reg.node_type_checked(t);
        g.add_node(n);
    };
    add(1, "Y");
    add(2, "Y");
    add(3, "X");
    g.add_edge({1, 3, reg.edge_type_checked("P"), ""});
    g.add_edge({2, 3, reg.edge_type_checked("P"), ""});
    MethodCpg m;
    m.method_node = 3;
    m.graph = g;

    DshgtModel model = DshgtModel::init(reg, small_config(), 7);
    Tensor h_prev = random_features(3, 8, 5);
    for (std::int64_t j = 0; j < 8; ++j)
        h_prev.values_mut()[1 * 8 + j] = h_prev.values()[0 * 8 + j];
    Tensor attn = attention_weights(model, 0, m, h_prev, 3);
    REQUIRE(attn.shape() == Shape{2, 2});
    for (std::int64_t head = 0; head < 2; ++head) {
        CHECK(attn.at(0, head) == Approx(0.5f).margin(1e-6));
        CHECK(attn.at(1, head) == Approx(0.5f).margin(1e-6));
    }
}

TEST_CASE("attention, messages and aggregation match the dense reference") {
    TypeRegistry reg = tiny_registry();
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        MethodCpg m = random_method(reg, 5, 9, seed);
        DshgtModel model = DshgtModel::init(reg, small_config(8, 2, 2), seed * 31);
        Tensor h_prev = random_features(5, 8, seed * 17);

        PreparedGraph pg = prepare_graph(model, m);
        testing::DenseReference ref(model);
        auto rows = testing::to_rows(h_prev);

        std::vector<NodeId> ids = m.graph.sorted_node_ids();
        for (std::size_t t = 0; t < ids.size(); ++t) {
            CAPTURE(seed, ids[t]);
            auto ref_attn = ref.attention(0, rows, pg, static_cast<std::int64_t>(t));
            Tensor attn = attention_weights(model, 0, m, h_prev, ids[t]);
            REQUIRE(attn.dim(0) == static_cast<std::int64_t>(ref_attn.size()));
            for (std::size_t s = 0; s < ref_attn.size(); ++s)
                for (std::int64_t head = 0; head < 2; ++head)
                    CHECK(attn.at(static_cast<std::int64_t>(s), head) ==
                          Approx(ref_attn[s][static_cast<std::size_t>(head)]).margin(1e-5));

            auto ref_msgs = ref.message(0, rows, pg, static_cast<std::int64_t>(t));
            auto msgs = messages(model, 0, m, h_prev, ids[t]);
            REQUIRE(msgs.size() == ref_msgs.size());
            for (std::size_t s = 0; s < msgs.size(); ++s)
                for (std::int64_t i = 0; i < 8; ++i)
                    CHECK(msgs[s].values()[static_cast<std::size_t>(i)] ==
                          Approx(ref_msgs[s][static_cast<std::size_t>(i)]).margin(1e-5));

            auto ref_row = ref.aggregate(0, rows, pg, static_cast<std::int64_t>(t));
            Tensor out = aggregate(model, 0, m, h_prev, ids[t], attn, msgs);
            for (std::int64_t j = 0; j < 8; ++j)
                CHECK(out.values()[static_cast<std::size_t>(j)] ==
                      Approx(ref_row[static_cast<std::size_t>(j)]).margin(1e-5));
        }
    }
}

TEST_CASE("layer_forward rows equal the modular per-target pipeline") {
    TypeRegistry reg = tiny_registry();
    MethodCpg m = random_method(reg, 6, 10, 77);
    DshgtModel model = DshgtModel::init(reg, small_config(8, 2, 1), 99);
    Tensor h_prev = random_features(6, 8, 5);
    PreparedGraph pg = prepare_graph(model, m);
    Tensor full = layer_forward(model, 0, pg, h_prev);
    std::vector<NodeId> ids = m.graph.sorted_node_ids();
    for (std::size_t t = 0; t < ids.size(); ++t) {
        Tensor attn = attention_weights(model, 0, m, h_prev, ids[t]);
        auto msgs = messages(model, 0, m, h_prev, ids[t]);
        Tensor expect = aggregate(model, 0, m, h_prev, ids[t], attn, msgs);
        for (std::int64_t j = 0; j < 8; ++j)
            CHECK(full.at(static_cast<std::int64_t>(t), j) ==
                  Approx(expect.values()[static_cast<std::size_t>(j)]).margin(1e-6));
    }
}

TEST_CASE("identity message matrices pass the value projection through") {
    TypeRegistry reg = tiny_registry();
    Cpg g(reg);
    CpgNode a, b;
    a.id = 1;
    a.node_type = reg.node_type_checked("X");
    b.id = 2;
    b.node_type = reg.node_type_checked("Y");
    g.add_node(a);
    g.add_node(b);
    g.add_edge({1, 2, reg.edge_type_checked("P"), ""});
    MethodCpg m;
    m.method_node = 1;
    m.graph = g;

    DshgtModel model = DshgtModel::init(reg, small_config(8, 2, 1), 3);
    Tensor& wm = model.layers[0].w_msg[reg.edge_type_checked("P")];
    std::fill(wm.values_mut().begin(), wm.values_mut().end(), 0.0f);
    const std::int64_t dh = 4;
    for (std::int64_t head = 0; head < 2; ++head)
        for (std::int64_t i = 0; i < dh; ++i)
            wm.values_mut()[static_cast<std::size_t>(head * dh * dh + i * dh + i)] = 1.0f;

    Tensor h_prev = random_features(2, 8, 11);
    auto msgs = messages(model, 0, m, h_prev, 2);
    REQUIRE(msgs.size() == 1);
    Tensor v = matmul(row(h_prev, 0), model.layers[0].v_linear[reg.node_type_checked("X")]);
    for (std::int64_t i = 0; i < 8; ++i)
        CHECK(msgs[0].values()[static_cast<std::size_t>(i)] ==
              Approx(v.values()[static_cast<std::size_t>(i)]).margin(1e-6));
}

TEST_CASE("zero source embedding produces a zero message") {
    TypeRegistry reg = tiny_registry();
    Cpg g(reg);
    CpgNode a, b;
    a.id = 1;
    a.node_type = reg.node_type_checked("X");
    b.id = 2;
    b.node_type = reg.node_type_checked("Y");
    g.add_node(a);
    g.add_node(b);
    g.add_edge({1, 2, reg.edge_type_checked("Q"), ""});
    MethodCpg m;
    m.method_node = 1;
    m.graph = g;
    DshgtModel model = DshgtModel::init(reg, small_config(8, 2, 1), 3);
    Tensor h_prev = random_features(2, 8, 11);
    for (std::int64_t j = 0; j < 8; ++j) h_prev.values_mut()[static_cast<std::size_t>(j)] = 0.0f;
    auto msgs = messages(model, 0, m, h_prev, 2);
    REQUIRE(msgs.size() == 1);
    for (float x : msgs[0].values()) CHECK(x == 0.0f);
}

TEST_CASE("aggregation keeps the residual when the output projection is zero") {
    TypeRegistry reg = tiny_registry();
    Cpg g(reg);
    CpgNode a, b;
    a.id = 1;
    a.node_type = reg.node_type_checked("X");
    b.id = 2;
    b.node_type = reg.node_type_checked("Y");
    g.add_node(a);
    g.add_node(b);
    g.add_edge({1, 2, reg.edge_type_checked("P"), ""});
    MethodCpg m;
    m.method_node = 1;
    m.graph = g;
    DshgtModel model = DshgtModel::init(reg, small_config(8, 2, 1), 13);
    for (Tensor& t : model.layers[0].a_linear)
        std::fill(t.values_mut().begin(), t.values_mut().end(), 0.0f);
    Tensor h_prev = random_features(2, 8, 17);
    Tensor attn = attention_weights(model, 0, m, h_prev, 2);
    auto msgs = messages(model, 0, m, h_prev, 2);
    Tensor out = aggregate(model, 0, m, h_prev, 2, attn, msgs);
    for (std::int64_t j = 0; j < 8; ++j)
        CHECK(out.values()[static_cast<std::size_t>(j)] == Approx(h_prev.at(1, j)));
}

TEST_CASE("isolated targets keep their previous embedding") {
    TypeRegistry reg = tiny_registry();
    Cpg g(reg);
    CpgNode a;
    a.id = 9;
    a.node_type = reg.node_type_checked("Z");
    g.add_node(a);
    MethodCpg m;
    m.method_node = 9;
    m.graph = g;
    DshgtModel model = DshgtModel::init(reg, small_config(8, 2, 1), 13);
    Tensor h_prev = random_features(1, 8, 19);
    Tensor attn = attention_weights(model, 0, m, h_prev, 9);
    CHECK(attn.dim(0) == 0);
    auto msgs = messages(model, 0, m, h_prev, 9);
    CHECK(msgs.empty());
    Tensor out = aggregate(model, 0, m, h_prev, 9, attn, msgs);
    CHECK(out.values() == row(h_prev, 0).values());
}

TEST_CASE("attention columns sum to one per head across random graphs") {
    TypeRegistry reg = tiny_registry();
    for (std::uint64_t seed = 200; seed < 240; ++seed) {
        MethodCpg m = random_method(reg, 4 + seed % 5, 8, seed);
        DshgtModel model = DshgtModel::init(reg, small_config(8, 4, 1), seed);
        Tensor h_prev = random_features(static_cast<std::int64_t>(m.graph.nodes().size()), 8,
                                        seed + 1);
        for (NodeId id : m.graph.sorted_node_ids()) {
            Tensor attn = attention_weights(model, 0, m, h_prev, id);
            if (attn.dim(0) == 0) continue;
            for (std::int64_t head = 0; head < 4; ++head) {
                double s = 0;
                for (std::int64_t i = 0; i < attn.dim(0); ++i) s += attn.at(i, head);
                CHECK(s == Approx(1.0).margin(1e-5));
            }
        }
    }
}

TEST_CASE("uniform prior scaling keeps the per-head attention argmax") {
    TypeRegistry reg = tiny_registry();
    MethodCpg m = random_method(reg, 6, 12, 4242);
    DshgtModel model = DshgtModel::init(reg, small_config(8, 2, 1), 11);
    std::fill(model.layers[0].mu.values_mut().begin(), model.layers[0].mu.values_mut().end(),
              0.7f);
    Tensor h_prev = random_features(6, 8, 23);

    auto argmax_per_head = [&](NodeId t) {
        Tensor attn = attention_weights(model, 0, m, h_prev, t);
        std::vector<std::int64_t> out;
        for (std::int64_t head = 0; head < 2; ++head) {
            std::int64_t best = 0;
            for (std::int64_t i = 1; i < attn.dim(0); ++i)
                if (attn.at(i, head) > attn.at(best, head)) best = i;
            out.push_back(attn.dim(0) ? best : -1);
        }
        return out;
    };

    std::vector<std::vector<std::int64_t>> before;
    for (NodeId id : m.graph.sorted_node_ids()) before.push_back(argmax_per_head(id));
    for (float& v : model.layers[0].mu.values_mut()) v *= 3.0f;
    std::size_t ix = 0;
    for (NodeId id : m.graph.sorted_node_ids()) CHECK(argmax_per_head(id) == before[ix++]);
}

TEST_CASE("forward of a single node graph reduces to the readout of its row") {
    TypeRegistry reg = tiny_registry();
    Cpg g(reg);
    CpgNode a;
    a.id = 1;
    a.node_type = reg.node_type_checked("X");
    g.add_node(a);
    MethodCpg m;
    m.method_node = 1;
    m.graph = g;
    DshgtModel model = DshgtModel::init(reg, small_config(8, 2, 2), 21);
    Tensor x = random_features(1, 8, 31);
    ForwardResult r = forward(model, m, x);

    Tensor hl = matmul(x, model.input_projection);
    Tensor cat = concat(x, hl, 1);
    Tensor hidden = relu(add_rowvec(matmul(cat, model.readout_w1), model.readout_b1));
    Tensor per_node = add_rowvec(matmul(hidden, model.readout_w2), model.readout_b2);
    for (std::int64_t j = 0; j < 8; ++j)
        CHECK(r.z_g.values()[static_cast<std::size_t>(j)] ==
              Approx(per_node.values()[static_cast<std::size_t>(j)]).margin(1e-6));
}

TEST_CASE("three-layer forward over the sample slice yields two logits") {
    Cpg g = testing::make_two_method_graph();
    auto methods = slice_methods(g);
    const MethodCpg* work = nullptr;
    for (const auto& mm : methods)
        if (mm.method_node == 3) work = &mm;
    REQUIRE(work != nullptr);

    ModelConfig c;
    c.feature_dim = 16;
    c.hidden_dim = 16;
    c.heads = 4;
    c.layers = 3;
    c.dropout = 0.0f;
    DshgtModel model = DshgtModel::init(TypeRegistry{}, c, 5);
    Tensor x = random_features(9, 16, 55);
    ForwardResult r = forward(model, *work, x);
    CHECK(r.logits.shape() == Shape{2});
    CHECK(r.z_g.shape() == Shape{1, 16});
}

TEST_CASE("node id permutation leaves the graph embedding unchanged") {
    TypeRegistry reg = tiny_registry();
    MethodCpg m = random_method(reg, 5, 8, 321);
    DshgtModel model = DshgtModel::init(reg, small_config(8, 2, 2), 77);
    Tensor x = random_features(5, 8, 91);

    MethodCpg perm;
    perm.method_node = 0;
    Cpg g2(reg);
    auto remap = [](NodeId id) { return 100 - id * 10; };
    std::vector<CpgNode> nodes = m.graph.nodes();
    std::sort(nodes.begin(), nodes.end(),
              [&](const CpgNode& a, const CpgNode& b) { return remap(a.id) < remap(b.id); });
    for (CpgNode n : nodes) {
        n.id = remap(n.id);
        g2.add_node(n);
    }
    for (const CpgEdge& e : m.graph.edges())
        g2.add_edge({remap(e.src), remap(e.dst), e.edge_type, e.label});
    perm.graph = std::move(g2);

    std::vector<NodeId> old_ids = m.graph.sorted_node_ids();
    std::vector<std::pair<NodeId, std::size_t>> new_order;
    for (std::size_t i = 0; i < old_ids.size(); ++i) new_order.push_back({remap(old_ids[i]), i});
    std::sort(new_order.begin(), new_order.end());
    Tensor x2 = Tensor::zeros({5, 8});
    for (std::size_t r2 = 0; r2 < new_order.size(); ++r2)
        for (std::int64_t j = 0; j < 8; ++j)
            x2.values_mut()[r2 * 8 + static_cast<std::size_t>(j)] =
                x.at(static_cast<std::int64_t>(new_order[r2].second), j);

    ForwardResult a = forward(model, m, x);
    ForwardResult b = forward(model, perm, x2);
    for (std::int64_t j = 0; j < 8; ++j)
        CHECK(a.z_g.values()[static_cast<std::size_t>(j)] ==
              Approx(b.z_g.values()[static_cast<std::size_t>(j)]).margin(1e-4));
}

TEST_CASE("zeroed attention, message and output matrices reduce layers to the identity") {
    TypeRegistry reg = tiny_registry();
    MethodCpg m = random_method(reg, 5, 9, 11);
    DshgtModel model = DshgtModel::init(reg, small_config(8, 2, 3), 13);
    for (HgtLayerParams& layer : model.layers) {
        for (Tensor& t : layer.w_att) std::fill(t.values_mut().begin(), t.values_mut().end(), 0.0f);
        for (Tensor& t : layer.w_msg) std::fill(t.values_mut().begin(), t.values_mut().end(), 0.0f);
        for (Tensor& t : layer.a_linear)
            std::fill(t.values_mut().begin(), t.values_mut().end(), 0.0f);
    }
    Tensor x = random_features(5, 8, 17);
    PreparedGraph pg = prepare_graph(model, m);
    Tensor h0 = matmul(x, model.input_projection);
    Tensor h = h0;
    for (int l = 0; l < 3; ++l) h = layer_forward(model, l, pg, h);
    for (std::size_t i = 0; i < h.values().size(); ++i)
        CHECK(h.values()[i] == Approx(h0.values()[i]).margin(1e-6));
}

TEST_CASE("zero layers are rejected") {
    ModelConfig c = small_config(8, 2, 0);
    CHECK_THROWS_AS(DshgtModel::init(tiny_registry(), c, 1), ConfigError);
}

TEST_CASE("empty graphs are rejected") {
    TypeRegistry reg = tiny_registry();
    MethodCpg m;
    m.graph = Cpg(reg);
    DshgtModel model = DshgtModel::init(reg, small_config(), 1);
    CHECK_THROWS_AS(prepare_graph(model, m), GraphError);
}

TEST_CASE("graphs with unknown types are rejected with a listing") {
    TypeRegistry big = tiny_registry();
    big.add_node_type("EXOTIC");
    Cpg g(big);
    CpgNode n;
    n.id = 1;
    n.node_type = big.node_type_checked("EXOTIC");
    g.add_node(n);
    MethodCpg m;
    m.method_node = 1;
    m.graph = g;
    DshgtModel model = DshgtModel::init(tiny_registry(), small_config(), 1);
    CHECK_THROWS_WITH(prepare_graph(model, m),
                      Catch::Matchers::ContainsSubstring("EXOTIC"));
}

TEST_CASE("fused loss honors the weighting identities") {
    Tensor logits = Tensor::from({2}, {0.3f, -0.2f});
    Tensor sup = Tensor::scalar(0.5f);
    Tensor main_only = fused_loss(logits, 1, std::nullopt, 0.2f);
    CHECK(main_only.item() == cross_entropy(logits, 1).item());

    CHECK(fused_loss(logits, 1, sup, 0.0f).item() == cross_entropy(logits, 1).item());
    CHECK(fused_loss(logits, 1, sup, 1.0f).item() == Approx(0.5f));

    Tensor main_one = Tensor::scalar(1.0f);
    Tensor combo = add(scalar_mul(main_one, 0.8f), scalar_mul(sup, 0.2f));
    CHECK(combo.item() == Approx(0.9f).margin(1e-6));

    CHECK_THROWS_AS(fused_loss(logits, 1, sup, 1.5f), ConfigError);
    CHECK_THROWS_AS(fused_loss(logits, 1, sup, -0.1f), ConfigError);
}

TEST_CASE("homogeneous mode shares parameters and shrinks the model") {
    TypeRegistry reg = tiny_registry();
    ModelConfig heter_cfg = small_config(8, 2, 2);
    DshgtModel heter = DshgtModel::init(reg, heter_cfg, 5);
    DshgtModel homo = homogeneous_mode(heter);
    CHECK(homo.parameter_count() < heter.parameter_count());

    ModelConfig homo_cfg = heter_cfg;
    homo_cfg.homogeneous = true;
    DshgtModel fresh = DshgtModel::init(reg, homo_cfg, 5);
    CHECK(fresh.parameter_count() == homo.parameter_count());

    Cpg g(reg);
    auto add = [&](NodeId id, const char* t) {
        CpgNode n;
        n.id = id;
        n.node_type = reg.node_type_checked(t);
        g.add_node(n);
    };
    add(1, "Y");
    add(2, "Z");
    add(3, "X");
    g.add_edge({1, 3, reg.edge_type_checked("P"), ""});
    g.add_edge({2, 3, reg.edge_type_checked("Q"), ""});
    MethodCpg m;
    m.method_node = 3;
    m.graph = g;
    Tensor h_prev = random_features(3, 8, 5);
    for (std::int64_t j = 0; j < 8; ++j)
        h_prev.values_mut()[8 + static_cast<std::size_t>(j)] =
            h_prev.values()[static_cast<std::size_t>(j)];
    Tensor attn = attention_weights(fresh, 0, m, h_prev, 3);
    REQUIRE(attn.shape() == Shape{2, 2});
    for (std::int64_t head = 0; head < 2; ++head)
        CHECK(attn.at(0, head) == Approx(attn.at(1, head)).margin(1e-6));
}

TEST_CASE("full model gradients match finite differences on a small graph") {
    TypeRegistry reg = tiny_registry();
    MethodCpg m = random_method(reg, 4, 6, 5150);
    ModelConfig c = small_config(4, 2, 1);
    DshgtModel model = DshgtModel::init(reg, c, 31);
    Tensor x = random_features(4, 4, 33);
    PreparedGraph pg = prepare_graph(model, m);

    std::vector<Tensor> params;
    params.push_back(x);
    for (auto& [name, t] : model.named_parameters()) params.push_back(t);
    auto f = [&](const std::vector<Tensor>&) {
        ForwardResult r = forward(model, pg, params[0]);
        return cross_entropy(r.logits, 1);
    };
    GradCheckReport rep = grad_check(f, params, 1e-3);
    CAPTURE(rep.max_rel_error, rep.checked, rep.excluded);
    CHECK(rep.pass);
    CHECK(rep.checked > 100);
}
