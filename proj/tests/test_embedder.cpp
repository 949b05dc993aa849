#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dshgt/embedder.hpp"
#include "dshgt/minic/cpg_builder.hpp"
#include "support/test_graphs.hpp"

using namespace dshgt;
using Catch::Approx;

namespace {

double cosine(const Tensor& a, const Tensor& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        dot += double(a.at(i)) * b.at(i);
        na += double(a.at(i)) * a.at(i);
        nb += double(b.at(i)) * b.at(i);
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::vector<std::string>> small_corpus() {
    return {
        {"CALL", "VAR1", "=", "VAR2", "+", "1"},
        {"IDENTIFIER", "VAR1"},
        {"LITERAL", "1"},
        {"CALL", "VAR2", "=", "VAR1", "*", "2"},
        {"RETURN", "return", "VAR1", ";"},
        {"METHOD", "int", "METHOD1", "(", ")"},
    };
}

}  // namespace

TEST_CASE("code tokenizer splits words and punctuation") {
    auto toks = tokenize_code("VAR1 = readData(x) + 2.5;");
    std::vector<std::string> expect = {"VAR1", "=", "readData", "(", "x", ")",
                                       "+",    "2", ".",        "5", ";"};
    CHECK(toks == expect);
}

TEST_CASE("hash embedding of one token is stable and machine independent") {
    EmbeddingModel m = fit_embedding(small_corpus(), 64, 1, "hash");
    Tensor a = embed_document(m, {"VAR1"});
    Tensor b = embed_document(m, {"VAR1"});
    CHECK(a.values() == b.values());

    // oracle recomputation straight from the hash definition
    std::uint64_t h = fnv1a("VAR1");
    std::int64_t bucket = 1 + static_cast<std::int64_t>(h % 63ull);
    float sign = (h >> 63) ? -1.0f : 1.0f;
    CHECK(a.at(bucket) == Approx(sign));
    CHECK(a.at(0) == Approx(1.0f));

    EmbeddingModel fresh = fit_embedding({{"x"}}, 64, 999, "hash");
    CHECK(embed_document(fresh, {"VAR1"}).values() == a.values());
}

TEST_CASE("self-similarity is exactly one") {
    EmbeddingModel m = fit_embedding(small_corpus(), 32, 3, "hash");
    std::vector<std::string> doc = {"VAR1", "=", "VAR2", "+", "1"};
    CHECK(cosine(embed_document(m, doc), embed_document(m, doc)) == Approx(1.0));
}

TEST_CASE("pv-dm embeds identical documents identically") {
    EmbeddingModel m = fit_embedding(small_corpus(), 16, 7, "pv-dm");
    std::vector<std::string> doc = {"CALL", "VAR1", "=", "VAR2", "+", "1"};
    Tensor a = embed_document(m, doc);
    Tensor b = embed_document(m, doc);
    CHECK(a.values() == b.values());
    // model tables untouched by inference
    Tensor c = embed_document(m, {"RETURN", "return", "VAR1", ";"});
    CHECK(embed_document(m, doc).values() == a.values());
    (void)c;
}

TEST_CASE("pv-dm fitting is deterministic under the seed") {
    EmbeddingModel a = fit_embedding(small_corpus(), 16, 7, "pv-dm");
    EmbeddingModel b = fit_embedding(small_corpus(), 16, 7, "pv-dm");
    CHECK(a.token_vectors.values() == b.token_vectors.values());
    CHECK(a.output_weights.values() == b.output_weights.values());
    EmbeddingModel c = fit_embedding(small_corpus(), 16, 8, "pv-dm");
    CHECK(a.token_vectors.values() != c.token_vectors.values());
}

TEST_CASE("unknown tokens fall back to the UNK slot in pv-dm") {
    EmbeddingModel m = fit_embedding(small_corpus(), 16, 7, "pv-dm");
    Tensor a = embed_document(m, {"never_seen_token_a"});
    Tensor b = embed_document(m, {"never_seen_token_a"});
    CHECK(a.values() == b.values());
    for (float v : a.values()) CHECK(std::isfinite(v));
}

TEST_CASE("empty corpus is rejected") {
    CHECK_THROWS_AS(fit_embedding({}, 16, 1, "hash"), ConfigError);
    CHECK_THROWS_AS(fit_embedding(small_corpus(), 16, 1, "word2vec"), ConfigError);
}

TEST_CASE("feature matrix has one row per node in id order") {
    Cpg g = testing::make_two_method_graph();
    auto methods = slice_methods(g);
    const MethodCpg* work = nullptr;
    for (const auto& m : methods)
        if (m.method_node == 3) work = &m;
    REQUIRE(work != nullptr);
    REQUIRE(work->graph.nodes().size() == 9);

    EmbeddingModel em = fit_embedding(small_corpus(), 64, 5, "hash");
    Tensor x = embed_nodes(em, *work);
    CHECK(x.shape() == Shape{9, 64});
    for (float v : x.values()) CHECK(std::isfinite(v));
}

TEST_CASE("empty code yields a finite type-only vector") {
    TypeRegistry reg;
    Cpg g(reg);
    CpgNode n;
    n.id = 1;
    n.node_type = reg.node_type_checked("BLOCK");
    n.code = "";
    g.add_node(n);
    MethodCpg m;
    m.method_node = 1;
    m.graph = g;
    EmbeddingModel em = fit_embedding(small_corpus(), 16, 5, "hash");
    Tensor x = embed_nodes(em, m);
    REQUIRE(x.shape() == Shape{1, 16});
    double norm = 0;
    for (float v : x.values()) {
        CHECK(std::isfinite(v));
        norm += double(v) * v;
    }
    CHECK(norm > 0.0);  // the type token alone feeds the row
}

TEST_CASE("node insertion order does not affect the feature matrix") {
    TypeRegistry reg;
    Cpg a(reg), b(reg);
    TypeId t = reg.node_type_checked("IDENTIFIER");
    for (NodeId id : {1, 2, 3}) {
        CpgNode n;
        n.id = id;
        n.node_type = t;
        n.code = "v" + std::to_string(id);
        a.add_node(n);
    }
    for (NodeId id : {3, 1, 2}) {
        CpgNode n;
        n.id = id;
        n.node_type = t;
        n.code = "v" + std::to_string(id);
        b.add_node(n);
    }
    MethodCpg ma, mb;
    ma.graph = a;
    mb.graph = b;
    EmbeddingModel em = fit_embedding(small_corpus(), 16, 5, "hash");
    CHECK(embed_nodes(em, ma).values() == embed_nodes(em, mb).values());
}

TEST_CASE("hash rows of nonempty documents have positive norm") {
    EmbeddingModel em = fit_embedding(small_corpus(), 16, 5, "hash");
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> doc;
        std::size_t len = 1 + rng.uniform_int(6);
        for (std::size_t i = 0; i < len; ++i)
            doc.push_back("tok" + std::to_string(rng.uniform_int(50)));
        Tensor v = embed_document(em, doc);
        double norm = 0;
        for (float x : v.values()) norm += double(x) * x;
        CHECK(norm > 0.0);
    }
}

TEST_CASE("hash buckets distribute uniformly over a random vocabulary") {
    const std::int64_t dim = 64;
    const int n_tokens = 1000;
    Rng rng(77);
    std::vector<std::int64_t> bucket_counts(dim, 0);
    double sign_sum = 0;
    for (int i = 0; i < n_tokens; ++i) {
        std::string tok = "w" + std::to_string(rng.next_u64());
        std::uint64_t h = fnv1a(tok);
        bucket_counts[1 + static_cast<std::int64_t>(h % (dim - 1))]++;
        sign_sum += (h >> 63) ? -1.0 : 1.0;
    }
    // chi-square against uniform occupancy of the 63 usable buckets
    const double expect = double(n_tokens) / (dim - 1);
    double chi2 = 0;
    for (std::int64_t b = 1; b < dim; ++b) {
        double d = bucket_counts[b] - expect;
        chi2 += d * d / expect;
    }
    const double df = dim - 2;  // 62
    CHECK(chi2 <= df + 3.0 * std::sqrt(2.0 * df));
    // signs balance within 3 sigma of a fair coin
    CHECK(std::abs(sign_sum) <= 3.0 * std::sqrt(double(n_tokens)));
}

TEST_CASE("frontend documents embed end to end") {
    CpgBundle b = minic::parse_source(
        "t.c", "// increments the input\nint f(int x){ return x + 1; }");
    auto methods = slice_methods(b.graph, b.annotations);
    REQUIRE(methods.size() == 1);
    symbolize(methods[0]);

    std::vector<std::vector<std::string>> corpus;
    for (const CpgNode& n : methods[0].graph.nodes())
        corpus.push_back(node_document(n, methods[0].graph.registry()));
    EmbeddingModel em = fit_embedding(corpus, 32, 11, "pv-dm");
    Tensor x = embed_nodes(em, methods[0]);
    CHECK(x.dim(0) == static_cast<std::int64_t>(methods[0].graph.nodes().size()));
    CHECK(x.dim(1) == 32);
    for (float v : x.values()) CHECK(std::isfinite(v));
}
