#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "dshgt/method_cpg.hpp"
#include "dshgt/tensor.hpp"

namespace dshgt {

// Splits a code snippet into identifier/number tokens and single-character
// punctuation tokens.
inline std::vector<std::string> tokenize_code(const std::string& code) {
    std::vector<std::string> out;
    std::size_t i = 0;
    auto is_word = [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
               c == '_';
    };
    while (i < code.size()) {
        char c = code[i];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            ++i;
            continue;
        }
        if (is_word(c)) {
            std::size_t start = i;
            while (i < code.size() && is_word(code[i])) ++i;
            out.push_back(code.substr(start, i - start));
        } else {
            out.push_back(std::string(1, c));
            ++i;
        }
    }
    return out;
}

// One node's textual document: its type name token followed by code tokens,
// so the initial features carry type awareness.
inline std::vector<std::string> node_document(const CpgNode& n, const TypeRegistry& reg) {
    std::vector<std::string> doc{reg.node_type_name(n.node_type)};
    for (std::string& t : tokenize_code(n.code)) doc.push_back(std::move(t));
    return doc;
}

// Initial node feature model. "hash" is training-free signed feature hashing
// (the default for tests); "pv-dm" trains a distributed-memory paragraph
// vector model deterministically under the seed.
struct EmbeddingModel {
    std::string mode = "hash";
    std::int64_t dim = 64;
    std::uint64_t seed = 0;

    // pv-dm state; empty in hash mode
    std::vector<std::string> vocab_tokens;  // index order, [0] = UNK
    std::unordered_map<std::string, std::int64_t> vocab;
    Tensor token_vectors;   // (V, dim)
    Tensor output_weights;  // (V, dim)

    static constexpr int kWindow = 2;
    static constexpr int kNegative = 5;
    static constexpr int kSweeps = 20;
    static constexpr double kLearningRate = 0.025;
};

namespace detail {

inline std::uint64_t doc_fingerprint(const std::vector<std::string>& tokens) {
    std::uint64_t h = 1469598103934665603ull;
    for (const std::string& t : tokens) {
        h = fnv1a(t, h);
        h = fnv1a("\x1f", h);
    }
    return h;
}

inline void hash_embed(const std::vector<std::string>& tokens, std::int64_t dim, float* out) {
    for (std::int64_t j = 0; j < dim; ++j) out[j] = 0.0f;
    if (tokens.empty()) return;
    // bucket 0 carries a constant bias so nonempty documents never hash to zero
    for (const std::string& t : tokens) {
        std::uint64_t h = fnv1a(t);
        std::int64_t bucket =
            1 + static_cast<std::int64_t>(h % static_cast<std::uint64_t>(dim - 1));
        float sign = (h >> 63) ? -1.0f : 1.0f;
        out[bucket] += sign;
        out[0] += 1.0f;
    }
    const float inv = 1.0f / static_cast<float>(tokens.size());
    for (std::int64_t j = 0; j < dim; ++j) out[j] *= inv;
}

// Negative-sampling step for one context/center pair. `out_w` may be null to
// freeze the output table (document inference).
inline void train_pair(const std::vector<float>& ctx, const float* out_r, float* out_w,
                       std::int64_t dim, std::int64_t center,
                       const std::vector<std::int64_t>& unigram, Rng& rng,
                       std::vector<float>& ctx_grad) {
    std::fill(ctx_grad.begin(), ctx_grad.end(), 0.0f);
    for (int k = 0; k <= EmbeddingModel::kNegative; ++k) {
        std::int64_t target;
        float label;
        if (k == 0) {
            target = center;
            label = 1.0f;
        } else {
            target = unigram[rng.uniform_int(unigram.size())];
            if (target == center) continue;
            label = 0.0f;
        }
        const float* w = out_r + target * dim;
        double dot = 0.0;
        for (std::int64_t j = 0; j < dim; ++j) dot += double(ctx[j]) * w[j];
        const float pred = static_cast<float>(1.0 / (1.0 + std::exp(-dot)));
        const float g = static_cast<float>((label - pred) * EmbeddingModel::kLearningRate);
        float* wm = out_w ? out_w + target * dim : nullptr;
        for (std::int64_t j = 0; j < dim; ++j) {
            ctx_grad[j] += g * w[j];
            if (wm) wm[j] += g * ctx[j];
        }
    }
}

// One PV-DM sweep over a document. `tok_w`/`out_w` null when the word and
// output tables are frozen.
inline void pvdm_doc_pass(std::int64_t dim, const float* tok_r, float* tok_w, const float* out_r,
                          float* out_w, const std::vector<std::int64_t>& ids, float* doc_vec,
                          const std::vector<std::int64_t>& unigram, Rng& rng) {
    std::vector<float> ctx(static_cast<std::size_t>(dim));
    std::vector<float> ctx_grad(static_cast<std::size_t>(dim));
    for (std::size_t pos = 0; pos < ids.size(); ++pos) {
        std::vector<std::int64_t> window;
        for (int off = -EmbeddingModel::kWindow; off <= EmbeddingModel::kWindow; ++off) {
            if (off == 0) continue;
            std::int64_t q = static_cast<std::int64_t>(pos) + off;
            if (q < 0 || q >= static_cast<std::int64_t>(ids.size())) continue;
            window.push_back(ids[static_cast<std::size_t>(q)]);
        }
        const float inv = 1.0f / static_cast<float>(window.size() + 1);
        for (std::int64_t j = 0; j < dim; ++j) ctx[static_cast<std::size_t>(j)] = doc_vec[j];
        for (std::int64_t w : window)
            for (std::int64_t j = 0; j < dim; ++j)
                ctx[static_cast<std::size_t>(j)] += tok_r[w * dim + j];
        for (float& c : ctx) c *= inv;

        train_pair(ctx, out_r, out_w, dim, ids[pos], unigram, rng, ctx_grad);

        for (std::int64_t j = 0; j < dim; ++j)
            doc_vec[j] += ctx_grad[static_cast<std::size_t>(j)];
        if (tok_w)
            for (std::int64_t w : window)
                for (std::int64_t j = 0; j < dim; ++j)
                    tok_w[w * dim + j] += ctx_grad[static_cast<std::size_t>(j)];
    }
}

inline std::vector<std::int64_t> to_ids(const EmbeddingModel& m,
                                        const std::vector<std::string>& tokens) {
    std::vector<std::int64_t> ids;
    ids.reserve(tokens.size());
    for (const std::string& t : tokens) {
        auto it = m.vocab.find(t);
        ids.push_back(it == m.vocab.end() ? 0 : it->second);  // 0 = UNK
    }
    return ids;
}

}  // namespace detail

// Fits the embedding model on tokenized node documents. Hash mode is
// training-free; pv-dm runs kSweeps deterministic passes.
inline EmbeddingModel fit_embedding(const std::vector<std::vector<std::string>>& corpus,
                                    std::int64_t dim, std::uint64_t seed,
                                    const std::string& mode = "hash") {
    if (corpus.empty()) throw ConfigError("fit_embedding: empty corpus");
    if (dim < 2) throw ConfigError("fit_embedding: dim must be at least 2");
    if (mode != "hash" && mode != "pv-dm")
        throw ConfigError("fit_embedding: unknown mode '" + mode + "'");
    EmbeddingModel m;
    m.mode = mode;
    m.dim = dim;
    m.seed = seed;
    if (mode == "hash") return m;

    // vocabulary by first occurrence, UNK reserved at 0
    m.vocab_tokens.push_back("<unk>");
    m.vocab.emplace("<unk>", 0);
    std::vector<std::int64_t> counts{0};
    for (const auto& doc : corpus) {
        for (const std::string& t : doc) {
            auto it = m.vocab.find(t);
            if (it == m.vocab.end()) {
                m.vocab.emplace(t, static_cast<std::int64_t>(m.vocab_tokens.size()));
                m.vocab_tokens.push_back(t);
                counts.push_back(1);
            } else {
                ++counts[static_cast<std::size_t>(it->second)];
            }
        }
    }
    const std::int64_t v = static_cast<std::int64_t>(m.vocab_tokens.size());

    Rng rng(seed);
    m.token_vectors = Tensor::zeros({v, dim});
    for (float& x : m.token_vectors.values_mut())
        x = static_cast<float>(rng.uniform(-0.5, 0.5) / static_cast<double>(dim));
    m.output_weights = Tensor::zeros({v, dim});

    // unigram^0.75 table for negative sampling
    std::vector<std::int64_t> unigram;
    for (std::int64_t w = 1; w < v; ++w) {
        auto reps = static_cast<std::int64_t>(
            std::ceil(std::pow(double(counts[static_cast<std::size_t>(w)]), 0.75)));
        for (std::int64_t r = 0; r < reps; ++r) unigram.push_back(w);
    }
    if (unigram.empty()) unigram.push_back(0);

    std::vector<std::vector<std::int64_t>> ids;
    ids.reserve(corpus.size());
    for (const auto& doc : corpus) ids.push_back(detail::to_ids(m, doc));
    std::vector<std::vector<float>> doc_vecs(corpus.size());
    for (auto& dv : doc_vecs) {
        dv.resize(static_cast<std::size_t>(dim));
        for (float& x : dv)
            x = static_cast<float>(rng.uniform(-0.5, 0.5) / static_cast<double>(dim));
    }
    float* tok = m.token_vectors.values_mut().data();
    float* out = m.output_weights.values_mut().data();
    for (int sweep = 0; sweep < EmbeddingModel::kSweeps; ++sweep)
        for (std::size_t dix = 0; dix < corpus.size(); ++dix)
            detail::pvdm_doc_pass(dim, tok, tok, out, out, ids[dix], doc_vecs[dix].data(),
                                  unigram, rng);
    return m;
}

// Embeds one document. Hash mode is stateless. pv-dm infers a fresh document
// vector against frozen tables, seeded by the document content, so identical
// documents embed identically and the model stays read-only.
inline Tensor embed_document(const EmbeddingModel& m, const std::vector<std::string>& tokens) {
    Tensor out = Tensor::zeros({m.dim});
    if (m.mode == "hash") {
        detail::hash_embed(tokens, m.dim, out.values_mut().data());
        return out;
    }
    if (m.token_vectors.numel() == 0) throw ConfigError("embed_document: model not fitted");
    std::vector<std::int64_t> ids = detail::to_ids(m, tokens);
    Rng rng(m.seed ^ detail::doc_fingerprint(tokens));
    std::vector<float> doc_vec(static_cast<std::size_t>(m.dim));
    for (float& x : doc_vec)
        x = static_cast<float>(rng.uniform(-0.5, 0.5) / static_cast<double>(m.dim));
    if (!ids.empty()) {
        std::vector<std::int64_t> unigram;
        for (std::int64_t w = 0; w < static_cast<std::int64_t>(m.vocab_tokens.size()); ++w)
            unigram.push_back(w);
        for (int sweep = 0; sweep < EmbeddingModel::kSweeps; ++sweep)
            detail::pvdm_doc_pass(m.dim, m.token_vectors.values().data(), nullptr,
                                  m.output_weights.values().data(), nullptr, ids,
                                  doc_vec.data(), unigram, rng);
    }
    std::copy(doc_vec.begin(), doc_vec.end(), out.values_mut().begin());
    return out;
}

// Initial feature matrix X for one method slice: one row per node in
// ascending node id order.
inline Tensor embed_nodes(const EmbeddingModel& m, const MethodCpg& method) {
    const Cpg& g = method.graph;
    std::vector<NodeId> ids = g.sorted_node_ids();
    Tensor x = Tensor::zeros({static_cast<std::int64_t>(ids.size()), m.dim});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        Tensor row = embed_document(m, node_document(g.node(ids[i]), g.registry()));
        std::copy(row.values().begin(), row.values().end(),
                  x.values_mut().begin() + static_cast<std::int64_t>(i) * m.dim);
    }
    return x;
}

}  // namespace dshgt
