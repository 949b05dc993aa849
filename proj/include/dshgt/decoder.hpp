#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "dshgt/tensor.hpp"

namespace dshgt {

// Token vocabulary for annotation sequences, built from training-split
// annotations only. Reserved slots: PAD=0, BOS=1, EOS=2, UNK=3.
struct AnnotationVocab {
    static constexpr std::int64_t kPad = 0;
    static constexpr std::int64_t kBos = 1;
    static constexpr std::int64_t kEos = 2;
    static constexpr std::int64_t kUnk = 3;

    std::vector<std::string> tokens;  // index order, starts with the reserved four
    std::unordered_map<std::string, std::int64_t> index;
    std::int64_t max_len = 32;
    std::int64_t min_freq = 2;

    static AnnotationVocab build(const std::vector<std::vector<std::string>>& annotations,
                                 std::int64_t min_freq = 2, std::int64_t max_len = 32) {
        AnnotationVocab v;
        v.max_len = max_len;
        v.min_freq = min_freq;
        v.tokens = {"<pad>", "<bos>", "<eos>", "<unk>"};
        for (std::size_t i = 0; i < v.tokens.size(); ++i)
            v.index.emplace(v.tokens[i], static_cast<std::int64_t>(i));
        // frequency filter with first-occurrence ordering
        std::vector<std::string> order;
        std::map<std::string, std::int64_t> counts;
        for (const auto& ann : annotations) {
            for (const std::string& t : ann) {
                if (++counts[t] == 1) order.push_back(t);
            }
        }
        for (const std::string& t : order) {
            if (counts[t] < min_freq || v.index.count(t)) continue;
            v.index.emplace(t, static_cast<std::int64_t>(v.tokens.size()));
            v.tokens.push_back(t);
        }
        return v;
    }

    std::int64_t size() const { return static_cast<std::int64_t>(tokens.size()); }

    std::int64_t lookup(const std::string& t) const {
        auto it = index.find(t);
        return it == index.end() ? kUnk : it->second;
    }
};

// Single-layer recurrent (LSTM) decoder that reconstructs annotation token
// sequences from the graph embedding.
struct DecoderParams {
    AnnotationVocab vocab;
    std::int64_t d = 0;  // hidden width, shared with the model width

    Tensor embedding;  // (V, d)
    Tensor w_xi, w_hi, b_i;
    Tensor w_xf, w_hf, b_f;
    Tensor w_xo, w_ho, b_o;
    Tensor w_xg, w_hg, b_g;
    Tensor out_w, out_b;   // (d, V), (V)
    Tensor init_proj;      // (d, 2d): maps z_G to the initial (h0, c0)

    static DecoderParams init(AnnotationVocab vocab, std::int64_t d, std::uint64_t seed) {
        DecoderParams p;
        p.vocab = std::move(vocab);
        p.d = d;
        Rng rng(seed);
        const std::int64_t v = p.vocab.size();
        p.embedding = xavier_uniform({v, d}, v, d, rng);
        auto gate = [&](Tensor& wx, Tensor& wh, Tensor& b) {
            wx = xavier_uniform({d, d}, d, d, rng);
            wh = xavier_uniform({d, d}, d, d, rng);
            b = Tensor::zeros({d}, true);
        };
        gate(p.w_xi, p.w_hi, p.b_i);
        gate(p.w_xf, p.w_hf, p.b_f);
        gate(p.w_xo, p.w_ho, p.b_o);
        gate(p.w_xg, p.w_hg, p.b_g);
        p.out_w = xavier_uniform({d, v}, d, v, rng);
        p.out_b = Tensor::zeros({v}, true);
        p.init_proj = xavier_uniform({d, 2 * d}, d, 2 * d, rng);
        return p;
    }

    std::vector<std::pair<std::string, Tensor>> named_parameters() const {
        return {
            {"decoder.embedding", embedding}, {"decoder.w_xi", w_xi}, {"decoder.w_hi", w_hi},
            {"decoder.b_i", b_i},             {"decoder.w_xf", w_xf}, {"decoder.w_hf", w_hf},
            {"decoder.b_f", b_f},             {"decoder.w_xo", w_xo}, {"decoder.w_ho", w_ho},
            {"decoder.b_o", b_o},             {"decoder.w_xg", w_xg}, {"decoder.w_hg", w_hg},
            {"decoder.b_g", b_g},             {"decoder.out_w", out_w}, {"decoder.out_b", out_b},
            {"decoder.init_proj", init_proj},
        };
    }
};

namespace detail {

struct LstmState {
    Tensor h, c;  // each (1, d)
};

inline LstmState lstm_step(const DecoderParams& p, const Tensor& x, const LstmState& s) {
    Tensor i = sigmoid(add_rowvec(add(matmul(x, p.w_xi), matmul(s.h, p.w_hi)), p.b_i));
    Tensor f = sigmoid(add_rowvec(add(matmul(x, p.w_xf), matmul(s.h, p.w_hf)), p.b_f));
    Tensor o = sigmoid(add_rowvec(add(matmul(x, p.w_xo), matmul(s.h, p.w_ho)), p.b_o));
    Tensor g = tanh_op(add_rowvec(add(matmul(x, p.w_xg), matmul(s.h, p.w_hg)), p.b_g));
    Tensor c = add(mul(f, s.c), mul(i, g));
    Tensor h = mul(o, tanh_op(c));
    return {h, c};
}

inline LstmState initial_state(const DecoderParams& p, const Tensor& z_g) {
    auto halves = split(matmul(z_g, p.init_proj), 2, 1);
    return {halves[0], halves[1]};
}

inline Tensor step_logits(const DecoderParams& p, const Tensor& h) {
    return reshape(add_rowvec(matmul(h, p.out_w), p.out_b), {p.vocab.size()});
}

}  // namespace detail

// Teacher-forced sequence loss: inputs shifted right with BOS, mean token
// cross entropy over the target positions (targets framed with EOS).
inline Tensor teacher_forced_loss(const DecoderParams& p, const Tensor& z_g,
                                  const std::vector<std::string>& target) {
    if (target.empty()) throw ConfigError("teacher_forced_loss: empty target sequence");
    std::vector<std::int64_t> ids;
    for (const std::string& t : target) {
        if (static_cast<std::int64_t>(ids.size()) >= p.vocab.max_len) break;
        ids.push_back(p.vocab.lookup(t));
    }
    std::vector<std::int64_t> inputs{AnnotationVocab::kBos};
    inputs.insert(inputs.end(), ids.begin(), ids.end());
    std::vector<std::int64_t> labels = ids;
    labels.push_back(AnnotationVocab::kEos);

    detail::LstmState state = detail::initial_state(p, z_g);
    std::vector<Tensor> losses;
    losses.reserve(labels.size());
    for (std::size_t t = 0; t < labels.size(); ++t) {
        Tensor x = embedding_lookup(p.embedding, {inputs[t]});
        state = detail::lstm_step(p, x, state);
        losses.push_back(cross_entropy(detail::step_logits(p, state.h), labels[t]));
    }
    return scalar_mul(add_n(losses), 1.0f / static_cast<float>(losses.size()));
}

// Greedy argmax decoding from BOS until EOS or max_len tokens; a pure function
// of (params, z_g, max_len).
inline std::vector<std::string> generate(const DecoderParams& p, const Tensor& z_g,
                                         std::int64_t max_len) {
    NoGradGuard ng;
    detail::LstmState state = detail::initial_state(p, z_g);
    std::vector<std::string> out;
    std::int64_t cur = AnnotationVocab::kBos;
    for (std::int64_t step = 0; step < max_len; ++step) {
        Tensor x = embedding_lookup(p.embedding, {cur});
        state = detail::lstm_step(p, x, state);
        std::int64_t next = argmax(detail::step_logits(p, state.h));
        if (next == AnnotationVocab::kEos) break;
        out.push_back(p.vocab.tokens[static_cast<std::size_t>(next)]);
        cur = next;
    }
    return out;
}

}  // namespace dshgt
