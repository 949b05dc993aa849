#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dshgt/dataset.hpp"
#include "dshgt/decoder.hpp"
#include "dshgt/embedder.hpp"
#include "dshgt/metrics.hpp"
#include "dshgt/model.hpp"

namespace dshgt {

struct TrainConfig {
    double lr = 2e-3;
    float dropout = 0.5f;
    int batch = 64;
    int epochs = 50;
    std::int64_t heads = 4;
    std::int64_t layers = 3;
    float lambda = 0.2f;
    std::int64_t hidden_dim = 64;   // d
    std::int64_t feature_dim = 64;  // D
    std::uint64_t seed = 42;
    double split_ratio = 0.7;
    std::string embed_mode = "hash";      // hash | pv-dm
    std::string aggregate = "sum";        // sum | mean
    std::string classifier = "single";    // single | two-layer
    bool homogeneous = false;
    bool class_weighting = false;  // inverse-frequency loss weights, off by default
    std::int64_t max_len = 32;
    std::int64_t min_token_freq = 2;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

    void validate() const {
        if (lr < 0.0) throw ConfigError("learning rate must be nonnegative");
        if (batch < 1) throw ConfigError("batch size must be positive");
        if (epochs < 0) throw ConfigError("epoch count must be nonnegative");
        if (lambda < 0.0f || lambda > 1.0f) throw ConfigError("lambda must lie in [0,1]");
        if (split_ratio <= 0.0 || split_ratio >= 1.0)
            throw ConfigError("split ratio must lie strictly between 0 and 1");
        model_config().validate();
    }

    ModelConfig model_config() const {
        ModelConfig mc;
        mc.feature_dim = feature_dim;
        mc.hidden_dim = hidden_dim;
        mc.heads = heads;
        mc.layers = layers;
        mc.dropout = dropout;
        mc.lambda = lambda;
        mc.homogeneous = homogeneous;
        mc.aggregate = aggregate == "mean" ? AggregateKind::Mean : AggregateKind::Sum;
        mc.classifier =
            classifier == "two-layer" ? ClassifierKind::TwoLayer : ClassifierKind::SingleLayer;
        return mc;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["lr"] = lr;
        j["dropout"] = dropout;
        j["batch"] = batch;
        j["epochs"] = epochs;
        j["heads"] = heads;
        j["layers"] = layers;
        j["lambda"] = lambda;
        j["hidden_dim"] = hidden_dim;
        j["feature_dim"] = feature_dim;
        j["seed"] = seed;
        j["split_ratio"] = split_ratio;
        j["embed_mode"] = embed_mode;
        j["aggregate"] = aggregate;
        j["classifier"] = classifier;
        j["homogeneous"] = homogeneous;
        j["class_weighting"] = class_weighting;
        j["max_len"] = max_len;
        j["min_token_freq"] = min_token_freq;
        j["beta1"] = beta1;
        j["beta2"] = beta2;
        j["adam_eps"] = adam_eps;
        return j;
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        TrainConfig c;
        auto get = [&](const char* k, auto& field) {
            if (j.contains(k)) field = j[k].get<std::decay_t<decltype(field)>>();
        };
        get("lr", c.lr);
        get("dropout", c.dropout);
        get("batch", c.batch);
        get("epochs", c.epochs);
        get("heads", c.heads);
        get("layers", c.layers);
        get("lambda", c.lambda);
        get("hidden_dim", c.hidden_dim);
        get("feature_dim", c.feature_dim);
        get("seed", c.seed);
        get("split_ratio", c.split_ratio);
        get("embed_mode", c.embed_mode);
        get("aggregate", c.aggregate);
        get("classifier", c.classifier);
        get("homogeneous", c.homogeneous);
        get("class_weighting", c.class_weighting);
        get("max_len", c.max_len);
        get("min_token_freq", c.min_token_freq);
        get("beta1", c.beta1);
        get("beta2", c.beta2);
        get("adam_eps", c.adam_eps);
        return c;
    }
};

// Adaptive-moment optimizer with 64-bit state, fixed parameter order.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<Tensor> params, double lr, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        trainable_.assign(params_.size(), true);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(params_[i].values().size(), 0.0);
            v_[i].assign(params_[i].values().size(), 0.0);
        }
    }

    void set_trainable(const std::vector<bool>& mask) {
        if (mask.size() != params_.size())
            throw ConfigError("trainable mask size does not match parameter count");
        trainable_ = mask;
    }

    void zero_grad() {
        for (Tensor& p : params_) p.zero_grad();
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            if (!trainable_[i]) continue;
            auto& vals = params_[i].values_mut();
            const auto& grad = params_[i].grad();
            if (grad.empty()) continue;
            for (std::size_t k = 0; k < vals.size(); ++k) {
                const double g = grad[k];
                m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g;
                v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g * g;
                const double mhat = m_[i][k] / bc1;
                const double vhat = v_[i][k] / bc2;
                vals[k] = static_cast<float>(vals[k] - lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    // Root-mean-square gradient norm per parameter-name prefix, for
    // diagnostics when training blows up.
    static std::string grad_norms(const std::vector<std::pair<std::string, Tensor>>& named) {
        std::map<std::string, double> acc;
        std::map<std::string, std::int64_t> cnt;
        for (const auto& [name, t] : named) {
            std::string group = name.substr(0, name.find('.'));
            for (float g : t.grad()) acc[group] += double(g) * g;
            cnt[group] += t.numel();
        }
        std::string out;
        for (const auto& [group, sq] : acc) {
            if (!out.empty()) out += ", ";
            out += group + "=" + std::to_string(std::sqrt(sq / std::max<std::int64_t>(1, cnt[group])));
        }
        return out;
    }

private:
    std::vector<Tensor> params_;
    double lr_, beta1_, beta2_, eps_;
    std::vector<std::vector<double>> m_, v_;
    std::vector<bool> trainable_;
    std::int64_t t_ = 0;
};

// Everything needed to score new samples: model, decoder, embedder, config,
// and the registry the model was sized for (inside model.registry).
struct Pipeline {
    TrainConfig config;
    DshgtModel model;
    DecoderParams decoder;
    EmbeddingModel embedder;

    std::vector<std::pair<std::string, Tensor>> named_parameters() const {
        auto out = model.named_parameters();
        auto dec = decoder.named_parameters();
        out.insert(out.end(), dec.begin(), dec.end());
        return out;
    }
};

// Builds a fresh pipeline from the training split: embedder fitted on node
// documents, annotation vocabulary from training annotations only.
inline Pipeline build_pipeline(const TypeRegistry& registry,
                               const std::vector<Sample>& train_samples,
                               const TrainConfig& cfg) {
    cfg.validate();
    Pipeline p;
    p.config = cfg;
    std::vector<std::vector<std::string>> corpus;
    std::vector<std::vector<std::string>> annotations;
    for (const Sample& s : train_samples) {
        for (const CpgNode& n : s.method.graph.nodes())
            corpus.push_back(node_document(n, s.method.graph.registry()));
        if (!s.annotation.empty()) annotations.push_back(s.annotation);
    }
    if (corpus.empty()) corpus.push_back({"<empty>"});
    p.embedder = fit_embedding(corpus, cfg.feature_dim, cfg.seed, cfg.embed_mode);
    AnnotationVocab vocab = AnnotationVocab::build(annotations, cfg.min_token_freq, cfg.max_len);
    p.model = DshgtModel::init(registry, cfg.model_config(), cfg.seed);
    p.decoder = DecoderParams::init(std::move(vocab), cfg.hidden_dim, cfg.seed + 1);
    return p;
}

// Graph, features and labels resolved once; reused across epochs.
struct PreparedSample {
    PreparedGraph pg;
    Tensor x;
    int label = 0;
    std::vector<std::string> annotation;
};

inline PreparedSample prepare_sample(const Pipeline& p, const Sample& s) {
    PreparedSample ps;
    ps.pg = prepare_graph(p.model, s.method);
    ps.x = embed_nodes(p.embedder, s.method);
    ps.label = s.label;
    ps.annotation = s.annotation;
    return ps;
}

struct TrainResult {
    std::vector<double> epoch_losses;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t h = 1469598103934665603ull;
    for (std::uint64_t x : {a, b, c}) {
        h = fnv1a_bytes(&x, sizeof(x), h);
    }
    return h;
}

}  // namespace detail

// The optimization loop: shuffled batches (last partial kept), fused losses
// averaged per batch, adaptive-moment updates. `head_only` freezes everything
// outside the readout MLP and classifier (the transfer protocol).
inline TrainResult train(Pipeline& pipe, const std::vector<Sample>& samples,
                         bool head_only = false) {
    const TrainConfig& cfg = pipe.config;
    cfg.validate();
    if (samples.empty()) throw ConfigError("train: empty sample list");

    std::vector<PreparedSample> prepared;
    prepared.reserve(samples.size());
    for (const Sample& s : samples) prepared.push_back(prepare_sample(pipe, s));

    auto named = pipe.named_parameters();
    std::vector<Tensor> params;
    std::vector<bool> mask;
    for (const auto& [name, t] : named) {
        params.push_back(t);
        mask.push_back(!head_only || name.rfind("readout.", 0) == 0 ||
                       name.rfind("classifier.", 0) == 0);
    }
    AdamOptimizer opt(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
    opt.set_trainable(mask);

    // optional inverse-frequency class weights
    float w_pos = 1.0f, w_neg = 1.0f;
    if (cfg.class_weighting) {
        std::int64_t pos = 0;
        for (const Sample& s : samples) pos += s.label;
        const std::int64_t neg = static_cast<std::int64_t>(samples.size()) - pos;
        if (pos > 0 && neg > 0) {
            w_pos = static_cast<float>(samples.size()) / (2.0f * static_cast<float>(pos));
            w_neg = static_cast<float>(samples.size()) / (2.0f * static_cast<float>(neg));
        }
    }

    TrainResult result;
    std::vector<std::size_t> order(prepared.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(cfg.seed + static_cast<std::uint64_t>(epoch));
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t end = std::min(order.size(), start + cfg.batch);
            std::vector<Tensor> losses;
            losses.reserve(end - start);
            for (std::size_t k = start; k < end; ++k) {
                const PreparedSample& ps = prepared[order[k]];
                ForwardOptions fo;
                fo.training = true;
                fo.rng_seed = detail::mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch),
                                               static_cast<std::uint64_t>(order[k]));
                ForwardResult fr = forward(pipe.model, ps.pg, ps.x, fo);
                std::optional<Tensor> sup;
                if (!ps.annotation.empty() && cfg.lambda > 0.0f)
                    sup = teacher_forced_loss(pipe.decoder, fr.z_g, ps.annotation);
                Tensor loss = fused_loss(fr.logits, ps.label, sup, cfg.lambda);
                if (cfg.class_weighting)
                    loss = scalar_mul(loss, ps.label == 1 ? w_pos : w_neg);
                losses.push_back(std::move(loss));
            }
            Tensor batch_loss =
                scalar_mul(add_n(losses), 1.0f / static_cast<float>(losses.size()));
            const double loss_value = batch_loss.item();
            if (!std::isfinite(loss_value)) {
                opt.zero_grad();
                std::string norms;
                try {
                    backward(batch_loss);
                    norms = AdamOptimizer::grad_norms(named);
                } catch (const Error&) {
                    norms = "unavailable";
                }
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(start / cfg.batch) +
                                   "; grad norms: " + norms);
            }
            opt.zero_grad();
            backward(batch_loss);
            opt.step();
            epoch_loss += loss_value;
            ++batches;
        }
        result.epoch_losses.push_back(batches ? epoch_loss / static_cast<double>(batches) : 0.0);
    }
    return result;
}

struct EvalResult {
    Metrics metrics;
    std::vector<int> predictions;
    std::vector<double> prob_vulnerable;
};

// Frozen-model scoring: argmax over logits, dropout disabled.
inline EvalResult evaluate(const Pipeline& pipe, const std::vector<Sample>& samples) {
    if (samples.empty()) throw ConfigError("evaluate: empty sample list");
    NoGradGuard ng;
    EvalResult out;
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (const Sample& s : samples) {
        PreparedSample ps = prepare_sample(pipe, s);
        ForwardResult fr = forward(pipe.model, ps.pg, ps.x);
        Tensor probs = softmax(fr.logits, 0);
        const int pred = static_cast<int>(argmax(fr.logits));
        out.predictions.push_back(pred);
        out.prob_vulnerable.push_back(probs.at(1));
        if (pred == 1 && s.label == 1) ++tp;
        if (pred == 1 && s.label == 0) ++fp;
        if (pred == 0 && s.label == 0) ++tn;
        if (pred == 0 && s.label == 1) ++fn;
    }
    out.metrics = Metrics::from_counts(tp, fp, tn, fn);
    return out;
}

// Transfer protocol: freezes everything outside the readout MLP and the
// classifier, then fine-tunes for exactly `epochs` epochs on the new corpus.
inline TrainResult transfer_finetune(Pipeline& pipe, const std::vector<Sample>& samples,
                                     int epochs = 10) {
    TrainConfig saved = pipe.config;
    pipe.config.epochs = epochs;
    TrainResult result;
    try {
        result = train(pipe, samples, /*head_only=*/true);
    } catch (...) {
        pipe.config = saved;
        throw;
    }
    pipe.config = saved;
    return result;
}

}  // namespace dshgt
