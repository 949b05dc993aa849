#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dshgt/train.hpp"

namespace dshgt {

namespace detail {

inline void append_f32_le(std::string& out, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    out.push_back(static_cast<char>(u & 0xff));
    out.push_back(static_cast<char>((u >> 8) & 0xff));
    out.push_back(static_cast<char>((u >> 16) & 0xff));
    out.push_back(static_cast<char>((u >> 24) & 0xff));
}

inline float read_f32_le(const char* p) {
    const auto* b = reinterpret_cast<const unsigned char*>(p);
    std::uint32_t u = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
                      (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

// All payload tensors in serialization order: model, decoder, then fitted
// embedder tables.
inline std::vector<std::pair<std::string, Tensor>> payload_tensors(const Pipeline& pipe) {
    auto out = pipe.named_parameters();
    if (pipe.embedder.mode == "pv-dm") {
        out.emplace_back("embedder.token_vectors", pipe.embedder.token_vectors);
        out.emplace_back("embedder.output_weights", pipe.embedder.output_weights);
    }
    return out;
}

}  // namespace detail

// Binary checkpoint "dshgt-ckpt/1": one line of self-describing JSON metadata
// followed by the concatenated little-endian float payloads in header order.
inline void save_checkpoint(const Pipeline& pipe, const std::string& path) {
    auto tensors = detail::payload_tensors(pipe);

    std::string payload;
    for (const auto& [name, t] : tensors)
        for (float v : t.values()) detail::append_f32_le(payload, v);

    nlohmann::ordered_json header;
    header["version"] = kCheckpointFormatVersion;
    header["config"] = pipe.config.to_json();
    header["registry"] = {
        {"node_types", pipe.model.registry.node_type_names()},
        {"edge_types", pipe.model.registry.edge_type_names()},
    };
    header["vocab"] = {
        {"tokens", pipe.decoder.vocab.tokens},
        {"max_len", pipe.decoder.vocab.max_len},
        {"min_freq", pipe.decoder.vocab.min_freq},
    };
    header["embedder"] = {
        {"mode", pipe.embedder.mode},
        {"dim", pipe.embedder.dim},
        {"seed", pipe.embedder.seed},
        {"vocab_tokens", pipe.embedder.vocab_tokens},
    };
    nlohmann::ordered_json table = nlohmann::ordered_json::array();
    for (const auto& [name, t] : tensors) {
        nlohmann::ordered_json rec;
        rec["name"] = name;
        rec["shape"] = t.shape();
        table.push_back(std::move(rec));
    }
    header["tensors"] = std::move(table);
    header["payload_bytes"] = payload.size();
    header["payload_fnv1a"] = detail::hex64(fnv1a_bytes(payload.data(), payload.size()));

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw SchemaError("cannot write checkpoint: " + path);
    os << header.dump() << "\n" << payload;
}

inline Pipeline load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw SchemaError("cannot read checkpoint: " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    const std::size_t nl = text.find('\n');
    if (nl == std::string::npos) throw SchemaError("checkpoint: missing header line");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text.substr(0, nl));
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("checkpoint: invalid header: ") + e.what());
    }
    if (!header.contains("version") ||
        header["version"].get<std::string>() != kCheckpointFormatVersion)
        throw SchemaError("checkpoint: version mismatch, expected " +
                          std::string(kCheckpointFormatVersion));

    Pipeline pipe;
    pipe.config = TrainConfig::from_json(header["config"]);

    TypeRegistry registry{TypeRegistry::Empty{}};
    for (const auto& n : header["registry"]["node_types"])
        registry.add_node_type(n.get<std::string>());
    for (const auto& e : header["registry"]["edge_types"])
        registry.add_edge_type(e.get<std::string>());

    AnnotationVocab vocab;
    vocab.tokens = header["vocab"]["tokens"].get<std::vector<std::string>>();
    vocab.max_len = header["vocab"]["max_len"].get<std::int64_t>();
    vocab.min_freq = header["vocab"]["min_freq"].get<std::int64_t>();
    vocab.index.clear();
    for (std::size_t i = 0; i < vocab.tokens.size(); ++i)
        vocab.index.emplace(vocab.tokens[i], static_cast<std::int64_t>(i));

    pipe.embedder.mode = header["embedder"]["mode"].get<std::string>();
    pipe.embedder.dim = header["embedder"]["dim"].get<std::int64_t>();
    pipe.embedder.seed = header["embedder"]["seed"].get<std::uint64_t>();
    pipe.embedder.vocab_tokens =
        header["embedder"]["vocab_tokens"].get<std::vector<std::string>>();
    for (std::size_t i = 0; i < pipe.embedder.vocab_tokens.size(); ++i)
        pipe.embedder.vocab.emplace(pipe.embedder.vocab_tokens[i],
                                    static_cast<std::int64_t>(i));
    if (pipe.embedder.mode == "pv-dm") {
        const auto v = static_cast<std::int64_t>(pipe.embedder.vocab_tokens.size());
        pipe.embedder.token_vectors = Tensor::zeros({v, pipe.embedder.dim});
        pipe.embedder.output_weights = Tensor::zeros({v, pipe.embedder.dim});
    }

    pipe.model = DshgtModel::init(registry, pipe.config.model_config(), 0);
    pipe.decoder = DecoderParams::init(vocab, pipe.config.hidden_dim, 0);

    auto tensors = detail::payload_tensors(pipe);
    if (!header.contains("tensors") || header["tensors"].size() != tensors.size())
        throw SchemaError("checkpoint: tensor table does not match this format version");
    std::size_t expected_bytes = 0;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const auto& rec = header["tensors"][i];
        if (rec["name"].get<std::string>() != tensors[i].first)
            throw SchemaError("checkpoint: tensor order mismatch at " +
                              rec["name"].get<std::string>());
        Shape shape = rec["shape"].get<Shape>();
        if (shape != tensors[i].second.shape())
            throw SchemaError("checkpoint: shape mismatch for " + tensors[i].first + ": " +
                              shape_str(shape) + " vs " +
                              shape_str(tensors[i].second.shape()));
        expected_bytes += tensors[i].second.values().size() * 4;
    }

    const std::string payload = text.substr(nl + 1);
    if (payload.size() != expected_bytes ||
        payload.size() != header["payload_bytes"].get<std::size_t>())
        throw SchemaError("checkpoint: truncated payload (" + std::to_string(payload.size()) +
                          " bytes, expected " + std::to_string(expected_bytes) + ")");
    const std::string checksum = detail::hex64(fnv1a_bytes(payload.data(), payload.size()));
    if (checksum != header["payload_fnv1a"].get<std::string>())
        throw SchemaError("checkpoint: payload checksum failure");

    std::size_t off = 0;
    for (auto& [name, t] : tensors) {
        auto& vals = t.values_mut();
        for (float& v : vals) {
            v = detail::read_f32_le(payload.data() + off);
            off += 4;
        }
    }
    return pipe;
}

}  // namespace dshgt
