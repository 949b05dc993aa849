#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dshgt {

inline constexpr const char* kCpgFormatVersion = "dshgt-cpg/1";
inline constexpr const char* kCheckpointFormatVersion = "dshgt-ckpt/1";

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Graph structure violations: duplicate ids, dangling endpoints, unknown types.
struct GraphError : Error {
    using Error::Error;
};

// Lexical/syntax errors from the mini-C frontend; message carries file:line.
struct ParseError : Error {
    using Error::Error;
};

// Manifest / CPG document / checkpoint format violations.
struct SchemaError : Error {
    using Error::Error;
};

// Tensor shape incompatibilities; message reports both shapes.
struct ShapeError : Error {
    using Error::Error;
};

// Non-finite losses, failed gradient verification and the like.
struct NumericError : Error {
    using Error::Error;
};

// Invalid configuration values (lambda out of range, zero layers, ...).
struct ConfigError : Error {
    using Error::Error;
};

// FNV-1a, used wherever a hash must be identical across runs and machines.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a_bytes(const void* data, std::size_t n,
                                 std::uint64_t h = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

// Deterministic RNG. mt19937_64 output is pinned by the standard; the helpers
// below avoid std::uniform_*_distribution, whose mapping is implementation
// defined, so streams are reproducible across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        // Rejection sampling keeps the distribution exact.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace dshgt
