#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>

namespace cacl {

// Deterministic random source. Distribution mapping is implemented by hand
// (instead of <random> distributions) so that streams are identical across
// standard libraries and serialize bitwise for checkpoint resume.
class Rng {
public:
    Rng() : engine_(0x9e3779b97f4a7c15ULL) {}
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n). Unbiased via rejection.
    std::uint64_t uniform_int(std::uint64_t n);

    // Standard normal via Box-Muller; draws two uniforms per call so the
    // stream has no hidden cached state.
    double normal(double mean = 0.0, double stddev = 1.0);

    // Index sampled from an unnormalized weight vector.
    int categorical(std::span<const double> weights);

    bool bernoulli(double p) { return uniform01() < p; }

    std::string serialize() const;
    static Rng deserialize(const std::string& text);

    bool operator==(const Rng& other) const { return engine_ == other.engine_; }

private:
    std::mt19937_64 engine_;
};

// Stable stream splitting: derives an independent seed from a base seed, a
// stream tag, and an index. Used so that e.g. environment episodes, action
// sampling, and evaluation never share a stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

} // namespace cacl
