#include "cacl/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "cacl/errors.hpp"

namespace cacl {

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    if (n == 0) {
        throw ContractError("Rng::uniform_int: n must be positive");
    }
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        std::uint64_t r = engine_();
        if (r >= threshold) {
            return r % n;
        }
    }
}

double Rng::normal(double mean, double stddev) {
    // u1 in (0, 1] so the log is finite.
    double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform01();
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return mean + stddev * z;
}

int Rng::categorical(std::span<const double> weights) {
    if (weights.empty()) {
        throw ContractError("Rng::categorical: empty weight vector");
    }
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0 || !std::isfinite(w)) {
            throw ContractError("Rng::categorical: weights must be finite and non-negative");
        }
        total += w;
    }
    if (total <= 0.0) {
        throw ContractError("Rng::categorical: weights sum to zero");
    }
    double u = uniform01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) {
            return static_cast<int>(i);
        }
    }
    return static_cast<int>(weights.size() - 1);
}

std::string Rng::serialize() const {
    std::ostringstream out;
    out << engine_;
    return out.str();
}

Rng Rng::deserialize(const std::string& text) {
    Rng rng;
    std::istringstream in(text);
    in >> rng.engine_;
    if (!in) {
        throw IoError("Rng::deserialize: malformed engine state");
    }
    return rng;
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
} // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
    std::uint64_t h = splitmix64(base);
    h = splitmix64(h ^ (0xa0761d6478bd642fULL + stream));
    h = splitmix64(h ^ (0xe7037ed1a0b428dbULL + index));
    return h;
}

} // namespace cacl
