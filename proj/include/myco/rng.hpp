#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <unordered_map>

#include "myco/vec2.hpp"

namespace myco {

// splitmix64 finaliser; used both as a mixer and as a seed expander.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable seed derivation: hash(master, role, index). Adding replicas or new
// roles never perturbs seeds already handed out.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view role, std::uint64_t index) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the role tag
    for (unsigned char c : role) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(master ^ h) ^ index);
}

// One reproducible stream of uniforms/normals. Normal variates come from an
// explicit Box-Muller so the draw sequence does not depend on the standard
// library's distribution implementation.
class Stream {
public:
    Stream() : engine_(0) {}
    explicit Stream(std::uint64_t seed) : engine_(seed) {}

    // uniform on (0,1]; never returns 0 so logs are safe
    double uniform() {
        const std::uint64_t bits = engine_() >> 11;  // 53 bits
        return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
    }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    // standard planar normal: exactly two uniforms per call
    Vec2 normal2() {
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double a = 2.0 * 3.14159265358979323846 * uniform();
        return {r * std::cos(a), r * std::sin(a)};
    }

private:
    std::mt19937_64 engine_;
};

// The randomness of one run: an event stream standing in for the Poisson
// measure (candidate times, marks, thetas) and one Brownian stream per label.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t master)
        : master_(master), events_(derive_seed(master, "events", 0)) {}

    std::uint64_t master() const { return master_; }

    Stream& events() { return events_; }

    Stream& noise(std::uint64_t label) {
        auto it = noise_.find(label);
        if (it == noise_.end()) {
            it = noise_.emplace(label, Stream(derive_seed(master_, "noise", label))).first;
        }
        return it->second;
    }

private:
    std::uint64_t master_;
    Stream events_;
    std::unordered_map<std::uint64_t, Stream> noise_;
};

}  // namespace myco
