#pragma once

#include <cstdint>
#include <random>

namespace pvae {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seedable generator. Same seed and same call sequence give the same
// stream; normal() always consumes exactly two uniforms (no cached spare).
class RngState {
public:
    explicit RngState(std::uint64_t seed) : gen_(splitmix64(seed)) {}

    double uniform() {  // [0, 1)
        return std::uniform_real_distribution<double>(0.0, 1.0)(gen_);
    }

    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    std::uint64_t next_u64() { return gen_(); }

    // Child stream derived from this one (advances this stream by one draw).
    RngState fork() { return RngState(next_u64()); }

    // Stream for a fixed sample index, independent of call order.
    static RngState indexed(std::uint64_t base, std::uint64_t index) {
        return RngState(splitmix64(base) ^ splitmix64(index + 0x51ed2701ULL));
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace pvae
