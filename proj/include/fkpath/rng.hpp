#pragma once

#include <cstdint>
#include <random>

namespace fkpath {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

using Stream = std::mt19937_64;

// One independent engine per (seed, index). Nothing global.
class RngPolicy {
public:
    explicit RngPolicy(std::uint64_t master_seed = 0) : seed_(master_seed) {}

    std::uint64_t master_seed() const { return seed_; }

    Stream stream(std::uint64_t index) const {
        const std::uint64_t a = splitmix64(seed_);
        const std::uint64_t b = splitmix64(a ^ splitmix64(index + 0x632be59bd9b4e019ULL));
        std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                          static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                          static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
        return Stream(seq);
    }

private:
    std::uint64_t seed_;
};

// Fresh distribution each call site; libstdc++ caches a spare deviate inside
// normal_distribution, so sharing one across streams would couple them.
template <class Fill>
inline void fill_normals(Stream& rng, Fill&& put, std::size_t n) {
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) put(i, nd(rng));
}

}  // namespace fkpath
