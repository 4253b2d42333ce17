#pragma once

#include <cstdint>

#include "rbsde/tree.hpp"

namespace testsupport {

// Deterministic generator for property batteries; identical on every platform.
struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    double uniform(double lo, double hi) {
        const double u = double(next() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }
};

inline rbsde::AdaptedProcess random_process(const rbsde::TreeModel& tree, SplitMix64& rng,
                                            double lo = -2.0, double hi = 2.0, int width = 1) {
    rbsde::AdaptedProcess out(tree, width);
    for (int k = 0; k <= tree.depth(); ++k)
        for (std::uint64_t v = 0; v < tree.node_count(k); ++v)
            for (int j = 0; j < width; ++j)
                out.at(k, v, j) = rng.uniform(lo, hi);
    return out;
}

inline std::vector<double> random_leaf_values(const rbsde::TreeModel& tree, SplitMix64& rng,
                                              double lo = -2.0, double hi = 2.0) {
    std::vector<double> out(tree.leaf_count());
    for (auto& v : out) v = rng.uniform(lo, hi);
    return out;
}

} // namespace testsupport
