#pragma once

#include <cstdint>
#include <random>

namespace sdfkit {

using Rng = std::mt19937_64;

// Independent generator for a named substream of a user seed.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream), std::uint32_t(stream >> 32)};
    return Rng(seq);
}

}  // namespace sdfkit
