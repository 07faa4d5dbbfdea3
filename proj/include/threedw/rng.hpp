#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace threedw {

using Engine = std::mt19937_64;

// Independent engine for (master seed, stream index). Streams are derived
// through std::seed_seq so neighbouring indices are decorrelated.
Engine derive_stream(std::uint64_t master_seed, std::uint64_t stream);

// Stream keyed by a textual label (candidate id, file name, ...).
Engine derive_stream(std::uint64_t master_seed, std::string_view label);

// Uniform double in [0,1) using the top 53 bits of one engine draw.
inline double uniform01(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Engine& eng, double p) { return uniform01(eng) < p; }

// Index drawn from a discrete distribution given by non-negative weights
// summing to one. The last positive entry absorbs rounding slack.
std::size_t sample_index(Engine& eng, std::span<const double> probs);

} // namespace threedw
