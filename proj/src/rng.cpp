#include "threedw/rng.hpp"

#include <vector>

namespace threedw {

Engine derive_stream(std::uint64_t master_seed, std::uint64_t stream) {
    std::seed_seq seq{
        static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
        static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x3d3du};
    return Engine(seq);
}

Engine derive_stream(std::uint64_t master_seed, std::string_view label) {
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(master_seed),
                                     static_cast<std::uint32_t>(master_seed >> 32), 0x1abe1u};
    for (unsigned char c : label) words.push_back(c);
    std::seed_seq seq(words.begin(), words.end());
    return Engine(seq);
}

std::size_t sample_index(Engine& eng, std::span<const double> probs) {
    const double u = uniform01(eng);
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) continue;
        last_positive = i;
        acc += probs[i];
        if (u < acc) return i;
    }
    return last_positive;
}

} // namespace threedw
