#pragma once

#include <cstdint>

namespace threedw {

// Tally of work done by an estimator. `arithmetic` counts floating-point
// +, -, *, / and pow; `probabilities` counts distinct event probabilities the
// estimator had to evaluate (p_{0*}, a subset marginal, a joint pattern).
struct OpCounter {
    std::uint64_t arithmetic = 0;
    std::uint64_t probabilities = 0;

    void add(std::uint64_t ops = 1) { arithmetic += ops; }
    void probability(std::uint64_t count = 1) { probabilities += count; }
};

inline void count_ops(OpCounter* counter, std::uint64_t ops) {
    if (counter) counter->add(ops);
}

inline void count_probabilities(OpCounter* counter, std::uint64_t count = 1) {
    if (counter) counter->probability(count);
}

} // namespace threedw
