#pragma once

// Double-level Markov trace simulator. The outer chain walks over clustered
// (aETX, bETX) performance states, one step per segment of windows; each
// outer state owns an inner chain over PRR tuples, one step per window.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "threedw/trace_core.hpp"

namespace threedw {

using Matrix = std::vector<std::vector<double>>;

inline constexpr std::size_t kDefaultK1 = 5;
inline constexpr std::size_t kDefaultSegmentLen = 20;
// Unreachable segment estimates are clamped to this many transmissions so
// they can take part in clustering.
inline constexpr double kPerfStateCap = 64.0;

struct PerfState {
    double aetx = 1.0;
    double betx = 1.0;
    bool operator==(const PerfState&) const = default;
};

struct Level1Model {
    std::vector<PerfState> states;
    Matrix transition;
    std::vector<double> initial;
};

struct Level2Model {
    std::vector<PrrTuple> tuple_states;
    Matrix transition;
    std::vector<double> initial;
};

struct DoubleMarkov {
    std::string sender_id = "S";
    std::vector<std::string> receiver_order;
    Level1Model level1;
    std::vector<Level2Model> level2; // indexed by level-1 state
    std::size_t window_len = kDefaultWindowLen;
    std::size_t segment_len = kDefaultSegmentLen;
    std::size_t grid_levels = kDefaultGridLevels;

    // Throws std::invalid_argument on non-stochastic rows, arity mismatch or
    // a level-1 state without an inner chain.
    void validate() const;
};

struct FitOptions {
    std::size_t k1 = kDefaultK1;
    std::size_t window_len = kDefaultWindowLen;
    std::size_t segment_len = kDefaultSegmentLen;
    std::size_t grid_levels = kDefaultGridLevels;
    std::uint64_t seed = 0;
    std::size_t max_iter = 100;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;
    auto operator<=>(const Point2&) const = default;
};

struct KMeansResult {
    std::vector<Point2> centers;
    std::vector<std::size_t> assignments;
    std::size_t iterations = 0;
};

// (aETX, bETX) of each complete segment of `segment_len` windows.
std::vector<PerfState> segment_performance_states(const TraceSet& ts, std::size_t segment_len,
                                                  std::size_t window_len,
                                                  std::size_t grid_levels = kDefaultGridLevels);

// Lloyd's algorithm with farthest-point seeding started at point
// `seed % size`. Centers are returned sorted lexicographically.
KMeansResult kmeans_cluster(std::span<const Point2> points, std::size_t k, std::uint64_t seed,
                            std::size_t max_iter = 100);

DoubleMarkov fit_double_markov(const TraceSet& ts, const FitOptions& options = {});

TraceSet generate_traces(const DoubleMarkov& dm, std::size_t rounds, std::uint64_t seed);

// Link-wise ablation: every receiver an independent Bernoulli source at its
// marginal PRR, no temporal or spatial structure.
TraceSet generate_independent_links(const std::vector<std::string>& receiver_order,
                                    std::span<const double> prrs, std::size_t rounds,
                                    std::uint64_t seed, std::string sender_id = "S");

// Bytes needed to store the model:
//   12 (window_len, segment_len, grid_levels as u32)
//   + k1 * 16 (level-1 states) + k1^2 * 8 + k1 * 8
//   + per level-1 state s: s_tuples * n (one grid index byte per PRR)
//     + s_tuples^2 * 8 + s_tuples * 8
std::size_t model_memory_footprint(const DoubleMarkov& dm);

// Stationary distribution of the level-1 chain mixed through each inner
// chain's stationary distribution: long-run per-receiver PRR.
std::vector<double> stationary_marginals(const DoubleMarkov& dm);

} // namespace threedw
