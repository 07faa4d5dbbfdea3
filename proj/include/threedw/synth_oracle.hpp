#pragma once

// Synthetic joint-loss processes with tunable PRR, burstiness and spatial
// coupling, plus Monte Carlo ground truth for anycast/broadcast ETX.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "threedw/estimators.hpp"
#include "threedw/trace_core.hpp"

namespace threedw {

// Hidden two-state (good/bad) modulator shared by all receivers. Each round
// every marginal is multiplied by the current state's scale.
struct BurstModel {
    double p_stay_good = 1.0;
    double p_stay_bad = 1.0;
    double good_scale = 1.0;
    double bad_scale = 1.0;

    // Long-run fraction of rounds spent in the good state.
    double good_fraction() const;
};

struct SynthConfig {
    std::vector<double> marginals;
    double rho = 0.0;               // probability a round uses the shared-uniform branch
    std::optional<BurstModel> burst; // nullopt = memoryless
    std::size_t rounds = 100000;
    std::uint64_t seed = 0;

    std::size_t receivers() const { return marginals.size(); }
    void validate() const; // throws std::invalid_argument
};

struct OracleResult {
    std::optional<double> mean; // nullopt = unreachable
    double half_width_95 = 0.0;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
};

inline constexpr std::size_t kOracleRoundCap = 1'000'000;
// Trials are simulated in fixed blocks, each on its own derived stream, so
// the merged result does not depend on how blocks are spread over workers.
inline constexpr std::size_t kOracleBlock = 8192;

TraceSet generate_synthetic_traceset(const SynthConfig& cfg);

// Exact per-round joint distribution of a memoryless config as a tuple
// table: the independent branch is one tuple of marginals with weight
// 1 - rho, the shared-uniform branch contributes 0/1 tuples.
TupleDistribution analytic_tuple_distribution(const SynthConfig& cfg);

// Mean epoch length until at least one receiver / every receiver is
// covered, with a normal-approximation 95% half width
// 1.96 * sqrt(sample variance / trials).
OracleResult oracle_aetx(const SynthConfig& cfg, std::size_t trials, std::uint64_t seed,
                         std::size_t workers = 1);
OracleResult oracle_betx(const SynthConfig& cfg, std::size_t trials, std::uint64_t seed,
                         std::size_t workers = 1);

struct SweepOptions {
    std::vector<double> marginals;
    std::vector<double> rho_grid;
    std::optional<BurstModel> burst;
    std::size_t trials = 1'000'000;
    std::size_t rounds = 200'000;
    // Rounds per window when extracting the tuple table from each trace.
    std::size_t window_len = 1;
    std::size_t grid_levels = kDefaultGridLevels;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

struct SweepRow {
    double rho = 0.0;
    std::string model; // "<model>_<metric>", or LINK_CORRELATION
    std::optional<double> estimate;
    std::optional<double> oracle_mean;
    std::optional<double> oracle_ci95;
    std::optional<double> rel_error;
    std::optional<std::uint64_t> op_count;
};

std::vector<SweepRow> sweep_correlation(const SweepOptions& options);

// CSV with header rho,model,estimate,oracle_mean,oracle_ci95,rel_error,op_count.
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

// |estimate - truth| / truth.
double relative_error(double estimate, double truth);

} // namespace threedw
