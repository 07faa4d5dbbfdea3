#pragma once

// Closed-form ETX estimators: the tuple-mixture (3DW) model and the
// PRR-only / correlation-aware baselines it is compared against.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "threedw/op_counter.hpp"
#include "threedw/trace_core.hpp"

namespace threedw {

enum class Model { ThreeDW, PrrOnlyA, Twc14, Tvt09, CorLayer, Unicast, Approx3DW };
enum class Metric { uetx, aetx, betx };

std::string_view model_name(Model m);
std::string_view metric_name(Metric m);
Model parse_model(std::string_view name);

struct EtxEstimate {
    Model model = Model::ThreeDW;
    Metric metric = Metric::uetx;
    std::optional<double> value; // nullopt = unreachable
    std::string receiver;        // set for per-receiver (unicast) estimates
    std::uint64_t op_count = 0;
    std::uint64_t probabilities = 0;
    // Set when the estimator had to fall back or approximate (CorLayer
    // independence fallback, rescaled subset sampling, clamping).
    bool flagged = false;
    std::string note;

    bool reachable() const { return value.has_value(); }
};

EtxEstimate uetx(double prr);

// Probability that every receiver loses a round:
// sum_t p(t) prod_i (1 - t_i).
double p_zero_star(const TupleDistribution& td, OpCounter* counter = nullptr);

EtxEstimate aetx_3dw(const TupleDistribution& td);

// e[S] for every receiver subset S (bitmask): probability that all receivers
// in S lose the same round. e[0] = 1.
std::vector<double> subset_loss_probabilities(const BitmapDistribution& bd,
                                              OpCounter* counter = nullptr);

// Per-size inclusion-exclusion inner sums: inner[m] = sum_{|S|=m} 1/(1-e_S),
// subsets visited in increasing bitmask order. inner[0] is unused.
std::vector<double> betx_inner_sums(const std::vector<double>& subset_loss, std::size_t n,
                                    OpCounter* counter = nullptr);

EtxEstimate betx_3dw(const TupleDistribution& td);

struct DirectBetx {
    EtxEstimate estimate;
    std::size_t k_max = 0;
    // Upper bound on the truncated mass, (k_max+1)/(1-e_max) times the union
    // bound on P(X > k_max).
    double residual_bound = 0.0;
    std::vector<double> tail; // P(X > k), k = 0..k_max
};

// Sum of k (P(X>k-1) - P(X>k)) for k = 1..k_max with P(X>k) expanded by
// inclusion-exclusion over subset losses raised to the k-th power.
DirectBetx betx_3dw_direct(const TupleDistribution& td, std::size_t k_max);

// Smallest k_max whose residual bound is below `tolerance` (capped at 10^7).
std::size_t direct_k_max_for(const TupleDistribution& td, double tolerance);

EtxEstimate aetx_prr_only(std::span<const double> prrs);

// Union inclusion-exclusion over joint "all of f receive" probabilities,
// each marginalized from the bitmap table.
EtxEstimate aetx_twc14(const BitmapDistribution& bd);
// Same, starting from a tuple table; the bitmap expansion is counted.
EtxEstimate aetx_twc14(const TupleDistribution& td);

EtxEstimate betx_tvt09(std::span<const double> prrs);

// Receivers sorted by descending PRR (ties by index); term j conditions on
// all earlier receivers having received.
EtxEstimate betx_corlayer(const BitmapDistribution& bd, std::span<const double> prrs);

// Arithmetic operations an estimator consumes on a synthetic table with n
// receivers and `tuple_count` distinct tuples (instrumented run).
std::uint64_t count_operations(Model model, Metric metric, std::size_t n, std::size_t tuple_count);

// Deterministic table of `tuple_count` distinct 5-level tuples with uniform
// weights; used for operation accounting.
TupleDistribution synthetic_table(std::size_t n, std::size_t tuple_count);

// Every estimator applicable to a tuple table, in a fixed order:
// UNICAST per receiver, 3DW/PRR_ONLY_A/TWC14 aETX, 3DW/TVT09/CORLAYER bETX.
std::vector<EtxEstimate> evaluate_all(const TupleDistribution& td);

} // namespace threedw
