#pragma once

// Multi-receiver reception traces and the distributions extracted from them.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "threedw/op_counter.hpp"

namespace threedw {

inline constexpr std::size_t kDefaultWindowLen = 4;
inline constexpr std::size_t kDefaultGridLevels = 5;
// Upper bound on receivers for anything that materializes a 2^n bitmap table.
inline constexpr std::size_t kMaxBitmapReceivers = 20;

struct ReceptionTrace {
    std::string receiver_id;
    std::vector<std::uint8_t> bits; // 1 = received in that round

    std::size_t receptions() const;
    double prr() const;
};

// One sender, N receivers, lockstep broadcast rounds.
class TraceSet {
public:
    TraceSet() = default;
    // Validates lockstep lengths, unique ids and binary symbols.
    TraceSet(std::string sender_id, std::vector<ReceptionTrace> traces);

    const std::string& sender_id() const { return sender_id_; }
    const std::vector<ReceptionTrace>& traces() const { return traces_; }
    std::size_t receivers() const { return traces_.size(); }
    std::size_t rounds() const { return rounds_; }
    std::vector<std::string> receiver_ids() const;

    // Bitmap of round r, bit i set when receiver i received.
    std::uint32_t round_bitmap(std::size_t r) const;

    // Copy with traces reordered so trace i is the former trace perm[i].
    TraceSet permuted(const std::vector<std::size_t>& perm) const;

private:
    std::string sender_id_;
    std::vector<ReceptionTrace> traces_;
    std::size_t rounds_ = 0;
};

struct PrrTuple {
    std::vector<double> values;

    std::size_t arity() const { return values.size(); }
    auto operator<=>(const PrrTuple&) const = default;
};

class TupleDistribution {
public:
    TupleDistribution() = default;
    // Probabilities must be in (0,1] and sum to one within 1e-9.
    TupleDistribution(std::vector<std::string> receiver_order, std::map<PrrTuple, double> entries,
                      std::size_t window_len);

    const std::vector<std::string>& receiver_order() const { return receiver_order_; }
    const std::map<PrrTuple, double>& entries() const { return entries_; }
    std::size_t window_len() const { return window_len_; }
    std::size_t receivers() const { return receiver_order_.size(); }

    // Per-receiver marginal reception probability, sum_t p(t) t_i.
    std::vector<double> marginals() const;

    // Distribution over the listed receiver indices only; equal projected
    // tuples are merged.
    TupleDistribution restrict_to(const std::vector<std::size_t>& indices) const;

    // Reorders receivers so receiver i becomes former receiver perm[i].
    TupleDistribution permuted(const std::vector<std::size_t>& perm) const;

private:
    std::vector<std::string> receiver_order_;
    std::map<PrrTuple, double> entries_;
    std::size_t window_len_ = 1;
};

// Dense table over the 2^n per-round reception patterns. Bit i of the index
// is receiver i (1 = received).
class BitmapDistribution {
public:
    BitmapDistribution() = default;
    BitmapDistribution(std::size_t n, std::vector<double> probs);

    std::size_t receivers() const { return n_; }
    const std::vector<double>& probs() const { return probs_; }
    double prob(std::uint32_t bitmap) const { return probs_.at(bitmap); }

    std::vector<double> marginals() const;

    // Empirical per-round pattern frequencies of a trace set.
    static BitmapDistribution from_traces(const TraceSet& ts);

private:
    std::size_t n_ = 0;
    std::vector<double> probs_;
};

// Left-to-right receiver order, '1' = received ("10" = first received only).
std::string bitmap_to_string(std::uint32_t bitmap, std::size_t n);
std::uint32_t bitmap_from_string(std::string_view text);

enum class EtxKind { unicast, anycast, broadcast };

struct EmpiricalEtx {
    EtxKind kind;
    double value;       // mean transmissions per delivery epoch
    std::size_t epochs; // completed epochs
};

// --- operations -----------------------------------------------------------

// Text trace format (see README): `#sender=S receivers=R1,R2` header then one
// comma-separated 0/1 row per round, or a plain CSV whose header row names
// the receiver columns.
TraceSet parse_trace_set(std::string_view content);
std::string format_trace_set(const TraceSet& ts);

// Raw per-window PRRs (received/window_len); the trailing partial window is
// dropped.
std::vector<PrrTuple> slice_windows(const TraceSet& ts, std::size_t window_len);

// Nearest of {i/(grid_levels-1)}, ties toward the larger level.
double quantize_prr(double value, std::size_t grid_levels);
PrrTuple quantize_tuple(const PrrTuple& t, std::size_t grid_levels);

TupleDistribution build_tuple_distribution(const std::vector<PrrTuple>& tuples,
                                           std::vector<std::string> receiver_order = {},
                                           std::size_t window_len = 1);

// Window, quantize and aggregate in one pass.
TupleDistribution extract_tuple_distribution(const TraceSet& ts,
                                             std::size_t window_len = kDefaultWindowLen,
                                             std::size_t grid_levels = kDefaultGridLevels);

// p_b = sum_t p(t) prod_i (b_i ? t_i : 1 - t_i), for all 2^n bitmaps.
BitmapDistribution tuple_to_bitmap_distribution(const TupleDistribution& td,
                                                OpCounter* counter = nullptr);

// Empirical ETX. std::nullopt means unreachable: the delivery condition is
// never met in the trace.
std::optional<EmpiricalEtx> measure_uetx(const ReceptionTrace& trace);
std::optional<EmpiricalEtx> measure_aetx(const TraceSet& ts);
std::optional<EmpiricalEtx> measure_betx(const TraceSet& ts);

// Pearson correlation of two binary sequences; nullopt if either is constant.
std::optional<double> link_correlation(const ReceptionTrace& a, const ReceptionTrace& b);

// Mean of the pairwise correlations that are defined; nullopt if none is.
std::optional<double> mean_pairwise_correlation(const TraceSet& ts);

} // namespace threedw
