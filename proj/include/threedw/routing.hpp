#pragma once

// Lightweight routing decisions on top of the tuple-mixture estimators:
// forwarder-set and sender selection, sampled broadcast ETX, and a greedy
// dissemination planner.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "threedw/estimators.hpp"

namespace threedw {

struct Candidate {
    std::string id;
    TupleDistribution distribution; // over the candidate's receiver set
};

struct SelectionResult {
    std::optional<std::string> chosen; // nullopt when every candidate is unreachable
    EtxEstimate score;
    std::vector<std::pair<std::string, EtxEstimate>> ranking; // best first
};

// Broadcast ETX from at most `budget` randomly chosen receiver subsets per
// subset size. Each sampled inner sum is scaled by C(n,m)/|sample| so it is
// an unbiased estimate of the full sum. With budget >= max_m C(n,m) the
// result is the exact inclusion-exclusion value. Estimates are clamped
// below at the worst single-link uETX (flagged when that happens).
EtxEstimate betx_approx(const TupleDistribution& td, std::size_t budget, std::uint64_t seed);

// Scores each candidate by aETX computed from p_{0*} alone.
SelectionResult select_forwarder_set(const std::vector<Candidate>& candidates);

// Scores each candidate by betx_approx on a stream keyed by (seed, id).
SelectionResult select_sender(const std::vector<Candidate>& candidates, std::size_t budget,
                              std::uint64_t seed);

struct DisseminationStep {
    std::string sender;
    std::vector<std::string> newly_covered;
    double betx = 0.0;
};

struct DisseminationPlan {
    std::vector<DisseminationStep> steps;
    std::optional<double> total_expected_tx; // nullopt = universe cannot be covered
    std::vector<std::string> uncovered;      // left over when coverage failed
};

// Repeatedly picks the sender with the lowest bETX per newly covered
// receiver, restricted to still-uncovered receivers.
DisseminationPlan greedy_dissemination(const std::vector<Candidate>& senders,
                                       const std::vector<std::string>& universe);

} // namespace threedw
