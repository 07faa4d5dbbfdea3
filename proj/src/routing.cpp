#include "threedw/routing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "threedw/rng.hpp"

namespace threedw {

namespace {

double binomial(std::size_t n, std::size_t k) {
    double c = 1.0;
    for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(c);
}

SelectionResult rank(std::vector<std::pair<std::string, EtxEstimate>> scored) {
    // Unreachable last, then score, then id.
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        const auto& va = a.second.value;
        const auto& vb = b.second.value;
        if (va.has_value() != vb.has_value()) return va.has_value();
        if (va && *va != *vb) return *va < *vb;
        return a.first < b.first;
    });
    SelectionResult res;
    res.ranking = std::move(scored);
    if (!res.ranking.empty()) {
        res.score = res.ranking.front().second;
        if (res.score.reachable()) res.chosen = res.ranking.front().first;
    }
    return res;
}

} // namespace

EtxEstimate betx_approx(const TupleDistribution& td, std::size_t budget, std::uint64_t seed) {
    if (budget == 0) throw std::invalid_argument("sampling budget must be at least 1");
    OpCounter ops;
    EtxEstimate out;
    out.model = Model::Approx3DW;
    out.metric = Metric::betx;
    const std::size_t n = td.receivers();
    const auto marg = td.marginals();
    if (std::any_of(marg.begin(), marg.end(), [](double m) { return m <= 0.0; })) return out;

    const auto bd = tuple_to_bitmap_distribution(td, &ops);
    const auto e = subset_loss_probabilities(bd, &ops);
    const std::uint32_t full = (1u << n) - 1;

    std::vector<std::vector<std::uint32_t>> by_size(n + 1);
    for (std::uint32_t s = 1; s <= full; ++s) by_size[static_cast<std::size_t>(std::popcount(s))].push_back(s);

    Engine eng = derive_stream(seed, std::uint64_t{0});
    double total = 0.0;
    bool sampled = false;
    for (std::size_t m = 1; m <= n; ++m) {
        auto& subsets = by_size[m];
        double inner = 0.0;
        if (budget >= subsets.size()) {
            for (auto s : subsets) inner += 1.0 / (1.0 - e[s]);
            ops.add(3 * subsets.size());
        } else {
            sampled = true;
            // Partial Fisher-Yates: the first `budget` slots become a uniform
            // sample without replacement.
            for (std::size_t i = 0; i < budget; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, subsets.size() - 1);
                std::swap(subsets[i], subsets[pick(eng)]);
                inner += 1.0 / (1.0 - e[subsets[i]]);
            }
            inner *= binomial(n, m) / static_cast<double>(budget);
            ops.add(3 * budget + 2);
        }
        total += (m % 2 == 1 ? 1.0 : -1.0) * inner;
        ops.add(2);
    }

    double floor_value = 1.0;
    for (std::size_t i = 0; i < n; ++i) floor_value = std::max(floor_value, 1.0 / (1.0 - e[1u << i]));
    out.value = total;
    if (sampled) {
        out.flagged = true;
        out.note = "subset sums sampled and rescaled by C(n,m)/|sample|";
        if (total < floor_value) {
            out.value = floor_value;
            out.note += "; clamped to worst single-link uETX";
        }
    }
    out.op_count = ops.arithmetic;
    out.probabilities = ops.probabilities;
    return out;
}

SelectionResult select_forwarder_set(const std::vector<Candidate>& candidates) {
    if (candidates.empty()) throw std::invalid_argument("no candidates to select from");
    std::vector<std::pair<std::string, EtxEstimate>> scored;
    for (const auto& c : candidates) scored.emplace_back(c.id, aetx_3dw(c.distribution));
    return rank(std::move(scored));
}

SelectionResult select_sender(const std::vector<Candidate>& candidates, std::size_t budget, std::uint64_t seed) {
    if (candidates.empty()) throw std::invalid_argument("no candidates to select from");
    std::vector<std::pair<std::string, EtxEstimate>> scored;
    for (const auto& c : candidates) {
        const std::uint64_t stream_seed = derive_stream(seed, std::string_view(c.id))();
        scored.emplace_back(c.id, betx_approx(c.distribution, budget, stream_seed));
    }
    return rank(std::move(scored));
}

DisseminationPlan greedy_dissemination(const std::vector<Candidate>& senders,
                                       const std::vector<std::string>& universe) {
    std::set<std::string> uncovered(universe.begin(), universe.end());
    DisseminationPlan plan;
    double total = 0.0;
    while (!uncovered.empty()) {
        struct Option {
            double ratio;
            std::string id;
            double betx;
            std::vector<std::string> covers;
        };
        std::optional<Option> best;
        for (const auto& s : senders) {
            std::vector<std::size_t> idx;
            std::vector<std::string> covers;
            const auto& order = s.distribution.receiver_order();
            for (std::size_t i = 0; i < order.size(); ++i)
                if (uncovered.count(order[i])) {
                    idx.push_back(i);
                    covers.push_back(order[i]);
                }
            if (idx.empty()) continue;
            const auto est = betx_3dw(s.distribution.restrict_to(idx));
            if (!est.value) continue;
            const double ratio = *est.value / static_cast<double>(idx.size());
            if (!best || ratio < best->ratio || (ratio == best->ratio && s.id < best->id))
                best = Option{ratio, s.id, *est.value, std::move(covers)};
        }
        if (!best) break;
        for (const auto& r : best->covers) uncovered.erase(r);
        total += best->betx;
        plan.steps.push_back({best->id, best->covers, best->betx});
    }
    if (uncovered.empty()) plan.total_expected_tx = total;
    else plan.uncovered.assign(uncovered.begin(), uncovered.end());
    return plan;
}

} // namespace threedw
