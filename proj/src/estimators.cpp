#include "threedw/estimators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace threedw {

namespace {

EtxEstimate make(Model model, Metric metric, std::optional<double> value, const OpCounter& ops) {
    EtxEstimate e;
    e.model = model;
    e.metric = metric;
    e.value = value;
    e.op_count = ops.arithmetic;
    e.probabilities = ops.probabilities;
    return e;
}

void check_prrs(std::span<const double> prrs) {
    if (prrs.empty()) throw std::invalid_argument("no PRR values given");
    if (prrs.size() > kMaxBitmapReceivers) throw std::invalid_argument("too many receivers");
    for (double p : prrs)
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("PRR outside [0,1]");
}

bool any_dead(const std::vector<double>& marginals) {
    return std::any_of(marginals.begin(), marginals.end(), [](double m) { return m <= 0.0; });
}

bool all_dead(const std::vector<double>& marginals) {
    return std::all_of(marginals.begin(), marginals.end(), [](double m) { return m <= 0.0; });
}

double sign_for(std::size_t set_size) { return (set_size % 2 == 1) ? 1.0 : -1.0; }

} // namespace

std::string_view model_name(Model m) {
    switch (m) {
    case Model::ThreeDW: return "3DW";
    case Model::PrrOnlyA: return "PRR_ONLY_A";
    case Model::Twc14: return "TWC14";
    case Model::Tvt09: return "TVT09";
    case Model::CorLayer: return "CORLAYER";
    case Model::Unicast: return "UNICAST";
    case Model::Approx3DW: return "APPROX_3DW";
    }
    return "?";
}

std::string_view metric_name(Metric m) {
    switch (m) {
    case Metric::uetx: return "uETX";
    case Metric::aetx: return "aETX";
    case Metric::betx: return "bETX";
    }
    return "?";
}

Model parse_model(std::string_view name) {
    for (Model m : {Model::ThreeDW, Model::PrrOnlyA, Model::Twc14, Model::Tvt09, Model::CorLayer,
                    Model::Unicast, Model::Approx3DW})
        if (model_name(m) == name) return m;
    throw std::invalid_argument("unknown model '" + std::string(name) + "'");
}

EtxEstimate uetx(double prr) {
    if (!(prr >= 0.0 && prr <= 1.0)) throw std::invalid_argument("PRR outside [0,1]");
    OpCounter ops;
    std::optional<double> v;
    if (prr > 0.0) {
        v = 1.0 / prr;
        ops.add();
    }
    return make(Model::Unicast, Metric::uetx, v, ops);
}

double p_zero_star(const TupleDistribution& td, OpCounter* counter) {
    const std::size_t n = td.receivers();
    double total = 0.0;
    for (const auto& [t, p] : td.entries()) {
        double all_lost = p;
        for (double v : t.values) all_lost *= (1.0 - v);
        total += all_lost;
        count_ops(counter, 2 * n + 1);
    }
    count_probabilities(counter);
    return std::clamp(total, 0.0, 1.0);
}

EtxEstimate aetx_3dw(const TupleDistribution& td) {
    OpCounter ops;
    const double p0 = p_zero_star(td, &ops);
    std::optional<double> v;
    if (!all_dead(td.marginals())) {
        v = 1.0 / (1.0 - p0);
        ops.add(2);
    }
    return make(Model::ThreeDW, Metric::aetx, v, ops);
}

std::vector<double> subset_loss_probabilities(const BitmapDistribution& bd, OpCounter* counter) {
    const std::size_t n = bd.receivers();
    const std::uint32_t full = (1u << n) - 1;
    std::vector<double> e(std::size_t{1} << n, 0.0);
    // Index by the set of receivers that lost the round, then take superset
    // sums so e[S] collects every pattern in which all of S lost.
    for (std::uint32_t b = 0; b <= full; ++b) e[full & ~b] = bd.probs()[b];
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t bit = 1u << i;
        for (std::uint32_t s = 0; s <= full; ++s)
            if (!(s & bit)) e[s] += e[s | bit];
    }
    count_ops(counter, n * (std::size_t{1} << (n - 1)));
    count_probabilities(counter, full);
    for (auto& x : e) x = std::clamp(x, 0.0, 1.0);
    return e;
}

std::vector<double> betx_inner_sums(const std::vector<double>& subset_loss, std::size_t n,
                                    OpCounter* counter) {
    std::vector<double> inner(n + 1, 0.0);
    const std::uint32_t full = (1u << n) - 1;
    for (std::uint32_t s = 1; s <= full; ++s) {
        inner[static_cast<std::size_t>(std::popcount(s))] += 1.0 / (1.0 - subset_loss[s]);
    }
    count_ops(counter, 3 * static_cast<std::uint64_t>(full));
    return inner;
}

EtxEstimate betx_3dw(const TupleDistribution& td) {
    OpCounter ops;
    const std::size_t n = td.receivers();
    if (any_dead(td.marginals())) return make(Model::ThreeDW, Metric::betx, std::nullopt, ops);
    const auto bd = tuple_to_bitmap_distribution(td, &ops);
    const auto e = subset_loss_probabilities(bd, &ops);
    const auto inner = betx_inner_sums(e, n, &ops);
    double total = 0.0;
    for (std::size_t m = 1; m <= n; ++m) total += sign_for(m) * inner[m];
    ops.add(2 * n);
    return make(Model::ThreeDW, Metric::betx, total, ops);
}

namespace {

double max_singleton_loss(const std::vector<double>& e, std::size_t n) {
    double e_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) e_max = std::max(e_max, e[1u << i]);
    return e_max;
}

double union_tail(const std::vector<double>& e, std::size_t n, std::size_t k) {
    double u = 0.0;
    for (std::size_t i = 0; i < n; ++i) u += std::pow(e[1u << i], static_cast<double>(k));
    return u;
}

} // namespace

std::size_t direct_k_max_for(const TupleDistribution& td, double tolerance) {
    const std::size_t n = td.receivers();
    if (any_dead(td.marginals())) throw std::invalid_argument("unreachable receiver: no finite k_max");
    const auto e = subset_loss_probabilities(tuple_to_bitmap_distribution(td));
    const double e_max = max_singleton_loss(e, n);
    if (e_max <= 0.0) return 1;
    constexpr std::size_t kCap = 10'000'000;
    for (std::size_t k = 1; k < kCap; k = k < 64 ? k + 1 : k + k / 8) {
        const double bound = union_tail(e, n, k) * static_cast<double>(k + 1) / (1.0 - e_max);
        if (bound < tolerance) return k;
    }
    return kCap;
}

DirectBetx betx_3dw_direct(const TupleDistribution& td, std::size_t k_max) {
    if (k_max == 0) throw std::invalid_argument("k_max must be at least 1");
    DirectBetx out;
    out.k_max = k_max;
    OpCounter ops;
    const std::size_t n = td.receivers();
    if (any_dead(td.marginals())) {
        out.estimate = make(Model::ThreeDW, Metric::betx, std::nullopt, ops);
        out.residual_bound = INFINITY;
        return out;
    }
    const auto bd = tuple_to_bitmap_distribution(td, &ops);
    const auto e = subset_loss_probabilities(bd, &ops);
    const std::uint32_t full = (1u << n) - 1;

    std::vector<double> power(full + 1, 1.0); // e_S^k
    out.tail.reserve(k_max + 1);
    out.tail.push_back(1.0); // P(X > 0)
    double expectation = 0.0;
    for (std::size_t k = 1; k <= k_max; ++k) {
        double not_all = 0.0;
        for (std::uint32_t s = 1; s <= full; ++s) {
            power[s] *= e[s];
            not_all += sign_for(static_cast<std::size_t>(std::popcount(s))) * power[s];
        }
        ops.add(2 * static_cast<std::uint64_t>(full));
        // Inclusion-exclusion cancellation leaves rounding noise of order
        // 1e-16; keep the tail a probability and non-increasing.
        not_all = std::clamp(not_all, 0.0, out.tail.back());
        expectation += static_cast<double>(k) * (out.tail.back() - not_all);
        ops.add(3);
        out.tail.push_back(not_all);
    }
    const double e_max = max_singleton_loss(e, n);
    out.residual_bound = e_max <= 0.0 ? 0.0
                                      : union_tail(e, n, k_max) * static_cast<double>(k_max + 1) /
                                            (1.0 - e_max);
    out.estimate = make(Model::ThreeDW, Metric::betx, expectation, ops);
    return out;
}

EtxEstimate aetx_prr_only(std::span<const double> prrs) {
    check_prrs(prrs);
    OpCounter ops;
    double all_lost = 1.0;
    for (double p : prrs) all_lost *= (1.0 - p);
    ops.add(2 * prrs.size());
    std::optional<double> v;
    if (std::any_of(prrs.begin(), prrs.end(), [](double p) { return p > 0.0; })) {
        v = 1.0 / (1.0 - all_lost);
        ops.add(2);
    }
    return make(Model::PrrOnlyA, Metric::aetx, v, ops);
}

namespace {

EtxEstimate twc14_from_bitmaps(const BitmapDistribution& bd, OpCounter ops) {
    const std::size_t n = bd.receivers();
    const std::uint32_t full = (1u << n) - 1;
    const auto& probs = bd.probs();
    double any_received = 0.0;
    for (std::uint32_t f = 1; f <= full; ++f) {
        // Pr(f): all members of f receive, whatever the others do.
        double joint = 0.0;
        for (std::uint32_t b = 0; b <= full; ++b) {
            if ((b & f) == f) {
                joint += probs[b];
                ops.add();
            }
        }
        ops.probability();
        any_received += sign_for(static_cast<std::size_t>(std::popcount(f))) * joint;
        ops.add(2);
    }
    std::optional<double> v;
    if (!all_dead(bd.marginals())) {
        v = 1.0 / std::clamp(any_received, 0.0, 1.0);
        ops.add();
    }
    return make(Model::Twc14, Metric::aetx, v, ops);
}

} // namespace

EtxEstimate aetx_twc14(const BitmapDistribution& bd) { return twc14_from_bitmaps(bd, OpCounter{}); }

EtxEstimate aetx_twc14(const TupleDistribution& td) {
    OpCounter ops;
    const auto bd = tuple_to_bitmap_distribution(td, &ops);
    return twc14_from_bitmaps(bd, ops);
}

EtxEstimate betx_tvt09(std::span<const double> prrs) {
    check_prrs(prrs);
    OpCounter ops;
    const std::size_t n = prrs.size();
    if (std::any_of(prrs.begin(), prrs.end(), [](double p) { return p <= 0.0; }))
        return make(Model::Tvt09, Metric::betx, std::nullopt, ops);
    const std::uint32_t full = (1u << n) - 1;
    double total = 0.0;
    for (std::uint32_t s = 1; s <= full; ++s) {
        double lost = 1.0;
        for (std::size_t i = 0; i < n; ++i)
            if (s & (1u << i)) {
                lost *= (1.0 - prrs[i]);
                ops.add(2);
            }
        total += sign_for(static_cast<std::size_t>(std::popcount(s))) / (1.0 - lost);
        ops.add(4);
    }
    return make(Model::Tvt09, Metric::betx, total, ops);
}

EtxEstimate betx_corlayer(const BitmapDistribution& bd, std::span<const double> prrs) {
    check_prrs(prrs);
    const std::size_t n = bd.receivers();
    if (prrs.size() != n) throw std::invalid_argument("PRR list does not match bitmap width");
    OpCounter ops;
    if (std::any_of(prrs.begin(), prrs.end(), [](double p) { return p <= 0.0; }))
        return make(Model::CorLayer, Metric::betx, std::nullopt, ops);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return prrs[a] > prrs[b]; });

    const auto& probs = bd.probs();
    const std::uint32_t full = (1u << n) - 1;
    double total = 1.0 / prrs[order[0]];
    ops.add();
    std::uint32_t received = 1u << order[0];
    bool fallback = false;
    for (std::size_t j = 1; j < n; ++j) {
        const std::uint32_t bit = 1u << order[j];
        double prior = 0.0, prior_and_lost = 0.0;
        for (std::uint32_t b = 0; b <= full; ++b) {
            if ((b & received) != received) continue;
            prior += probs[b];
            if (!(b & bit)) prior_and_lost += probs[b];
            ops.add(2);
        }
        ops.probability(2);
        double cond_loss;
        if (prior > 0.0) {
            cond_loss = prior_and_lost / prior;
        } else {
            cond_loss = 1.0 - prrs[order[j]];
            fallback = true;
        }
        total += cond_loss / prrs[order[j]];
        ops.add(3);
        received |= bit;
    }
    auto e = make(Model::CorLayer, Metric::betx, total, ops);
    if (fallback) {
        e.flagged = true;
        e.note = "conditioning event has probability 0; independence fallback used";
    }
    return e;
}

TupleDistribution synthetic_table(std::size_t n, std::size_t tuple_count) {
    if (n == 0 || tuple_count == 0) throw std::invalid_argument("need n >= 1 and tuple_count >= 1");
    const double limit = std::pow(5.0, static_cast<double>(n)) - 1.0;
    if (static_cast<double>(tuple_count) > limit)
        throw std::invalid_argument("more tuples requested than the 5-level grid holds");
    std::map<PrrTuple, double> entries;
    // Walk the grid from the all-ones corner downward, skipping the all-lost tuple.
    for (std::size_t j = 0; j < tuple_count; ++j) {
        PrrTuple t;
        std::size_t code = j;
        for (std::size_t i = 0; i < n; ++i) {
            t.values.push_back(static_cast<double>(4 - code % 5) / 4.0);
            code /= 5;
        }
        entries.emplace(std::move(t), 1.0 / static_cast<double>(tuple_count));
    }
    std::vector<std::string> order;
    for (std::size_t i = 0; i < n; ++i) order.push_back("R" + std::to_string(i + 1));
    return TupleDistribution(std::move(order), std::move(entries), kDefaultWindowLen);
}

std::uint64_t count_operations(Model model, Metric metric, std::size_t n, std::size_t tuple_count) {
    if (n == 0) throw std::invalid_argument("n must be at least 1");
    const auto td = synthetic_table(n, tuple_count);
    const auto prrs = td.marginals();
    switch (model) {
    case Model::ThreeDW: return metric == Metric::betx ? betx_3dw(td).op_count : aetx_3dw(td).op_count;
    case Model::Twc14: return aetx_twc14(td).op_count;
    case Model::PrrOnlyA: return aetx_prr_only(prrs).op_count;
    case Model::Tvt09: return betx_tvt09(prrs).op_count;
    case Model::CorLayer: return betx_corlayer(tuple_to_bitmap_distribution(td), prrs).op_count;
    case Model::Unicast: return uetx(prrs.front()).op_count;
    case Model::Approx3DW: break;
    }
    throw std::invalid_argument("operation counts for this model need a sampling budget");
}

std::vector<EtxEstimate> evaluate_all(const TupleDistribution& td) {
    std::vector<EtxEstimate> out;
    const auto prrs = td.marginals();
    for (std::size_t i = 0; i < prrs.size(); ++i) {
        auto u = uetx(std::clamp(prrs[i], 0.0, 1.0));
        u.receiver = td.receiver_order()[i];
        out.push_back(std::move(u));
    }
    const auto bd = tuple_to_bitmap_distribution(td);
    out.push_back(aetx_3dw(td));
    out.push_back(aetx_prr_only(prrs));
    out.push_back(aetx_twc14(td));
    out.push_back(betx_3dw(td));
    out.push_back(betx_tvt09(prrs));
    out.push_back(betx_corlayer(bd, prrs));
    return out;
}

} // namespace threedw
