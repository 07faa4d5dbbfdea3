#include "threedw/markov_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "threedw/errors.hpp"
#include "threedw/estimators.hpp"
#include "threedw/rng.hpp"

namespace threedw {

namespace {

void check_stochastic(const std::vector<double>& row, const char* what) {
    double sum = 0.0;
    for (double p : row) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(what) + ": entry outside [0,1]");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument(std::string(what) + ": row does not sum to 1");
}

void check_chain(const Matrix& transition, const std::vector<double>& initial, std::size_t states,
                 const char* what) {
    if (states == 0) throw std::invalid_argument(std::string(what) + ": no states");
    if (transition.size() != states || initial.size() != states)
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
    for (const auto& row : transition) {
        if (row.size() != states) throw std::invalid_argument(std::string(what) + ": ragged matrix");
        check_stochastic(row, what);
    }
    check_stochastic(initial, what);
}

double capped(const std::optional<double>& v) { return v ? std::min(*v, kPerfStateCap) : kPerfStateCap; }

PerfState perf_of(const std::vector<PrrTuple>& windows, std::size_t first, std::size_t count,
                  const std::vector<std::string>& order, std::size_t window_len) {
    std::vector<PrrTuple> seg(windows.begin() + static_cast<std::ptrdiff_t>(first),
                              windows.begin() + static_cast<std::ptrdiff_t>(first + count));
    const auto td = build_tuple_distribution(seg, order, window_len);
    return {capped(aetx_3dw(td).value), capped(betx_3dw(td).value)};
}

double dist2(const Point2& a, const Point2& b) {
    const double dx = a.x - b.x, dy = a.y - b.y;
    return dx * dx + dy * dy;
}

// Row-normalized counts plus one pseudo-count per row, spread over the
// columns by occupancy. A uniform pseudo-count per cell would hand sparse rows
// of a large tuple chain mostly to rarely seen tuples.
Matrix smoothed(const std::vector<std::vector<std::size_t>>& counts, const std::vector<double>& prior) {
    Matrix out(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double total =
            static_cast<double>(std::accumulate(counts[i].begin(), counts[i].end(), std::size_t{0})) + 1.0;
        for (std::size_t j = 0; j < counts[i].size(); ++j)
            out[i].push_back((static_cast<double>(counts[i][j]) + prior[j]) / total);
    }
    return out;
}

std::vector<double> frequencies(const std::vector<std::size_t>& counts) {
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
    std::vector<double> out;
    for (auto c : counts) out.push_back(static_cast<double>(c) / total);
    return out;
}

std::vector<double> stationary(const Matrix& transition, const std::vector<double>& start) {
    std::vector<double> pi = start;
    std::vector<double> next(pi.size());
    for (int iter = 0; iter < 100000; ++iter) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < pi.size(); ++i)
            for (std::size_t j = 0; j < pi.size(); ++j) next[j] += pi[i] * transition[i][j];
        // Average with the previous iterate so periodic chains converge too.
        double delta = 0.0;
        for (std::size_t j = 0; j < pi.size(); ++j) {
            const double v = 0.5 * (pi[j] + next[j]);
            delta = std::max(delta, std::abs(v - pi[j]));
            pi[j] = v;
        }
        if (delta < 1e-14) break;
    }
    return pi;
}

} // namespace

void DoubleMarkov::validate() const {
    if (receiver_order.empty()) throw std::invalid_argument("model has no receivers");
    if (window_len == 0 || segment_len == 0) throw std::invalid_argument("window and segment lengths must be positive");
    check_chain(level1.transition, level1.initial, level1.states.size(), "level-1 chain");
    if (level2.size() != level1.states.size())
        throw std::invalid_argument("every level-1 state needs a level-2 chain");
    for (const auto& l2 : level2) {
        check_chain(l2.transition, l2.initial, l2.tuple_states.size(), "level-2 chain");
        for (const auto& t : l2.tuple_states) {
            if (t.arity() != receiver_order.size()) throw std::invalid_argument("level-2 tuple arity mismatch");
            for (double v : t.values)
                if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("level-2 tuple PRR outside [0,1]");
        }
    }
}

std::vector<PerfState> segment_performance_states(const TraceSet& ts, std::size_t segment_len,
                                                  std::size_t window_len, std::size_t grid_levels) {
    if (segment_len == 0) throw std::invalid_argument("segment length must be positive");
    auto windows = slice_windows(ts, window_len);
    for (auto& w : windows) w = quantize_tuple(w, grid_levels);
    const std::size_t segments = windows.size() / segment_len;
    if (segments < 2) throw DegenerateDataError("trace too short for two segments");
    const auto order = ts.receiver_ids();
    std::vector<PerfState> out;
    for (std::size_t s = 0; s < segments; ++s)
        out.push_back(perf_of(windows, s * segment_len, segment_len, order, window_len));
    return out;
}

KMeansResult kmeans_cluster(std::span<const Point2> points, std::size_t k, std::uint64_t seed,
                            std::size_t max_iter) {
    if (k == 0) throw std::invalid_argument("k must be at least 1");
    if (points.empty()) throw std::invalid_argument("no points to cluster");
    const std::set<Point2> distinct(points.begin(), points.end());
    if (k > distinct.size()) throw std::invalid_argument("k exceeds the number of distinct points");

    const std::size_t n = points.size();
    std::vector<Point2> centers{points[seed % n]};
    std::vector<double> nearest(n);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = dist2(points[i], centers[0]);
    while (centers.size() < k) {
        std::size_t far = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (nearest[i] > nearest[far]) far = i;
        centers.push_back(points[far]);
        for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], dist2(points[i], points[far]));
    }

    KMeansResult res;
    res.assignments.assign(n, std::numeric_limits<std::size_t>::max());
    for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iter, 1); ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < k; ++c)
                if (dist2(points[i], centers[c]) < dist2(points[i], centers[best])) best = c;
            if (res.assignments[i] != best) {
                res.assignments[i] = best;
                changed = true;
            }
        }
        res.iterations = iter + 1;
        if (!changed && iter > 0) break;

        std::vector<Point2> sums(k);
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums[res.assignments[i]].x += points[i].x;
            sums[res.assignments[i]].y += points[i].y;
            ++sizes[res.assignments[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] > 0) {
                centers[c] = {sums[c].x / static_cast<double>(sizes[c]), sums[c].y / static_cast<double>(sizes[c])};
                continue;
            }
            // Empty cluster: move it to the point worst served by its center.
            std::size_t far = 0;
            double worst = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = dist2(points[i], centers[res.assignments[i]]);
                if (d > worst) {
                    worst = d;
                    far = i;
                }
            }
            centers[c] = points[far];
            res.assignments[far] = c;
        }
    }

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return centers[a] < centers[b]; });
    std::vector<std::size_t> rank(k);
    for (std::size_t r = 0; r < k; ++r) rank[order[r]] = r;
    for (std::size_t r = 0; r < k; ++r) res.centers.push_back(centers[order[r]]);
    for (auto& a : res.assignments) a = rank[a];
    return res;
}

DoubleMarkov fit_double_markov(const TraceSet& ts, const FitOptions& options) {
    if (options.k1 == 0) throw std::invalid_argument("k1 must be at least 1");
    if (options.segment_len == 0) throw std::invalid_argument("segment length must be positive");
    auto windows = slice_windows(ts, options.window_len);
    for (auto& w : windows) w = quantize_tuple(w, options.grid_levels);
    const std::size_t segments = windows.size() / options.segment_len;
    if (segments < options.k1 + 1)
        throw DegenerateDataError("need at least " + std::to_string(options.k1 + 1) + " segments of " +
                                  std::to_string(options.segment_len * options.window_len) +
                                  " rounds to fit, trace has " + std::to_string(segments));
    windows.resize(segments * options.segment_len);

    const auto order = ts.receiver_ids();
    std::vector<Point2> perf;
    for (std::size_t s = 0; s < segments; ++s) {
        const auto p = perf_of(windows, s * options.segment_len, options.segment_len, order, options.window_len);
        perf.push_back({p.aetx, p.betx});
    }
    const std::size_t distinct = std::set<Point2>(perf.begin(), perf.end()).size();
    const std::size_t k = std::min(options.k1, distinct);
    const auto clusters = kmeans_cluster(perf, k, options.seed, options.max_iter);

    DoubleMarkov dm;
    dm.sender_id = ts.sender_id();
    dm.receiver_order = order;
    dm.window_len = options.window_len;
    dm.segment_len = options.segment_len;
    dm.grid_levels = options.grid_levels;

    for (const auto& c : clusters.centers) dm.level1.states.push_back({c.x, c.y});
    std::vector<std::vector<std::size_t>> l1_counts(k, std::vector<std::size_t>(k, 0));
    std::vector<std::size_t> occupancy(k, 0);
    for (std::size_t s = 0; s < segments; ++s) {
        ++occupancy[clusters.assignments[s]];
        if (s + 1 < segments) ++l1_counts[clusters.assignments[s]][clusters.assignments[s + 1]];
    }
    dm.level1.initial = frequencies(occupancy);
    dm.level1.transition = smoothed(l1_counts, dm.level1.initial);

    const auto cluster_of_window = [&](std::size_t w) { return clusters.assignments[w / options.segment_len]; };
    for (std::size_t c = 0; c < k; ++c) {
        std::map<PrrTuple, std::size_t> index;
        for (std::size_t w = 0; w < windows.size(); ++w)
            if (cluster_of_window(w) == c) index.emplace(windows[w], 0);
        Level2Model l2;
        for (auto& [t, idx] : index) {
            idx = l2.tuple_states.size();
            l2.tuple_states.push_back(t);
        }
        const std::size_t s = l2.tuple_states.size();
        std::vector<std::vector<std::size_t>> counts(s, std::vector<std::size_t>(s, 0));
        std::vector<std::size_t> occ(s, 0);
        for (std::size_t w = 0; w < windows.size(); ++w) {
            if (cluster_of_window(w) != c) continue;
            const std::size_t from = index.at(windows[w]);
            ++occ[from];
            if (w + 1 < windows.size() && cluster_of_window(w + 1) == c) ++counts[from][index.at(windows[w + 1])];
        }
        l2.initial = frequencies(occ);
        l2.transition = smoothed(counts, l2.initial);
        dm.level2.push_back(std::move(l2));
    }
    dm.validate();
    return dm;
}

TraceSet generate_traces(const DoubleMarkov& dm, std::size_t rounds, std::uint64_t seed) {
    dm.validate();
    if (rounds < dm.window_len) throw std::invalid_argument("rounds must cover at least one window");
    const std::size_t n = dm.receiver_order.size();
    Engine eng = derive_stream(seed, std::uint64_t{0});
    std::vector<ReceptionTrace> traces(n);
    for (std::size_t i = 0; i < n; ++i) {
        traces[i].receiver_id = dm.receiver_order[i];
        traces[i].bits.reserve(rounds + dm.window_len);
    }

    std::size_t outer = sample_index(eng, dm.level1.initial);
    std::size_t inner = sample_index(eng, dm.level2[outer].initial);
    std::size_t produced = 0;
    std::size_t window_in_segment = 0;
    while (produced < rounds) {
        const auto& tuple = dm.level2[outer].tuple_states[inner].values;
        for (std::size_t r = 0; r < dm.window_len; ++r)
            for (std::size_t i = 0; i < n; ++i) traces[i].bits.push_back(bernoulli(eng, tuple[i]) ? 1 : 0);
        produced += dm.window_len;

        if (++window_in_segment == dm.segment_len) {
            window_in_segment = 0;
            const std::size_t next_outer = sample_index(eng, dm.level1.transition[outer]);
            if (next_outer != outer) {
                outer = next_outer;
                inner = sample_index(eng, dm.level2[outer].initial);
                continue;
            }
        }
        inner = sample_index(eng, dm.level2[outer].transition[inner]);
    }
    for (auto& t : traces) t.bits.resize(rounds);
    return TraceSet(dm.sender_id, std::move(traces));
}

TraceSet generate_independent_links(const std::vector<std::string>& receiver_order,
                                    std::span<const double> prrs, std::size_t rounds, std::uint64_t seed,
                                    std::string sender_id) {
    if (receiver_order.size() != prrs.size()) throw std::invalid_argument("one PRR per receiver required");
    if (rounds == 0) throw std::invalid_argument("rounds must be positive");
    Engine eng = derive_stream(seed, std::uint64_t{0});
    std::vector<ReceptionTrace> traces(prrs.size());
    for (std::size_t i = 0; i < prrs.size(); ++i) {
        traces[i].receiver_id = receiver_order[i];
        traces[i].bits.reserve(rounds);
    }
    for (std::size_t r = 0; r < rounds; ++r)
        for (std::size_t i = 0; i < prrs.size(); ++i) traces[i].bits.push_back(bernoulli(eng, prrs[i]) ? 1 : 0);
    return TraceSet(std::move(sender_id), std::move(traces));
}

std::size_t model_memory_footprint(const DoubleMarkov& dm) {
    const std::size_t k = dm.level1.states.size();
    const std::size_t n = dm.receiver_order.size();
    std::size_t bytes = 12 + k * 16 + k * k * 8 + k * 8;
    for (const auto& l2 : dm.level2) {
        const std::size_t s = l2.tuple_states.size();
        bytes += s * n + s * s * 8 + s * 8;
    }
    return bytes;
}

std::vector<double> stationary_marginals(const DoubleMarkov& dm) {
    dm.validate();
    // Level-1 steps happen once per segment; the fraction of windows spent in
    // an outer state equals its stationary weight.
    const auto outer = stationary(dm.level1.transition, dm.level1.initial);
    std::vector<double> m(dm.receiver_order.size(), 0.0);
    for (std::size_t s = 0; s < outer.size(); ++s) {
        const auto& l2 = dm.level2[s];
        const auto inner = stationary(l2.transition, l2.initial);
        for (std::size_t t = 0; t < inner.size(); ++t)
            for (std::size_t i = 0; i < m.size(); ++i) m[i] += outer[s] * inner[t] * l2.tuple_states[t].values[i];
    }
    return m;
}

} // namespace threedw
