#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "threedw/trace_core.hpp"

namespace testing {

inline threedw::TupleDistribution make_td(const oracle::Table& table, std::size_t window_len = 4) {
    std::map<threedw::PrrTuple, double> entries;
    for (const auto& [t, w] : table) entries[threedw::PrrTuple{t}] += w;
    std::vector<std::string> order;
    for (std::size_t i = 0; i < table.front().first.size(); ++i) order.push_back("R" + std::to_string(i + 1));
    return threedw::TupleDistribution(order, entries, window_len);
}

inline threedw::TraceSet make_ts(const std::vector<std::vector<std::uint8_t>>& rows_per_receiver) {
    std::vector<threedw::ReceptionTrace> traces;
    for (std::size_t i = 0; i < rows_per_receiver.size(); ++i)
        traces.push_back({"R" + std::to_string(i + 1), rows_per_receiver[i]});
    return threedw::TraceSet("S", traces);
}

// Random 5-level tuple table with 1..max_tuples entries; when `reachable` is
// set every receiver has a positive marginal.
inline oracle::Table random_table(std::mt19937_64& eng, std::size_t n, std::size_t max_tuples, bool reachable = true) {
    std::uniform_int_distribution<std::size_t> count(1, max_tuples);
    std::uniform_int_distribution<int> level(0, 4);
    std::uniform_real_distribution<double> weight(0.05, 1.0);
    while (true) {
        std::map<std::vector<double>, double> t;
        const std::size_t k = count(eng);
        for (std::size_t j = 0; j < k; ++j) {
            std::vector<double> v;
            for (std::size_t i = 0; i < n; ++i) v.push_back(level(eng) / 4.0);
            t[v] += weight(eng);
        }
        double sum = 0.0;
        for (auto& [v, w] : t) sum += w;
        oracle::Table out;
        std::vector<double> marg(n, 0.0);
        for (auto& [v, w] : t) {
            out.push_back({v, w / sum});
            for (std::size_t i = 0; i < n; ++i) marg[i] += v[i] * w;
        }
        bool ok = true;
        for (double m : marg) ok = ok && m > 0.0;
        if (ok || !reachable) return out;
    }
}

} // namespace testing
