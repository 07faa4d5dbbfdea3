#include "threedw/synth_oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <thread>

#include "threedw/io.hpp"
#include "threedw/rng.hpp"

namespace threedw {

namespace {

// Per-round reception process of a SynthConfig. Holds the hidden burst
// state, so one instance per RNG stream.
class RoundSource {
public:
    RoundSource(const SynthConfig& cfg, Engine& eng) : cfg_(cfg), eng_(eng) {
        const auto& m = cfg.marginals;
        const double good = cfg.burst ? cfg.burst->good_scale : 1.0;
        const double bad = cfg.burst ? cfg.burst->bad_scale : 1.0;
        for (double p : m) {
            good_p_.push_back(p * good);
            bad_p_.push_back(p * bad);
        }
        if (cfg.burst) good_ = uniform01(eng_) < cfg.burst->good_fraction();
    }

    std::uint32_t next() {
        const auto& p = good_ ? good_p_ : bad_p_;
        const std::size_t n = p.size();
        std::uint32_t bits = 0;
        const bool shared = cfg_.rho >= 1.0 || (cfg_.rho > 0.0 && uniform01(eng_) < cfg_.rho);
        if (shared) {
            const double u = uniform01(eng_);
            for (std::size_t i = 0; i < n; ++i)
                if (u < p[i]) bits |= 1u << i;
        } else {
            for (std::size_t i = 0; i < n; ++i)
                if (uniform01(eng_) < p[i]) bits |= 1u << i;
        }
        if (cfg_.burst) {
            const double stay = good_ ? cfg_.burst->p_stay_good : cfg_.burst->p_stay_bad;
            if (!(uniform01(eng_) < stay)) good_ = !good_;
        }
        return bits;
    }

private:
    const SynthConfig& cfg_;
    Engine& eng_;
    std::vector<double> good_p_;
    std::vector<double> bad_p_;
    bool good_ = true;
};

// Receivers that can receive in at least one burst state.
std::uint32_t live_receivers(const SynthConfig& cfg) {
    const double scale = cfg.burst ? std::max(cfg.burst->good_scale, cfg.burst->bad_scale) : 1.0;
    std::uint32_t live = 0;
    for (std::size_t i = 0; i < cfg.marginals.size(); ++i)
        if (cfg.marginals[i] * scale > 0.0) live |= 1u << i;
    return live;
}

struct BlockTally {
    std::uint64_t sum = 0;
    unsigned __int128 sum_sq = 0;
    bool capped = false;
};

enum class Delivery { any, all };

BlockTally run_block(const SynthConfig& cfg, Delivery goal, std::size_t trials, Engine eng) {
    RoundSource source(cfg, eng);
    const std::uint32_t full = static_cast<std::uint32_t>((std::uint64_t{1} << cfg.receivers()) - 1);
    BlockTally tally;
    for (std::size_t t = 0; t < trials; ++t) {
        std::uint64_t len = 0;
        std::uint32_t covered = 0;
        bool done = false;
        while (!done) {
            if (len == kOracleRoundCap) {
                tally.capped = true;
                return tally;
            }
            ++len;
            const std::uint32_t got = source.next();
            covered |= got;
            done = goal == Delivery::any ? got != 0 : covered == full;
        }
        tally.sum += len;
        tally.sum_sq += static_cast<unsigned __int128>(len) * len;
    }
    return tally;
}

OracleResult run_oracle(const SynthConfig& cfg, Delivery goal, std::size_t trials, std::uint64_t seed,
                        std::size_t workers) {
    cfg.validate();
    if (trials == 0) throw std::invalid_argument("trials must be at least 1");
    if (cfg.receivers() > 32) throw std::invalid_argument("oracle supports at most 32 receivers");
    OracleResult res;
    res.trials = trials;
    res.seed = seed;

    const std::uint32_t full = static_cast<std::uint32_t>((std::uint64_t{1} << cfg.receivers()) - 1);
    const std::uint32_t live = live_receivers(cfg);
    if ((goal == Delivery::any && live == 0) || (goal == Delivery::all && live != full)) return res;

    const std::size_t blocks = (trials + kOracleBlock - 1) / kOracleBlock;
    std::vector<BlockTally> tallies(blocks);
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
        for (std::size_t b = next++; b < blocks; b = next++) {
            const std::size_t count = std::min(kOracleBlock, trials - b * kOracleBlock);
            tallies[b] = run_block(cfg, goal, count, derive_stream(seed, static_cast<std::uint64_t>(b)));
        }
    };
    workers = std::clamp<std::size_t>(workers, 1, blocks);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }

    std::uint64_t sum = 0;
    unsigned __int128 sum_sq = 0;
    for (const auto& t : tallies) {
        if (t.capped) return res;
        sum += t.sum;
        sum_sq += t.sum_sq;
    }
    const double n = static_cast<double>(trials);
    const double mean = static_cast<double>(sum) / n;
    res.mean = mean;
    if (trials > 1) {
        const double var = std::max(0.0, (static_cast<double>(sum_sq) - n * mean * mean) / (n - 1.0));
        res.half_width_95 = 1.96 * std::sqrt(var / n);
    }
    return res;
}

} // namespace

double BurstModel::good_fraction() const {
    const double leave_good = 1.0 - p_stay_good;
    const double leave_bad = 1.0 - p_stay_bad;
    if (leave_good + leave_bad <= 0.0) return 1.0;
    return leave_bad / (leave_good + leave_bad);
}

void SynthConfig::validate() const {
    if (marginals.empty()) throw std::invalid_argument("config needs at least one receiver");
    if (marginals.size() > 32) throw std::invalid_argument("config supports at most 32 receivers");
    for (double p : marginals)
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("marginal PRR outside [0,1]");
    if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("rho outside [0,1]");
    if (rounds == 0) throw std::invalid_argument("rounds must be positive");
    if (burst) {
        const auto& b = *burst;
        for (double p : {b.p_stay_good, b.p_stay_bad})
            if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("burst stay probability outside [0,1]");
        for (double s : {b.good_scale, b.bad_scale}) {
            if (!(s >= 0.0)) throw std::invalid_argument("burst scale must be non-negative");
            for (double p : marginals)
                if (p * s > 1.0) throw std::invalid_argument("burst scale pushes a PRR above 1");
        }
    }
}

TraceSet generate_synthetic_traceset(const SynthConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.receivers();
    Engine eng = derive_stream(cfg.seed, std::uint64_t{0});
    RoundSource source(cfg, eng);
    std::vector<ReceptionTrace> traces(n);
    for (std::size_t i = 0; i < n; ++i) {
        traces[i].receiver_id = "R" + std::to_string(i + 1);
        traces[i].bits.reserve(cfg.rounds);
    }
    for (std::size_t r = 0; r < cfg.rounds; ++r) {
        const std::uint32_t bits = source.next();
        for (std::size_t i = 0; i < n; ++i) traces[i].bits.push_back((bits >> i) & 1u);
    }
    return TraceSet("S", std::move(traces));
}

TupleDistribution analytic_tuple_distribution(const SynthConfig& cfg) {
    cfg.validate();
    if (cfg.burst) throw std::invalid_argument("analytic tables exist only for memoryless configs");
    const auto& m = cfg.marginals;
    std::map<PrrTuple, double> entries;
    if (cfg.rho < 1.0) entries[PrrTuple{m}] += 1.0 - cfg.rho;
    if (cfg.rho > 0.0) {
        std::set<double> cuts(m.begin(), m.end());
        cuts.insert(0.0);
        cuts.insert(1.0);
        std::vector<double> edges(cuts.begin(), cuts.end());
        for (std::size_t j = 0; j + 1 < edges.size(); ++j) {
            // U in [edges[j], edges[j+1]) reaches exactly the receivers with p > edges[j].
            PrrTuple t;
            for (double p : m) t.values.push_back(p > edges[j] ? 1.0 : 0.0);
            entries[t] += cfg.rho * (edges[j + 1] - edges[j]);
        }
    }
    std::vector<std::string> order;
    for (std::size_t i = 0; i < m.size(); ++i) order.push_back("R" + std::to_string(i + 1));
    return TupleDistribution(std::move(order), std::move(entries), 1);
}

OracleResult oracle_aetx(const SynthConfig& cfg, std::size_t trials, std::uint64_t seed, std::size_t workers) {
    return run_oracle(cfg, Delivery::any, trials, seed, workers);
}

OracleResult oracle_betx(const SynthConfig& cfg, std::size_t trials, std::uint64_t seed, std::size_t workers) {
    return run_oracle(cfg, Delivery::all, trials, seed, workers);
}

double relative_error(double estimate, double truth) { return std::abs(estimate - truth) / truth; }

std::vector<SweepRow> sweep_correlation(const SweepOptions& options) {
    if (options.rho_grid.empty()) throw std::invalid_argument("rho grid is empty");
    std::vector<SweepRow> rows;
    for (std::size_t j = 0; j < options.rho_grid.size(); ++j) {
        Engine seeds = derive_stream(options.seed, static_cast<std::uint64_t>(j));
        SynthConfig cfg;
        cfg.marginals = options.marginals;
        cfg.rho = options.rho_grid[j];
        cfg.burst = options.burst;
        cfg.rounds = options.rounds;
        cfg.seed = seeds();
        const std::uint64_t oracle_seed = seeds();

        const auto ts = generate_synthetic_traceset(cfg);
        const auto td = extract_tuple_distribution(ts, options.window_len, options.grid_levels);
        const auto prrs = td.marginals();
        const auto bd = tuple_to_bitmap_distribution(td);
        const auto a_truth = oracle_aetx(cfg, options.trials, oracle_seed, options.workers);
        const auto b_truth = oracle_betx(cfg, options.trials, oracle_seed + 1, options.workers);

        const auto emit = [&](const EtxEstimate& e, const OracleResult& truth) {
            SweepRow row;
            row.rho = cfg.rho;
            row.model = std::string(model_name(e.model)) + "_" + std::string(metric_name(e.metric));
            row.estimate = e.value;
            row.oracle_mean = truth.mean;
            if (truth.mean) row.oracle_ci95 = truth.half_width_95;
            if (e.value && truth.mean) row.rel_error = relative_error(*e.value, *truth.mean);
            row.op_count = e.op_count;
            rows.push_back(std::move(row));
        };
        emit(aetx_3dw(td), a_truth);
        emit(aetx_prr_only(prrs), a_truth);
        emit(aetx_twc14(td), a_truth);
        emit(betx_3dw(td), b_truth);
        emit(betx_tvt09(prrs), b_truth);
        emit(betx_corlayer(bd, prrs), b_truth);

        SweepRow corr;
        corr.rho = cfg.rho;
        corr.model = "LINK_CORRELATION";
        corr.estimate = mean_pairwise_correlation(ts);
        rows.push_back(std::move(corr));
    }
    return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::string out = "rho,model,estimate,oracle_mean,oracle_ci95,rel_error,op_count\n";
    const auto opt = [](const std::optional<double>& v, bool unreachable_text) {
        if (v) return format_number(*v);
        return unreachable_text ? std::string("unreachable") : std::string();
    };
    for (const auto& r : rows) {
        const bool etx_row = r.model != "LINK_CORRELATION";
        out += format_number(r.rho) + ',' + r.model + ',' + opt(r.estimate, etx_row) + ',' +
               opt(r.oracle_mean, etx_row) + ',' + opt(r.oracle_ci95, false) + ',' + opt(r.rel_error, false) + ',' +
               (r.op_count ? std::to_string(*r.op_count) : std::string()) + '\n';
    }
    return out;
}

} // namespace threedw
