#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "helpers.hpp"
#include "threedw/errors.hpp"
#include "threedw/estimators.hpp"
#include "threedw/markov_sim.hpp"

using namespace threedw;
using testing::make_td;
using testing::make_ts;

namespace {

// One outer state whose inner chain walks over the given tuples.
DoubleMarkov single_state(std::vector<PrrTuple> tuples, Matrix transition, std::size_t window_len = 1) {
    DoubleMarkov dm;
    for (std::size_t i = 0; i < tuples.front().arity(); ++i) dm.receiver_order.push_back("R" + std::to_string(i + 1));
    dm.level1.states = {{1.0, 1.0}};
    dm.level1.transition = {{1.0}};
    dm.level1.initial = {1.0};
    Level2Model l2;
    l2.tuple_states = std::move(tuples);
    l2.transition = std::move(transition);
    l2.initial.assign(l2.tuple_states.size(), 1.0 / static_cast<double>(l2.tuple_states.size()));
    dm.level2 = {l2};
    dm.window_len = window_len;
    dm.segment_len = 20;
    return dm;
}

void check_rows_stochastic(const Matrix& m) {
    for (const auto& row : m) {
        double s = 0.0;
        for (double v : row) s += v;
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
}

std::size_t index_of(const Level2Model& l2, const PrrTuple& t) {
    for (std::size_t i = 0; i < l2.tuple_states.size(); ++i)
        if (l2.tuple_states[i] == t) return i;
    FAIL("tuple state missing");
    return 0;
}

} // namespace

TEST_SUITE("segment performance states") {
    TEST_CASE("all-ones traces") {
        const auto ts = make_ts({std::vector<std::uint8_t>(160, 1), std::vector<std::uint8_t>(160, 1)});
        for (const auto& s : segment_performance_states(ts, 4, 4)) CHECK(s == PerfState{1.0, 1.0});
    }

    TEST_CASE("perfect and half-lossy halves give two distinct states") {
        std::vector<std::uint8_t> r1(64, 1), r2;
        for (int i = 0; i < 32; ++i) r2.push_back(1);
        for (int i = 0; i < 32; ++i) r2.push_back(i % 2 == 0);
        const auto states = segment_performance_states(make_ts({r1, r2}), 4, 4);
        REQUIRE(states.size() == 4);
        const auto lossy = make_td({{{1.0, 0.5}, 1.0}});
        CHECK(states[0] == PerfState{1.0, 1.0});
        CHECK(states[1] == PerfState{1.0, 1.0});
        CHECK(states[2].aetx == doctest::Approx(*aetx_3dw(lossy).value));
        CHECK(states[2].betx == doctest::Approx(*betx_3dw(lossy).value));
        CHECK(states[3] == states[2]);
    }

    TEST_CASE("single receiver collapses aETX and bETX") {
        std::mt19937_64 eng(3);
        std::bernoulli_distribution bit(0.7);
        std::vector<std::uint8_t> r;
        for (int i = 0; i < 400; ++i) r.push_back(bit(eng));
        for (const auto& s : segment_performance_states(make_ts({r}), 5, 4)) CHECK(s.aetx == doctest::Approx(s.betx));
    }

    TEST_CASE("needs two segments") {
        CHECK_THROWS_AS(segment_performance_states(make_ts({std::vector<std::uint8_t>(20, 1)}), 4, 4),
                        DegenerateDataError);
    }

    TEST_CASE("dead segments are capped") {
        std::vector<std::uint8_t> r(32, 1);
        std::fill(r.begin() + 16, r.end(), 0);
        const auto states = segment_performance_states(make_ts({r}), 4, 4);
        CHECK(states[1].betx == kPerfStateCap);
    }
}

TEST_SUITE("kmeans") {
    TEST_CASE("two tight groups") {
        std::mt19937_64 eng(8);
        std::uniform_real_distribution<double> jitter(-0.05, 0.05);
        std::vector<Point2> pts;
        Point2 a{}, b{};
        for (int i = 0; i < 40; ++i) {
            pts.push_back({1.2 + jitter(eng), 1.5 + jitter(eng)});
            a.x += pts.back().x / 40;
            a.y += pts.back().y / 40;
            pts.push_back({3.0 + jitter(eng), 4.0 + jitter(eng)});
            b.x += pts.back().x / 40;
            b.y += pts.back().y / 40;
        }
        const auto r = kmeans_cluster(pts, 2, 5);
        REQUIRE(r.centers.size() == 2);
        CHECK(std::abs(r.centers[0].x - a.x) < 0.1);
        CHECK(std::abs(r.centers[0].y - a.y) < 0.1);
        CHECK(std::abs(r.centers[1].x - b.x) < 0.1);
        CHECK(std::abs(r.centers[1].y - b.y) < 0.1);
    }

    TEST_CASE("k=1 gives the mean") {
        const std::vector<Point2> pts{{1, 2}, {3, 4}, {5, 9}};
        const auto r = kmeans_cluster(pts, 1, 0);
        CHECK(r.centers[0].x == doctest::Approx(3.0));
        CHECK(r.centers[0].y == doctest::Approx(5.0));
    }

    TEST_CASE("k equal to the number of distinct points") {
        const std::vector<Point2> pts{{1, 2}, {3, 4}, {5, 9}, {2, 2}};
        const auto r = kmeans_cluster(pts, 4, 1);
        for (std::size_t i = 0; i < pts.size(); ++i) CHECK(r.centers[r.assignments[i]] == pts[i]);
        CHECK_THROWS_AS(kmeans_cluster(pts, 5, 0), std::invalid_argument);
    }

    TEST_CASE("deterministic per seed") {
        std::mt19937_64 eng(1);
        std::uniform_real_distribution<double> u(1.0, 5.0);
        std::vector<Point2> pts;
        for (int i = 0; i < 60; ++i) pts.push_back({u(eng), u(eng)});
        const auto r1 = kmeans_cluster(pts, 4, 9), r2 = kmeans_cluster(pts, 4, 9);
        CHECK(r1.centers == r2.centers);
        CHECK(r1.assignments == r2.assignments);
    }
}

TEST_SUITE("fit_double_markov") {
    TEST_CASE("i.i.d. source with one outer state") {
        std::mt19937_64 eng(21);
        std::bernoulli_distribution b1(0.5), b2(0.7);
        std::vector<std::uint8_t> r1, r2;
        for (int i = 0; i < 10'000; ++i) {
            r1.push_back(b1(eng));
            r2.push_back(b2(eng));
        }
        FitOptions opts;
        opts.k1 = 1;
        opts.window_len = 1;
        const auto dm = fit_double_markov(make_ts({r1, r2}), opts);
        REQUIRE(dm.level1.states.size() == 1);
        CHECK(dm.level1.transition[0][0] == doctest::Approx(1.0));
        const auto& l2 = dm.level2[0];
        REQUIRE(l2.tuple_states.size() == 4);

        std::map<PrrTuple, double> freq;
        for (int i = 0; i < 10'000; ++i) freq[PrrTuple{{double(r1[i]), double(r2[i])}}] += 1e-4;
        for (const auto& row : l2.transition)
            for (std::size_t j = 0; j < row.size(); ++j) CHECK(std::abs(row[j] - freq[l2.tuple_states[j]]) < 0.05);
    }

    TEST_CASE("alternating tuples give a permutation matrix") {
        std::vector<std::uint8_t> r;
        for (int i = 0; i < 1000; ++i) r.push_back(i % 2 == 0);
        FitOptions opts;
        opts.k1 = 1;
        opts.window_len = 1;
        const auto dm = fit_double_markov(make_ts({r}), opts);
        const auto& t = dm.level2[0].transition;
        REQUIRE(t.size() == 2);
        CHECK(t[0][1] >= 0.99);
        CHECK(t[1][0] >= 0.99);
    }

    TEST_CASE("all-ones traces") {
        const auto dm = fit_double_markov(make_ts({std::vector<std::uint8_t>(800, 1), std::vector<std::uint8_t>(800, 1)}));
        CHECK(dm.level1.states.size() == 1);
        REQUIRE(dm.level2[0].tuple_states.size() == 1);
        CHECK(dm.level2[0].tuple_states[0].values == std::vector<double>{1.0, 1.0});
    }

    TEST_CASE("rows are stochastic") {
        std::mt19937_64 eng(5);
        std::vector<std::vector<std::uint8_t>> rows(3);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double p = 0.5;
        for (int i = 0; i < 8000; ++i) {
            if (i % 80 == 0) p = u(eng);
            for (auto& r : rows) r.push_back(u(eng) < p);
        }
        const auto dm = fit_double_markov(make_ts(rows));
        dm.validate();
        check_rows_stochastic(dm.level1.transition);
        for (const auto& l2 : dm.level2) check_rows_stochastic(l2.transition);
    }

    TEST_CASE("short traces are degenerate") {
        CHECK_THROWS_AS(fit_double_markov(make_ts({std::vector<std::uint8_t>(100, 1)})), DegenerateDataError);
    }

    TEST_CASE("round-trip recovers inner transitions") {
        const Matrix truth{{0.6, 0.3, 0.1}, {0.2, 0.5, 0.3}, {0.25, 0.25, 0.5}};
        const auto source = single_state({PrrTuple{{0, 0}}, PrrTuple{{1, 1}}, PrrTuple{{1, 0}}}, truth);
        const auto ts = generate_traces(source, 100'000, 12);
        FitOptions opts;
        opts.k1 = 1;
        opts.window_len = 1;
        const auto fitted = fit_double_markov(ts, opts);
        REQUIRE(fitted.level1.states.size() == 1);
        const auto& l2 = fitted.level2[0];
        REQUIRE(l2.tuple_states.size() == 3);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                const auto fi = index_of(l2, source.level2[0].tuple_states[i]);
                const auto fj = index_of(l2, source.level2[0].tuple_states[j]);
                CHECK(std::abs(l2.transition[fi][fj] - truth[i][j]) < 0.05);
            }
    }
}

TEST_SUITE("generation") {
    TEST_CASE("all-ones model gives all-ones output") {
        const auto dm = fit_double_markov(make_ts({std::vector<std::uint8_t>(800, 1), std::vector<std::uint8_t>(800, 1)}));
        const auto ts = generate_traces(dm, 1000, 3);
        for (const auto& t : ts.traces())
            CHECK(std::all_of(t.bits.begin(), t.bits.end(), [](auto b) { return b == 1; }));
    }

    TEST_CASE("single half tuple gives PRR one half") {
        const auto dm = single_state({PrrTuple{{0.5, 0.5}}}, {{1.0}}, 4);
        const auto ts = generate_traces(dm, 100'000, 99);
        for (const auto& t : ts.traces()) CHECK(std::abs(t.prr() - 0.5) <= 0.01);
    }

    TEST_CASE("same seed same output") {
        const auto dm = single_state({PrrTuple{{0.25, 0.75}}, PrrTuple{{1, 0.5}}}, {{0.3, 0.7}, {0.6, 0.4}}, 4);
        const auto a = generate_traces(dm, 5000, 4), b = generate_traces(dm, 5000, 4);
        for (std::size_t i = 0; i < a.receivers(); ++i) CHECK(a.traces()[i].bits == b.traces()[i].bits);
        const auto c = generate_traces(dm, 5000, 5);
        CHECK(c.traces()[0].bits != a.traces()[0].bits);
    }

    TEST_CASE("empirical PRR within three binomial sigma of the stationary marginal") {
        const auto dm = single_state({PrrTuple{{0.5, 0.25}}, PrrTuple{{0.75, 1}}}, {{0.5, 0.5}, {0.5, 0.5}}, 1);
        const auto marg = stationary_marginals(dm);
        CHECK(marg[0] == doctest::Approx(0.625));
        CHECK(marg[1] == doctest::Approx(0.625));
        const std::size_t rounds = 200'000;
        const auto ts = generate_traces(dm, rounds, 7);
        for (std::size_t i = 0; i < 2; ++i) {
            const double sigma = std::sqrt(marg[i] * (1 - marg[i]) / rounds);
            CHECK(std::abs(ts.traces()[i].prr() - marg[i]) <= 3 * sigma);
        }
    }

    TEST_CASE("independent-link ablation") {
        const std::vector<double> p{0.2, 0.9};
        const auto ts = generate_independent_links({"A", "B"}, p, 50'000, 1);
        CHECK(ts.receiver_ids() == std::vector<std::string>{"A", "B"});
        CHECK(std::abs(ts.traces()[0].prr() - 0.2) < 0.01);
        CHECK(std::abs(ts.traces()[1].prr() - 0.9) < 0.01);
        CHECK(std::abs(*link_correlation(ts.traces()[0], ts.traces()[1])) < 0.02);
    }
}

TEST_SUITE("memory footprint") {
    DoubleMarkov with_states(std::size_t k) {
        auto dm = single_state({PrrTuple{{1, 1}}}, {{1.0}});
        dm.level1.states.assign(k, PerfState{});
        dm.level1.transition.assign(k, std::vector<double>(k, 1.0 / static_cast<double>(k)));
        dm.level1.initial.assign(k, 1.0 / static_cast<double>(k));
        dm.level2.assign(k, dm.level2[0]);
        return dm;
    }

    TEST_CASE("minimal model") { CHECK(model_memory_footprint(with_states(1)) == 12 + 16 + 8 + 8 + (2 + 8 + 8)); }

    TEST_CASE("doubling k1 grows the footprint") {
        for (std::size_t k : {1u, 2u, 4u}) CHECK(model_memory_footprint(with_states(2 * k)) > model_memory_footprint(with_states(k)));
    }

    TEST_CASE("five states, three receivers") {
        auto dm = with_states(5);
        for (auto& l2 : dm.level2) {
            l2.tuple_states = {PrrTuple{{1, 1, 1}}, PrrTuple{{0.5, 0.5, 0.5}}};
            l2.transition = {{0.5, 0.5}, {0.5, 0.5}};
            l2.initial = {0.5, 0.5};
        }
        dm.receiver_order = {"R1", "R2", "R3"};
        // 12 + 5*16 + 25*8 + 5*8 + 5*(2*3 + 4*8 + 2*8)
        CHECK(model_memory_footprint(dm) == 12 + 80 + 200 + 40 + 5 * 54);
    }
}
