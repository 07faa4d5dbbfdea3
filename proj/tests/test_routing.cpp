#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "helpers.hpp"
#include "threedw/routing.hpp"

using namespace threedw;
using testing::make_td;

namespace {

TupleDistribution named(const oracle::Table& table, std::vector<std::string> order) {
    std::map<PrrTuple, double> entries;
    for (const auto& [t, w] : table) entries[PrrTuple{t}] += w;
    return TupleDistribution(std::move(order), std::move(entries), 4);
}

} // namespace

TEST_SUITE("betx_approx") {
    TEST_CASE("exhaustive budget is exact") {
        const auto td = make_td({{{0.5, 0.5}, 1.0}});
        const auto e = betx_approx(td, 2, 1);
        CHECK(std::abs(*e.value - *betx_3dw(td).value) < 1e-12);
        CHECK(e.model == Model::Approx3DW);
    }

    TEST_CASE("single receiver is uETX") {
        for (std::size_t c : {1u, 3u, 10u}) CHECK(*betx_approx(make_td({{{0.25}, 1.0}}), c, 5).value == doctest::Approx(4.0));
    }

    TEST_CASE("seed-averaged small budget is close") {
        const auto td = make_td({{{0.5, 0.5, 0.5, 0.5}, 1.0}});
        const double exact = *betx_3dw(td).value;
        double mean = 0.0;
        for (std::uint64_t s = 0; s < 100; ++s) mean += *betx_approx(td, 2, s).value / 100.0;
        CHECK(std::abs(mean - exact) <= 0.05 * exact);
    }

    TEST_CASE("exhaustive budget matches on random tables") {
        std::mt19937_64 eng(31);
        for (int rep = 0; rep < 200; ++rep) {
            const std::size_t n = 1 + rep % 4;
            const auto td = make_td(testing::random_table(eng, n, 6));
            CHECK(std::abs(*betx_approx(td, 6, rep).value - *betx_3dw(td).value) < 1e-12);
        }
    }

    TEST_CASE("deterministic per seed and flagged when sampling") {
        std::mt19937_64 eng(2);
        const auto td = make_td(testing::random_table(eng, 4, 6));
        const auto a = betx_approx(td, 2, 9), b = betx_approx(td, 2, 9);
        CHECK(*a.value == *b.value);
        CHECK(a.flagged);
        CHECK_THROWS_AS(betx_approx(td, 0, 1), std::invalid_argument);
    }

    TEST_CASE("unreachable receiver") { CHECK_FALSE(betx_approx(make_td({{{0.5, 0.0}, 1.0}}), 1, 1).reachable()); }
}

TEST_SUITE("forwarder selection") {
    TEST_CASE("single strong link beats two independent half links") {
        const std::vector<Candidate> c{{"B", make_td({{{0.5, 0.5}, 1.0}})}, {"A", make_td({{{0.9}, 1.0}})}};
        const auto r = select_forwarder_set(c);
        CHECK(*r.chosen == "A");
        CHECK(*r.score.value == doctest::Approx(1.0 / 0.9));
        CHECK(*r.ranking[1].second.value == doctest::Approx(4.0 / 3.0));
    }

    TEST_CASE("a certain forwarder wins with score one") {
        const std::vector<Candidate> c{{"A", make_td({{{0.9}, 1.0}})}, {"Z", make_td({{{1.0, 0.2}, 1.0}})}};
        const auto r = select_forwarder_set(c);
        CHECK(*r.chosen == "Z");
        CHECK(*r.score.value == 1.0);
    }

    TEST_CASE("ties go to the lower id") {
        const auto td = make_td({{{0.5, 0.75}, 1.0}});
        CHECK(*select_forwarder_set({{"b", td}, {"a", td}}).chosen == "a");
    }

    TEST_CASE("one probability per candidate") {
        std::mt19937_64 eng(4);
        std::vector<Candidate> c;
        for (int i = 0; i < 7; ++i) c.push_back({"c" + std::to_string(i), make_td(testing::random_table(eng, 3, 6))});
        const auto r = select_forwarder_set(c);
        std::uint64_t probabilities = 0;
        for (const auto& [id, e] : r.ranking) {
            CHECK(e.probabilities == 1);
            probabilities += e.probabilities;
        }
        CHECK(probabilities == c.size());
    }

    TEST_CASE("argmin survives a monotone transform of the scores") {
        std::mt19937_64 eng(6);
        std::vector<Candidate> c;
        for (int i = 0; i < 6; ++i) c.push_back({"c" + std::to_string(i), make_td(testing::random_table(eng, 2, 4))});
        const auto r = select_forwarder_set(c);
        std::string best;
        double best_score = 1e300;
        for (const auto& cand : c) {
            const double s = std::log(3.0 * *aetx_3dw(cand.distribution).value + 1.0);
            if (s < best_score) {
                best_score = s;
                best = cand.id;
            }
        }
        CHECK(*r.chosen == best);
    }

    TEST_CASE("all unreachable") {
        const auto r = select_forwarder_set({{"a", make_td({{{0.0}, 1.0}})}});
        CHECK_FALSE(r.chosen.has_value());
    }
}

TEST_SUITE("sender selection") {
    TEST_CASE("correlated sender beats independent sender") {
        const std::vector<Candidate> c{{"Y", make_td({{{0.5, 0.5}, 1.0}})}, {"X", make_td({{{1, 1}, 0.5}, {{0, 0}, 0.5}})}};
        const auto r = select_sender(c, 2, 3);
        CHECK(*r.chosen == "X");
        CHECK(*r.score.value == doctest::Approx(2.0));
    }

    TEST_CASE("single candidate") { CHECK(*select_sender({{"only", make_td({{{0.3, 0.3}, 1.0}})}}, 1, 0).chosen == "only"); }

    TEST_CASE("small budget picks the same winner on well-separated candidates") {
        const std::vector<Candidate> c{{"X", make_td({{{1, 1, 1, 1}, 0.5}, {{0.5, 0.5, 0.5, 0.5}, 0.5}})},
                                       {"Y", make_td({{{0.5, 0.5, 0.5, 0.5}, 1.0}})}};
        const auto exact = select_sender(c, 6, 0);
        const double gap = *exact.ranking[1].second.value / *exact.ranking[0].second.value - 1.0;
        REQUIRE(gap >= 0.2);
        int same = 0;
        for (std::uint64_t s = 0; s < 100; ++s) same += *select_sender(c, 1, s).chosen == *exact.chosen;
        CHECK(same >= 95);
    }
}

TEST_SUITE("greedy dissemination") {
    TEST_CASE("one sender covering everything") {
        const auto td = named({{{0.5, 0.5}, 1.0}}, {"a", "b"});
        const auto plan = greedy_dissemination({{"S", td}}, {"a", "b"});
        REQUIRE(plan.steps.size() == 1);
        CHECK(*plan.total_expected_tx == doctest::Approx(8.0 / 3.0));
    }

    TEST_CASE("disjoint senders add up") {
        const auto p = named({{{0.5, 0.5}, 1.0}}, {"a", "b"});
        const auto q = named({{{0.25}, 1.0}}, {"c"});
        const auto plan = greedy_dissemination({{"P", p}, {"Q", q}}, {"a", "b", "c"});
        CHECK(*plan.total_expected_tx == doctest::Approx(8.0 / 3.0 + 4.0));
    }

    TEST_CASE("three overlapping senders") {
        // Round 1: X 8/3 over 2 (1.333), Y 2 over 3 (0.667), Z 5.0595 over 2.
        // Round 2, only a left: X 1/0.5 = 2, Z 1/0.8 = 1.25.
        const std::vector<Candidate> s{{"X", named({{{0.5, 0.5}, 1.0}}, {"a", "b"})},
                                       {"Y", named({{{1, 1, 1}, 0.5}, {{0, 0, 0}, 0.5}}, {"b", "c", "d"})},
                                       {"Z", named({{{0.8, 0.2}, 1.0}}, {"a", "c"})}};
        const auto plan = greedy_dissemination(s, {"a", "b", "c", "d"});
        REQUIRE(plan.steps.size() == 2);
        CHECK(plan.steps[0].sender == "Y");
        CHECK(plan.steps[0].newly_covered == std::vector<std::string>{"b", "c", "d"});
        CHECK(plan.steps[1].sender == "Z");
        CHECK(plan.steps[1].newly_covered == std::vector<std::string>{"a"});
        CHECK(*plan.total_expected_tx == doctest::Approx(2.0 + 1.25));
    }

    TEST_CASE("uncoverable receiver") {
        const auto plan = greedy_dissemination({{"S", named({{{0.5}, 1.0}}, {"a"})}}, {"a", "z"});
        CHECK_FALSE(plan.total_expected_tx.has_value());
        CHECK(plan.uncovered == std::vector<std::string>{"z"});
    }
}
