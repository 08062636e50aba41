#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "ffade/skeleton.hpp"

using namespace ffade;

namespace {

struct Event {
    Time time;
    std::uint64_t weight;
};

// Direct kernel sum: sum over past events of w * alpha^(now - t) * (1 - alpha).
double kernel_sum(const std::vector<Event>& history, Time now, double alpha) {
    double f = 0.0;
    for (const auto& e : history) {
        f += static_cast<double>(e.weight) * std::pow(alpha, static_cast<double>(now - e.time)) * (1.0 - alpha);
    }
    return f;
}

// Sort-based reference for the capacity rule: cut-off = max(previous, capacity-th
// largest decayed value); drop everything below it; break remaining ties by
// oldest last_time, then smaller type.
struct ReferenceSkeleton {
    double alpha;
    std::size_t capacity;
    double cutoff;
    std::map<InteractionType, FreqEntry> entries;

    void add(InteractionType t, Time now, std::uint64_t w) {
        auto it = entries.find(t);
        const double added = (1.0 - alpha) * static_cast<double>(w);
        if (it == entries.end()) {
            entries[t] = {now, added};
        } else {
            it->second = {now, decayed_freq(it->second, now, alpha) + added};
        }
        if (entries.size() <= capacity) {
            return;
        }
        std::vector<double> values;
        for (const auto& [type, e] : entries) {
            values.push_back(decayed_freq(e, now, alpha));
        }
        std::sort(values.rbegin(), values.rend());
        cutoff = std::max(cutoff, values[capacity - 1]);
        std::erase_if(entries, [&](const auto& kv) { return decayed_freq(kv.second, now, alpha) < cutoff; });
        while (entries.size() > capacity) {
            auto victim = std::min_element(entries.begin(), entries.end(), [&](const auto& a, const auto& b) {
                const double da = decayed_freq(a.second, now, alpha);
                const double db = decayed_freq(b.second, now, alpha);
                if (da != db) return da < db;
                if (a.second.last_time != b.second.last_time) return a.second.last_time < b.second.last_time;
                return a.first < b.first;
            });
            entries.erase(victim);
        }
    }
};

}  // namespace

TEST_CASE("decayed_freq") {
    CHECK(decayed_freq({10, 2.0}, 10, 0.5) == 2.0);
    CHECK(decayed_freq({10, 2.0}, 12, 0.5) == doctest::Approx(kernel_sum({{10, 4}}, 12, 0.5)));
    CHECK(decayed_freq({10, 2.0}, 12, 0.5) == doctest::Approx(0.5));
    CHECK(decayed_freq({10, 2.0}, 11, 0.0) == 0.0);
    CHECK(decayed_freq({10, 2.0}, 10, 0.0) == 2.0);
}

TEST_CASE("union_edge decay-and-add recurrence") {
    Skeleton s(0.5, kUnbounded, 0.0);
    const InteractionType t{1, 2};
    s.union_edge(t, 10, 4);
    REQUIRE(s.lookup(t) != nullptr);
    CHECK(s.lookup(t)->freq == doctest::Approx(2.0));
    s.union_edge(t, 12, 1);
    CHECK(s.lookup(t)->last_time == 12);
    CHECK(s.lookup(t)->freq == doctest::Approx(kernel_sum({{10, 4}, {12, 1}}, 12, 0.5)).epsilon(1e-12));
    CHECK(s.lookup(t)->freq == doctest::Approx(1.0));

    Skeleton fresh(0.9, kUnbounded, 0.0);
    fresh.union_edge(t, 3, 3);
    CHECK(fresh.lookup(t)->freq == doctest::Approx(0.3));
    CHECK(fresh.active().count(t) == 1);
}

TEST_CASE("union_edge capacity: brute-force threshold over candidates") {
    Skeleton s(0.5, 2, 0.0);
    s.union_edge({0, 1}, 5, 6);  // 3.0
    s.union_edge({0, 2}, 5, 4);  // 2.0
    CHECK(s.cutoff() == 0.0);
    std::vector<InteractionType> evicted;
    s.union_edge({0, 3}, 5, 2);  // 1.0

    // Smallest f' with at most 2 decayed values >= f'.
    const std::vector<double> values{3.0, 2.0, 1.0};
    double expected = INFINITY;
    for (double candidate : values) {
        const auto count = std::count_if(values.begin(), values.end(), [&](double v) { return v >= candidate; });
        if (count <= 2) {
            expected = std::min(expected, candidate);
        }
    }
    CHECK(s.cutoff() == expected);
    CHECK(s.cutoff() == 2.0);
    CHECK(s.size() == 2);
    CHECK_FALSE(s.contains({0, 3}));
    CHECK(s.active().count({0, 3}) == 0);
    CHECK(s.lookup({0, 3}) == nullptr);
    CHECK(s.contains({0, 1}));
}

TEST_CASE("more than M ties at the cut-off evict the oldest first") {
    Skeleton s(0.5, 2, 0.0);
    std::vector<InteractionType> evicted;
    // Equal decayed value 1.0 at t=4 for all three; (0,1) is the oldest.
    s.union_edge({0, 1}, 3, 4, &evicted);  // 2.0 at t=3 -> 1.0 at t=4
    s.union_edge({0, 2}, 4, 2, &evicted);  // 1.0
    s.union_edge({0, 3}, 4, 2, &evicted);  // 1.0
    REQUIRE(evicted.size() == 1);
    CHECK(evicted[0] == InteractionType{0, 1});
    CHECK(s.cutoff() == 1.0);
    CHECK(s.size() == 2);
}

TEST_CASE("lookup and min_decayed") {
    Skeleton s(0.5, kUnbounded, 0.0);
    CHECK(s.lookup({4, 4}) == nullptr);
    CHECK_THROWS_AS(s.min_decayed(1), std::logic_error);
    s.union_edge({1, 2}, 1, 1);
    CHECK(s.min_decayed(1).first == InteractionType{1, 2});

    Skeleton ties(0.5, kUnbounded, 0.0);
    ties.union_edge({3, 1}, 2, 1);
    ties.union_edge({1, 3}, 2, 1);
    ties.union_edge({2, 2}, 2, 4);
    auto [type, value] = ties.min_decayed(2);
    CHECK(type == InteractionType{1, 3});
    CHECK(value == 0.5);

    Skeleton smaller(0.9, kUnbounded, 0.0);
    smaller.union_edge({0, 1}, 1, 5);  // 0.5
    smaller.union_edge({0, 2}, 1, 2);  // 0.2
    CHECK(smaller.min_decayed(1).first == InteractionType{0, 2});
    // Comparisons at equal last_time do not depend on `now`.
    CHECK(smaller.min_decayed(5000).first == InteractionType{0, 2});
}

TEST_CASE("unbounded capacity keeps the initial cut-off") {
    Skeleton s(0.9, kUnbounded, 0.25);
    for (NodeId i = 0; i < 500; ++i) {
        s.union_edge({i, i + 1}, 1 + i, 1);
    }
    CHECK(s.size() == 500);
    CHECK(s.cutoff() == 0.25);
    CHECK(s.evictions() == 0);
}

TEST_CASE("single-type history matches the direct kernel sum") {
    std::mt19937_64 rng(5);
    for (double alpha : {0.5, 0.9, 0.999}) {
        for (int trial = 0; trial < 40; ++trial) {
            Skeleton s(alpha, kUnbounded, 0.0);
            std::vector<Event> history;
            Time t = 1;
            for (int i = 0; i < 100; ++i) {
                t += static_cast<Time>(rng() % 20);
                const std::uint64_t w = 1 + rng() % 5;
                history.push_back({t, w});
                s.union_edge({0, 1}, t, w);
            }
            const Time later = t + static_cast<Time>(rng() % 50);
            const double direct = kernel_sum(history, later, alpha);
            CHECK(std::abs(decayed_freq(*s.lookup({0, 1}), later, alpha) - direct) <= 1e-9 * direct);
        }
    }
}

TEST_CASE("heap-backed eviction agrees with a sort-based reference") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t capacity = 1 + rng() % 12;
        const double alpha = 0.9;
        Skeleton s(alpha, capacity, 0.01);
        ReferenceSkeleton ref{alpha, capacity, 0.01, {}};
        Time t = 1;
        double last_cutoff = s.cutoff();
        for (int i = 0; i < 400; ++i) {
            t += static_cast<Time>(rng() % 3);
            const InteractionType type{static_cast<NodeId>(rng() % 6), static_cast<NodeId>(rng() % 6)};
            const std::uint64_t w = 1 + rng() % 4;
            std::vector<InteractionType> evicted;
            s.union_edge(type, t, w, &evicted);
            ref.add(type, t, w);

            CHECK(s.size() <= capacity);
            CHECK(s.cutoff() >= last_cutoff);
            last_cutoff = s.cutoff();
            CHECK(s.cutoff() == ref.cutoff);
            const auto entries = s.sorted_entries();
            REQUIRE(entries.size() == ref.entries.size());
            for (const auto& [k, e] : entries) {
                REQUIRE(ref.entries.count(k) == 1);
                CHECK(ref.entries.at(k) == e);
            }
            for (const auto& a : s.active()) {
                CHECK(s.contains(a));
            }
            for (const auto& v : evicted) {
                CHECK_FALSE(s.contains(v));
            }
            if (!evicted.empty()) {
                for (const auto& [k, e] : entries) {
                    CHECK(decayed_freq(e, t, alpha) >= s.cutoff());
                }
            }
        }
    }
}

TEST_CASE("node membership follows tracked types") {
    Skeleton s(0.5, 1, 0.0);
    s.union_edge({1, 2}, 1, 1);
    CHECK(s.contains_node(1));
    CHECK(s.contains_node(2));
    s.union_edge({3, 3}, 1, 8);
    CHECK_FALSE(s.contains_node(1));
    CHECK(s.contains_node(3));
    CHECK(s.nodes() == std::vector<NodeId>{3});
}

TEST_CASE("snapshot lines and restore") {
    Skeleton s(0.9, 4, 0.0);
    s.union_edge({1, 0}, 2, 3);
    s.union_edge({0, 1}, 3, 1);
    std::ostringstream out;
    s.write_snapshot(out, [](NodeId id) { return "n" + std::to_string(id); });
    CHECK(out.str() == "n0,n1,3,0.099999999999999978\nn1,n0,2,0.29999999999999993\n");

    const auto restored = Skeleton::restore(0.9, 4, 0.0, 0, s.sorted_entries(), {{0, 1}});
    CHECK(restored.sorted_entries() == s.sorted_entries());
    CHECK(restored.active().size() == 1);
    CHECK_THROWS_AS(Skeleton::restore(0.9, 4, 0.0, 0, s.sorted_entries(), {{5, 5}}), DataError);
}

TEST_CASE("constructor validation") {
    CHECK_THROWS_AS(Skeleton(1.0, 4, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(Skeleton(0.5, 0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(Skeleton(0.5, 4, -1.0), std::invalid_argument);
}
