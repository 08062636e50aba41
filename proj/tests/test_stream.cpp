#include <doctest.h>

#include <map>
#include <random>
#include <sstream>

#include "ffade/stream.hpp"

using namespace ffade;

TEST_CASE("parse_edge_line maps fields and defaults the weight") {
    NodeInterner names;
    const StreamFormat fmt;
    const auto e = parse_edge_line("a,b,10,2", fmt, names, 1);
    CHECK(names.name(e.source) == "a");
    CHECK(names.name(e.destination) == "b");
    CHECK(e.time == 10);
    CHECK(e.weight == 2);

    const auto d = parse_edge_line("a,b,10", fmt, names, 2);
    CHECK(d.weight == 1);
    CHECK(d.source == e.source);
}

TEST_CASE("parse_edge_line rejects bad records with the line number") {
    NodeInterner names;
    const StreamFormat fmt;
    CHECK_THROWS_WITH_AS(parse_edge_line("a,b,0,1", fmt, names, 7), doctest::Contains("line 7"), DataError);
    CHECK_THROWS_AS(parse_edge_line("a,b,5,0", fmt, names, 1), DataError);
    CHECK_THROWS_AS(parse_edge_line("a,b,-3", fmt, names, 1), DataError);
    CHECK_THROWS_AS(parse_edge_line("a,b", fmt, names, 1), DataError);
    CHECK_THROWS_AS(parse_edge_line("a,b,x", fmt, names, 1), DataError);
    CHECK_THROWS_AS(parse_edge_line(",b,3", fmt, names, 1), DataError);
}

TEST_CASE("parse_edge_stream honours header, delimiter and counts time regressions") {
    std::istringstream in("src\tdst\tt\nx\ty\t3\n\ny\tx\t2\t4\nx\tx\t5\n");
    NodeInterner names;
    StreamFormat fmt;
    fmt.delimiter = '\t';
    fmt.header = true;
    const auto parsed = parse_edge_stream(in, fmt, names);
    REQUIRE(parsed.edges.size() == 3);
    CHECK(parsed.monotonicity_violations == 1);
    CHECK(parsed.edges[1].weight == 4);
    CHECK(parsed.edges[2].source == parsed.edges[2].destination);
}

TEST_CASE("parse_edge_stream reports the physical line of a bad record") {
    std::istringstream in("a,b,1\na,b,2\na,b,zz\n");
    NodeInterner names;
    CHECK_THROWS_WITH_AS(parse_edge_stream(in, {}, names), doctest::Contains("line 3"), DataError);
}

TEST_CASE("canonicalize_type") {
    NodeInterner names;
    const auto a = names.intern("a");
    const auto b = names.intern("b");
    CHECK(canonicalize_type({b, a}, false) == InteractionType{b, a});
    CHECK(canonicalize_type({b, a}, true) == InteractionType{a, b});
    CHECK(canonicalize_type({a, a}, true) == InteractionType{a, a});
}

TEST_CASE("undirected parsing merges both directions") {
    std::istringstream in("a,b,1\nb,a,1\n");
    NodeInterner names;
    StreamFormat fmt;
    fmt.undirected = true;
    const auto ticks = coalesce_into_ticks(parse_edge_stream(in, fmt, names).edges);
    REQUIRE(ticks.size() == 1);
    CHECK(ticks[0].typed_counts.size() == 1);
    CHECK(ticks[0].typed_counts.begin()->second == 2);
}

TEST_CASE("coalesce_into_ticks merges same-type events per timestamp") {
    const std::vector<Edge> edges{{0, 1, 5, 1}, {0, 1, 5, 1}, {2, 3, 5, 1}};
    const auto ticks = coalesce_into_ticks(edges);
    REQUIRE(ticks.size() == 1);
    CHECK(ticks[0].time == 5);
    CHECK(ticks[0].typed_counts.at({0, 1}) == 2);
    CHECK(ticks[0].typed_counts.at({2, 3}) == 1);
    CHECK(ticks[0].origins.at({0, 1}) == std::vector<std::size_t>{0, 1});
    CHECK(ticks[0].origins.at({2, 3}) == std::vector<std::size_t>{2});
}

TEST_CASE("coalesce_into_ticks splits distinct times and rejects regressions") {
    const auto ticks = coalesce_into_ticks({{0, 1, 5, 1}, {0, 1, 7, 1}});
    REQUIRE(ticks.size() == 2);
    CHECK(ticks[0].time == 5);
    CHECK(ticks[1].time == 7);

    CHECK_THROWS_WITH_AS(coalesce_into_ticks({{0, 1, 7, 1}, {0, 1, 5, 1}}), doctest::Contains("event 1"),
                         DataError);
    // A regression back to an already-emitted tick is also refused.
    CHECK_THROWS_AS(coalesce_into_ticks({{0, 1, 5, 1}, {0, 1, 7, 1}, {0, 1, 5, 1}}), DataError);
    CHECK(coalesce_into_ticks({}).empty());
}

TEST_CASE("coalescing preserves weight per type and time, with increasing tick times") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Edge> edges;
        Time t = 1;
        std::map<std::pair<Time, InteractionType>, std::uint64_t> expected;
        const int n = std::uniform_int_distribution<int>(0, 200)(rng);
        for (int i = 0; i < n; ++i) {
            t += std::uniform_int_distribution<int>(0, 2)(rng);
            Edge e{static_cast<NodeId>(rng() % 4), static_cast<NodeId>(rng() % 4), t, 1 + rng() % 3};
            edges.push_back(e);
            expected[{e.time, e.type()}] += e.weight;
        }
        const auto ticks = coalesce_into_ticks(edges);
        std::map<std::pair<Time, InteractionType>, std::uint64_t> got;
        for (std::size_t i = 0; i < ticks.size(); ++i) {
            if (i > 0) {
                CHECK(ticks[i].time > ticks[i - 1].time);
            }
            for (const auto& [type, w] : ticks[i].typed_counts) {
                CHECK(w >= 1);
                got[{ticks[i].time, type}] += w;
                CHECK(ticks[i].origins.at(type).size() == w);
            }
        }
        CHECK(got == expected);
        // Deterministic given identical input.
        const auto again = coalesce_into_ticks(edges);
        REQUIRE(again.size() == ticks.size());
        for (std::size_t i = 0; i < ticks.size(); ++i) {
            CHECK(again[i].typed_counts == ticks[i].typed_counts);
        }
    }
}

TEST_CASE("parse_labels") {
    std::istringstream ok("0\n1\n\n1\n");
    CHECK(parse_labels(ok) == std::vector<int>{0, 1, 1});
    std::istringstream bad("0\n2\n");
    CHECK_THROWS_AS(parse_labels(bad), DataError);
}
