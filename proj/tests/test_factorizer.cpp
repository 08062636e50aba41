#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ffade/factorizer.hpp"

using namespace ffade;

namespace {

Vector random_vector(std::size_t m, Rng& rng, double scale = 0.5) {
    std::normal_distribution<double> normal(0.0, scale);
    Vector v(m);
    for (auto& x : v) {
        x = normal(rng);
    }
    return v;
}

// Objective written out independently: sum of -x - f * exp(-x), x = h_s^T Q h_d.
double direct_objective(const std::map<NodeId, Vector>& h, const MixMatrix& q,
                        const std::vector<PairTarget>& pairs) {
    double total = 0.0;
    const auto m = q.dim();
    for (const auto& p : pairs) {
        const auto& hs = h.at(p.type.source);
        const auto& hd = h.at(p.type.destination);
        double x = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                x += hs[i] * q.at(i, j) * hd[j];
            }
        }
        total += -x - p.freq * std::exp(-x);
    }
    return total;
}

// Two groups of four nodes, every ordered in-group pair at frequency 5.
Skeleton two_cliques(double alpha_scale_freq = 5.0) {
    const double alpha = 0.5;
    Skeleton s(alpha, kUnbounded, 0.005);
    for (NodeId g = 0; g < 2; ++g) {
        for (NodeId a = 0; a < 4; ++a) {
            for (NodeId b = 0; b < 4; ++b) {
                if (a != b) {
                    // (1 - alpha) * w = target frequency
                    s.union_edge({4 * g + a, 4 * g + b}, 1,
                                 static_cast<std::uint64_t>(alpha_scale_freq / (1.0 - alpha)));
                }
            }
        }
    }
    return s;
}

}  // namespace

TEST_CASE("intensity") {
    Rng rng(1);
    const auto q = MixMatrix::gaussian(4, rng);
    const Vector zero(4, 0.0);
    const auto hd = random_vector(4, rng);
    CHECK(intensity(zero, hd, q) == 1.0);

    const auto eye = MixMatrix::identity(3);
    const Vector e1{1.0, 0.0, 0.0};
    CHECK(intensity(e1, e1, eye) == doctest::Approx(2.718281828459045));

    const auto hs = random_vector(4, rng);
    const double x = q.bilinear(hs, hd);
    for (double c : {-2.0, 0.5, 3.0}) {
        Vector scaled = hs;
        for (auto& v : scaled) {
            v *= c;
        }
        CHECK(std::log(intensity(scaled, hd, q)) == doctest::Approx(c * x).epsilon(1e-12));
    }
}

TEST_CASE("intensity clamps the exponent") {
    const auto eye = MixMatrix::identity(1);
    CHECK(intensity(Vector{10.0}, Vector{10.0}, eye) == doctest::Approx(std::exp(kMaxExponent)));
    CHECK(intensity(Vector{10.0}, Vector{-10.0}, eye) == doctest::Approx(std::exp(-kMaxExponent)));
}

TEST_CASE("log_likelihood") {
    CHECK(log_likelihood(1.0, 1.0) == -1.0);
    CHECK(log_likelihood(0.0, 1.0) == 0.0);
    CHECK(log_likelihood(2.0, 4.0) == doctest::Approx(-std::log(4.0) - 0.5));
    CHECK(log_likelihood(2.0, 4.0) == doctest::Approx(-1.8862943611));
    CHECK_THROWS_AS(log_likelihood(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(log_likelihood(1.0, -2.0), std::invalid_argument);
}

TEST_CASE("objective over skeleton and complement pairs") {
    Skeleton s(0.5, kUnbounded, 0.0);
    s.union_edge({0, 1}, 1, 2);  // f = 1
    EmbeddingTable h(2);
    h.set(0, {0.0, 0.0});
    h.set(1, {0.0, 0.0});
    h.set(2, {0.3, -0.2});
    const auto eye = MixMatrix::identity(2);

    CHECK(objective(s, h, eye, 0.1, {}) == 0.0);
    const std::vector<InteractionType> one{{0, 1}};
    CHECK(objective(s, h, eye, 0.1, one) == -1.0);

    const std::vector<InteractionType> two{{0, 1}, {2, 2}};
    const double lambda22 = std::exp(0.3 * 0.3 + 0.2 * 0.2);
    const double oracle = log_likelihood(1.0, 1.0) + log_likelihood(0.1, lambda22);
    CHECK(std::abs(objective(s, h, eye, 0.1, two) - oracle) < 1e-12);
    // A zero cut-off is allowed: the complement term reduces to -log(lambda).
    CHECK(objective(s, h, eye, 0.0, std::vector<InteractionType>{{2, 2}}) ==
          doctest::Approx(-std::log(lambda22)));
}

TEST_CASE("analytic gradient matches central finite differences") {
    Rng rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 4;
        const auto q = MixMatrix::gaussian(m, rng);
        EmbeddingTable h(m);
        for (NodeId v = 0; v < 3; ++v) {
            h.set(v, random_vector(m, rng));
        }
        std::uniform_real_distribution<double> freq(0.01, 5.0);
        const std::vector<PairTarget> pairs{{{0, 1}, freq(rng)}, {{1, 2}, freq(rng)}, {{2, 0}, freq(rng)},
                                            {{1, 1}, freq(rng)}, {{2, 1}, freq(rng)}};
        const auto grads = objective_gradient(h, q, pairs);
        const double eps = 1e-5;
        double worst = 0.0;
        for (NodeId v = 0; v < 3; ++v) {
            for (std::size_t i = 0; i < m; ++i) {
                auto plus = h.vectors();
                auto minus = h.vectors();
                plus[v][i] += eps;
                minus[v][i] -= eps;
                const double fd = (direct_objective(plus, q, pairs) - direct_objective(minus, q, pairs)) / (2 * eps);
                worst = std::max(worst, std::abs(fd - grads.at(v)[i]));
            }
        }
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("gradient vanishes when f equals lambda") {
    Rng rng(3);
    const auto q = MixMatrix::gaussian(3, rng);
    EmbeddingTable h(3);
    h.set(0, random_vector(3, rng));
    h.set(1, random_vector(3, rng));
    const double lambda = intensity(*h.find(0), *h.find(1), q);
    const std::vector<PairTarget> pairs{{{0, 1}, lambda}};
    for (const auto& [node, g] : objective_gradient(h, q, pairs)) {
        for (double x : g) {
            CHECK(std::abs(x) < 1e-12);
        }
    }
}

TEST_CASE("gradient_step leaves frozen nodes bit-identical") {
    Rng rng(4);
    const auto q = MixMatrix::gaussian(3, rng);
    EmbeddingTable h(3);
    for (NodeId v = 0; v < 3; ++v) {
        h.set(v, random_vector(3, rng));
    }
    const auto before = h;
    const std::vector<PairTarget> pairs{{{0, 1}, 3.0}, {{1, 2}, 0.01}};
    const std::vector<NodeId> movable{0, 2};
    gradient_step(h, q, pairs, 0.1, movable);
    CHECK(*h.find(1) == *before.find(1));
    CHECK(*h.find(0) != *before.find(0));
    CHECK(*h.find(2) != *before.find(2));
}

TEST_CASE("full-batch ascent is monotone for small steps") {
    Rng rng(5);
    const std::size_t m = 3;
    const auto q = MixMatrix::gaussian(m, rng);
    EmbeddingTable h(m);
    std::vector<NodeId> movable;
    for (NodeId v = 0; v < 5; ++v) {
        h.set(v, random_vector(m, rng));
        movable.push_back(v);
    }
    std::vector<PairTarget> pairs;
    for (NodeId a = 0; a < 5; ++a) {
        for (NodeId b = 0; b < 5; ++b) {
            pairs.push_back({{a, b}, (a < 2) == (b < 2) ? 2.0 : 0.05});
        }
    }
    double previous = pairs_objective(h, q, pairs);
    for (int step = 0; step < 200; ++step) {
        gradient_step(h, q, pairs, 1e-3, movable);
        const double current = pairs_objective(h, q, pairs);
        CHECK(current >= previous - 1e-12);
        previous = current;
    }
}

TEST_CASE("ffac_update on two cliques separates in-group from cross-group intensity") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto s = two_cliques();
        Rng rng(seed);
        const auto q = MixMatrix::gaussian(8, rng);
        EmbeddingTable h(8);
        OptimizerConfig cfg;
        cfg.epochs = 200;
        cfg.step_size = 0.05;
        ffac_update(s, h, q, s.cutoff(), cfg, FitMode::global, rng);
        REQUIRE(h.size() == 8);

        double in_sum = 0.0;
        double cross_sum = 0.0;
        int in_n = 0;
        int cross_n = 0;
        for (NodeId a = 0; a < 8; ++a) {
            for (NodeId b = 0; b < 8; ++b) {
                if (a == b) {
                    continue;
                }
                const double lambda = intensity(*h.find(a), *h.find(b), q);
                if (a / 4 == b / 4) {
                    in_sum += lambda;
                    ++in_n;
                } else {
                    cross_sum += lambda;
                    ++cross_n;
                }
            }
        }
        const double ratio = (in_sum / in_n) / (cross_sum / cross_n);
        INFO("seed " << seed << " ratio " << ratio);
        CHECK(ratio >= 10.0);
    }
}

TEST_CASE("ffac_update syncs embeddings with skeleton nodes") {
    Skeleton s(0.5, 2, 0.0);
    EmbeddingTable h(4);
    h.set(99, Vector(4, 1.0));
    s.union_edge({0, 1}, 1, 4);
    Rng rng(6);
    const auto q = MixMatrix::gaussian(4, rng);
    ffac_update(s, h, q, s.cutoff(), {}, FitMode::global, rng);
    CHECK_FALSE(h.contains(99));
    CHECK(h.contains(0));
    CHECK(h.contains(1));
    for (const auto& [node, v] : h.vectors()) {
        for (double x : v) {
            CHECK(std::isfinite(x));
        }
    }
}

TEST_CASE("ffac_update with an empty active set changes nothing") {
    Skeleton s(0.5, kUnbounded, 0.0);
    s.union_edge({0, 1}, 1, 4);
    s.clear_active();
    EmbeddingTable h(2);
    h.set(5, {0.1, 0.2});
    const auto before = h;
    Rng rng(7);
    ffac_update(s, h, MixMatrix::identity(2), 0.0, {}, FitMode::global, rng);
    CHECK(h == before);
}

TEST_CASE("local updates only move active nodes") {
    auto s = two_cliques();
    Rng rng(8);
    const auto q = MixMatrix::gaussian(6, rng);
    const auto q_copy = q;
    EmbeddingTable h(6);
    ffac_update(s, h, q, s.cutoff(), {}, FitMode::global, rng);
    s.clear_active();
    s.union_edge({0, 1}, 2, 2);
    s.union_edge({1, 2}, 2, 2);
    const auto before = h;
    OptimizerConfig cfg;
    cfg.batch_neg_nodes = 3;
    ffac_update(s, h, q, s.cutoff(), cfg, FitMode::local, rng);
    for (const auto& [node, v] : h.vectors()) {
        if (node > 2) {
            CHECK(v == *before.find(node));
        }
    }
    CHECK(*h.find(1) != *before.find(1));
    CHECK(q == q_copy);
}

TEST_CASE("ffac_update is deterministic under a fixed seed") {
    auto run_once = [] {
        auto s = two_cliques();
        Rng rng(42);
        const auto q = MixMatrix::gaussian(5, rng);
        EmbeddingTable h(5);
        ffac_update(s, h, q, s.cutoff(), {}, FitMode::global, rng);
        return h;
    };
    CHECK(run_once() == run_once());
}

TEST_CASE("write_embeddings") {
    EmbeddingTable h(2);
    h.set(3, {0.5, -1.0});
    h.set(1, {0.25, 2.0});
    std::ostringstream out;
    write_embeddings(out, h, [](NodeId id) { return "v" + std::to_string(id); });
    CHECK(out.str() == "v1,0.25,2\nv3,0.5,-1\n");
}
