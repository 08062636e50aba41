#include "ffade/evalgen.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace ffade {

void SyntheticConfig::validate() const {
    if (n_groups == 0 || nodes_per_group == 0) {
        throw std::invalid_argument("groups and nodes per group must be positive");
    }
    if (!(base_freq > 0.0)) {
        throw std::invalid_argument("base_freq must be positive");
    }
    if (horizon < 1) {
        throw std::invalid_argument("horizon must be positive");
    }
    if (injection_kind == InjectionKind::clique && (clique_size < 2 || clique_size > total_nodes())) {
        throw std::invalid_argument("clique_size must lie in [2, total nodes]");
    }
    if (injection_kind == InjectionKind::burst && (burst_size == 0 || total_nodes() < 2)) {
        throw std::invalid_argument("bursts need a positive size and at least two nodes");
    }
    if (injection_start < 0 || injection_start > horizon) {
        throw std::invalid_argument("injection_start must lie in [0, horizon]");
    }
}

std::vector<int> LabeledStream::edge_labels() const {
    std::vector<int> out;
    out.reserve(edges.size());
    std::size_t offset = 0;
    for (const auto& e : edges) {
        out.push_back(labels.at(offset));
        offset += e.weight;
    }
    return out;
}

namespace {

struct Draft {
    Edge edge;
    int label = 0;
};

// Poisson arrivals of one interaction type over ticks (from, to].
void poisson_events(std::vector<Draft>& out, InteractionType type, double rate, double from, Time to,
                    int label, Rng& rng) {
    std::exponential_distribution<double> gap(rate);
    double t = from;
    while (true) {
        t += gap(rng);
        const auto tick = static_cast<Time>(std::floor(t)) + 1;
        if (tick > to) {
            break;
        }
        out.push_back({{type.source, type.destination, tick, 1}, label});
    }
}

LabeledStream finalize(std::vector<Draft> drafts) {
    std::stable_sort(drafts.begin(), drafts.end(),
                     [](const Draft& a, const Draft& b) { return a.edge.time < b.edge.time; });
    LabeledStream out;
    out.edges.reserve(drafts.size());
    for (const auto& d : drafts) {
        out.edges.push_back(d.edge);
        out.labels.insert(out.labels.end(), d.edge.weight, d.label);
    }
    return out;
}

void community_traffic(std::vector<Draft>& out, std::size_t groups, std::size_t per_group, double rate,
                       Time horizon, Rng& rng) {
    for (std::size_t g = 0; g < groups; ++g) {
        const auto base = static_cast<NodeId>(g * per_group);
        for (NodeId s = 0; s < per_group; ++s) {
            for (NodeId d = 0; d < per_group; ++d) {
                if (s != d) {
                    poisson_events(out, {base + s, base + d}, rate, 0.0, horizon, 0, rng);
                }
            }
        }
    }
}

}  // namespace

LabeledStream generate(const SyntheticConfig& config) {
    config.validate();
    Rng rng(config.seed);
    std::vector<Draft> drafts;
    community_traffic(drafts, config.n_groups, config.nodes_per_group, config.base_freq, config.horizon, rng);

    const auto n = static_cast<NodeId>(config.total_nodes());
    const Time start = config.injection_start > 0 ? config.injection_start : config.horizon / 10 + 1;
    std::uniform_int_distribution<Time> when(std::min(start, config.horizon), config.horizon);
    std::vector<NodeId> all(n);
    std::iota(all.begin(), all.end(), NodeId{0});
    for (std::size_t i = 0; i < config.n_injections; ++i) {
        const Time t = when(rng);
        std::shuffle(all.begin(), all.end(), rng);
        if (config.injection_kind == InjectionKind::clique) {
            for (std::size_t a = 0; a < config.clique_size; ++a) {
                for (std::size_t b = 0; b < config.clique_size; ++b) {
                    if (a != b) {
                        drafts.push_back({{all[a], all[b], t, 1}, 1});
                    }
                }
            }
        } else {
            drafts.push_back({{all[0], all[1], t, config.burst_size}, 1});
        }
    }
    return finalize(std::move(drafts));
}

LabeledStream generate_pattern(Pattern pattern, const PatternConfig& config) {
    if (config.nodes_per_group < 2 || !(config.base_freq > 0.0) || config.switch_time < 1 ||
        config.switch_time >= config.horizon) {
        throw std::invalid_argument("invalid pattern configuration");
    }
    Rng rng(config.seed);
    std::vector<Draft> drafts;
    const auto n = static_cast<NodeId>(config.nodes_per_group);
    community_traffic(drafts, 2, n, config.base_freq, config.horizon, rng);

    const NodeId u = 2 * n;
    const NodeId d = 0;
    const double rate = config.base_freq;
    const auto switch_at = static_cast<double>(config.switch_time);
    poisson_events(drafts, {u, d}, rate, 0.0, config.switch_time, 0, rng);
    switch (pattern) {
        case Pattern::initial:
            poisson_events(drafts, {u, d}, rate, switch_at, config.horizon, 0, rng);
            break;
        case Pattern::same_group:
            poisson_events(drafts, {u, 1}, rate, switch_at, config.horizon, 0, rng);
            break;
        case Pattern::other_group:
            poisson_events(drafts, {u, n}, rate, switch_at, config.horizon, 1, rng);
            break;
        case Pattern::higher_frequency:
            poisson_events(drafts, {u, d}, 10.0 * rate, switch_at, config.horizon, 1, rng);
            break;
        case Pattern::group_burst: {
            std::vector<Draft> triggers;
            poisson_events(triggers, {u, d}, rate, switch_at, config.horizon, 1, rng);
            for (const auto& trigger : triggers) {
                for (NodeId member = 0; member < n; ++member) {
                    drafts.push_back({{u, member, trigger.edge.time, 1}, 1});
                }
            }
            break;
        }
    }
    return finalize(std::move(drafts));
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw std::invalid_argument("auc: scores and labels differ in length");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (double s : scores) {
        if (std::isnan(s)) {
            throw std::invalid_argument("auc: NaN score");
        }
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of mid-ranks of the positives.
    double positive_rank_sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            ++j;
        }
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] != 0) {
                positive_rank_sum += mid_rank;
                ++positives;
            }
        }
        i = j;
    }
    const std::size_t negatives = scores.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw std::invalid_argument("auc: both classes must be present");
    }
    const double p = static_cast<double>(positives);
    const double u_stat = positive_rank_sum - p * (p + 1.0) / 2.0;
    return u_stat / (p * static_cast<double>(negatives));
}

std::vector<ScoreRecord> score_stream(const LabeledStream& stream, const HyperParams& params,
                                      RunSummary* summary) {
    std::vector<ScoreRecord> records;
    Engine engine(params);
    TickCoalescer coalescer;
    Tick tick;
    const auto sink = [&records](const ScoreRecord& r) { records.push_back(r); };
    for (std::size_t i = 0; i < stream.edges.size(); ++i) {
        if (coalescer.push(stream.edges[i], i, tick)) {
            engine.process(tick, sink);
        }
    }
    if (coalescer.finish(tick)) {
        engine.process(tick, sink);
    }
    if (summary != nullptr) {
        *summary = engine.summary();
    }
    return records;
}

double evaluate_auc(const LabeledStream& stream, std::span<const ScoreRecord> records) {
    const auto per_edge = stream.edge_labels();
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(records.size());
    labels.reserve(records.size());
    for (const auto& r : records) {
        scores.push_back(r.score);
        labels.push_back(per_edge.at(r.origin));
    }
    return auc(scores, labels);
}

std::vector<SweepRow> sweep_M(const LabeledStream& stream, const HyperParams& params,
                              std::span<const std::size_t> mem_limits) {
    std::vector<std::future<SweepRow>> jobs;
    jobs.reserve(mem_limits.size());
    for (auto limit : mem_limits) {
        HyperParams run_params = params;
        run_params.mem_limit = limit;
        jobs.push_back(std::async(std::launch::async, [&stream, run_params, limit] {
            RunSummary summary;
            const auto records = score_stream(stream, run_params, &summary);
            return SweepRow{limit, evaluate_auc(stream, records), summary.final_cutoff};
        }));
    }
    std::vector<SweepRow> rows;
    rows.reserve(jobs.size());
    for (auto& job : jobs) {
        rows.push_back(job.get());
    }
    return rows;
}

std::vector<PeriodMax> aggregate_events(std::span<const ScoreRecord> records, Time period) {
    if (period <= 0) {
        throw std::invalid_argument("aggregate_events: period must be positive");
    }
    std::map<std::int64_t, double> buckets;
    for (const auto& r : records) {
        const auto index = r.time / period;
        auto [it, inserted] = buckets.emplace(index, r.score);
        if (!inserted) {
            it->second = std::max(it->second, r.score);
        }
    }
    std::vector<PeriodMax> out;
    out.reserve(buckets.size());
    for (const auto& [index, score] : buckets) {
        out.push_back({index, score});
    }
    return out;
}

void write_stream(std::ostream& out, std::span<const Edge> edges) {
    for (const auto& e : edges) {
        out << e.source << ',' << e.destination << ',' << e.time << ',' << e.weight << '\n';
    }
}

void write_labels(std::ostream& out, std::span<const int> edge_labels) {
    for (int label : edge_labels) {
        out << label << '\n';
    }
}

}  // namespace ffade
