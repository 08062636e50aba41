#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "ffade/detector.hpp"
#include "ffade/engine.hpp"
#include "ffade/stream.hpp"

namespace ffade {

enum class InjectionKind { clique, burst };

/// Two-level workload: communities with steady in-group traffic plus injected anomalies.
struct SyntheticConfig {
    std::size_t n_groups = 2;
    std::size_t nodes_per_group = 10;
    /// Poisson rate of every ordered in-group pair, events per tick.
    double base_freq = 0.05;
    Time horizon = 5000;
    std::size_t n_injections = 20;
    InjectionKind injection_kind = InjectionKind::burst;
    /// Nodes per injected clique; all ordered pairs among them fire once.
    std::size_t clique_size = 8;
    /// Simultaneous same-type interactions per injected burst.
    std::uint64_t burst_size = 70;
    /// Earliest injection tick; 0 means horizon / 10 + 1.
    Time injection_start = 0;
    std::uint64_t seed = 0;

    std::size_t total_nodes() const { return n_groups * nodes_per_group; }
    void validate() const;
};

/// Edges with one 0/1 label per event copy (an edge of weight w owns w labels).
struct LabeledStream {
    std::vector<Edge> edges;
    std::vector<int> labels;

    /// Label of each edge (its copies always share one label).
    std::vector<int> edge_labels() const;
};

LabeledStream generate(const SyntheticConfig& config);

/// Scenarios of an outside node u interacting with a two-community skeleton.
enum class Pattern {
    initial,          ///< u keeps talking to its one regular contact d
    same_group,       ///< u switches to another member of d's group
    other_group,      ///< u switches to a member of the other group
    higher_frequency, ///< u talks to d at ten times the regular rate
    group_burst,      ///< u talks to every member of d's group at once
};

struct PatternConfig {
    std::size_t nodes_per_group = 4;
    double base_freq = 0.05;
    Time horizon = 4000;
    /// Time at which u's behaviour changes; events of the changed behaviour are labelled 1
    /// except for the regular `initial` and `same_group` scenarios.
    Time switch_time = 3000;
    std::uint64_t seed = 0;
};

/// Node ids: group A is [0, n), group B is [n, 2n), u is 2n and d is 0.
LabeledStream generate_pattern(Pattern pattern, const PatternConfig& config);

/// Mann-Whitney AUC. Ties count one half; +inf ranks above every finite score.
/// Throws std::invalid_argument on length mismatch or a single class.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Runs the engine over a labelled stream and returns every score record.
std::vector<ScoreRecord> score_stream(const LabeledStream& stream, const HyperParams& params,
                                      RunSummary* summary = nullptr);

/// AUC of the scored copies of `stream`.
double evaluate_auc(const LabeledStream& stream, std::span<const ScoreRecord> records);

struct SweepRow {
    std::size_t mem_limit = 0;
    double auc = 0.0;
    double final_cutoff = 0.0;
};

/// One engine run per capacity value, run concurrently; rows follow `mem_limits` order.
std::vector<SweepRow> sweep_M(const LabeledStream& stream, const HyperParams& params,
                              std::span<const std::size_t> mem_limits);

struct PeriodMax {
    std::int64_t period_index = 0;
    double max_score = 0.0;
};

/// Maximum score per bucket floor(time / period); empty buckets are omitted.
std::vector<PeriodMax> aggregate_events(std::span<const ScoreRecord> records, Time period);

/// "src,dst,t,w" lines with integer node ids.
void write_stream(std::ostream& out, std::span<const Edge> edges);
/// One label per edge line.
void write_labels(std::ostream& out, std::span<const int> edge_labels);

}  // namespace ffade
