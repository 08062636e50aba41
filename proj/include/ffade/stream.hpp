#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ffade {

/// Dense node identifier produced by interning the opaque ids found in input files.
using NodeId = std::uint32_t;
using Time = std::int64_t;

/// Error raised for malformed or inconsistent input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Ordered (source, destination) pair identifying a stream of same-type interactions.
struct InteractionType {
    NodeId source = 0;
    NodeId destination = 0;

    friend auto operator<=>(const InteractionType&, const InteractionType&) = default;
};

struct InteractionTypeHash {
    std::size_t operator()(const InteractionType& t) const noexcept {
        return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(t.source) << 32) | t.destination);
    }
};

/// One interaction event. `weight` counts simultaneous same-type interactions.
struct Edge {
    NodeId source = 0;
    NodeId destination = 0;
    Time time = 1;
    std::uint64_t weight = 1;

    InteractionType type() const { return {source, destination}; }
    friend bool operator==(const Edge&, const Edge&) = default;
};

/// All interactions sharing one timestamp, merged per interaction type.
///
/// `origins[type]` lists, per event copy, the index of the input event it came
/// from (an event of weight w contributes w copies). It is what lets scores be
/// joined back to per-event labels after coalescing.
struct Tick {
    Time time = 0;
    std::map<InteractionType, std::uint64_t> typed_counts;
    std::map<InteractionType, std::vector<std::size_t>> origins;

    std::uint64_t total_weight() const;
};

/// Bidirectional mapping between external node names and dense ids.
class NodeInterner {
public:
    NodeId intern(std::string_view name);
    /// Returns the id of a known name, or throws DataError.
    NodeId id(std::string_view name) const;
    bool contains(std::string_view name) const;
    const std::string& name(NodeId id) const;
    std::size_t size() const { return names_.size(); }

private:
    std::unordered_map<std::string, NodeId> ids_;
    std::vector<std::string> names_;
};

struct StreamFormat {
    char delimiter = ',';
    bool header = false;
    bool undirected = false;
};

struct ParsedStream {
    std::vector<Edge> edges;
    /// Number of events whose timestamp is smaller than the previous event's.
    std::size_t monotonicity_violations = 0;
};

/// Directed mode returns `t` unchanged; undirected mode orders the pair by node id.
InteractionType canonicalize_type(InteractionType t, bool undirected);

/// Parses a single "src,dst,t[,w]" record. `line_no` is used in error messages only.
Edge parse_edge_line(std::string_view line, const StreamFormat& format, NodeInterner& interner,
                     std::size_t line_no);

/// Reads a whole delimiter-separated edge stream. Blank lines are skipped.
ParsedStream parse_edge_stream(std::istream& in, const StreamFormat& format, NodeInterner& interner);

/// Reads a labels file: one 0/1 integer per event line.
std::vector<int> parse_labels(std::istream& in);

/// Incrementally groups time-ordered edges into ticks.
///
/// Events sharing a timestamp are buffered until a later timestamp arrives;
/// an event earlier than the buffered tick is rejected.
class TickCoalescer {
public:
    /// Adds one event; returns the tick that was completed by it, if any.
    /// `origin` is the index recorded for this event's copies.
    bool push(const Edge& e, std::size_t origin, Tick& completed);
    /// Flushes the pending tick. Returns false when nothing is buffered.
    bool finish(Tick& completed);

private:
    Tick pending_;
    bool has_pending_ = false;
    Time last_emitted_ = 0;
};

/// Convenience wrapper over TickCoalescer; origin of edge i is i.
std::vector<Tick> coalesce_into_ticks(const std::vector<Edge>& edges);

}  // namespace ffade
