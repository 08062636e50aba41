#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ffade/stream.hpp"

namespace ffade {

/// Last-seen time and aggregated frequency of one interaction type.
struct FreqEntry {
    Time last_time = 0;
    double freq = 0.0;

    friend bool operator==(const FreqEntry&, const FreqEntry&) = default;
};

/// Interaction types seen since the last model update.
using ActiveSet = std::unordered_set<InteractionType, InteractionTypeHash>;

inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

/// Frequency of `e` decayed forward to `now`: alpha^(now - last_time) * freq.
double decayed_freq(const FreqEntry& e, Time now, double alpha);

/// Bounded map from interaction type to exponentially aggregated frequency.
///
/// Frequencies follow f <- alpha^dt * f + (1 - alpha) * w, i.e. a kernel
/// alpha^i (1 - alpha) over past event weights. When more than `capacity`
/// types are tracked, the cut-off frequency is raised to the decayed frequency
/// of the capacity-th most frequent type and everything below it is dropped.
/// The cut-off never decreases.
///
/// A min-heap keyed on log-domain decayed frequency supports the eviction
/// scan; superseded heap items are skipped lazily.
class Skeleton {
public:
    Skeleton(double alpha, std::size_t capacity, double cutoff);

    /// Merges `weight` same-type interactions at time `now`. Evicted types are
    /// appended to `evicted` when it is non-null.
    void union_edge(InteractionType type, Time now, std::uint64_t weight,
                    std::vector<InteractionType>* evicted = nullptr);

    const FreqEntry* lookup(InteractionType type) const;
    bool contains(InteractionType type) const { return lookup(type) != nullptr; }

    /// Entry with the smallest decayed frequency at `now`; ties go to the
    /// older last_time, then the smaller type. Throws std::logic_error when empty.
    std::pair<InteractionType, double> min_decayed(Time now);

    double alpha() const { return alpha_; }
    std::size_t capacity() const { return capacity_; }
    double cutoff() const { return cutoff_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    std::size_t evictions() const { return evictions_; }

    const ActiveSet& active() const { return active_; }
    void clear_active() { active_.clear(); }

    /// True when `node` is an endpoint of at least one tracked type.
    bool contains_node(NodeId node) const { return node_refs_.count(node) != 0; }
    /// Nodes of all tracked types, ascending.
    std::vector<NodeId> nodes() const;
    /// All entries ordered by type.
    std::vector<std::pair<InteractionType, FreqEntry>> sorted_entries() const;

    /// Writes "src,dst,last_time,freq" lines ordered by type.
    void write_snapshot(std::ostream& out, const std::function<std::string(NodeId)>& name) const;

    /// Rebuilds a skeleton from persisted parts.
    static Skeleton restore(double alpha, std::size_t capacity, double cutoff, std::size_t evictions,
                            const std::vector<std::pair<InteractionType, FreqEntry>>& entries,
                            const std::vector<InteractionType>& active);

private:
    struct Slot {
        FreqEntry entry;
        std::uint64_t stamp = 0;
    };
    struct HeapItem {
        double primary = 0.0;
        double secondary = 0.0;
        Time last_time = 0;
        InteractionType type;
        std::uint64_t stamp = 0;
    };
    struct HeapAfter {
        bool operator()(const HeapItem& a, const HeapItem& b) const;
    };

    HeapItem make_item(InteractionType type, const Slot& slot) const;
    void push_item(InteractionType type, const Slot& slot);
    bool is_live(const HeapItem& item) const;
    void drop_stale_top();
    void erase(InteractionType type, std::vector<InteractionType>* evicted);
    void enforce_capacity(Time now, std::vector<InteractionType>* evicted);
    void maybe_compact();

    double alpha_;
    double log_alpha_;
    std::size_t capacity_;
    double cutoff_;
    std::size_t evictions_ = 0;
    std::uint64_t next_stamp_ = 0;
    std::unordered_map<InteractionType, Slot, InteractionTypeHash> entries_;
    std::vector<HeapItem> heap_;
    ActiveSet active_;
    std::unordered_map<NodeId, std::uint32_t> node_refs_;
};

}  // namespace ffade
