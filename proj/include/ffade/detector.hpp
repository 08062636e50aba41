#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ffade/factorizer.hpp"
#include "ffade/skeleton.hpp"
#include "ffade/stream.hpp"

namespace ffade {

enum class Channel { pair, group_out, group_in };

std::string_view channel_name(Channel c);

/// Score of one event copy.
struct ScoreRecord {
    Time time = 0;
    InteractionType type;
    double score = 0.0;
    Channel channel = Channel::pair;
    /// Which of the simultaneous same-type copies this is.
    std::uint64_t sub_index = 0;
    /// Input event index the copy came from.
    std::size_t origin = 0;
};

/// Previous-appearance times used to compute observed frequencies.
///
/// `per_type` mirrors the skeleton's last_time for tracked types; the per-node
/// maps hold the last out/in interaction of nodes still present in the
/// skeleton. All three are pruned as the skeleton evicts.
struct LastSeenIndex {
    std::unordered_map<InteractionType, Time, InteractionTypeHash> per_type;
    std::unordered_map<NodeId, Time> per_source_out;
    std::unordered_map<NodeId, Time> per_dest_in;

    std::optional<Time> type_time(InteractionType t) const;
    std::optional<Time> source_time(NodeId v) const;
    std::optional<Time> dest_time(NodeId v) const;

    /// Records every interaction of `tick`, then drops whatever `skeleton` no
    /// longer tracks among `evicted` types and their endpoints.
    void update(const Tick& tick, const Skeleton& skeleton, std::span<const InteractionType> evicted);
};

/// Observed frequencies of w simultaneous copies at time t.
///
/// Copies are spread evenly over (t-1, t]: the first gets 1/(t - prev - 1 + 1/w)
/// (1/(t - prev) when w = 1) or `cutoff` when no previous time is known; the
/// remaining w-1 copies get w. Throws std::invalid_argument when prev >= t.
std::vector<double> observed_freqs(Time t, std::optional<Time> prev, std::uint64_t w, double cutoff);

/// Single element of observed_freqs without materialising the list.
double observed_freq_at(Time t, std::optional<Time> prev, std::uint64_t w, double cutoff,
                        std::uint64_t position);

/// exp(h_s^T Q h_d) when both embeddings exist, `cutoff` otherwise.
double pair_intensity(InteractionType t, const EmbeddingTable& h, const MixMatrix& q, double cutoff);

/// f_obs / lambda; a zero intensity gives +infinity.
double pair_score(double f_obs, InteractionType t, const EmbeddingTable& h, const MixMatrix& q,
                  double cutoff);

/// f_obs / sum of member intensities. Throws std::invalid_argument on an empty group.
double group_score(double f_obs, std::span<const InteractionType> group, const EmbeddingTable& h,
                   const MixMatrix& q, double cutoff);

struct DetectOptions {
    /// Ticks at or before this time produce no records.
    Time t_setup = 0;
    /// Disables the same-source / same-destination channels.
    bool group_channels = true;
};

/// Scores every copy in `tick` against state from strictly before it.
std::vector<ScoreRecord> detect_tick(const Tick& tick, const LastSeenIndex& index, const EmbeddingTable& h,
                                     const MixMatrix& q, double cutoff, const DetectOptions& options = {});

}  // namespace ffade
