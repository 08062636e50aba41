#include "ffade/detector.hpp"

#include <limits>
#include <map>
#include <stdexcept>

namespace ffade {

std::string_view channel_name(Channel c) {
    switch (c) {
        case Channel::pair:
            return "pair";
        case Channel::group_out:
            return "group_out";
        case Channel::group_in:
            return "group_in";
    }
    return "?";
}

namespace {

template <typename Map, typename Key>
std::optional<Time> find_time(const Map& map, const Key& key) {
    auto it = map.find(key);
    if (it == map.end()) {
        return std::nullopt;
    }
    return it->second;
}

double ratio(double f, double lambda) {
    if (!(lambda > 0.0)) {
        return std::numeric_limits<double>::infinity();
    }
    return f / lambda;
}

}  // namespace

std::optional<Time> LastSeenIndex::type_time(InteractionType t) const { return find_time(per_type, t); }
std::optional<Time> LastSeenIndex::source_time(NodeId v) const { return find_time(per_source_out, v); }
std::optional<Time> LastSeenIndex::dest_time(NodeId v) const { return find_time(per_dest_in, v); }

void LastSeenIndex::update(const Tick& tick, const Skeleton& skeleton,
                           std::span<const InteractionType> evicted) {
    for (const auto& [type, w] : tick.typed_counts) {
        per_type[type] = tick.time;
        per_source_out[type.source] = tick.time;
        per_dest_in[type.destination] = tick.time;
    }
    for (const auto& type : evicted) {
        if (!skeleton.contains(type)) {
            per_type.erase(type);
        }
        for (NodeId v : {type.source, type.destination}) {
            if (!skeleton.contains_node(v)) {
                per_source_out.erase(v);
                per_dest_in.erase(v);
            }
        }
    }
}

double observed_freq_at(Time t, std::optional<Time> prev, std::uint64_t w, double cutoff,
                        std::uint64_t position) {
    if (w == 0 || position >= w) {
        throw std::invalid_argument("observed_freq_at: position out of range");
    }
    if (prev && *prev >= t) {
        throw std::invalid_argument("observed_freq_at: previous time must precede t");
    }
    if (position > 0) {
        return static_cast<double>(w);
    }
    if (!prev) {
        return cutoff;
    }
    const double gap = static_cast<double>(t - *prev) - 1.0 + 1.0 / static_cast<double>(w);
    return 1.0 / gap;
}

std::vector<double> observed_freqs(Time t, std::optional<Time> prev, std::uint64_t w, double cutoff) {
    std::vector<double> out;
    out.reserve(w);
    for (std::uint64_t i = 0; i < w; ++i) {
        out.push_back(observed_freq_at(t, prev, w, cutoff, i));
    }
    return out;
}

double pair_intensity(InteractionType t, const EmbeddingTable& h, const MixMatrix& q, double cutoff) {
    const auto* hs = h.find(t.source);
    const auto* hd = h.find(t.destination);
    if (hs == nullptr || hd == nullptr) {
        return cutoff;
    }
    return intensity(*hs, *hd, q);
}

double pair_score(double f_obs, InteractionType t, const EmbeddingTable& h, const MixMatrix& q,
                  double cutoff) {
    return ratio(f_obs, pair_intensity(t, h, q, cutoff));
}

double group_score(double f_obs, std::span<const InteractionType> group, const EmbeddingTable& h,
                   const MixMatrix& q, double cutoff) {
    if (group.empty()) {
        throw std::invalid_argument("group_score: empty group");
    }
    double total = 0.0;
    for (const auto& t : group) {
        total += pair_intensity(t, h, q, cutoff);
    }
    return ratio(f_obs, total);
}

namespace {

// Simultaneous interactions sharing one endpoint, in tick order.
struct Group {
    std::map<InteractionType, std::uint64_t> offset;
    std::uint64_t weight = 0;
    double intensity = 0.0;
};

}  // namespace

std::vector<ScoreRecord> detect_tick(const Tick& tick, const LastSeenIndex& index, const EmbeddingTable& h,
                                     const MixMatrix& q, double cutoff, const DetectOptions& options) {
    std::vector<ScoreRecord> records;
    if (tick.time <= options.t_setup) {
        return records;
    }

    std::map<NodeId, Group> out_groups;
    std::map<NodeId, Group> in_groups;
    std::map<InteractionType, double> lambdas;
    for (const auto& [type, w] : tick.typed_counts) {
        const double lambda = pair_intensity(type, h, q, cutoff);
        lambdas[type] = lambda;
        if (!options.group_channels) {
            continue;
        }
        for (auto* g : {&out_groups[type.source], &in_groups[type.destination]}) {
            g->offset[type] = g->weight;
            g->weight += w;
            g->intensity += lambda;
        }
    }

    records.reserve(tick.total_weight());
    for (const auto& [type, w] : tick.typed_counts) {
        const auto prev = index.type_time(type);
        const double lambda = lambdas[type];
        const auto origins = tick.origins.find(type);
        const Group* out_group = options.group_channels ? &out_groups.at(type.source) : nullptr;
        const Group* in_group = options.group_channels ? &in_groups.at(type.destination) : nullptr;
        const auto out_prev = index.source_time(type.source);
        const auto in_prev = index.dest_time(type.destination);

        for (std::uint64_t j = 0; j < w; ++j) {
            ScoreRecord r;
            r.time = tick.time;
            r.type = type;
            r.sub_index = j;
            if (origins != tick.origins.end() && j < origins->second.size()) {
                r.origin = origins->second[j];
            }
            r.score = ratio(observed_freq_at(tick.time, prev, w, cutoff, j), lambda);
            r.channel = Channel::pair;
            if (out_group != nullptr) {
                const double f = observed_freq_at(tick.time, out_prev, out_group->weight, cutoff,
                                                  out_group->offset.at(type) + j);
                const double s = ratio(f, out_group->intensity);
                if (s > r.score) {
                    r.score = s;
                    r.channel = Channel::group_out;
                }
            }
            if (in_group != nullptr) {
                const double f = observed_freq_at(tick.time, in_prev, in_group->weight, cutoff,
                                                  in_group->offset.at(type) + j);
                const double s = ratio(f, in_group->intensity);
                if (s > r.score) {
                    r.score = s;
                    r.channel = Channel::group_in;
                }
            }
            records.push_back(r);
        }
    }
    return records;
}

}  // namespace ffade
