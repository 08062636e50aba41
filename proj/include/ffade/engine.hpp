#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "ffade/detector.hpp"
#include "ffade/factorizer.hpp"
#include "ffade/skeleton.hpp"
#include "ffade/stream.hpp"

namespace ffade {

/// Run configuration. Defaults target minute-resolution network-flow streams
/// (alpha 0.999, M 200, m 100, f_th 0.0167 per minute).
struct HyperParams {
    Time t_setup = 1;
    Time w_upd = 60;
    double alpha = 0.999;
    /// Skeleton capacity M; kUnbounded disables eviction.
    std::size_t mem_limit = 200;
    std::size_t dim = 100;
    double f_th = 16.7e-3;
    bool undirected = false;
    bool group_channels = true;
    std::uint64_t seed = 0;
    OptimizerConfig optimizer;

    /// Throws std::invalid_argument on out-of-range values.
    void validate() const;
};

/// Sets one field from its config-file key (t_setup, w_upd, alpha, mem_limit,
/// dim, f_th, undirected, group_channels, seed, epochs, step_size, batch_pos,
/// batch_neg_nodes, batch_pairs, neg_per_node, clip_norm).
void set_param(HyperParams& params, std::string_view key, std::string_view value);

/// Applies "key = value" lines; '#' starts a comment.
void load_config(std::istream& in, HyperParams& params);

/// "key = value" lines for every field, in the format load_config reads.
std::string describe(const HyperParams& params);

struct RunSummary {
    std::size_t ticks = 0;
    std::size_t events = 0;
    std::size_t scored = 0;
    std::size_t evictions = 0;
    std::size_t updates = 0;
    std::size_t peak_tracked = 0;
    double final_cutoff = 0.0;
};

using ScoreSink = std::function<void(const ScoreRecord&)>;
using UpdateObserver = std::function<void(Time, FitMode)>;

/// Streaming detector: per tick, score against the pre-tick model, merge the
/// tick into the skeleton, and refit embeddings at t_setup + k * w_upd.
class Engine {
public:
    explicit Engine(HyperParams params);

    /// Ticks must arrive in strictly increasing time order.
    void process(const Tick& tick, const ScoreSink& sink);

    void set_update_observer(UpdateObserver observer) { observer_ = std::move(observer); }

    const HyperParams& params() const { return params_; }
    const Skeleton& skeleton() const { return skeleton_; }
    const EmbeddingTable& embeddings() const { return embeddings_; }
    const MixMatrix& mix() const { return mix_; }
    const LastSeenIndex& index() const { return index_; }
    double cutoff() const { return skeleton_.cutoff(); }
    std::uint64_t update_counter() const { return k_; }
    RunSummary summary() const;

    /// Serialised state; restore() of it continues bit-identically.
    std::string checkpoint() const;
    /// Throws DataError on corrupted or incompatible input.
    static Engine restore(std::string_view snapshot);

private:
    HyperParams params_;
    Rng rng_;
    MixMatrix mix_;
    Skeleton skeleton_;
    EmbeddingTable embeddings_;
    LastSeenIndex index_;
    std::uint64_t k_ = 0;
    Time last_time_ = 0;
    RunSummary stats_;
    UpdateObserver observer_;
};

/// Feeds every tick through a fresh engine.
RunSummary run(const std::vector<Tick>& ticks, const HyperParams& params, const ScoreSink& sink);

}  // namespace ffade
