#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ffade/skeleton.hpp"
#include "ffade/stream.hpp"

namespace ffade {

using Rng = std::mt19937_64;
using Vector = std::vector<double>;

/// Exponents h_s^T Q h_d are clamped to this range before exponentiation.
inline constexpr double kMaxExponent = 30.0;

/// Fixed m x m matrix mixing source and destination embeddings.
class MixMatrix {
public:
    MixMatrix() = default;

    static MixMatrix identity(std::size_t dim);
    /// Entries drawn iid from N(0, 1).
    static MixMatrix gaussian(std::size_t dim, Rng& rng);
    static MixMatrix from_rows(std::size_t dim, std::vector<double> row_major);

    std::size_t dim() const { return dim_; }
    bool is_identity() const { return identity_; }
    double at(std::size_t row, std::size_t col) const { return data_[row * dim_ + col]; }
    const std::vector<double>& data() const { return data_; }

    /// Q h
    Vector apply(std::span<const double> h) const;
    /// Q^T h
    Vector apply_transpose(std::span<const double> h) const;
    /// h_s^T Q h_d
    double bilinear(std::span<const double> hs, std::span<const double> hd) const;

    friend bool operator==(const MixMatrix&, const MixMatrix&) = default;

private:
    std::size_t dim_ = 0;
    bool identity_ = false;
    std::vector<double> data_;
};

/// Node embeddings, one m-dimensional vector per tracked node.
class EmbeddingTable {
public:
    explicit EmbeddingTable(std::size_t dim = 0) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return vectors_.size(); }
    bool empty() const { return vectors_.empty(); }

    const Vector* find(NodeId node) const;
    Vector* find(NodeId node);
    bool contains(NodeId node) const { return vectors_.count(node) != 0; }
    void set(NodeId node, Vector h);
    void erase(NodeId node) { vectors_.erase(node); }

    const std::map<NodeId, Vector>& vectors() const { return vectors_; }

    friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

private:
    std::size_t dim_;
    std::map<NodeId, Vector> vectors_;
};

struct OptimizerConfig {
    int epochs = 10;
    double step_size = 0.01;
    /// Active interaction types sampled per local update.
    std::size_t batch_pos = 1024;
    /// Inactive nodes sampled per local update.
    std::size_t batch_neg_nodes = 256;
    /// Pairs per gradient step within an epoch.
    std::size_t batch_pairs = 256;
    /// Negative pairs drawn per focus node.
    std::size_t neg_per_node = 5;
    /// Per-node gradient norm cap; 0 disables clipping.
    double clip_norm = 5.0;
};

enum class FitMode { global, local };

/// One (interaction type, target frequency) term of the likelihood.
struct PairTarget {
    InteractionType type;
    double freq = 0.0;
};

/// lambda = exp(h_s^T Q h_d), exponent clamped to [-kMaxExponent, kMaxExponent].
double intensity(std::span<const double> hs, std::span<const double> hd, const MixMatrix& q);

/// Exponential log-density: -log(lambda) - f / lambda. Throws on lambda <= 0.
double log_likelihood(double f, double lambda);

/// Sum of log-likelihoods over `sample`; a pair's frequency is its skeleton
/// frequency when tracked and `cutoff` otherwise.
double objective(const Skeleton& skeleton, const EmbeddingTable& h, const MixMatrix& q, double cutoff,
                 std::span<const InteractionType> sample);

/// Sum of log-likelihoods over explicit targets.
double pairs_objective(const EmbeddingTable& h, const MixMatrix& q, std::span<const PairTarget> pairs);

/// Analytic gradient of pairs_objective with respect to every embedding it touches.
std::map<NodeId, Vector> objective_gradient(const EmbeddingTable& h, const MixMatrix& q,
                                            std::span<const PairTarget> pairs);

/// One ascent step over `pairs`. Only nodes listed in `movable` (sorted) change.
void gradient_step(EmbeddingTable& h, const MixMatrix& q, std::span<const PairTarget> pairs,
                   double step_size, std::span<const NodeId> movable, double clip_norm = 0.0);

/// Fits embeddings to the skeleton by maximum likelihood.
///
/// Embeddings of nodes that left the skeleton are dropped and new nodes are
/// initialised from N(0, 1/m). Each epoch builds, for every focus node, all of
/// its skeleton pairs plus `neg_per_node` pairs to non-neighbours targeted at
/// `cutoff`, then takes mini-batch ascent steps. Global mode focuses on every
/// active node; local mode samples active types and inactive nodes, and only
/// embeddings of active nodes move. An empty active set is a no-op.
void ffac_update(const Skeleton& skeleton, EmbeddingTable& h, const MixMatrix& q, double cutoff,
                 const OptimizerConfig& cfg, FitMode mode, Rng& rng);

/// Writes "node,h_1,...,h_m" per embedding, ordered by node id.
void write_embeddings(std::ostream& out, const EmbeddingTable& h,
                      const std::function<std::string(NodeId)>& name);

}  // namespace ffade
