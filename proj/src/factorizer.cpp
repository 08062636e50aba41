#include "ffade/factorizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace ffade {

MixMatrix MixMatrix::identity(std::size_t dim) {
    MixMatrix q;
    q.dim_ = dim;
    q.identity_ = true;
    q.data_.assign(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
        q.data_[i * dim + i] = 1.0;
    }
    return q;
}

MixMatrix MixMatrix::gaussian(std::size_t dim, Rng& rng) {
    MixMatrix q;
    q.dim_ = dim;
    q.data_.resize(dim * dim);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& x : q.data_) {
        x = normal(rng);
    }
    return q;
}

MixMatrix MixMatrix::from_rows(std::size_t dim, std::vector<double> row_major) {
    if (row_major.size() != dim * dim) {
        throw std::invalid_argument("mix matrix needs dim*dim entries");
    }
    MixMatrix q;
    q.dim_ = dim;
    q.data_ = std::move(row_major);
    q.identity_ = true;
    for (std::size_t i = 0; i < dim && q.identity_; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            if (q.data_[i * dim + j] != (i == j ? 1.0 : 0.0)) {
                q.identity_ = false;
                break;
            }
        }
    }
    return q;
}

Vector MixMatrix::apply(std::span<const double> h) const {
    if (identity_) {
        return Vector(h.begin(), h.end());
    }
    Vector out(dim_, 0.0);
    for (std::size_t i = 0; i < dim_; ++i) {
        const double* row = &data_[i * dim_];
        double acc = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) {
            acc += row[j] * h[j];
        }
        out[i] = acc;
    }
    return out;
}

Vector MixMatrix::apply_transpose(std::span<const double> h) const {
    if (identity_) {
        return Vector(h.begin(), h.end());
    }
    Vector out(dim_, 0.0);
    for (std::size_t i = 0; i < dim_; ++i) {
        const double* row = &data_[i * dim_];
        const double hi = h[i];
        for (std::size_t j = 0; j < dim_; ++j) {
            out[j] += row[j] * hi;
        }
    }
    return out;
}

double MixMatrix::bilinear(std::span<const double> hs, std::span<const double> hd) const {
    if (hs.size() != dim_ || hd.size() != dim_) {
        throw std::invalid_argument("embedding dimension does not match mix matrix");
    }
    const auto qhd = apply(hd);
    double acc = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
        acc += hs[i] * qhd[i];
    }
    return acc;
}

const Vector* EmbeddingTable::find(NodeId node) const {
    auto it = vectors_.find(node);
    return it == vectors_.end() ? nullptr : &it->second;
}

Vector* EmbeddingTable::find(NodeId node) {
    auto it = vectors_.find(node);
    return it == vectors_.end() ? nullptr : &it->second;
}

void EmbeddingTable::set(NodeId node, Vector h) {
    if (h.size() != dim_) {
        throw std::invalid_argument("embedding has wrong dimension");
    }
    vectors_[node] = std::move(h);
}

double intensity(std::span<const double> hs, std::span<const double> hd, const MixMatrix& q) {
    const double x = std::clamp(q.bilinear(hs, hd), -kMaxExponent, kMaxExponent);
    return std::exp(x);
}

double log_likelihood(double f, double lambda) {
    if (!(lambda > 0.0)) {
        throw std::invalid_argument("log_likelihood: lambda must be positive");
    }
    return -std::log(lambda) - f / lambda;
}

namespace {

const Vector& embedding_of(const EmbeddingTable& h, NodeId node) {
    const auto* v = h.find(node);
    if (v == nullptr) {
        throw std::invalid_argument("no embedding for node " + std::to_string(node));
    }
    return *v;
}

// Per-node Q h (as destination) and Q^T h (as source) for every node in `pairs`.
struct Projections {
    std::unordered_map<NodeId, Vector> as_dest;
    std::unordered_map<NodeId, Vector> as_source;
};

Projections project(const EmbeddingTable& h, const MixMatrix& q, std::span<const PairTarget> pairs) {
    Projections p;
    for (const auto& pair : pairs) {
        if (!p.as_dest.count(pair.type.destination)) {
            p.as_dest.emplace(pair.type.destination, q.apply(embedding_of(h, pair.type.destination)));
        }
        if (!p.as_source.count(pair.type.source)) {
            p.as_source.emplace(pair.type.source, q.apply_transpose(embedding_of(h, pair.type.source)));
        }
    }
    return p;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

// Accumulates gradients into a map keyed by node; pairs are visited in order
// so the floating-point reduction is deterministic.
std::map<NodeId, Vector> accumulate(const EmbeddingTable& h, const MixMatrix& q,
                                    std::span<const PairTarget> pairs) {
    const auto proj = project(h, q, pairs);
    std::map<NodeId, Vector> grads;
    const std::size_t m = h.dim();
    for (const auto& pair : pairs) {
        const auto& qhd = proj.as_dest.at(pair.type.destination);
        const auto& qths = proj.as_source.at(pair.type.source);
        const auto& hs = embedding_of(h, pair.type.source);
        const double x = std::clamp(dot(hs, qhd), -kMaxExponent, kMaxExponent);
        const double coeff = pair.freq / std::exp(x) - 1.0;
        auto& gs = grads[pair.type.source];
        gs.resize(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            gs[i] += coeff * qhd[i];
        }
        auto& gd = grads[pair.type.destination];
        gd.resize(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            gd[i] += coeff * qths[i];
        }
    }
    return grads;
}

}  // namespace

double pairs_objective(const EmbeddingTable& h, const MixMatrix& q, std::span<const PairTarget> pairs) {
    double total = 0.0;
    for (const auto& pair : pairs) {
        const double lambda =
            intensity(embedding_of(h, pair.type.source), embedding_of(h, pair.type.destination), q);
        total += log_likelihood(pair.freq, lambda);
    }
    return total;
}

double objective(const Skeleton& skeleton, const EmbeddingTable& h, const MixMatrix& q, double cutoff,
                 std::span<const InteractionType> sample) {
    std::vector<PairTarget> pairs;
    pairs.reserve(sample.size());
    for (const auto& type : sample) {
        const auto* entry = skeleton.lookup(type);
        pairs.push_back({type, entry != nullptr ? entry->freq : cutoff});
    }
    return pairs_objective(h, q, pairs);
}

std::map<NodeId, Vector> objective_gradient(const EmbeddingTable& h, const MixMatrix& q,
                                            std::span<const PairTarget> pairs) {
    return accumulate(h, q, pairs);
}

void gradient_step(EmbeddingTable& h, const MixMatrix& q, std::span<const PairTarget> pairs,
                   double step_size, std::span<const NodeId> movable, double clip_norm) {
    auto grads = accumulate(h, q, pairs);
    for (auto& [node, g] : grads) {
        if (!std::binary_search(movable.begin(), movable.end(), node)) {
            continue;
        }
        double scale = step_size;
        if (clip_norm > 0.0) {
            const double norm = std::sqrt(dot(g, g));
            if (norm > clip_norm) {
                scale *= clip_norm / norm;
            }
        }
        auto* hv = h.find(node);
        for (std::size_t i = 0; i < g.size(); ++i) {
            (*hv)[i] += scale * g[i];
        }
    }
}

namespace {

template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> items, std::size_t k, Rng& rng) {
    k = std::min(k, items.size());
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
        std::swap(items[i], items[pick(rng)]);
    }
    items.resize(k);
    return items;
}

std::vector<NodeId> endpoints(std::span<const InteractionType> types) {
    std::vector<NodeId> out;
    out.reserve(types.size() * 2);
    for (const auto& t : types) {
        out.push_back(t.source);
        out.push_back(t.destination);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace

void ffac_update(const Skeleton& skeleton, EmbeddingTable& h, const MixMatrix& q, double cutoff,
                 const OptimizerConfig& cfg, FitMode mode, Rng& rng) {
    if (skeleton.active().empty()) {
        return;
    }
    const auto nodes = skeleton.nodes();
    const std::size_t m = h.dim();

    std::vector<NodeId> stale;
    for (const auto& [node, vec] : h.vectors()) {
        if (!std::binary_search(nodes.begin(), nodes.end(), node)) {
            stale.push_back(node);
        }
    }
    for (auto node : stale) {
        h.erase(node);
    }
    std::normal_distribution<double> init(0.0, 1.0 / std::sqrt(static_cast<double>(m)));
    for (auto node : nodes) {
        if (!h.contains(node)) {
            Vector v(m);
            for (auto& x : v) {
                x = init(rng);
            }
            h.set(node, std::move(v));
        }
    }

    std::map<NodeId, std::vector<PairTarget>> incident;
    std::map<NodeId, std::vector<NodeId>> neighbours;
    for (const auto& [type, entry] : skeleton.sorted_entries()) {
        incident[type.source].push_back({type, entry.freq});
        neighbours[type.source].push_back(type.destination);
        if (type.destination != type.source) {
            incident[type.destination].push_back({type, entry.freq});
            neighbours[type.destination].push_back(type.source);
        }
    }
    for (auto& [node, list] : neighbours) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }

    std::vector<InteractionType> active_types(skeleton.active().begin(), skeleton.active().end());
    std::sort(active_types.begin(), active_types.end());
    const auto active_nodes = endpoints(active_types);
    std::vector<NodeId> inactive_nodes;
    std::set_difference(nodes.begin(), nodes.end(), active_nodes.begin(), active_nodes.end(),
                        std::back_inserter(inactive_nodes));

    const std::size_t batch = std::max<std::size_t>(1, cfg.batch_pairs);
    std::bernoulli_distribution coin(0.5);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<NodeId> focus;
        std::vector<NodeId> pool;
        if (mode == FitMode::global) {
            focus = active_nodes;
            pool = nodes;
        } else {
            focus = endpoints(sample_without_replacement(active_types, cfg.batch_pos, rng));
            auto outside = sample_without_replacement(inactive_nodes, cfg.batch_neg_nodes, rng);
            std::sort(outside.begin(), outside.end());
            std::set_union(focus.begin(), focus.end(), outside.begin(), outside.end(),
                           std::back_inserter(pool));
        }

        std::vector<PairTarget> pairs;
        std::set<InteractionType> seen;
        for (auto v : focus) {
            for (const auto& target : incident[v]) {
                if (seen.insert(target.type).second) {
                    pairs.push_back(target);
                }
            }
            const auto& near = neighbours[v];
            std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
            for (std::size_t k = 0; k < cfg.neg_per_node; ++k) {
                for (int attempt = 0; attempt < 8; ++attempt) {
                    const NodeId u = pool[pick(rng)];
                    const InteractionType type = coin(rng) ? InteractionType{v, u} : InteractionType{u, v};
                    if (std::binary_search(near.begin(), near.end(), u) || skeleton.contains(type)) {
                        continue;
                    }
                    if (seen.insert(type).second) {
                        pairs.push_back({type, cutoff});
                    }
                    break;
                }
            }
        }

        std::shuffle(pairs.begin(), pairs.end(), rng);
        for (std::size_t begin = 0; begin < pairs.size(); begin += batch) {
            const auto count = std::min(batch, pairs.size() - begin);
            gradient_step(h, q, std::span<const PairTarget>(pairs).subspan(begin, count), cfg.step_size,
                          active_nodes, cfg.clip_norm);
        }
    }
}

void write_embeddings(std::ostream& out, const EmbeddingTable& h,
                      const std::function<std::string(NodeId)>& name) {
    char buf[64];
    for (const auto& [node, vec] : h.vectors()) {
        out << name(node);
        for (double x : vec) {
            std::snprintf(buf, sizeof(buf), "%.17g", x);
            out << ',' << buf;
        }
        out << '\n';
    }
}

}  // namespace ffade
