#include "ffade/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ffade {

double decayed_freq(const FreqEntry& e, Time now, double alpha) {
    const auto lag = now - e.last_time;
    if (lag <= 0) {
        return e.freq;
    }
    if (alpha == 0.0) {
        return 0.0;
    }
    return e.freq * std::pow(alpha, static_cast<double>(lag));
}

Skeleton::Skeleton(double alpha, std::size_t capacity, double cutoff)
    : alpha_(alpha),
      log_alpha_(alpha > 0.0 ? std::log(alpha) : 0.0),
      capacity_(capacity),
      cutoff_(cutoff) {
    if (!(alpha >= 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("alpha must lie in [0, 1)");
    }
    if (capacity == 0) {
        throw std::invalid_argument("capacity must be positive");
    }
    if (!(cutoff >= 0.0)) {
        throw std::invalid_argument("cut-off frequency must be non-negative");
    }
}

// Orders items so that std heap algorithms keep the smallest decayed
// frequency on top: primary key, secondary key, older last_time, smaller type.
bool Skeleton::HeapAfter::operator()(const HeapItem& a, const HeapItem& b) const {
    if (a.primary != b.primary) {
        return a.primary > b.primary;
    }
    if (a.secondary != b.secondary) {
        return a.secondary > b.secondary;
    }
    if (a.last_time != b.last_time) {
        return a.last_time > b.last_time;
    }
    return b.type < a.type;
}

Skeleton::HeapItem Skeleton::make_item(InteractionType type, const Slot& slot) const {
    HeapItem item;
    item.type = type;
    item.stamp = slot.stamp;
    item.last_time = slot.entry.last_time;
    const double log_f = std::log(slot.entry.freq);
    if (alpha_ > 0.0) {
        // log(alpha^(now - t) f) = log f - t log(alpha) + now log(alpha); the last term is shared.
        item.primary = log_f - static_cast<double>(slot.entry.last_time) * log_alpha_;
    } else {
        item.primary = static_cast<double>(slot.entry.last_time);
        item.secondary = log_f;
    }
    return item;
}

void Skeleton::push_item(InteractionType type, const Slot& slot) {
    heap_.push_back(make_item(type, slot));
    std::push_heap(heap_.begin(), heap_.end(), HeapAfter{});
}

bool Skeleton::is_live(const HeapItem& item) const {
    auto it = entries_.find(item.type);
    return it != entries_.end() && it->second.stamp == item.stamp;
}

void Skeleton::drop_stale_top() {
    while (!heap_.empty() && !is_live(heap_.front())) {
        std::pop_heap(heap_.begin(), heap_.end(), HeapAfter{});
        heap_.pop_back();
    }
}

void Skeleton::maybe_compact() {
    if (heap_.size() <= 2 * entries_.size() + 16) {
        return;
    }
    std::erase_if(heap_, [this](const HeapItem& item) { return !is_live(item); });
    std::make_heap(heap_.begin(), heap_.end(), HeapAfter{});
}

void Skeleton::erase(InteractionType type, std::vector<InteractionType>* evicted) {
    entries_.erase(type);
    active_.erase(type);
    for (NodeId node : {type.source, type.destination}) {
        auto it = node_refs_.find(node);
        if (it != node_refs_.end() && --it->second == 0) {
            node_refs_.erase(it);
        }
        if (type.source == type.destination) {
            break;
        }
    }
    ++evictions_;
    if (evicted != nullptr) {
        evicted->push_back(type);
    }
}

void Skeleton::union_edge(InteractionType type, Time now, std::uint64_t weight,
                          std::vector<InteractionType>* evicted) {
    active_.insert(type);
    const double added = (1.0 - alpha_) * static_cast<double>(weight);
    auto it = entries_.find(type);
    if (it != entries_.end()) {
        auto& slot = it->second;
        if (now < slot.entry.last_time) {
            throw std::logic_error("union_edge: time moved backwards");
        }
        slot.entry.freq = decayed_freq(slot.entry, now, alpha_) + added;
        slot.entry.last_time = now;
        slot.stamp = next_stamp_++;
        push_item(type, slot);
    } else {
        Slot slot{FreqEntry{now, added}, next_stamp_++};
        auto [pos, inserted] = entries_.emplace(type, slot);
        ++node_refs_[type.source];
        if (type.destination != type.source) {
            ++node_refs_[type.destination];
        }
        push_item(type, pos->second);
    }
    enforce_capacity(now, evicted);
    maybe_compact();
}

void Skeleton::enforce_capacity(Time now, std::vector<InteractionType>* evicted) {
    if (capacity_ == kUnbounded || entries_.size() <= capacity_) {
        return;
    }
    // One insertion at a time means exactly one entry too many. The
    // capacity-th largest decayed frequency is then the second smallest.
    drop_stale_top();
    std::pop_heap(heap_.begin(), heap_.end(), HeapAfter{});
    const HeapItem smallest = heap_.back();
    heap_.pop_back();
    drop_stale_top();
    double threshold = cutoff_;
    if (!heap_.empty()) {
        const auto& second = entries_.at(heap_.front().type).entry;
        threshold = std::max(threshold, decayed_freq(second, now, alpha_));
    }
    heap_.push_back(smallest);
    std::push_heap(heap_.begin(), heap_.end(), HeapAfter{});
    cutoff_ = threshold;

    while (true) {
        drop_stale_top();
        if (heap_.empty()) {
            break;
        }
        const auto top = heap_.front();
        const double value = decayed_freq(entries_.at(top.type).entry, now, alpha_);
        // Values tied at the cut-off are only removed while over capacity.
        if (!(value < cutoff_) && entries_.size() <= capacity_) {
            break;
        }
        std::pop_heap(heap_.begin(), heap_.end(), HeapAfter{});
        heap_.pop_back();
        erase(top.type, evicted);
    }
}

const FreqEntry* Skeleton::lookup(InteractionType type) const {
    auto it = entries_.find(type);
    return it == entries_.end() ? nullptr : &it->second.entry;
}

std::pair<InteractionType, double> Skeleton::min_decayed(Time now) {
    drop_stale_top();
    if (heap_.empty()) {
        throw std::logic_error("min_decayed on an empty skeleton");
    }
    const auto type = heap_.front().type;
    return {type, decayed_freq(entries_.at(type).entry, now, alpha_)};
}

std::vector<NodeId> Skeleton::nodes() const {
    std::vector<NodeId> out;
    out.reserve(node_refs_.size());
    for (const auto& [node, refs] : node_refs_) {
        out.push_back(node);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::pair<InteractionType, FreqEntry>> Skeleton::sorted_entries() const {
    std::vector<std::pair<InteractionType, FreqEntry>> out;
    out.reserve(entries_.size());
    for (const auto& [type, slot] : entries_) {
        out.emplace_back(type, slot.entry);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

void Skeleton::write_snapshot(std::ostream& out, const std::function<std::string(NodeId)>& name) const {
    char buf[64];
    for (const auto& [type, entry] : sorted_entries()) {
        std::snprintf(buf, sizeof(buf), "%.17g", entry.freq);
        out << name(type.source) << ',' << name(type.destination) << ',' << entry.last_time << ','
            << buf << '\n';
    }
}

Skeleton Skeleton::restore(double alpha, std::size_t capacity, double cutoff, std::size_t evictions,
                           const std::vector<std::pair<InteractionType, FreqEntry>>& entries,
                           const std::vector<InteractionType>& active) {
    Skeleton s(alpha, capacity, cutoff);
    s.evictions_ = evictions;
    for (const auto& [type, entry] : entries) {
        if (!(entry.freq > 0.0) || !std::isfinite(entry.freq)) {
            throw DataError("skeleton entry with non-positive frequency");
        }
        Slot slot{entry, s.next_stamp_++};
        auto [pos, inserted] = s.entries_.emplace(type, slot);
        if (!inserted) {
            throw DataError("duplicate skeleton entry");
        }
        ++s.node_refs_[type.source];
        if (type.destination != type.source) {
            ++s.node_refs_[type.destination];
        }
        s.heap_.push_back(s.make_item(type, pos->second));
    }
    std::make_heap(s.heap_.begin(), s.heap_.end(), HeapAfter{});
    for (const auto& type : active) {
        if (!s.contains(type)) {
            throw DataError("active type missing from skeleton");
        }
        s.active_.insert(type);
    }
    return s;
}

}  // namespace ffade
