#include "ffade/stream.hpp"

#include <charconv>
#include <string>

namespace ffade {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return fields;
}

std::int64_t parse_int(std::string_view field, const char* what, std::size_t line_no) {
    std::int64_t value = 0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc{} || ptr != end || field.empty()) {
        throw DataError("line " + std::to_string(line_no) + ": invalid " + what + " '" +
                        std::string(field) + "'");
    }
    return value;
}

}  // namespace

std::uint64_t Tick::total_weight() const {
    std::uint64_t total = 0;
    for (const auto& [type, w] : typed_counts) {
        total += w;
    }
    return total;
}

NodeId NodeInterner::intern(std::string_view name) {
    auto it = ids_.find(std::string(name));
    if (it != ids_.end()) {
        return it->second;
    }
    const auto id = static_cast<NodeId>(names_.size());
    names_.emplace_back(name);
    ids_.emplace(names_.back(), id);
    return id;
}

NodeId NodeInterner::id(std::string_view name) const {
    auto it = ids_.find(std::string(name));
    if (it == ids_.end()) {
        throw DataError("unknown node '" + std::string(name) + "'");
    }
    return it->second;
}

bool NodeInterner::contains(std::string_view name) const {
    return ids_.find(std::string(name)) != ids_.end();
}

const std::string& NodeInterner::name(NodeId id) const {
    if (id >= names_.size()) {
        throw DataError("node id " + std::to_string(id) + " out of range");
    }
    return names_[id];
}

InteractionType canonicalize_type(InteractionType t, bool undirected) {
    if (undirected && t.destination < t.source) {
        std::swap(t.source, t.destination);
    }
    return t;
}

Edge parse_edge_line(std::string_view line, const StreamFormat& format, NodeInterner& interner,
                     std::size_t line_no) {
    const auto fields = split(line, format.delimiter);
    if (fields.size() < 3 || fields.size() > 4) {
        throw DataError("line " + std::to_string(line_no) + ": expected 3 or 4 fields, got " +
                        std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty()) {
        throw DataError("line " + std::to_string(line_no) + ": empty node identifier");
    }
    const auto time = parse_int(fields[2], "time", line_no);
    if (time < 1) {
        throw DataError("line " + std::to_string(line_no) + ": time must be >= 1");
    }
    std::int64_t weight = 1;
    if (fields.size() == 4) {
        weight = parse_int(fields[3], "weight", line_no);
        if (weight < 1) {
            throw DataError("line " + std::to_string(line_no) + ": weight must be >= 1");
        }
    }
    Edge e;
    e.source = interner.intern(fields[0]);
    e.destination = interner.intern(fields[1]);
    const auto canon = canonicalize_type(e.type(), format.undirected);
    e.source = canon.source;
    e.destination = canon.destination;
    e.time = time;
    e.weight = static_cast<std::uint64_t>(weight);
    return e;
}

ParsedStream parse_edge_stream(std::istream& in, const StreamFormat& format, NodeInterner& interner) {
    ParsedStream out;
    std::string line;
    std::size_t line_no = 0;
    Time prev = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && format.header) {
            continue;
        }
        if (trim(line).empty()) {
            continue;
        }
        auto e = parse_edge_line(line, format, interner, line_no);
        if (e.time < prev) {
            ++out.monotonicity_violations;
        }
        prev = e.time;
        out.edges.push_back(e);
    }
    return out;
}

std::vector<int> parse_labels(std::istream& in) {
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto field = trim(line);
        if (field.empty()) {
            continue;
        }
        const auto v = parse_int(field, "label", line_no);
        if (v != 0 && v != 1) {
            throw DataError("line " + std::to_string(line_no) + ": label must be 0 or 1");
        }
        labels.push_back(static_cast<int>(v));
    }
    return labels;
}

bool TickCoalescer::push(const Edge& e, std::size_t origin, Tick& completed) {
    if (e.time < 1 || e.weight < 1) {
        throw DataError("event " + std::to_string(origin) + ": time and weight must be >= 1");
    }
    bool emitted = false;
    if (has_pending_ && e.time != pending_.time) {
        if (e.time < pending_.time) {
            throw DataError("event " + std::to_string(origin) + ": time " + std::to_string(e.time) +
                            " is earlier than current tick " + std::to_string(pending_.time));
        }
        completed = std::move(pending_);
        last_emitted_ = completed.time;
        pending_ = Tick{};
        has_pending_ = false;
        emitted = true;
    }
    if (!has_pending_) {
        if (e.time <= last_emitted_) {
            throw DataError("event " + std::to_string(origin) + ": time " + std::to_string(e.time) +
                            " is not after emitted tick " + std::to_string(last_emitted_));
        }
        pending_.time = e.time;
        has_pending_ = true;
    }
    pending_.typed_counts[e.type()] += e.weight;
    auto& origins = pending_.origins[e.type()];
    origins.insert(origins.end(), e.weight, origin);
    return emitted;
}

bool TickCoalescer::finish(Tick& completed) {
    if (!has_pending_) {
        return false;
    }
    completed = std::move(pending_);
    last_emitted_ = completed.time;
    pending_ = Tick{};
    has_pending_ = false;
    return true;
}

std::vector<Tick> coalesce_into_ticks(const std::vector<Edge>& edges) {
    std::vector<Tick> ticks;
    TickCoalescer coalescer;
    Tick tick;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (coalescer.push(edges[i], i, tick)) {
            ticks.push_back(std::move(tick));
        }
    }
    if (coalescer.finish(tick)) {
        ticks.push_back(std::move(tick));
    }
    return ticks;
}

}  // namespace ffade
