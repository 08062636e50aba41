#include "ffade/engine.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ffade {

namespace {

constexpr int kCheckpointVersion = 1;
constexpr std::string_view kCheckpointMagic = "ffade-checkpoint";

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc{} || ptr != end || value.empty()) {
        throw std::invalid_argument("invalid value '" + std::string(value) + "' for " + std::string(key));
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "1" || value == "true" || value == "yes" || value == "on") {
        return true;
    }
    if (value == "0" || value == "false" || value == "no" || value == "off") {
        return false;
    }
    throw std::invalid_argument("invalid boolean '" + std::string(value) + "' for " + std::string(key));
}

std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

MixMatrix make_mix(const HyperParams& params, Rng& rng) {
    if (params.undirected) {
        return MixMatrix::identity(params.dim);
    }
    return MixMatrix::gaussian(params.dim, rng);
}

}  // namespace

void HyperParams::validate() const {
    if (t_setup < 1) {
        throw std::invalid_argument("t_setup must be >= 1");
    }
    if (w_upd < 1) {
        throw std::invalid_argument("w_upd must be >= 1");
    }
    if (!(alpha >= 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("alpha must lie in [0, 1)");
    }
    if (mem_limit == 0) {
        throw std::invalid_argument("mem_limit must be positive");
    }
    if (dim == 0) {
        throw std::invalid_argument("dim must be positive");
    }
    if (!(f_th >= 0.0) || !std::isfinite(f_th)) {
        throw std::invalid_argument("f_th must be a finite non-negative number");
    }
    if (optimizer.epochs < 0) {
        throw std::invalid_argument("epochs must be non-negative");
    }
    if (!(optimizer.step_size > 0.0)) {
        throw std::invalid_argument("step_size must be positive");
    }
    if (optimizer.batch_pos == 0 || optimizer.batch_pairs == 0) {
        throw std::invalid_argument("batch sizes must be positive");
    }
    if (optimizer.clip_norm < 0.0) {
        throw std::invalid_argument("clip_norm must be non-negative");
    }
}

void set_param(HyperParams& p, std::string_view key, std::string_view raw) {
    const auto value = trim(raw);
    if (key == "t_setup") {
        p.t_setup = parse_number<Time>(key, value);
    } else if (key == "w_upd") {
        p.w_upd = parse_number<Time>(key, value);
    } else if (key == "alpha") {
        p.alpha = parse_number<double>(key, value);
    } else if (key == "mem_limit") {
        if (value == "inf" || value == "unbounded") {
            p.mem_limit = kUnbounded;
        } else {
            p.mem_limit = parse_number<std::size_t>(key, value);
        }
    } else if (key == "dim") {
        p.dim = parse_number<std::size_t>(key, value);
    } else if (key == "f_th") {
        p.f_th = parse_number<double>(key, value);
    } else if (key == "undirected") {
        p.undirected = parse_bool(key, value);
    } else if (key == "group_channels") {
        p.group_channels = parse_bool(key, value);
    } else if (key == "seed") {
        p.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "epochs") {
        p.optimizer.epochs = parse_number<int>(key, value);
    } else if (key == "step_size") {
        p.optimizer.step_size = parse_number<double>(key, value);
    } else if (key == "batch_pos") {
        p.optimizer.batch_pos = parse_number<std::size_t>(key, value);
    } else if (key == "batch_neg_nodes") {
        p.optimizer.batch_neg_nodes = parse_number<std::size_t>(key, value);
    } else if (key == "batch_pairs") {
        p.optimizer.batch_pairs = parse_number<std::size_t>(key, value);
    } else if (key == "neg_per_node") {
        p.optimizer.neg_per_node = parse_number<std::size_t>(key, value);
    } else if (key == "clip_norm") {
        p.optimizer.clip_norm = parse_number<double>(key, value);
    } else {
        throw std::invalid_argument("unknown parameter '" + std::string(key) + "'");
    }
}

void load_config(std::istream& in, HyperParams& params) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = line;
        if (auto hash = view.find('#'); hash != std::string_view::npos) {
            view = view.substr(0, hash);
        }
        view = trim(view);
        if (view.empty()) {
            continue;
        }
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
        }
        set_param(params, trim(view.substr(0, eq)), view.substr(eq + 1));
    }
}

std::string describe(const HyperParams& p) {
    std::ostringstream out;
    out << "t_setup = " << p.t_setup << '\n'
        << "w_upd = " << p.w_upd << '\n'
        << "alpha = " << format_double(p.alpha) << '\n'
        << "mem_limit = " << (p.mem_limit == kUnbounded ? std::string("inf") : std::to_string(p.mem_limit))
        << '\n'
        << "dim = " << p.dim << '\n'
        << "f_th = " << format_double(p.f_th) << '\n'
        << "undirected = " << (p.undirected ? "true" : "false") << '\n'
        << "group_channels = " << (p.group_channels ? "true" : "false") << '\n'
        << "seed = " << p.seed << '\n'
        << "epochs = " << p.optimizer.epochs << '\n'
        << "step_size = " << format_double(p.optimizer.step_size) << '\n'
        << "batch_pos = " << p.optimizer.batch_pos << '\n'
        << "batch_neg_nodes = " << p.optimizer.batch_neg_nodes << '\n'
        << "batch_pairs = " << p.optimizer.batch_pairs << '\n'
        << "neg_per_node = " << p.optimizer.neg_per_node << '\n'
        << "clip_norm = " << format_double(p.optimizer.clip_norm) << '\n';
    return out.str();
}

Engine::Engine(HyperParams params)
    : params_((params.validate(), params)),
      rng_(params_.seed),
      mix_(make_mix(params_, rng_)),
      skeleton_(params_.alpha, params_.mem_limit, params_.f_th),
      embeddings_(params_.dim) {
    stats_.final_cutoff = params_.f_th;
}

void Engine::process(const Tick& tick, const ScoreSink& sink) {
    if (tick.time <= last_time_) {
        throw DataError("tick at time " + std::to_string(tick.time) + " does not follow time " +
                        std::to_string(last_time_));
    }
    last_time_ = tick.time;
    ++stats_.ticks;
    stats_.events += tick.total_weight();

    if (tick.time > params_.t_setup) {
        DetectOptions options;
        options.t_setup = params_.t_setup;
        options.group_channels = params_.group_channels;
        for (const auto& r : detect_tick(tick, index_, embeddings_, mix_, skeleton_.cutoff(), options)) {
            ++stats_.scored;
            if (sink) {
                sink(r);
            }
        }
    }

    std::vector<InteractionType> evicted;
    for (const auto& [type, w] : tick.typed_counts) {
        skeleton_.union_edge(type, tick.time, w, &evicted);
        stats_.peak_tracked = std::max(stats_.peak_tracked, skeleton_.size());
    }
    index_.update(tick, skeleton_, evicted);

    const Time due = params_.t_setup + static_cast<Time>(k_) * params_.w_upd;
    if (tick.time >= due) {
        const auto mode = k_ == 0 ? FitMode::global : FitMode::local;
        ffac_update(skeleton_, embeddings_, mix_, skeleton_.cutoff(), params_.optimizer, mode, rng_);
        if (observer_) {
            observer_(tick.time, mode);
        }
        // Skip windows that had no ticks: one update, then the next due slot.
        k_ = static_cast<std::uint64_t>((tick.time - params_.t_setup) / params_.w_upd) + 1;
        skeleton_.clear_active();
        ++stats_.updates;
    }
    stats_.evictions = skeleton_.evictions();
    stats_.final_cutoff = skeleton_.cutoff();
}

RunSummary Engine::summary() const { return stats_; }

std::string Engine::checkpoint() const {
    using nlohmann::json;
    json j;
    j["params"] = describe(params_);
    std::ostringstream rng_state;
    rng_state << rng_;
    j["rng"] = rng_state.str();
    j["k"] = k_;
    j["last_time"] = last_time_;
    j["stats"] = {stats_.ticks, stats_.events, stats_.scored, stats_.updates, stats_.peak_tracked};
    j["mix"] = {{"dim", mix_.dim()}, {"data", mix_.data()}};

    json entries = json::array();
    for (const auto& [type, e] : skeleton_.sorted_entries()) {
        entries.push_back({type.source, type.destination, e.last_time, e.freq});
    }
    std::vector<InteractionType> active(skeleton_.active().begin(), skeleton_.active().end());
    std::sort(active.begin(), active.end());
    json active_json = json::array();
    for (const auto& t : active) {
        active_json.push_back({t.source, t.destination});
    }
    j["skeleton"] = {{"cutoff", skeleton_.cutoff()},
                     {"evictions", skeleton_.evictions()},
                     {"entries", entries},
                     {"active", active_json}};

    json emb = json::array();
    for (const auto& [node, vec] : embeddings_.vectors()) {
        emb.push_back({node, vec});
    }
    j["embeddings"] = emb;

    auto sorted_pairs = [](const auto& map) {
        std::vector<std::pair<typename std::decay_t<decltype(map)>::key_type, Time>> v(map.begin(), map.end());
        std::sort(v.begin(), v.end());
        return v;
    };
    json per_type = json::array();
    for (const auto& [t, time] : sorted_pairs(index_.per_type)) {
        per_type.push_back({t.source, t.destination, time});
    }
    j["index"] = {{"per_type", per_type},
                  {"out", sorted_pairs(index_.per_source_out)},
                  {"in", sorted_pairs(index_.per_dest_in)}};

    const auto payload = j.dump();
    char header[96];
    std::snprintf(header, sizeof(header), "%s %d %016llx\n", kCheckpointMagic.data(), kCheckpointVersion,
                  static_cast<unsigned long long>(fnv1a(payload)));
    return header + payload;
}

Engine Engine::restore(std::string_view snapshot) {
    using nlohmann::json;
    const auto newline = snapshot.find('\n');
    if (newline == std::string_view::npos) {
        throw DataError("checkpoint: missing header");
    }
    std::istringstream header{std::string(snapshot.substr(0, newline))};
    std::string magic;
    int version = 0;
    std::string checksum;
    header >> magic >> version >> checksum;
    if (magic != kCheckpointMagic) {
        throw DataError("checkpoint: bad magic");
    }
    if (version != kCheckpointVersion) {
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto payload = snapshot.substr(newline + 1);
    char expected[32];
    std::snprintf(expected, sizeof(expected), "%016llx", static_cast<unsigned long long>(fnv1a(payload)));
    if (checksum != expected) {
        throw DataError("checkpoint: checksum mismatch");
    }

    try {
        const auto j = json::parse(payload);
        HyperParams params;
        std::istringstream cfg(j.at("params").get<std::string>());
        load_config(cfg, params);

        Engine engine(params);
        std::istringstream rng_state(j.at("rng").get<std::string>());
        rng_state >> engine.rng_;
        if (!rng_state) {
            throw DataError("checkpoint: bad rng state");
        }
        engine.k_ = j.at("k").get<std::uint64_t>();
        engine.last_time_ = j.at("last_time").get<Time>();
        const auto stats = j.at("stats");
        engine.stats_.ticks = stats.at(0).get<std::size_t>();
        engine.stats_.events = stats.at(1).get<std::size_t>();
        engine.stats_.scored = stats.at(2).get<std::size_t>();
        engine.stats_.updates = stats.at(3).get<std::size_t>();
        engine.stats_.peak_tracked = stats.at(4).get<std::size_t>();

        const auto& mix = j.at("mix");
        engine.mix_ = MixMatrix::from_rows(mix.at("dim").get<std::size_t>(),
                                           mix.at("data").get<std::vector<double>>());
        if (engine.mix_.dim() != params.dim) {
            throw DataError("checkpoint: mix matrix dimension mismatch");
        }

        const auto& sk = j.at("skeleton");
        std::vector<std::pair<InteractionType, FreqEntry>> entries;
        for (const auto& e : sk.at("entries")) {
            entries.push_back({{e.at(0).get<NodeId>(), e.at(1).get<NodeId>()},
                               {e.at(2).get<Time>(), e.at(3).get<double>()}});
        }
        std::vector<InteractionType> active;
        for (const auto& a : sk.at("active")) {
            active.push_back({a.at(0).get<NodeId>(), a.at(1).get<NodeId>()});
        }
        engine.skeleton_ = Skeleton::restore(params.alpha, params.mem_limit, sk.at("cutoff").get<double>(),
                                             sk.at("evictions").get<std::size_t>(), entries, active);

        for (const auto& e : j.at("embeddings")) {
            engine.embeddings_.set(e.at(0).get<NodeId>(), e.at(1).get<Vector>());
        }

        const auto& idx = j.at("index");
        for (const auto& e : idx.at("per_type")) {
            engine.index_.per_type[{e.at(0).get<NodeId>(), e.at(1).get<NodeId>()}] = e.at(2).get<Time>();
        }
        for (const auto& e : idx.at("out")) {
            engine.index_.per_source_out[e.at(0).get<NodeId>()] = e.at(1).get<Time>();
        }
        for (const auto& e : idx.at("in")) {
            engine.index_.per_dest_in[e.at(0).get<NodeId>()] = e.at(1).get<Time>();
        }
        engine.stats_.evictions = engine.skeleton_.evictions();
        engine.stats_.final_cutoff = engine.skeleton_.cutoff();
        return engine;
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
}

RunSummary run(const std::vector<Tick>& ticks, const HyperParams& params, const ScoreSink& sink) {
    Engine engine(params);
    for (const auto& tick : ticks) {
        engine.process(tick, sink);
    }
    return engine.summary();
}

}  // namespace ffade
