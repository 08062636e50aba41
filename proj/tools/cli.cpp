#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "ffade/detector.hpp"
#include "ffade/engine.hpp"
#include "ffade/evalgen.hpp"
#include "ffade/stream.hpp"

namespace ffade::cli {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path + "'");
    }
    return in;
}

void write_atomic(const std::string& path, const std::string& content) {
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw DataError("cannot write '" + tmp.string() + "'");
        }
        out << content;
        if (!out.flush()) {
            throw DataError("failed writing '" + tmp.string() + "'");
        }
    }
    fs::rename(tmp, target);
}

void emit(const std::optional<std::string>& path, const std::string& content, std::ostream& out) {
    if (path) {
        write_atomic(*path, content);
    } else {
        out << content;
    }
}

// Hyper-parameter flags shared by detect, sweep and dump-embeddings.
struct ParamOptions {
    std::string config;
    std::map<std::string, std::string> overrides;
    bool undirected = false;

    void attach(CLI::App& app) {
        app.add_option("--config", config, "key = value configuration file");
        const std::pair<const char*, const char*> flags[] = {
            {"--t-setup", "t_setup"},         {"--w-upd", "w_upd"},
            {"--alpha", "alpha"},             {"--mem-limit", "mem_limit"},
            {"--dim", "dim"},                 {"--f-th", "f_th"},
            {"--seed", "seed"},               {"--epochs", "epochs"},
            {"--step-size", "step_size"},     {"--neg-per-node", "neg_per_node"},
            {"--batch-pos", "batch_pos"},     {"--batch-neg-nodes", "batch_neg_nodes"},
            {"--batch-pairs", "batch_pairs"}, {"--clip-norm", "clip_norm"},
            {"--group-channels", "group_channels"},
        };
        for (const auto& [flag, key] : flags) {
            app.add_option_function<std::string>(
                flag, [this, key = std::string(key)](const std::string& v) { overrides[key] = v; },
                "overrides " + std::string(key));
        }
        app.add_flag("--undirected", undirected, "treat (s,d) and (d,s) as one interaction type");
    }

    // Precedence, lowest first: defaults, FFADE_SEED, config file, flags.
    HyperParams resolve() const {
        HyperParams params;
        if (const char* env = std::getenv("FFADE_SEED"); env != nullptr && *env != '\0') {
            set_param(params, "seed", env);
        }
        if (!config.empty()) {
            auto in = open_input(config);
            load_config(in, params);
        }
        for (const auto& [key, value] : overrides) {
            set_param(params, key, value);
        }
        if (undirected) {
            params.undirected = true;
        }
        params.validate();
        return params;
    }
};

struct FormatOptions {
    std::string delimiter = ",";
    bool header = false;

    void attach(CLI::App& app) {
        app.add_option("--delimiter", delimiter, "field delimiter")->capture_default_str();
        app.add_flag("--header", header, "skip the first input line");
    }

    StreamFormat format(bool undirected) const {
        if (delimiter.size() != 1) {
            throw UsageError("--delimiter must be a single character");
        }
        return {delimiter[0], header, undirected};
    }
};

struct Detection {
    NodeInterner interner;
    std::vector<ScoreRecord> records;
    std::size_t event_count = 0;
    RunSummary summary;
    std::string embeddings;
};

Detection detect_file(const std::string& input, const StreamFormat& format, const HyperParams& params,
                      bool want_embeddings) {
    Detection d;
    auto in = open_input(input);
    const auto parsed = parse_edge_stream(in, format, d.interner);
    d.event_count = parsed.edges.size();
    Engine engine(params);
    TickCoalescer coalescer;
    Tick tick;
    const auto sink = [&d](const ScoreRecord& r) { d.records.push_back(r); };
    for (std::size_t i = 0; i < parsed.edges.size(); ++i) {
        if (coalescer.push(parsed.edges[i], i, tick)) {
            engine.process(tick, sink);
        }
    }
    if (coalescer.finish(tick)) {
        engine.process(tick, sink);
    }
    d.summary = engine.summary();
    if (want_embeddings) {
        std::ostringstream out;
        write_embeddings(out, engine.embeddings(), [&d](NodeId id) { return d.interner.name(id); });
        d.embeddings = out.str();
    }
    return d;
}

std::vector<int> read_labels(const std::string& path, std::size_t expected) {
    auto in = open_input(path);
    auto labels = parse_labels(in);
    if (labels.size() != expected) {
        throw DataError("'" + path + "' has " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(expected) + " events");
    }
    return labels;
}

double records_auc(const std::vector<ScoreRecord>& records, const std::vector<int>& labels) {
    std::vector<double> scores;
    std::vector<int> truth;
    for (const auto& r : records) {
        scores.push_back(r.score);
        truth.push_back(labels.at(r.origin));
    }
    try {
        return auc(scores, truth);
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
}

std::string config_header(const HyperParams& params) {
    std::ostringstream out;
    std::istringstream lines(describe(params));
    std::string line;
    while (std::getline(lines, line)) {
        out << "# " << line << '\n';
    }
    return out.str();
}

struct ScoreLine {
    std::size_t event_index = 0;
    Time time = 0;
    double score = 0.0;
};

std::vector<ScoreLine> read_scores(const std::string& path) {
    auto in = open_input(path);
    std::vector<ScoreLine> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            fields.push_back(field);
        }
        if (fields.size() != 6) {
            throw DataError(path + ":" + std::to_string(line_no) + ": expected 6 fields");
        }
        try {
            std::size_t pos = 0;
            ScoreLine s;
            s.event_index = std::stoull(fields[0], &pos);
            s.time = std::stoll(fields[1]);
            s.score = std::stod(fields[4]);
            out.push_back(s);
        } catch (const std::exception&) {
            throw DataError(path + ":" + std::to_string(line_no) + ": malformed score line");
        }
    }
    return out;
}

int cmd_detect(const std::string& input, const std::optional<std::string>& labels_path,
               const std::optional<std::string>& output, const FormatOptions& fmt, const ParamOptions& opts,
               std::ostream& out, std::ostream& err) {
    const auto params = opts.resolve();
    const auto d = detect_file(input, fmt.format(params.undirected), params, false);
    std::ostringstream body;
    body << config_header(params) << "# event_index,time,src,dst,score,channel\n";
    for (const auto& r : d.records) {
        body << r.origin << ',' << r.time << ',' << d.interner.name(r.type.source) << ','
             << d.interner.name(r.type.destination) << ',' << format_double(r.score) << ','
             << channel_name(r.channel) << '\n';
    }
    if (labels_path) {
        const auto labels = read_labels(*labels_path, d.event_count);
        err << "AUC: " << format_double(records_auc(d.records, labels)) << '\n';
    }
    emit(output, body.str(), out);
    return kExitOk;
}

int cmd_generate(const SyntheticConfig& config, const std::string& output,
                 const std::optional<std::string>& labels_output) {
    const auto stream = generate(config);
    std::ostringstream edges;
    write_stream(edges, stream.edges);
    std::ostringstream labels;
    write_labels(labels, stream.edge_labels());
    std::string labels_path;
    if (labels_output) {
        labels_path = *labels_output;
    } else {
        fs::path p(output);
        p.replace_extension(".labels");
        labels_path = p.string();
        if (labels_path == output) {
            labels_path += ".labels";
        }
    }
    write_atomic(output, edges.str());
    write_atomic(labels_path, labels.str());
    return kExitOk;
}

int cmd_evaluate(const std::string& scores_path, const std::string& labels_path, std::ostream& out) {
    const auto scores = read_scores(scores_path);
    auto in = open_input(labels_path);
    const auto labels = parse_labels(in);
    std::vector<double> values;
    std::vector<int> truth;
    for (const auto& s : scores) {
        if (s.event_index >= labels.size()) {
            throw DataError("event index " + std::to_string(s.event_index) + " has no label");
        }
        values.push_back(s.score);
        truth.push_back(labels[s.event_index]);
    }
    try {
        out << "AUC: " << format_double(auc(values, truth)) << '\n';
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
    return kExitOk;
}

int cmd_sweep(const std::string& input, const std::string& labels_path, const std::vector<std::string>& limits,
              const std::optional<std::string>& output, const FormatOptions& fmt, const ParamOptions& opts,
              std::ostream& out) {
    const auto params = opts.resolve();
    std::vector<std::size_t> mem_limits;
    for (const auto& l : limits) {
        HyperParams probe;
        set_param(probe, "mem_limit", l);
        mem_limits.push_back(probe.mem_limit);
    }
    if (mem_limits.empty()) {
        throw UsageError("--mem-limits needs at least one value");
    }
    NodeInterner interner;
    auto in = open_input(input);
    const auto parsed = parse_edge_stream(in, fmt.format(params.undirected), interner);
    const auto labels = read_labels(labels_path, parsed.edges.size());
    LabeledStream stream;
    stream.edges = parsed.edges;
    for (std::size_t i = 0; i < parsed.edges.size(); ++i) {
        stream.labels.insert(stream.labels.end(), parsed.edges[i].weight, labels[i]);
    }
    std::vector<SweepRow> rows;
    try {
        rows = sweep_M(stream, params, mem_limits);
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
    std::ostringstream body;
    body << config_header(params) << "mem_limit,auc,final_f_th\n";
    for (const auto& row : rows) {
        body << (row.mem_limit == kUnbounded ? std::string("inf") : std::to_string(row.mem_limit)) << ','
             << format_double(row.auc) << ',' << format_double(row.final_cutoff) << '\n';
    }
    emit(output, body.str(), out);
    return kExitOk;
}

int cmd_aggregate(const std::string& scores_path, Time period, const std::optional<std::string>& output,
                  std::ostream& out) {
    if (period <= 0) {
        throw UsageError("--period must be positive");
    }
    std::vector<ScoreRecord> records;
    for (const auto& s : read_scores(scores_path)) {
        ScoreRecord r;
        r.time = s.time;
        r.score = s.score;
        records.push_back(r);
    }
    std::ostringstream body;
    body << "period_index,max_score\n";
    for (const auto& bucket : aggregate_events(records, period)) {
        body << bucket.period_index << ',' << format_double(bucket.max_score) << '\n';
    }
    emit(output, body.str(), out);
    return kExitOk;
}

int cmd_dump(const std::string& input, const std::optional<std::string>& output, const FormatOptions& fmt,
             const ParamOptions& opts, std::ostream& out) {
    const auto params = opts.resolve();
    const auto d = detect_file(input, fmt.format(params.undirected), params, true);
    emit(output, d.embeddings, out);
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Streaming anomaly detection on timestamped edge streams", "ffade"};
    app.require_subcommand(1);

    FormatOptions fmt;
    ParamOptions opts;
    std::string input;
    std::string scores;
    std::string labels_required;
    std::optional<std::string> labels;
    std::optional<std::string> output;
    std::optional<std::string> labels_output;
    std::vector<std::string> limits;
    Time period = 10080;

    auto* detect = app.add_subcommand("detect", "score every event of an edge stream");
    detect->add_option("--input,-i", input, "edge stream file")->required();
    detect->add_option("--labels", labels, "0/1 label per event line; prints AUC to stderr");
    detect->add_option("--output,-o", output, "score file (default stdout)");
    fmt.attach(*detect);
    opts.attach(*detect);

    SyntheticConfig gen;
    std::string kind = "W";
    auto* generate_cmd = app.add_subcommand("generate", "write a synthetic labelled stream");
    generate_cmd->add_option("--output,-o", output, "edge stream file")->required();
    generate_cmd->add_option("--labels-output", labels_output, "labels file (default: sibling .labels)");
    generate_cmd->add_option("--groups", gen.n_groups)->capture_default_str();
    generate_cmd->add_option("--nodes-per-group", gen.nodes_per_group)->capture_default_str();
    generate_cmd->add_option("--base-freq", gen.base_freq, "events per tick per in-group pair")
        ->capture_default_str();
    generate_cmd->add_option("--horizon", gen.horizon)->capture_default_str();
    generate_cmd->add_option("--injections", gen.n_injections)->capture_default_str();
    generate_cmd->add_option("--kind", kind, "S (cliques) or W (bursts)")
        ->check(CLI::IsMember({"S", "W"}))
        ->capture_default_str();
    generate_cmd->add_option("--clique-size", gen.clique_size)->capture_default_str();
    generate_cmd->add_option("--burst-size", gen.burst_size)->capture_default_str();
    generate_cmd->add_option("--injection-start", gen.injection_start)->capture_default_str();
    std::optional<std::uint64_t> gen_seed;
    generate_cmd->add_option("--seed", gen_seed);

    auto* evaluate_cmd = app.add_subcommand("evaluate", "AUC of a score file against labels");
    evaluate_cmd->add_option("--scores", scores)->required();
    evaluate_cmd->add_option("--labels", labels_required)->required();

    auto* sweep_cmd = app.add_subcommand("sweep", "AUC and final cut-off for several capacities");
    sweep_cmd->add_option("--input,-i", input)->required();
    sweep_cmd->add_option("--labels", labels_required)->required();
    sweep_cmd->add_option("--mem-limits", limits, "comma separated capacities")->delimiter(',')->required();
    sweep_cmd->add_option("--output,-o", output);
    fmt.attach(*sweep_cmd);
    opts.attach(*sweep_cmd);

    auto* aggregate_cmd = app.add_subcommand("aggregate", "maximum score per time period");
    aggregate_cmd->add_option("--scores", scores)->required();
    aggregate_cmd->add_option("--period", period)->capture_default_str();
    aggregate_cmd->add_option("--output,-o", output);

    auto* dump_cmd = app.add_subcommand("dump-embeddings", "run a stream and write the final embeddings");
    dump_cmd->add_option("--input,-i", input)->required();
    dump_cmd->add_option("--output,-o", output);
    fmt.attach(*dump_cmd);
    opts.attach(*dump_cmd);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (detect->parsed()) {
            return cmd_detect(input, labels, output, fmt, opts, out, err);
        }
        if (generate_cmd->parsed()) {
            gen.injection_kind = kind == "S" ? InjectionKind::clique : InjectionKind::burst;
            if (gen_seed) {
                gen.seed = *gen_seed;
            } else if (const char* env = std::getenv("FFADE_SEED"); env != nullptr && *env != '\0') {
                HyperParams probe;
                set_param(probe, "seed", env);
                gen.seed = probe.seed;
            }
            return cmd_generate(gen, *output, labels_output);
        }
        if (evaluate_cmd->parsed()) {
            return cmd_evaluate(scores, labels_required, out);
        }
        if (sweep_cmd->parsed()) {
            return cmd_sweep(input, labels_required, limits, output, fmt, opts, out);
        }
        if (aggregate_cmd->parsed()) {
            return cmd_aggregate(scores, period, output, out);
        }
        if (dump_cmd->parsed()) {
            return cmd_dump(input, output, fmt, opts, out);
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace ffade::cli
