#include "feedmesh/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace feedmesh::harness {

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open \"" + path + "\"");
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::string resolve(const std::string& base_dir, const std::string& path) {
    if (path.empty() || path.front() == '/') return path;
    return (fs::path(base_dir) / path).string();
}

}  // namespace

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
    return parse(read_file(path), fs::path(path).parent_path().string());
}

ExperimentConfig ExperimentConfig::parse(const std::string& text, const std::string& base_dir) {
    ExperimentConfig config;
    std::istringstream lines(text);
    std::string line;
    int line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        std::string body = trim(line);
        if (body.empty() || body[0] == '#') continue;
        size_t eq = body.find('=');
        if (eq == std::string::npos) throw ParseError("expected key=value", line_no, 1);
        std::string key = trim(body.substr(0, eq));
        std::string value = trim(body.substr(eq + 1));
        try {
            if (key == "mode") {
                if (value != "sim" && value != "real") throw Error("mode must be sim or real");
                config.real_mode = value == "real";
            } else if (key == "nodes") {
                config.nodes = std::stoul(value);
            } else if (key == "seed") {
                config.seed = std::stoull(value);
            } else if (key == "ticks") {
                config.ticks = std::stoull(value);
            } else if (key == "run") {
                config.run_name = value;
            } else if (key == "out") {
                config.out_dir = value;  // an output path: relative to the working directory
            } else if (key == "ddl") {
                config.ddl_path = resolve(base_dir, value);
            } else if (key == "faults") {
                config.fault_path = resolve(base_dir, value);
            } else if (key == "gen.count") {
                config.generators.count = std::stoul(value);
            } else if (key == "gen.rate") {
                config.generators.rate = std::stod(value);
            } else if (key == "gen.duration") {
                config.generators.duration = std::stod(value);
            } else if (key == "gen.seed") {
                config.generators.seed = std::stoull(value);
            } else if (key == "gen.tag") {
                config.generators.tag_prefix = value;
            } else if (key == "node.capacity") {
                config.node_capacity = std::stoull(value);
            } else if (key == "frame.bytes") {
                config.frame_bytes = std::stoul(value);
            } else if (key == "fmm.budget") {
                config.fmm_budget = std::stoul(value);
            } else if (key == "fmm.cap") {
                config.fmm_grant_cap = std::stoul(value);
            } else if (key == "quantum") {
                config.instance_quantum = std::stoul(value);
            } else if (key == "snapshot") {
                for (const auto& ds : split_list(value, ',')) config.snapshots.push_back(ds);
            } else if (key == "ddl_at") {
                size_t colon = value.find(':');
                if (colon == std::string::npos) throw Error("ddl_at expects tick:statement");
                config.timed_ddl.emplace_back(std::stoull(value.substr(0, colon)),
                                              trim(value.substr(colon + 1)));
            } else {
                throw Error("unknown config key \"" + key + "\"");
            }
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(std::string(e.what()), line_no, 1);
        }
    }
    return config;
}

RunResult run_experiment(const ExperimentConfig& config, std::unique_ptr<Engine>* keep) {
    EngineConfig ec;
    ec.real_mode = config.real_mode;
    ec.nodes = config.nodes;
    ec.seed = config.seed;
    ec.out_dir = config.out_dir;
    ec.run_name = config.run_name;
    ec.frame_bytes = config.frame_bytes;
    ec.fmm_budget = config.fmm_budget;
    ec.fmm_grant_cap = config.fmm_grant_cap;
    ec.node_capacity = config.node_capacity;
    ec.instance_quantum = config.instance_quantum;

    auto engine = std::make_unique<Engine>(ec);

    for (size_t i = 0; i < config.generators.count; ++i) {
        engine->add_generator(config.generators.tag_prefix + std::to_string(i), config.generators.rate,
                              config.generators.duration, config.generators.seed + i);
    }

    std::string ddl = config.ddl_text;
    if (!config.ddl_path.empty()) ddl += read_file(config.ddl_path);
    if (!ddl.empty()) engine->apply_ddl(ddl);

    std::string faults = config.fault_text;
    if (!config.fault_path.empty()) faults += read_file(config.fault_path);
    if (!faults.empty()) engine->set_fault_script(fault::FaultScript::parse(faults));

    for (const auto& [at, stmt] : config.timed_ddl) engine->schedule_ddl(at, stmt);

    engine->run_until(config.ticks);
    engine->finalize();
    engine->write_metrics();
    for (const auto& ds : config.snapshots) engine->store().snapshot(ds, config.out_dir);

    RunResult result;
    result.connections = engine->connections();
    result.timeline = engine->ingest_timeline();
    result.terminations = engine->terminations();
    result.identity_holds = engine->accounting_identity_holds();
    result.budget_violations = engine->fmm_budget_violations();
    result.metrics_path = engine->metrics_path();
    result.metrics_csv = engine->metrics_csv();
    for (const auto& tag : engine->generator_tags())
        result.generated[tag] = engine->generator(tag)->emitted();
    for (const auto& failure : engine->failures()) {
        for (const auto& [conn, first] : failure.first_insert_after) {
            RecoveryObservation obs;
            obs.kill_tick = failure.kill_tick;
            obs.node = failure.node;
            obs.connection = conn;
            obs.detected_tick = failure.detected_tick;
            obs.first_insert_tick = first;
            obs.latency_ticks = first > failure.kill_tick ? first - failure.kill_tick : 0;
            auto res = failure.resident_records.find(conn);
            obs.resident_at_kill = res == failure.resident_records.end() ? 0 : res->second;
            result.recoveries.push_back(obs);
        }
    }

    if (keep != nullptr) *keep = std::move(engine);
    return result;
}

std::string RunResult::to_text() const {
    std::ostringstream out;
    out << "connections:\n";
    for (const auto& [id, s] : connections) {
        out << "  " << id << ": entered=" << s.entered << " ingested=" << s.ingested
            << " discarded=" << s.discarded << " spilled_pending=" << s.spilled_pending
            << " in_flight=" << s.in_flight << " skipped=" << s.soft_skipped
            << " udf_dropped=" << s.udf_dropped << " lost=" << s.lost
            << " teardown_dropped=" << s.teardown_dropped << " outbox=" << s.source_outbox
            << (s.closed ? " (closed)" : "") << "\n";
    }
    out << "generated:\n";
    for (const auto& [tag, n] : generated) out << "  " << tag << ": " << n << "\n";
    if (!recoveries.empty()) {
        out << "recoveries:\n";
        for (const auto& r : recoveries) {
            out << "  node " << r.node << " killed @" << r.kill_tick << " conn " << r.connection
                << " detected @" << r.detected_tick << " first insert @" << r.first_insert_tick
                << " latency " << r.latency_ticks << " ticks, resident " << r.resident_at_kill << "\n";
        }
    }
    if (!terminations.empty()) {
        out << "terminations:\n";
        for (const auto& t : terminations)
            out << "  @" << t.tick << " " << t.connection << ": " << t.reason << "\n";
    }
    out << "accounting identity: " << (identity_holds ? "ok" : "VIOLATED") << "\n";
    out << "budget violations: " << budget_violations << "\n";
    out << "metrics: " << metrics_path << "\n";
    return out.str();
}

Summary summarize(const std::string& csv_text) {
    Summary summary;
    std::istringstream lines(csv_text);
    std::string line;
    bool header = true;
    // feed -> window_start -> outflow sum
    std::map<std::string, std::map<Tick, std::uint64_t>> per_feed;
    while (std::getline(lines, line)) {
        if (header) {
            if (line.rfind("window_start,", 0) != 0) throw Error("malformed metrics CSV: missing header");
            header = false;
            continue;
        }
        if (line.empty()) continue;
        if (line[0] == '#') {
            summary.totals.push_back(line);
            // entered=-style fields; verify the identity from the footer.
            auto field = [&](const std::string& name) -> std::uint64_t {
                auto pos = line.find(name + "=");
                if (pos == std::string::npos) return 0;
                return std::stoull(line.substr(pos + name.size() + 1));
            };
            std::uint64_t entered = field("entered");
            std::uint64_t accounted = field("ingested") + field("discarded") + field("spilled_pending") +
                                      field("in_flight") + field("soft_skipped") + field("udf_dropped") +
                                      field("lost") + field("teardown_dropped");
            if (entered != accounted) summary.identity_holds = false;
            continue;
        }
        std::istringstream fields(line);
        std::string window_str, feed, node, inflow, outflow;
        if (!std::getline(fields, window_str, ',') || !std::getline(fields, feed, ',') ||
            !std::getline(fields, node, ',') || !std::getline(fields, inflow, ',') ||
            !std::getline(fields, outflow, ','))
            throw Error("malformed metrics CSV row: " + line);
        per_feed[feed][std::stoull(window_str)] += std::stoull(outflow);
    }

    for (const auto& [feed, windows] : per_feed) {
        FeedSummary fs;
        fs.feed = feed;
        if (windows.empty()) continue;
        Tick last = windows.rbegin()->first;
        std::vector<std::uint64_t> series;
        for (Tick w = 0; w <= last; w += kMetricsWindowTicks) {
            auto it = windows.find(w);
            series.push_back(it == windows.end() ? 0 : it->second);
        }
        fs.windows = series.size();
        std::uint64_t total = 0;
        std::uint64_t min_w = series.empty() ? 0 : series.front();
        for (auto v : series) {
            total += v;
            min_w = std::min(min_w, v);
        }
        fs.total_ingested = total;
        fs.min_window = min_w;
        fs.mean_window = series.empty() ? 0.0 : static_cast<double>(total) / series.size();
        bool in_dip = false;
        for (size_t i = 0; i < series.size(); ++i) {
            bool low = static_cast<double>(series[i]) < 0.5 * fs.mean_window;
            if (low && !in_dip) {
                fs.dip_windows.push_back(i);
                in_dip = true;
            } else if (!low && in_dip) {
                fs.recovery_windows.push_back(i);  // first window back after the dip
                in_dip = false;
            }
        }
        summary.feeds.push_back(std::move(fs));
    }
    return summary;
}

Summary summarize_file(const std::string& path) { return summarize(read_file(path)); }

std::string Summary::to_text() const {
    std::ostringstream out;
    for (const auto& f : feeds) {
        out << f.feed << ": total=" << f.total_ingested << " windows=" << f.windows
            << " min/window=" << f.min_window << " mean/window=" << f.mean_window;
        if (!f.dip_windows.empty()) {
            out << " dips@[";
            for (size_t i = 0; i < f.dip_windows.size(); ++i) out << (i ? "," : "") << f.dip_windows[i];
            out << "] recovered@[";
            for (size_t i = 0; i < f.recovery_windows.size(); ++i)
                out << (i ? "," : "") << f.recovery_windows[i];
            out << "]";
        }
        out << "\n";
    }
    for (const auto& t : totals) out << t << "\n";
    out << "accounting identity: " << (identity_holds ? "ok" : "VIOLATED") << "\n";
    return out.str();
}

}  // namespace feedmesh::harness
