#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "feedmesh/engine.hpp"

namespace feedmesh::harness {

struct GeneratorSpec {
    size_t count = 1;
    double rate = 1000;        // records/second each
    double duration = 10;      // seconds
    std::uint64_t seed = 1;    // generator i uses seed + i
    std::string tag_prefix = "g";
};

struct ExperimentConfig {
    bool real_mode = false;
    size_t nodes = 4;
    std::uint64_t seed = 42;
    Tick ticks = 1000;
    std::string run_name = "run";
    std::string out_dir = ".";
    std::string ddl_path;    // may be empty when ddl_text is set
    std::string ddl_text;
    std::string fault_path;  // optional
    std::string fault_text;
    GeneratorSpec generators;
    std::vector<std::pair<Tick, std::string>> timed_ddl;
    std::vector<std::string> snapshots;  // datasets to dump at end
    std::uint64_t node_capacity = 100;
    size_t frame_bytes = dataflow::kDefaultFrameBytes;
    size_t fmm_budget = runtime::kDefaultBufferBudget;
    size_t fmm_grant_cap = runtime::kDefaultGrantCap;
    size_t instance_quantum = 16;

    // key=value lines; '#' comments. Relative ddl/fault paths resolve against
    // the config file's directory.
    static ExperimentConfig parse_file(const std::string& path);
    static ExperimentConfig parse(const std::string& text, const std::string& base_dir);
};

struct RecoveryObservation {
    Tick kill_tick = 0;
    NodeId node;
    std::string connection;
    Tick detected_tick = 0;
    Tick first_insert_tick = 0;  // 0 = never recovered
    Tick latency_ticks = 0;
    std::uint64_t resident_at_kill = 0;
};

struct RunResult {
    std::map<std::string, ConnectionStats> connections;
    std::map<std::string, std::vector<std::uint64_t>> timeline;  // feed -> per-window persisted
    std::vector<RecoveryObservation> recoveries;
    std::vector<TerminationEvent> terminations;
    std::map<std::string, std::uint64_t> generated;  // generator tag -> emitted
    bool identity_holds = false;
    std::uint64_t budget_violations = 0;
    std::string metrics_path;
    std::string metrics_csv;

    std::string to_text() const;
};

// Boots the engine, runs DDL, generators and faults, emits metrics, and
// returns the summary. The engine outlives the call through `keep` when a
// caller needs to inspect state (tests).
RunResult run_experiment(const ExperimentConfig& config, std::unique_ptr<Engine>* keep = nullptr);

struct FeedSummary {
    std::string feed;
    std::uint64_t total_ingested = 0;
    std::uint64_t windows = 0;
    std::uint64_t min_window = 0;
    double mean_window = 0.0;
    std::vector<size_t> dip_windows;       // windows below half the mean
    std::vector<size_t> recovery_windows;  // first window back above half mean after a dip
};

struct Summary {
    std::vector<FeedSummary> feeds;
    std::vector<std::string> totals;  // parsed '#'-totals footer lines
    bool identity_holds = true;

    std::string to_text() const;
};

// Recomputes per-feed totals and dip/recovery structure from a metrics CSV.
Summary summarize(const std::string& csv_text);
Summary summarize_file(const std::string& path);

}  // namespace feedmesh::harness
