#pragma once

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "feedmesh/adaptor.hpp"
#include "feedmesh/catalog.hpp"
#include "feedmesh/cluster.hpp"
#include "feedmesh/ddl.hpp"
#include "feedmesh/fault.hpp"
#include "feedmesh/generator.hpp"
#include "feedmesh/joint.hpp"
#include "feedmesh/metafeed.hpp"
#include "feedmesh/pipeline.hpp"
#include "feedmesh/queue.hpp"
#include "feedmesh/runtime.hpp"
#include "feedmesh/storage.hpp"
#include "feedmesh/udf.hpp"

namespace feedmesh {

struct EngineConfig {
    bool real_mode = false;
    size_t nodes = 4;
    std::vector<NodeId> node_ids;  // overrides `nodes` when non-empty
    std::uint64_t seed = 42;
    std::string out_dir = ".";
    std::string run_name = "run";
    size_t frame_bytes = dataflow::kDefaultFrameBytes;
    size_t fmm_budget = runtime::kDefaultBufferBudget;
    size_t fmm_grant_cap = runtime::kDefaultGrantCap;
    // Per-node processing capacity, in record-stage visits per tick. This is
    // what makes a small cluster shed load and a bigger one keep up.
    std::uint64_t node_capacity = 100;
    size_t instance_quantum = 16;  // frames per instance per tick
};

// Per-connection accounting. At the end of a run (or at connection close)
// every record the source handed over is in exactly one bucket:
//   entered == ingested + discarded + spilled_pending + in_flight
//            + soft_skipped + udf_dropped + lost + teardown_dropped
struct ConnectionStats {
    std::string feed;
    std::string dataset;
    std::uint64_t entered = 0;
    std::uint64_t ingested = 0;
    std::uint64_t discarded = 0;
    std::uint64_t spilled_pending = 0;  // computed at close/finalize
    std::uint64_t in_flight = 0;        // computed at close/finalize
    std::uint64_t soft_skipped = 0;
    std::uint64_t udf_dropped = 0;
    std::uint64_t lost = 0;              // destroyed with failed nodes
    std::uint64_t teardown_dropped = 0;  // pending at disconnect/termination
    std::uint64_t source_outbox = 0;     // emitted by the sim source, not yet received
    bool closed = false;

    bool identity_holds() const {
        return entered == ingested + discarded + spilled_pending + in_flight + soft_skipped + udf_dropped +
                              lost + teardown_dropped;
    }
};

struct TerminationEvent {
    Tick tick;
    std::string connection;
    std::string reason;
};

struct FailureRecord {
    Tick kill_tick;
    NodeId node;
    Tick detected_tick = 0;
    // connection id -> first post-recovery insert tick (0 while none).
    std::map<std::string, Tick> first_insert_after;
    std::map<std::string, Tick> resumed_at;
    std::map<std::string, std::uint64_t> resident_records;  // on the node at kill
};

class Engine : public dataflow::SoftFailureSink {
public:
    explicit Engine(EngineConfig config);
    ~Engine() override;

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    // --- setup -----------------------------------------------------------
    // Binds a live generator to sim endpoint `sim://<tag>`.
    adaptors::SimGenerator& add_generator(const std::string& tag, double rate, double duration_seconds,
                                          std::uint64_t seed);
    void bind_sim_source(const std::string& address, adaptors::SimSourceRegistry::Factory factory);

    void apply_ddl(const std::string& script_text);
    ddl::Statement apply_one(const std::string& statement_text);  // returns the parsed form
    void schedule_ddl(Tick at, std::string statement_text);
    void set_fault_script(fault::FaultScript script);

    // --- run -------------------------------------------------------------
    void tick();
    void run_until(Tick end_tick);
    Tick now() const { return tick_; }

    // --- introspection ---------------------------------------------------
    const catalog::Catalog& cat() const { return catalog_; }
    storage::StorageManager& store() { return storage_; }
    const cluster::ClusterView& cluster() const { return cluster_; }
    runtime::FeedMemoryManager& fmm(const NodeId& node);
    runtime::FeedManager& feed_manager(const NodeId& node);
    fault::SavedStateStore& saved_state(const NodeId& node);

    std::string show_catalog() const { return catalog_.dump(); }
    std::string show_pipelines() const;

    const adaptors::SimGenerator* generator(const std::string& tag) const;
    std::vector<std::string> generator_tags() const;

    // Closes open windows and computes spill/in-flight buckets.
    void finalize();
    std::map<std::string, ConnectionStats> connections() const;
    bool accounting_identity_holds() const;

    std::string metrics_csv() const;  // header, window rows, '#'-totals footer
    void write_metrics() const;
    std::string metrics_path() const;

    const std::vector<TerminationEvent>& terminations() const { return terminations_; }
    const std::vector<FailureRecord>& failures() const { return failures_; }
    const runtime::GlobalView& global_view() const { return latest_view_; }
    const std::optional<NodeId>& leader() const { return leader_; }
    std::uint64_t fmm_budget_violations() const;

    // Per-feed per-window persisted counts, for throughput timelines.
    const std::map<std::string, std::vector<std::uint64_t>>& ingest_timeline() const { return timeline_; }

    std::string error_log(const std::string& feed) const;

    // SoftFailureSink
    void log_soft_failure(Tick tick, const std::string& feed, dataflow::Role role, const NodeId& node,
                          const std::string& what, const dataflow::Record& record) override;

private:
    struct NodeRuntime;
    struct InstanceRt;
    struct StageRt;
    struct PipelineRt;

    struct PendingTermination {
        std::string feed;
        std::string dataset;
        std::string reason;
    };

    NodeRuntime& node_rt(const NodeId& id);
    PipelineRt* find_pipeline(const std::string& id);
    void elect();

    void handle_action(const ddl::Action& action);
    void do_connect(const std::string& feed, const std::string& dataset, const std::string& policy);
    void do_disconnect(const std::string& feed, const std::string& dataset, bool terminating,
                       const std::string& reason, bool save_zombies);
    void deploy(pipeline::PipelinePlan plan, const catalog::IngestionPolicy& policy);
    void create_instances(PipelineRt& p);
    void teardown_stages(PipelineRt& p, size_t keep, bool count_as_lost, bool save_zombies);
    void prune_orphan_stubs();
    void drop_instance(PipelineRt& p, InstanceRt& inst, bool count_as_lost, bool release_buffers);
    void save_zombie_state(PipelineRt& p, InstanceRt& inst);

    void run_fault_events();
    void run_timed_ddl();
    void kill_node(const NodeId& node);
    void revive_node(const NodeId& node);
    void poison_feed(const std::string& feed, long every_n);
    void detect_failures();
    void handle_node_failure(const NodeId& node);
    void recover_pipeline(PipelineRt& p, const NodeId& failed_node);
    void resume_pipeline(PipelineRt& p);

    void step_generators();
    void drain_adaptors();
    void step_operators();
    bool step_one_frame(PipelineRt& p, InstanceRt& inst);
    bool route_outputs(PipelineRt& p, InstanceRt& inst, std::vector<dataflow::Frame> outputs);
    bool flush_backlog(PipelineRt& p, InstanceRt& inst);
    void process_pending_terminations();
    void send_heartbeats();
    void collect_window_reports();
    void close_metrics_window(Tick window_start);
    std::map<std::string, bool> feeds_collecting_statistics() const;

    void ensure_feed_errors_dataset();
    void note_insert(const std::string& connection);
    std::string spill_file_for(const NodeId& node, const std::string& feed,
                               const std::string& instance_id) const;

    EngineConfig config_;
    Tick tick_ = 0;
    DetRng placement_rng_;
    catalog::Catalog catalog_;
    udf::FunctionRegistry functions_;
    adaptors::SimSourceRegistry sim_sources_;
    std::map<std::string, std::shared_ptr<adaptors::SimGenerator>> generators_;
    cluster::ClusterView cluster_;
    std::map<NodeId, std::unique_ptr<NodeRuntime>> nodes_;
    storage::StorageManager storage_;
    pipeline::JointRegistry joint_registry_;
    std::map<std::string, dataflow::FeedJoint*> joints_by_id_;
    std::vector<std::unique_ptr<PipelineRt>> pipelines_;
    fault::HeartbeatMonitor monitor_;
    fault::FaultScript fault_script_;
    size_t next_fault_ = 0;
    std::vector<std::pair<Tick, std::string>> timed_ddl_;
    size_t next_ddl_ = 0;
    std::map<std::string, long> poisons_;  // feed -> every_n
    std::vector<PendingTermination> pending_terminations_;
    std::map<std::string, std::string> subscriber_pipeline_;  // head instance -> pipeline id

    // Owning map so queues can hold stable ConnectionStats pointers across
    // pipeline teardown and recovery.
    std::map<std::string, std::unique_ptr<ConnectionStats>> stats_storage_;
    std::vector<TerminationEvent> terminations_;
    std::vector<FailureRecord> failures_;
    std::optional<NodeId> leader_;
    runtime::GlobalView latest_view_;
    std::vector<std::string> csv_rows_;
    std::map<std::string, std::vector<std::uint64_t>> timeline_;  // feed -> per-window persisted
    std::map<std::string, std::uint64_t> window_persisted_;       // current window, per feed
    size_t windows_closed_ = 0;
    std::map<std::string, std::string> error_logs_;               // feed -> accumulated lines
    std::uint64_t next_error_id_ = 0;
    bool finalized_ = false;
};

}  // namespace feedmesh
