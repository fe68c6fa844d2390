#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "feedmesh/catalog.hpp"
#include "feedmesh/common.hpp"
#include "feedmesh/frame.hpp"

namespace feedmesh::runtime {

constexpr size_t kDefaultBufferBudget = 64;  // buffers per node
constexpr size_t kDefaultGrantCap = 8;       // buffers per request

// Per-node buffer-budget allocator. Grant/release must be safe under
// concurrent calls from every instance on the node, hence the lock-free
// counter.
class FeedMemoryManager {
public:
    explicit FeedMemoryManager(size_t budget = kDefaultBufferBudget, size_t grant_cap = kDefaultGrantCap,
                               size_t buffer_bytes = dataflow::kDefaultFrameBytes)
        : budget_(budget), grant_cap_(grant_cap), buffer_bytes_(buffer_bytes) {}

    // Grants k = min(n, cap, remaining budget) buffers; 0 means denial.
    size_t request(size_t n);
    void release(size_t n);

    size_t budget() const { return budget_; }
    size_t grant_cap() const { return grant_cap_; }
    size_t buffer_bytes() const { return buffer_bytes_; }
    size_t allocated() const { return allocated_.load(std::memory_order_relaxed); }
    size_t peak_allocated() const { return peak_.load(std::memory_order_relaxed); }
    // Incremented if a grant ever leaves allocated > budget; must stay 0.
    std::uint64_t budget_violations() const { return violations_.load(std::memory_order_relaxed); }

    void reset() {
        allocated_ = 0;
        peak_ = 0;
    }

private:
    size_t budget_;
    size_t grant_cap_;
    size_t buffer_bytes_;
    std::atomic<size_t> allocated_{0};
    std::atomic<size_t> peak_{0};
    std::atomic<std::uint64_t> violations_{0};
};

// What a stalled instance's local Feed Manager decided to do with an overflow
// frame.
enum class CongestionAction { Spill, Discard, Escalate };

struct SpillLedger {
    std::uint64_t spilled_bytes = 0;
    std::uint64_t spilled_frames = 0;
    std::uint64_t replayed_frames = 0;
    std::uint64_t discarded_records = 0;
};

struct EscalationEvent {
    Tick tick;
    std::string instance;
    std::string feed;
};

// Per-window activity of one feed on one node; the building block of both the
// metrics CSV and the Super Feed Manager's global view.
struct WindowCounters {
    std::uint64_t inflow = 0;    // records entering the feed's pipeline here
    std::uint64_t outflow = 0;   // records persisted by store instances here
    std::uint64_t spilled_bytes = 0;
    std::uint64_t discarded = 0;
};

struct FeedReport {
    NodeId node;
    Tick window_start;
    // feed -> rates over the window, in records/s.
    std::map<std::string, double> inflow_rate;
    std::map<std::string, double> outflow_rate;
    double cpu_utilization = 0.0;   // synthetic proxy: queue occupancy ratio
    double disk_utilization = 0.0;  // synthetic proxy: spill activity
    std::vector<std::string> stalled_instances;
};

// Per-node control agent: registration, spill/discard ledgers, the stalled
// set, and window accounting.
class FeedManager {
public:
    explicit FeedManager(NodeId node) : node_(std::move(node)) {}

    const NodeId& node() const { return node_; }
    bool is_leader() const { return is_leader_; }
    void set_leader(bool leader) { is_leader_ = leader; }

    void register_instance(const std::string& instance_id, const std::string& feed);
    void deregister_instance(const std::string& instance_id);
    bool is_registered(const std::string& instance_id) const { return instances_.count(instance_id) > 0; }

    // Resolution order per the ingestion policy: spill while the ledger allows
    // it, else discard, else escalate to the Super Feed Manager.
    CongestionAction handle_stalled(const std::string& instance_id, const catalog::IngestionPolicy& policy,
                                    size_t incoming_bytes, Tick now);

    void mark_stalled(const std::string& instance_id, bool stalled);
    const std::set<std::string>& stalled() const { return stalled_; }

    void note_spilled(const std::string& instance_id, std::uint64_t bytes);
    void note_replayed(const std::string& instance_id);
    void note_discarded(const std::string& instance_id, std::uint64_t records);
    const SpillLedger& ledger(const std::string& instance_id) const;

    const std::vector<EscalationEvent>& escalations() const { return escalations_; }

    void count_inflow(const std::string& feed, std::uint64_t records);
    void count_outflow(const std::string& feed, std::uint64_t records);
    void count_spilled_bytes(const std::string& feed, std::uint64_t bytes);
    void count_discarded(const std::string& feed, std::uint64_t records);

    // Closes the current metrics window: returns per-feed counters and resets
    // them. The shorter report window (leader cadence) is tracked separately.
    std::map<std::string, WindowCounters> take_window();
    FeedReport make_report(Tick window_start, Tick window_ticks, double queue_occupancy,
                           const std::map<std::string, bool>& feed_stats_enabled);

    const std::map<std::string, std::string>& registered() const { return instances_; }
    std::string feed_of(const std::string& instance_id) const;

private:
    NodeId node_;
    bool is_leader_ = false;
    std::map<std::string, std::string> instances_;  // instance id -> feed
    std::map<std::string, SpillLedger> ledgers_;
    std::set<std::string> stalled_;
    std::vector<EscalationEvent> escalations_;
    std::map<std::string, WindowCounters> window_;         // metrics cadence
    std::map<std::string, WindowCounters> report_window_;  // leader cadence
};

// Deterministic leader choice: lowest live node id. Re-run on membership
// change.
std::optional<NodeId> elect_leader(const std::vector<NodeId>& live_nodes);

struct StalledEntry {
    std::string instance;
    NodeId node;
    std::string feed;
};

struct GlobalView {
    Tick window_start = 0;
    // feed -> summed rates across reporting nodes (records/s).
    std::map<std::string, double> inflow_rate;
    std::map<std::string, double> outflow_rate;
    std::vector<StalledEntry> stalled;
    std::vector<NodeId> reporting_nodes;
};

// Super Feed Manager aggregation: one global view per window. Nodes that sent
// no report are simply absent (the heartbeat path owns suspicion).
GlobalView collect_reports(const std::vector<FeedReport>& reports,
                           const std::map<std::string, std::string>& instance_feeds);

}  // namespace feedmesh::runtime
