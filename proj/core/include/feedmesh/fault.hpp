#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "feedmesh/cluster.hpp"
#include "feedmesh/common.hpp"
#include "feedmesh/frame.hpp"
#include "feedmesh/metafeed.hpp"

namespace feedmesh::fault {

// Master-side failure detector. A node missing `timeout_beats` consecutive
// heartbeats is declared failed exactly once.
class HeartbeatMonitor {
public:
    explicit HeartbeatMonitor(Tick period = kHeartbeatPeriodTicks, int timeout_beats = kHeartbeatTimeoutBeats)
        : period_(period), timeout_beats_(timeout_beats) {}

    void node_joined(const NodeId& node, Tick now);
    void node_removed(const NodeId& node);
    void heartbeat(const NodeId& node, Tick now);

    // Nodes newly past the timeout; each node is returned at most once per
    // join.
    std::vector<NodeId> check(Tick now);

    Tick period() const { return period_; }

private:
    struct Entry {
        Tick last_beat = 0;
        bool declared_failed = false;
    };
    Tick period_;
    int timeout_beats_;
    std::map<NodeId, Entry> entries_;
};

// Pending frames and the resume token a zombie instance left with its node's
// Feed Manager; retrievable exactly once by the successor instance.
struct SavedState {
    std::string pipeline;  // owning pipeline id
    std::string feed;
    dataflow::Role role = dataflow::Role::Compute;
    size_t stage_index = 0;
    size_t partition_index = 0;
    std::vector<dataflow::FramePtr> pending_input;
    std::vector<dataflow::FramePtr> pending_output;
    std::string resume_token;
};

// Keyed store of zombie state per node. Claim removes the entry.
class SavedStateStore {
public:
    static std::string key(const std::string& pipeline, size_t stage_index, size_t partition_index);

    void save(SavedState state);
    std::optional<SavedState> claim(const std::string& pipeline, size_t stage_index, size_t partition_index);
    size_t size() const { return states_.size(); }
    void clear() { states_.clear(); }
    const std::map<std::string, SavedState>& all() const { return states_; }

private:
    std::map<std::string, SavedState> states_;
};

enum class FaultKind { KillNode, ReviveNode, PoisonUdf };

struct FaultEvent {
    Tick tick = 0;
    FaultKind kind = FaultKind::KillNode;
    NodeId node;       // kill/revive
    std::string feed;  // poison
    long every_n = 0;  // poison
};

struct FaultScript {
    std::vector<FaultEvent> events;

    // One event per line: `tick kill-node <id>` / `tick revive-node <id>` /
    // `tick poison-udf <feed> <n>`. Ticks must be non-decreasing.
    static FaultScript parse(const std::string& text);
};

// Instance fate after a node failure, per the zombie rules: dead iff on the
// failed node; live iff intake, or its output joint still feeds other live
// pipelines; zombie otherwise.
enum class Fate { Dead, Live, Zombie };

Fate classify_instance(bool on_failed_node, dataflow::Role role, bool joint_has_external_live_subscribers);

// Substitute choice for an instance whose predecessor died: an idle node when
// one exists, else the least-loaded live node. nullopt when nothing is live.
std::optional<NodeId> choose_substitute(const cluster::ClusterView& cluster);

}  // namespace feedmesh::fault
