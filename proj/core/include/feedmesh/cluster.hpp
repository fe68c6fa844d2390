#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "feedmesh/common.hpp"

namespace feedmesh::cluster {

struct NodeInfo {
    NodeId id;
    bool live = true;
    size_t hosted_instances = 0;
};

// The master's placement view: node liveness and load (instance counts). The
// richer per-node runtime state (queues, managers, storage) lives with the
// engine; schedulers and the recovery planner only need this.
class ClusterView {
public:
    void add_node(const NodeId& id) { nodes_[id] = NodeInfo{id, true, 0}; }

    bool contains(const NodeId& id) const { return nodes_.count(id) > 0; }
    bool is_live(const NodeId& id) const;
    void set_live(const NodeId& id, bool live) { nodes_.at(id).live = live; }

    size_t load(const NodeId& id) const { return nodes_.at(id).hosted_instances; }
    void add_load(const NodeId& id, int delta);

    std::vector<NodeId> all_nodes() const;
    std::vector<NodeId> live_nodes() const;
    // Live nodes hosting zero operator instances, ascending by id.
    std::vector<NodeId> idle_nodes() const;
    // Fewest hosted instances, ties by lowest node id.
    std::optional<NodeId> least_loaded() const;

private:
    std::map<NodeId, NodeInfo> nodes_;
};

// Generates node ids A, B, C, ... for an n-node cluster.
std::vector<NodeId> default_node_ids(size_t n);

}  // namespace feedmesh::cluster
