#include "feedmesh/cluster.hpp"

namespace feedmesh::cluster {

bool ClusterView::is_live(const NodeId& id) const {
    auto it = nodes_.find(id);
    return it != nodes_.end() && it->second.live;
}

void ClusterView::add_load(const NodeId& id, int delta) {
    auto& n = nodes_.at(id);
    if (delta < 0 && n.hosted_instances < static_cast<size_t>(-delta))
        n.hosted_instances = 0;
    else
        n.hosted_instances += delta;
}

std::vector<NodeId> ClusterView::all_nodes() const {
    std::vector<NodeId> out;
    for (const auto& [id, info] : nodes_) out.push_back(id);
    return out;
}

std::vector<NodeId> ClusterView::live_nodes() const {
    std::vector<NodeId> out;
    for (const auto& [id, info] : nodes_)
        if (info.live) out.push_back(id);
    return out;
}

std::vector<NodeId> ClusterView::idle_nodes() const {
    std::vector<NodeId> out;
    for (const auto& [id, info] : nodes_)
        if (info.live && info.hosted_instances == 0) out.push_back(id);
    return out;
}

std::optional<NodeId> ClusterView::least_loaded() const {
    std::optional<NodeId> best;
    for (const auto& [id, info] : nodes_) {
        if (!info.live) continue;
        if (!best || info.hosted_instances < nodes_.at(*best).hosted_instances) best = id;
    }
    return best;
}

std::vector<NodeId> default_node_ids(size_t n) {
    std::vector<NodeId> out;
    for (size_t i = 0; i < n; ++i) {
        if (i < 26) {
            out.push_back(std::string(1, static_cast<char>('A' + i)));
        } else {
            out.push_back(std::string(1, static_cast<char>('A' + i / 26 - 1)) +
                          std::string(1, static_cast<char>('A' + i % 26)));
        }
    }
    return out;
}

}  // namespace feedmesh::cluster
