#include "feedmesh/fault.hpp"

#include <sstream>

namespace feedmesh::fault {

void HeartbeatMonitor::node_joined(const NodeId& node, Tick now) {
    entries_[node] = Entry{now, false};
}

void HeartbeatMonitor::node_removed(const NodeId& node) { entries_.erase(node); }

void HeartbeatMonitor::heartbeat(const NodeId& node, Tick now) {
    auto it = entries_.find(node);
    if (it == entries_.end()) return;
    it->second.last_beat = now;
}

std::vector<NodeId> HeartbeatMonitor::check(Tick now) {
    std::vector<NodeId> failed;
    Tick timeout = period_ * static_cast<Tick>(timeout_beats_);
    for (auto& [node, entry] : entries_) {
        if (entry.declared_failed) continue;
        if (now > entry.last_beat && now - entry.last_beat > timeout) {
            entry.declared_failed = true;
            failed.push_back(node);
        }
    }
    return failed;
}

std::string SavedStateStore::key(const std::string& pipeline, size_t stage_index, size_t partition_index) {
    return pipeline + "#" + std::to_string(stage_index) + "#" + std::to_string(partition_index);
}

void SavedStateStore::save(SavedState state) {
    states_[key(state.pipeline, state.stage_index, state.partition_index)] = std::move(state);
}

std::optional<SavedState> SavedStateStore::claim(const std::string& pipeline, size_t stage_index,
                                                 size_t partition_index) {
    auto it = states_.find(key(pipeline, stage_index, partition_index));
    if (it == states_.end()) return std::nullopt;
    SavedState out = std::move(it->second);
    states_.erase(it);
    return out;
}

FaultScript FaultScript::parse(const std::string& text) {
    FaultScript script;
    std::istringstream lines(text);
    std::string line;
    int line_no = 0;
    Tick previous = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        std::string body = trim(line);
        if (body.empty() || body[0] == '#') continue;
        std::istringstream fields(body);
        FaultEvent event;
        std::string kind;
        if (!(fields >> event.tick >> kind))
            throw ParseError("fault script: expected `tick event ...`", line_no, 1);
        if (event.tick < previous)
            throw ParseError("fault script: ticks must be non-decreasing", line_no, 1);
        previous = event.tick;
        if (kind == "kill-node") {
            event.kind = FaultKind::KillNode;
            if (!(fields >> event.node)) throw ParseError("kill-node: missing node id", line_no, 1);
        } else if (kind == "revive-node") {
            event.kind = FaultKind::ReviveNode;
            if (!(fields >> event.node)) throw ParseError("revive-node: missing node id", line_no, 1);
        } else if (kind == "poison-udf") {
            event.kind = FaultKind::PoisonUdf;
            if (!(fields >> event.feed >> event.every_n))
                throw ParseError("poison-udf: expected `feed every_n`", line_no, 1);
            if (event.every_n <= 0) throw ParseError("poison-udf: every_n must be positive", line_no, 1);
        } else {
            throw ParseError("fault script: unknown event \"" + kind + "\"", line_no, 1);
        }
        script.events.push_back(std::move(event));
    }
    return script;
}

Fate classify_instance(bool on_failed_node, dataflow::Role role, bool joint_has_external_live_subscribers) {
    if (on_failed_node) return Fate::Dead;
    if (role == dataflow::Role::Intake) return Fate::Live;
    if (joint_has_external_live_subscribers) return Fate::Live;
    return Fate::Zombie;
}

std::optional<NodeId> choose_substitute(const cluster::ClusterView& cluster) {
    auto idle = cluster.idle_nodes();
    if (!idle.empty()) return idle.front();
    return cluster.least_loaded();
}

}  // namespace feedmesh::fault
