#include "feedmesh/pipeline.hpp"

#include <algorithm>
#include <sstream>

namespace feedmesh::pipeline {

std::string to_string(ConnectorKind kind) {
    switch (kind) {
        case ConnectorKind::None: return "none";
        case ConnectorKind::Random: return "random";
        case ConnectorKind::Hash: return "hash";
    }
    return "?";
}

void JointRegistry::add(JointInfo info) { joints_[info.id] = std::move(info); }

void JointRegistry::remove(const std::string& joint_id) { joints_.erase(joint_id); }

void JointRegistry::remove_pipeline(const std::string& pipeline_id) {
    for (auto it = joints_.begin(); it != joints_.end();) {
        if (it->second.pipeline == pipeline_id)
            it = joints_.erase(it);
        else
            ++it;
    }
}

std::vector<JointInfo> JointRegistry::for_feed(const std::string& feed) const {
    std::vector<JointInfo> out;
    for (const auto& [id, info] : joints_)
        if (info.feed == feed) out.push_back(info);
    return out;
}

std::vector<JointInfo> JointRegistry::all() const {
    std::vector<JointInfo> out;
    for (const auto& [id, info] : joints_) out.push_back(info);
    return out;
}

const StagePlan* PipelinePlan::stage(dataflow::Role role) const {
    for (const auto& s : stages)
        if (s.role == role) return &s;
    return nullptr;
}

StagePlan* PipelinePlan::stage(dataflow::Role role) {
    for (auto& s : stages)
        if (s.role == role) return &s;
    return nullptr;
}

PipelinePlan compile_connect(const std::string& feed, const std::string& dataset, const std::string& policy,
                             const catalog::Catalog& cat, const JointRegistry& joints) {
    const auto* ds = cat.find_dataset(dataset);
    if (ds == nullptr) throw Error("unknown dataset \"" + dataset + "\"");
    if (ds->nodegroup.empty()) throw Error("dataset \"" + dataset + "\" has an empty nodegroup");

    auto lineage = cat.lineage(feed);  // primary first
    if (lineage.empty() || lineage.front()->kind != catalog::FeedKind::Primary)
        throw Error("no primary ancestor resolvable for feed \"" + feed + "\"");

    PipelinePlan plan;
    plan.id = feed + ":" + dataset;
    plan.feed = feed;
    plan.dataset = dataset;
    plan.policy = policy;

    // Deepest ancestor-or-self with live joints wins; the adaptor is the
    // fallback. The chain applied is exactly the UDFs between the source feed
    // (exclusive) and this feed (inclusive).
    std::vector<std::string> chain;
    bool sourced_from_joints = false;
    for (auto it = lineage.rbegin(); it != lineage.rend(); ++it) {
        auto available = joints.for_feed((*it)->name);
        if (!available.empty()) {
            plan.source.from_adaptor = false;
            plan.source.joints = std::move(available);
            plan.source.source_feed = (*it)->name;
            chain = cat.udf_chain((*it)->name, feed);
            sourced_from_joints = true;
            break;
        }
    }
    if (!sourced_from_joints) {
        const auto* primary = lineage.front();
        plan.source.from_adaptor = true;
        plan.source.adaptor = adaptors::make_descriptor(*primary->adaptor);
        plan.source.source_feed = primary->name;
        if (primary->udf) chain.push_back(*primary->udf);
        auto rest = cat.udf_chain(primary->name, feed);
        chain.insert(chain.end(), rest.begin(), rest.end());
    }

    size_t store_cardinality = ds->nodegroup.size();

    StagePlan intake;
    intake.role = dataflow::Role::Intake;
    intake.cardinality =
        plan.source.from_adaptor ? plan.source.adaptor.instance_endpoints.size() : plan.source.joints.size();
    // A joint at the intake output exposes the primary feed's records, but
    // only when this pipeline materializes them fresh: adaptor-sourced, and
    // the primary has no UDF (otherwise the records at the intake output are
    // raw adaptor output, not any feed).
    if (plan.source.from_adaptor && !lineage.front()->udf) intake.joint_feed = lineage.front()->name;

    StagePlan store;
    store.role = dataflow::Role::Store;
    store.cardinality = store_cardinality;
    store.nodes = ds->nodegroup;  // placement pre-determined by the nodegroup
    store.output_connector = ConnectorKind::None;

    if (!chain.empty()) {
        intake.output_connector = ConnectorKind::Random;
        StagePlan compute;
        compute.role = dataflow::Role::Compute;
        compute.cardinality = store_cardinality;  // matched to the store stage
        compute.udfs = chain;
        compute.output_connector = ConnectorKind::Hash;
        compute.hash_key = ds->primary_key;
        compute.joint_feed = feed;  // the chain's output records form this feed
        plan.stages.push_back(std::move(intake));
        plan.stages.push_back(std::move(compute));
    } else {
        intake.output_connector = ConnectorKind::Hash;
        intake.hash_key = ds->primary_key;
        plan.stages.push_back(std::move(intake));
    }
    plan.stages.push_back(std::move(store));
    return plan;
}

void schedule(PipelinePlan& plan, const cluster::ClusterView& cluster, DetRng& rng) {
    const StagePlan* store = plan.stage(dataflow::Role::Store);
    if (store == nullptr) throw Error("plan without a store stage");

    // Track placement decisions so successive least-loaded picks spread out.
    // Store nodes are counted up front: their placement is fixed, and compute
    // should prefer emptier nodes over future store hosts.
    std::map<NodeId, size_t> extra_load;
    auto load_of = [&](const NodeId& id) { return cluster.load(id) + extra_load[id]; };
    for (const auto& node : store->nodes) ++extra_load[node];

    for (auto& stage : plan.stages) {
        if (stage.role != dataflow::Role::Store) stage.nodes.clear();
        switch (stage.role) {
            case dataflow::Role::Intake: {
                if (plan.source.from_adaptor) {
                    for (const auto& ep : plan.source.adaptor.instance_endpoints) {
                        NodeId node;
                        if (ep.node) {
                            if (!cluster.contains(*ep.node))
                                throw Error("adaptor endpoint pinned to unknown node \"" + *ep.node + "\"");
                            if (!cluster.is_live(*ep.node))
                                throw Error("adaptor endpoint pinned to dead node \"" + *ep.node + "\"");
                            node = *ep.node;
                        } else {
                            auto live = cluster.live_nodes();
                            if (live.empty()) throw Error("no live node for intake placement");
                            node = live[rng.below(live.size())];
                        }
                        stage.nodes.push_back(node);
                        ++extra_load[node];
                    }
                } else {
                    // Joint-sourced heads are co-located with their joints.
                    for (const auto& joint : plan.source.joints) {
                        stage.nodes.push_back(joint.node);
                        ++extra_load[joint.node];
                    }
                }
                break;
            }
            case dataflow::Role::Compute: {
                auto live = cluster.live_nodes();
                if (live.empty()) throw Error("no live node for compute placement");
                for (size_t i = 0; i < stage.cardinality; ++i) {
                    NodeId best = live.front();
                    for (const auto& node : live) {
                        if (load_of(node) < load_of(best)) best = node;  // ties: lowest id (live is sorted)
                    }
                    stage.nodes.push_back(best);
                    ++extra_load[best];
                }
                break;
            }
            case dataflow::Role::Store: {
                // Placement is fixed by the nodegroup; a down member fails the
                // connect (no store substitution).
                for (const auto& node : stage.nodes) {
                    if (!cluster.contains(node))
                        throw Error("store nodegroup references unknown node \"" + node + "\"");
                    if (!cluster.is_live(node))
                        throw Error("store nodegroup node \"" + node + "\" is down");
                }
                break;
            }
        }
    }
}

size_t stages_to_keep(const std::vector<size_t>& external_subscribers_per_stage) {
    for (size_t i = external_subscribers_per_stage.size(); i > 0; --i) {
        if (external_subscribers_per_stage[i - 1] > 0) return i;
    }
    return 0;
}

std::string render_plan(const PipelinePlan& plan) {
    std::ostringstream out;
    out << "pipeline " << plan.feed << " -> " << plan.dataset << " [policy " << plan.policy << "]\n";
    if (plan.source.from_adaptor) {
        out << "  source: adaptor " << plan.source.adaptor.name << " (" << plan.source.adaptor.instance_endpoints.size()
            << (plan.source.adaptor.instance_endpoints.size() == 1 ? " instance)" : " instances)") << "\n";
    } else {
        out << "  source: joints of " << plan.source.source_feed << " [";
        for (size_t i = 0; i < plan.source.joints.size(); ++i)
            out << (i ? ", " : "") << plan.source.joints[i].id;
        out << "]\n";
    }
    for (const auto& stage : plan.stages) {
        out << "  " << dataflow::to_string(stage.role) << ": card " << stage.cardinality << " nodes [";
        for (size_t i = 0; i < stage.nodes.size(); ++i) out << (i ? ", " : "") << stage.nodes[i];
        out << "]";
        if (!stage.udfs.empty()) {
            out << " udfs [";
            for (size_t i = 0; i < stage.udfs.size(); ++i) out << (i ? ", " : "") << stage.udfs[i];
            out << "]";
        }
        if (stage.joint_feed) out << " joint " << *stage.joint_feed;
        if (stage.output_connector != ConnectorKind::None) {
            out << " -> " << to_string(stage.output_connector);
            if (stage.output_connector == ConnectorKind::Hash) out << "(" << stage.hash_key << ")";
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace feedmesh::pipeline
