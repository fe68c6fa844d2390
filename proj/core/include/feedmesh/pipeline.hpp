#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "feedmesh/adaptor.hpp"
#include "feedmesh/catalog.hpp"
#include "feedmesh/cluster.hpp"
#include "feedmesh/metafeed.hpp"

namespace feedmesh::pipeline {

enum class ConnectorKind { None, Random, Hash };

std::string to_string(ConnectorKind kind);

struct StagePlan {
    dataflow::Role role;
    size_t cardinality = 0;
    std::vector<NodeId> nodes;                 // filled by schedule()
    ConnectorKind output_connector = ConnectorKind::None;
    std::string hash_key;                      // for Hash connectors
    std::optional<std::string> joint_feed;     // feed whose joint sits at this stage's output
    std::vector<std::string> udfs;             // compute stages only
};

// A live joint known to the coordinator.
struct JointInfo {
    std::string id;
    std::string feed;
    NodeId node;
    std::string pipeline;        // owning pipeline id
    std::string owner_instance;  // producing operator instance
};

class JointRegistry {
public:
    void add(JointInfo info);
    void remove(const std::string& joint_id);
    void remove_pipeline(const std::string& pipeline_id);
    std::vector<JointInfo> for_feed(const std::string& feed) const;
    std::vector<JointInfo> all() const;
    bool empty() const { return joints_.empty(); }

private:
    std::map<std::string, JointInfo> joints_;  // by joint id
};

struct SourcePlan {
    bool from_adaptor = true;
    adaptors::AdaptorDescriptor adaptor;  // valid iff from_adaptor
    std::vector<JointInfo> joints;        // valid iff !from_adaptor
    std::string source_feed;              // feed whose records enter the pipeline
};

struct PipelinePlan {
    std::string id;  // "<feed>:<dataset>"
    std::string feed;
    std::string dataset;
    std::string policy;
    SourcePlan source;
    std::vector<StagePlan> stages;  // intake [, compute], store

    const StagePlan* stage(dataflow::Role role) const;
    StagePlan* stage(dataflow::Role role);
};

// Chooses sourcing (deepest ancestor-or-self with live joints, else the
// primary ancestor's adaptor), resolves the UDF chain to apply, and lays out
// stages and joint placements. The dataset's nodegroup must already be bound.
PipelinePlan compile_connect(const std::string& feed, const std::string& dataset, const std::string& policy,
                             const catalog::Catalog& cat, const JointRegistry& joints);

// Places every stage: intake per adaptor constraints (endpoint pins, else a
// seeded random live node) or co-located with source joints; store exactly on
// the dataset's nodegroup; compute cardinality matched to store, on
// least-loaded live nodes. Throws when a nodegroup member is down.
void schedule(PipelinePlan& plan, const cluster::ClusterView& cluster, DetRng& rng);

// Teardown retention: stages [0, keep) survive a disconnect because a joint at
// their output still feeds someone else. `external_subscribers_per_stage[i]`
// counts subscribers of stage i's output joints that belong to other
// pipelines.
size_t stages_to_keep(const std::vector<size_t>& external_subscribers_per_stage);

// Stable text rendering used by `show pipelines` and golden tests.
std::string render_plan(const PipelinePlan& plan);

}  // namespace feedmesh::pipeline
