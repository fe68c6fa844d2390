#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "feedmesh/common.hpp"

namespace feedmesh::catalog {

enum class FieldKind { String, Int, Double, Point, Datetime, StringBag };

std::string to_string(FieldKind kind);
std::optional<FieldKind> field_kind_from(const std::string& word);

struct FieldDef {
    std::string name;
    FieldKind kind = FieldKind::String;
    bool optional = false;
};

struct RecordType {
    std::string name;
    std::vector<FieldDef> fields;
    bool open = true;  // always true in this engine

    const FieldDef* find_field(const std::string& name) const;
};

struct DatasetDef {
    std::string name;
    std::string record_type;
    std::string primary_key;
    std::vector<NodeId> nodegroup;  // empty until bound to a cluster
    std::optional<std::string> secondary_index;
};

struct AdaptorRef {
    std::string name;
    std::map<std::string, std::string> config;
};

enum class FeedKind { Primary, Secondary };

struct FeedDefinition {
    std::string name;
    FeedKind kind = FeedKind::Primary;
    std::optional<AdaptorRef> adaptor;      // present iff primary
    std::optional<std::string> parent_feed; // present iff secondary
    std::optional<std::string> udf;
};

// "unlimited" is represented as nullopt.
using Limit = std::optional<std::uint64_t>;

struct IngestionPolicy {
    std::string name;
    bool excess_records_spill = false;
    bool excess_records_discard = true;
    Limit max_spill_bytes;  // unlimited by default
    bool recover_soft_failure = false;
    bool recover_hard_failure = false;
    Limit max_consecutive_skipped;  // unlimited by default
    bool collect_statistics = false;

    // Applies a dotted policy-parameter override (Table 1 names). Throws on an
    // unknown key or an unparseable value.
    void set_parameter(const std::string& key, const std::string& value);
};

IngestionPolicy basic_policy();
IngestionPolicy monitored_policy();
IngestionPolicy fault_tolerant_policy();

enum class ConnectionState { Connected, Disconnected };

struct ConnectionEntry {
    std::string feed;
    std::string dataset;
    std::string policy;
    ConnectionState state = ConnectionState::Connected;
};

// Single-writer metadata store owned by the coordinator. Mutations happen only
// through apply_statement (ddl.hpp); readers take value-semantic snapshots.
class Catalog {
public:
    Catalog();

    const std::map<std::string, RecordType>& types() const { return types_; }
    const std::map<std::string, DatasetDef>& datasets() const { return datasets_; }
    const std::map<std::string, FeedDefinition>& feeds() const { return feeds_; }
    const std::map<std::string, IngestionPolicy>& policies() const { return policies_; }
    const std::vector<ConnectionEntry>& connections() const { return connections_; }

    const RecordType* find_type(const std::string& name) const;
    const DatasetDef* find_dataset(const std::string& name) const;
    const FeedDefinition* find_feed(const std::string& name) const;
    const ConnectionEntry* find_connection(const std::string& feed, const std::string& dataset) const;

    void add_type(RecordType t);
    void add_dataset(DatasetDef d);
    void add_feed(FeedDefinition f);
    void add_policy(IngestionPolicy p);
    void set_secondary_index(const std::string& dataset, const std::string& field);
    // Binds the default nodegroup (all cluster nodes) at first connect.
    void set_nodegroup(const std::string& dataset, std::vector<NodeId> nodes);
    void set_connection(const std::string& feed, const std::string& dataset, const std::string& policy,
                        ConnectionState state);

    // Monitored when `name` is absent; resolves the FaultTolerant alias.
    const IngestionPolicy& resolve_policy(const std::optional<std::string>& name) const;

    // Chain of feeds from the primary ancestor down to `feed` (inclusive).
    std::vector<const FeedDefinition*> lineage(const std::string& feed) const;
    // UDF names applied between `ancestor` (exclusive) and `feed` (inclusive).
    std::vector<std::string> udf_chain(const std::string& ancestor, const std::string& feed) const;

    std::string dump() const;

    bool operator==(const Catalog& other) const;

private:
    std::map<std::string, RecordType> types_;
    std::map<std::string, DatasetDef> datasets_;
    std::map<std::string, FeedDefinition> feeds_;
    std::map<std::string, IngestionPolicy> policies_;
    std::vector<ConnectionEntry> connections_;
};

}  // namespace feedmesh::catalog
