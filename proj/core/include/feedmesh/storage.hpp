#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "feedmesh/catalog.hpp"
#include "feedmesh/record.hpp"

namespace feedmesh::storage {

using dataflow::Record;

// One hash partition of a dataset, hosted by one node. Primary map keyed by
// the canonical primary-key string; optional secondary map from indexed-field
// value to the owning key set.
class DatasetPartition {
public:
    DatasetPartition(std::string dataset, size_t index, NodeId node, std::string primary_key,
                     std::optional<std::string> secondary_field)
        : dataset_(std::move(dataset)),
          index_(index),
          node_(std::move(node)),
          primary_key_(std::move(primary_key)),
          secondary_field_(std::move(secondary_field)) {}

    const std::string& dataset() const { return dataset_; }
    size_t index() const { return index_; }
    const NodeId& node() const { return node_; }

    // Upsert. The caller is responsible for routing only keys that hash to
    // this partition; a wrong-partition key is an engine bug.
    void insert(const Record& record, const std::string& key);

    size_t size() const { return primary_.size(); }
    std::uint64_t missing_secondary_field() const { return missing_secondary_; }

    const std::map<std::string, Record>& rows() const { return primary_; }
    const std::map<std::string, std::set<std::string>>& secondary() const { return secondary_; }

    // Rebuilds the secondary index from a primary scan; used by invariants.
    std::map<std::string, std::set<std::string>> rebuild_secondary() const;

    std::string snapshot_ndjson() const;

private:
    void unlink_secondary(const std::string& key, const Record& old_record);

    std::string dataset_;
    size_t index_;
    NodeId node_;
    std::string primary_key_;
    std::optional<std::string> secondary_field_;
    std::map<std::string, Record> primary_;
    std::map<std::string, std::set<std::string>> secondary_;
    std::uint64_t missing_secondary_ = 0;
};

// All partitions of all datasets, indexed by dataset name. Partition i of a
// dataset lives on nodegroup[i].
class StorageManager {
public:
    // Creates the dataset's partitions across its bound nodegroup.
    void create_dataset(const catalog::DatasetDef& def, const std::vector<NodeId>& nodegroup);
    void drop_dataset(const std::string& name);
    bool has_dataset(const std::string& name) const { return partitions_.count(name) > 0; }

    DatasetPartition& partition(const std::string& dataset, size_t index);
    const std::vector<std::unique_ptr<DatasetPartition>>& partitions(const std::string& dataset) const;
    size_t partition_count(const std::string& dataset) const;

    std::uint64_t count(const std::string& dataset) const;
    std::vector<Record> scan(const std::string& dataset,
                             const std::function<bool(const Record&)>& predicate) const;
    // Index-assisted lookup by secondary-field value (canonical string form).
    std::vector<Record> lookup_secondary(const std::string& dataset, const std::string& value) const;

    std::set<std::string> key_set(const std::string& dataset) const;

    // Writes data/<dataset>/<partition>.ndjson under `root`.
    void snapshot(const std::string& dataset, const std::string& root) const;

private:
    std::map<std::string, std::vector<std::unique_ptr<DatasetPartition>>> partitions_;
};

}  // namespace feedmesh::storage
