#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "feedmesh/catalog.hpp"
#include "feedmesh/frame.hpp"
#include "feedmesh/storage.hpp"
#include "feedmesh/udf.hpp"

namespace feedmesh::dataflow {

enum class Role { Intake, Compute, Store };
enum class Lifecycle { Live, Dead, Zombie };

std::string to_string(Role role);

// Engine bugs that must never be swallowed by the soft-failure sandbox.
class FatalError : public Error {
public:
    using Error::Error;
};

// Stable partition index for a key: identical keys always map to the same
// index for a fixed partition count, across runs and platforms.
size_t hash_partition_key(const std::string& key, size_t n_partitions);
// Record-level form; throws Error (a soft failure) when the key field is
// missing or null.
size_t hash_partition(const Record& record, const std::string& key_field, size_t n_partitions);

// Structural type check used at the store boundary: every non-optional
// declared field must be present with a value of the declared kind; extra
// fields pass through (open types). Returns a description of the first
// violation, or nullopt.
std::optional<std::string> check_against_type(const Record& record, const catalog::RecordType& type);
bool value_matches_kind(const nlohmann::json& value, catalog::FieldKind kind);

// Where skipped records go: the per-feed error log and, policy permitting,
// the reserved feed_errors dataset.
class SoftFailureSink {
public:
    virtual ~SoftFailureSink() = default;
    virtual void log_soft_failure(Tick tick, const std::string& feed, Role role, const NodeId& node,
                                  const std::string& what, const Record& record) = 0;
};

// The wrapped intake/compute/store logic. process() sees one record;
// throwing Error is a soft failure handled by the sandbox, returning nullopt
// drops the record (a filtering UDF).
class CoreOperator {
public:
    virtual ~CoreOperator() = default;
    virtual std::optional<Record> process(const Record& record) = 0;
};

// Pass-through used at intake and at joint-sourced pipeline heads.
class IntakeCore : public CoreOperator {
public:
    std::optional<Record> process(const Record& record) override;

    // Fault-injection hook: every n-th record through this instance throws.
    void set_poison(long every_n) { poison_every_ = every_n; }

private:
    long poison_every_ = 0;
    long seen_ = 0;
};

// Applies the feed's UDF chain record-wise.
class ComputeCore : public CoreOperator {
public:
    explicit ComputeCore(std::vector<udf::Function> chain) : chain_(std::move(chain)) {}

    std::optional<Record> process(const Record& record) override;

    void set_poison(long every_n) { poison_every_ = every_n; }

private:
    std::vector<udf::Function> chain_;
    long poison_every_ = 0;
    long seen_ = 0;
};

// Inserts into this instance's dataset partition; emits the record unchanged
// so the subset-frame law reads the same for every role.
class StoreCore : public CoreOperator {
public:
    StoreCore(storage::DatasetPartition* partition, const catalog::RecordType* type, std::string primary_key,
              size_t partition_count)
        : partition_(partition), type_(type), primary_key_(std::move(primary_key)),
          partition_count_(partition_count) {}

    std::optional<Record> process(const Record& record) override;

    std::uint64_t persisted() const { return persisted_; }

private:
    storage::DatasetPartition* partition_;
    const catalog::RecordType* type_;
    std::string primary_key_;
    size_t partition_count_;
    std::uint64_t persisted_ = 0;
};

struct MetaResult {
    std::vector<Frame> outputs;
    std::uint64_t processed = 0;  // records the core accepted
    std::uint64_t failed = 0;     // soft failures in this frame
    std::uint64_t dropped = 0;    // records filtered out by the core (no error)
    bool terminate_feed = false;
    std::string terminate_reason;
};

// The sandbox shell around a core operator: record-wise application, subset
// frames past failing records, the consecutive-skip bound, error logging, and
// termination per the ingestion policy.
class MetaFeedOperator {
public:
    MetaFeedOperator(std::string instance_id, std::string feed, Role role, NodeId node,
                     std::unique_ptr<CoreOperator> core, SoftFailureSink* sink,
                     size_t frame_capacity = kDefaultFrameBytes)
        : instance_id_(std::move(instance_id)), feed_(std::move(feed)), role_(role), node_(std::move(node)),
          core_(std::move(core)), sink_(sink), frame_capacity_(frame_capacity) {}

    MetaResult process_frame(const Frame& frame, const catalog::IngestionPolicy& policy, Tick now);

    // Soft-failure entry point for errors raised outside the core (e.g. a
    // missing partition key discovered while routing).
    bool record_failure(const Record& record, const std::string& what, const catalog::IngestionPolicy& policy,
                        Tick now, MetaResult& result);

    const std::string& instance_id() const { return instance_id_; }
    const std::string& feed() const { return feed_; }
    Role role() const { return role_; }
    const NodeId& node() const { return node_; }
    CoreOperator& core() { return *core_; }

    std::uint64_t consecutive_skipped() const { return consecutive_skipped_; }
    std::uint64_t total_failures() const { return total_failures_; }

private:
    std::string instance_id_;
    std::string feed_;
    Role role_;
    NodeId node_;
    std::unique_ptr<CoreOperator> core_;
    SoftFailureSink* sink_;
    size_t frame_capacity_;
    std::uint64_t consecutive_skipped_ = 0;
    std::uint64_t total_failures_ = 0;
};

}  // namespace feedmesh::dataflow
