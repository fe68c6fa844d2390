#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "feedmesh/catalog.hpp"
#include "feedmesh/record.hpp"

namespace feedmesh::adaptors {

// A byte-stream data source as seen by one adaptor instance. Implementations:
// TCP socket (real mode), live sim generator, scripted test source.
class ByteSource {
public:
    virtual ~ByteSource() = default;
    // One handshake attempt; true on success.
    virtual bool connect(const std::string& feed_name) = 0;
    // Push mode drains whatever is available; pull mode issues one request.
    // nullopt means the connection was lost.
    virtual std::optional<std::string> read(bool issue_request) = 0;
    virtual bool exhausted() const = 0;
};

// Named sim endpoints (sim://...) resolvable to sources. Generator-backed
// endpoints hand out the shared live generator; scripted endpoints may create
// fresh sources per open.
class SimSourceRegistry {
public:
    using Factory = std::function<std::shared_ptr<ByteSource>()>;

    void bind(const std::string& address, Factory factory) { factories_[address] = std::move(factory); }
    bool contains(const std::string& address) const { return factories_.count(address) > 0; }
    std::shared_ptr<ByteSource> open(const std::string& address) const;

private:
    std::map<std::string, Factory> factories_;
};

enum class AdaptorMode { Push, Pull };

struct EndpointSpec {
    std::string address;          // host:port or sim://name
    std::optional<NodeId> node;   // placement pin, from an "@node" suffix
};

struct AdaptorDescriptor {
    std::string name;
    AdaptorMode mode = AdaptorMode::Push;
    std::vector<EndpointSpec> instance_endpoints;  // one adaptor instance each
    std::map<std::string, std::string> config;
    Tick pull_interval_ticks = 0;  // pull mode only
    Tick retry_backoff_ticks = 5;  // doubles per attempt; 500 ms in real mode
};

// Builds a descriptor from a catalog adaptor reference. The "datasource"
// config key lists endpoints; "api"="pull" with "interval" (seconds) selects
// pull mode. Registered adaptor names: TweetGenAdaptor, SocketAdaptor.
AdaptorDescriptor make_descriptor(const catalog::AdaptorRef& ref);

enum class ConnectionState { Connecting, Receiving, Retrying, FailedTerminal };

struct Batch {
    std::vector<dataflow::Record> records;
    bool end_of_source = false;
    bool transient_gap = false;
};

constexpr int kRetryBudget = 3;

// One adaptor instance: owns its source and connection state machine. Safe to
// run instances in parallel; nothing is shared beyond the handle itself.
class AdaptorInstanceHandle {
public:
    AdaptorInstanceHandle(const AdaptorDescriptor& descriptor, size_t instance,
                          std::shared_ptr<ByteSource> source, const std::string& feed_name, Tick now);

    const std::string& adaptor_name() const { return adaptor_name_; }
    size_t instance() const { return instance_; }
    ConnectionState state() const { return state_; }
    int connect_attempts() const { return attempts_; }

    std::uint64_t bytes_received() const { return bytes_; }
    std::uint64_t records_parsed() const { return records_; }
    std::uint64_t parse_errors() const { return parse_errors_; }

    // Drives the connection state machine and parses newline-delimited JSON.
    // Malformed lines are counted and skipped here; they never surface as
    // pipeline soft failures.
    Batch next_batch(Tick now);

private:
    void attempt_connect(Tick now);

    std::string adaptor_name_;
    std::string feed_name_;
    size_t instance_;
    AdaptorMode mode_;
    Tick pull_interval_;
    Tick backoff_base_;
    std::shared_ptr<ByteSource> source_;

    ConnectionState state_ = ConnectionState::Connecting;
    int attempts_ = 0;
    Tick next_attempt_at_ = 0;
    bool requested_once_ = false;
    Tick last_request_ = 0;
    std::string partial_line_;

    std::uint64_t bytes_ = 0;
    std::uint64_t records_ = 0;
    std::uint64_t parse_errors_ = 0;
};

// Opens instance `instance` of the descriptor. Sim endpoints resolve through
// the registry; anything else is treated as host:port and opened as a TCP
// connection.
std::unique_ptr<AdaptorInstanceHandle> open(const AdaptorDescriptor& descriptor, size_t instance,
                                            const SimSourceRegistry& registry, const std::string& feed_name,
                                            Tick now);

// Scripted source for tests: optional connection refusals, then byte chunks
// delivered one per read, optional mid-stream disconnects.
class ScriptedSource : public ByteSource {
public:
    ScriptedSource() = default;

    ScriptedSource& refuse_connects(int n) {
        refusals_ = n;
        return *this;
    }
    ScriptedSource& chunk(std::string bytes);
    ScriptedSource& drop_connection();  // connection lost after previous chunks

    int connect_calls() const { return connect_calls_; }
    int read_calls() const { return read_calls_; }

    bool connect(const std::string& feed_name) override;
    std::optional<std::string> read(bool issue_request) override;
    bool exhausted() const override { return next_ >= events_.size(); }

private:
    struct Event {
        bool drop;
        std::string bytes;
    };
    std::vector<Event> events_;
    int refusals_ = 0;
    int connect_calls_ = 0;
    int read_calls_ = 0;
    size_t next_ = 0;
};

}  // namespace feedmesh::adaptors
