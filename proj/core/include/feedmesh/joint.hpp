#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "feedmesh/queue.hpp"

namespace feedmesh::dataflow {

// A subscribable tap on a pipeline edge. Each subscriber gets its own pending
// queue on the joint's node, so one slow consumer never delays the others; a
// frame object is released only once every subscriber has popped it (shared
// ownership). Subscribers can attach and detach at runtime without touching
// the rest.
class FeedJoint {
public:
    FeedJoint(std::string id, std::string feed, NodeId node, std::string owner_instance)
        : id_(std::move(id)), feed_(std::move(feed)), node_(std::move(node)),
          owner_instance_(std::move(owner_instance)) {}

    const std::string& id() const { return id_; }
    const std::string& feed() const { return feed_; }
    const NodeId& node() const { return node_; }
    const std::string& owner_instance() const { return owner_instance_; }

    // The queue is created on the joint's node; congestion follows the
    // subscriber connection's policy and activity is attributed to the
    // subscriber's feed. Frames published earlier are not replayed to a new
    // subscriber.
    runtime::BufferedQueue& subscribe(const std::string& subscriber, const std::string& subscriber_feed,
                                      runtime::FeedMemoryManager* fmm, runtime::FeedManager* fm,
                                      const catalog::IngestionPolicy* policy, const std::string& spill_path);
    void unsubscribe(const std::string& subscriber);
    bool has_subscriber(const std::string& subscriber) const { return queues_.count(subscriber) > 0; }
    size_t subscriber_count() const { return queues_.size(); }
    std::vector<std::string> subscribers() const;

    runtime::BufferedQueue& queue(const std::string& subscriber) { return *queues_.at(subscriber); }

    // Delivery to every subscriber, in publish order per subscriber. With no
    // subscribers the frame is dropped immediately.
    void publish(FramePtr frame, Tick now);

    // Pauses delivery into one subscriber's consumption without dropping
    // queued frames (used while that subscriber's pipeline recovers).
    void set_paused(const std::string& subscriber, bool paused);
    bool paused(const std::string& subscriber) const;

    std::uint64_t published_frames() const { return published_frames_; }
    std::uint64_t published_records() const { return published_records_; }
    size_t buffer_occupancy() const;

private:
    std::string id_;
    std::string feed_;
    NodeId node_;
    std::string owner_instance_;
    std::map<std::string, std::unique_ptr<runtime::BufferedQueue>> queues_;
    std::map<std::string, bool> paused_;
    std::uint64_t published_frames_ = 0;
    std::uint64_t published_records_ = 0;
};

}  // namespace feedmesh::dataflow
