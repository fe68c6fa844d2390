#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>

#include "feedmesh/catalog.hpp"
#include "feedmesh/frame.hpp"
#include "feedmesh/runtime.hpp"

namespace feedmesh::runtime {

enum class OfferOutcome { Queued, Spilled, Discarded, Refused };

// FIFO frame queue whose in-memory depth is governed by the node's buffer
// budget. On denial the owning Feed Manager resolves congestion per the
// ingestion policy: spill to the node-local file, discard, or escalate
// (Refused, sender must hold the frame).
//
// Once spilling starts, later offers keep spilling until the file is fully
// replayed, so record order is preserved: memory-resident frames predate the
// spill, and everything that arrives before the spill drains lands behind it.
class BufferedQueue {
public:
    BufferedQueue(std::string instance_id, std::string feed, NodeId node, FeedMemoryManager* fmm,
                  FeedManager* fm, const catalog::IngestionPolicy* policy, std::string spill_path);
    ~BufferedQueue();

    BufferedQueue(const BufferedQueue&) = delete;
    BufferedQueue& operator=(const BufferedQueue&) = delete;

    OfferOutcome offer(dataflow::FramePtr frame, Tick now);
    std::optional<dataflow::FramePtr> pop();
    // Record count of the frame pop() would return, staging a spill read if
    // necessary. nullopt when empty.
    std::optional<size_t> peek_records();

    bool empty() const { return !staged_ && mem_.empty() && spill_frames_ == 0; }
    size_t mem_frames() const { return mem_.size(); }
    std::uint64_t spill_pending_frames() const { return spill_frames_; }
    std::uint64_t spill_pending_records() const { return spill_records_; }
    std::uint64_t spilled_bytes_total() const { return spilled_bytes_total_; }
    std::uint64_t discarded_records() const { return discarded_records_; }
    std::uint64_t in_flight_records() const {
        return mem_records_ + spill_records_ + (staged_ ? staged_->record_count() : 0);
    }
    bool stalled() const { return stalled_; }

    const std::string& instance_id() const { return instance_id_; }
    const NodeId& node() const { return node_; }
    const std::string& feed() const { return feed_; }

    // Accounted drop of a frame that could not be queued anywhere (a refused
    // offer at a fan-out point, where the publisher cannot hold frames back
    // for one subscriber).
    void force_discard(const dataflow::Frame& frame);

    // Drops all pending frames (teardown / node loss). Returns the number of
    // records dropped. Memory buffers are returned unless the FMM itself is
    // gone with the node.
    std::uint64_t clear(bool release_buffers);

    void set_policy(const catalog::IngestionPolicy* policy) { policy_ = policy; }

    // Pipeline-head queues: non-refused offers count as records entering the
    // connection (and as window inflow on this node).
    void mark_as_head(std::uint64_t* entered_counter) { entered_counter_ = entered_counter; }
    // Connection-level discard accounting survives queue teardown.
    void count_discards_into(std::uint64_t* counter) { discard_counter_ = counter; }

private:
    bool spill_write(const dataflow::Frame& frame);
    std::optional<dataflow::FramePtr> spill_read();

    std::string instance_id_;
    std::string feed_;
    NodeId node_;
    FeedMemoryManager* fmm_;
    FeedManager* fm_;
    const catalog::IngestionPolicy* policy_;
    std::string spill_path_;

    std::deque<dataflow::FramePtr> mem_;
    std::uint64_t mem_records_ = 0;
    dataflow::FramePtr staged_;  // spill frame read ahead by peek_records()

    std::uint64_t spill_frames_ = 0;
    std::uint64_t spill_records_ = 0;
    std::uint64_t spill_read_offset_ = 0;
    std::uint64_t spilled_bytes_total_ = 0;
    std::uint64_t discarded_records_ = 0;
    bool stalled_ = false;
    std::uint64_t* entered_counter_ = nullptr;
    std::uint64_t* discard_counter_ = nullptr;
};

}  // namespace feedmesh::runtime
