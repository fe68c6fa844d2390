#include "feedmesh/joint.hpp"

namespace feedmesh::dataflow {

runtime::BufferedQueue& FeedJoint::subscribe(const std::string& subscriber, const std::string& subscriber_feed,
                                             runtime::FeedMemoryManager* fmm, runtime::FeedManager* fm,
                                             const catalog::IngestionPolicy* policy,
                                             const std::string& spill_path) {
    if (queues_.count(subscriber)) throw Error("joint " + id_ + ": duplicate subscriber " + subscriber);
    auto queue =
        std::make_unique<runtime::BufferedQueue>(subscriber, subscriber_feed, node_, fmm, fm, policy, spill_path);
    auto& ref = *queue;
    queues_.emplace(subscriber, std::move(queue));
    paused_[subscriber] = false;
    return ref;
}

void FeedJoint::unsubscribe(const std::string& subscriber) {
    auto it = queues_.find(subscriber);
    if (it == queues_.end()) throw Error("joint " + id_ + ": unknown subscriber " + subscriber);
    queues_.erase(it);
    paused_.erase(subscriber);
}

std::vector<std::string> FeedJoint::subscribers() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : queues_) out.push_back(name);
    return out;
}

void FeedJoint::publish(FramePtr frame, Tick now) {
    ++published_frames_;
    published_records_ += frame->record_count();
    for (auto& [subscriber, queue] : queues_) {
        if (queue->offer(frame, now) == runtime::OfferOutcome::Refused) {
            // Escalated and unbuffereable: lost for this subscriber only.
            queue->force_discard(*frame);
        }
    }
}

void FeedJoint::set_paused(const std::string& subscriber, bool value) {
    auto it = paused_.find(subscriber);
    if (it != paused_.end()) it->second = value;
}

bool FeedJoint::paused(const std::string& subscriber) const {
    auto it = paused_.find(subscriber);
    return it != paused_.end() && it->second;
}

size_t FeedJoint::buffer_occupancy() const {
    size_t total = 0;
    for (const auto& [name, queue] : queues_) total += queue->mem_frames();
    return total;
}

}  // namespace feedmesh::dataflow
