#include "feedmesh/queue.hpp"

#include <filesystem>
#include <fstream>

namespace feedmesh::runtime {

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
    char buf[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                   static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(buf, 4);
}

std::optional<std::uint32_t> get_u32(std::ifstream& in) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4)) return std::nullopt;
    return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
           (static_cast<std::uint32_t>(buf[2]) << 16) | (static_cast<std::uint32_t>(buf[3]) << 24);
}

}  // namespace

BufferedQueue::BufferedQueue(std::string instance_id, std::string feed, NodeId node, FeedMemoryManager* fmm,
                             FeedManager* fm, const catalog::IngestionPolicy* policy, std::string spill_path)
    : instance_id_(std::move(instance_id)),
      feed_(std::move(feed)),
      node_(std::move(node)),
      fmm_(fmm),
      fm_(fm),
      policy_(policy),
      spill_path_(std::move(spill_path)) {}

BufferedQueue::~BufferedQueue() {
    clear(true);
}

bool BufferedQueue::spill_write(const dataflow::Frame& frame) {
    if (spill_path_.empty()) return false;
    try {
        std::filesystem::create_directories(std::filesystem::path(spill_path_).parent_path());
        std::ofstream out(spill_path_, std::ios::binary | std::ios::app);
        if (!out) return false;
        std::string bytes = frame.encode();
        put_u32(out, static_cast<std::uint32_t>(bytes.size()));
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) return false;
        ++spill_frames_;
        spill_records_ += frame.record_count();
        spilled_bytes_total_ += bytes.size();
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

std::optional<dataflow::FramePtr> BufferedQueue::spill_read() {
    std::ifstream in(spill_path_, std::ios::binary);
    if (!in) return std::nullopt;
    in.seekg(static_cast<std::streamoff>(spill_read_offset_));
    auto len = get_u32(in);
    if (!len) return std::nullopt;
    std::string bytes(*len, '\0');
    if (!in.read(bytes.data(), static_cast<std::streamsize>(*len))) return std::nullopt;
    spill_read_offset_ = static_cast<std::uint64_t>(in.tellg());

    auto frame = std::make_shared<dataflow::Frame>(dataflow::Frame::decode(bytes));
    --spill_frames_;
    spill_records_ -= frame->record_count();
    if (fm_ != nullptr) fm_->note_replayed(instance_id_);
    if (spill_frames_ == 0) {
        // Replay complete: the file is deleted and in-memory queueing resumes.
        in.close();
        std::error_code ec;
        std::filesystem::remove(spill_path_, ec);
        spill_read_offset_ = 0;
        stalled_ = false;
        if (fm_ != nullptr) fm_->mark_stalled(instance_id_, false);
    }
    return frame;
}

OfferOutcome BufferedQueue::offer(dataflow::FramePtr frame, Tick now) {
    size_t frame_bytes = frame->encoded_size();
    auto entered = [&] {
        if (entered_counter_ != nullptr) *entered_counter_ += frame->record_count();
        if (entered_counter_ != nullptr && fm_ != nullptr) fm_->count_inflow(feed_, frame->record_count());
    };
    // Preserve order: while a spill backlog (or a staged spill frame) exists,
    // arrivals append behind it.
    bool must_spill = spill_frames_ > 0 || staged_ != nullptr;
    if (!must_spill) {
        if (fmm_ != nullptr && fmm_->request(1) == 0) {
            must_spill = true;  // denied: congestion path decides below
        } else {
            mem_.push_back(frame);
            mem_records_ += frame->record_count();
            entered();
            return OfferOutcome::Queued;
        }
    }

    CongestionAction action = CongestionAction::Escalate;
    if (fm_ != nullptr && policy_ != nullptr) {
        action = fm_->handle_stalled(instance_id_, *policy_, frame_bytes, now);
    }
    stalled_ = true;

    if (action == CongestionAction::Spill) {
        if (spill_write(*frame)) {
            if (fm_ != nullptr) {
                fm_->note_spilled(instance_id_, frame_bytes);
                fm_->count_spilled_bytes(feed_, frame_bytes);
            }
            entered();
            return OfferOutcome::Spilled;
        }
        // Spill write failure: fall through to discard, then escalate.
        if (policy_ != nullptr && policy_->excess_records_discard) action = CongestionAction::Discard;
        else action = CongestionAction::Escalate;
    }
    if (action == CongestionAction::Discard) {
        force_discard(*frame);
        return OfferOutcome::Discarded;
    }
    return OfferOutcome::Refused;
}

std::optional<dataflow::FramePtr> BufferedQueue::pop() {
    if (!mem_.empty()) {
        dataflow::FramePtr frame = mem_.front();
        mem_.pop_front();
        mem_records_ -= frame->record_count();
        if (fmm_ != nullptr) fmm_->release(1);
        if (mem_.empty() && spill_frames_ == 0 && !staged_ && stalled_) {
            stalled_ = false;
            if (fm_ != nullptr) fm_->mark_stalled(instance_id_, false);
        }
        return frame;
    }
    if (staged_) {
        dataflow::FramePtr frame = std::move(staged_);
        staged_.reset();
        if (spill_frames_ == 0 && stalled_) {
            stalled_ = false;
            if (fm_ != nullptr) fm_->mark_stalled(instance_id_, false);
        }
        return frame;
    }
    if (spill_frames_ > 0) return spill_read();
    return std::nullopt;
}

std::optional<size_t> BufferedQueue::peek_records() {
    if (!mem_.empty()) return mem_.front()->record_count();
    if (staged_) return staged_->record_count();
    if (spill_frames_ > 0) {
        auto frame = spill_read();
        if (!frame) return std::nullopt;
        staged_ = *frame;
        return staged_->record_count();
    }
    return std::nullopt;
}

void BufferedQueue::force_discard(const dataflow::Frame& frame) {
    if (entered_counter_ != nullptr) {
        *entered_counter_ += frame.record_count();
        if (fm_ != nullptr) fm_->count_inflow(feed_, frame.record_count());
    }
    discarded_records_ += frame.record_count();
    if (discard_counter_ != nullptr) *discard_counter_ += frame.record_count();
    if (fm_ != nullptr) {
        fm_->note_discarded(instance_id_, frame.record_count());
        fm_->count_discarded(feed_, frame.record_count());
    }
}

std::uint64_t BufferedQueue::clear(bool release_buffers) {
    std::uint64_t dropped = mem_records_ + spill_records_ + (staged_ ? staged_->record_count() : 0);
    if (release_buffers && fmm_ != nullptr && !mem_.empty()) fmm_->release(mem_.size());
    mem_.clear();
    mem_records_ = 0;
    staged_.reset();
    spill_frames_ = 0;
    spill_records_ = 0;
    spill_read_offset_ = 0;
    if (!spill_path_.empty()) {
        std::error_code ec;
        std::filesystem::remove(spill_path_, ec);
    }
    stalled_ = false;
    return dropped;
}

}  // namespace feedmesh::runtime
