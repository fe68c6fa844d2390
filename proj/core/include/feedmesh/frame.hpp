#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "feedmesh/record.hpp"

namespace feedmesh::dataflow {

// Default frame capacity. The engine fixes the frame size; 32 KiB is the
// configurable default.
constexpr size_t kDefaultFrameBytes = 32 * 1024;

// Fixed-capacity batch of records, the unit of transfer between operators.
class Frame {
public:
    Frame() = default;
    Frame(std::vector<Record> records, std::uint64_t sequence);

    const std::vector<Record>& records() const { return records_; }
    std::vector<Record>& records() { return records_; }
    std::uint64_t sequence() const { return sequence_; }
    void set_sequence(std::uint64_t seq) { sequence_ = seq; }

    size_t record_count() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    size_t encoded_size() const;

    // Length-prefixed binary encoding used by spill files and tests.
    std::string encode() const;
    static Frame decode(std::string_view bytes);

private:
    std::vector<Record> records_;
    std::uint64_t sequence_ = 0;
};

using FramePtr = std::shared_ptr<const Frame>;

// Packs records into frames no larger than `capacity` encoded bytes. Oversized
// records are rejected (reported through the `rejected` counter) rather than
// split across frames.
class FrameBuilder {
public:
    explicit FrameBuilder(size_t capacity = kDefaultFrameBytes) : capacity_(capacity) {}

    // Returns a completed frame whenever adding `r` would overflow the open one.
    std::vector<Frame> add(Record r);
    // Closes the open frame if non-empty.
    std::vector<Frame> flush();

    std::uint64_t rejected_oversized() const { return rejected_; }

private:
    size_t capacity_;
    size_t open_bytes_ = 0;
    std::vector<Record> open_;
    std::uint64_t next_sequence_ = 0;
    std::uint64_t rejected_ = 0;
};

}  // namespace feedmesh::dataflow
