#include "feedmesh/frame.hpp"

#include <cstring>

namespace feedmesh::dataflow {

Frame::Frame(std::vector<Record> records, std::uint64_t sequence)
    : records_(std::move(records)), sequence_(sequence) {}

size_t Frame::encoded_size() const {
    size_t total = sizeof(std::uint32_t);  // record count
    for (const auto& r : records_) total += sizeof(std::uint32_t) + r.encoded_size();
    return total;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    char buf[4];
    buf[0] = static_cast<char>(v & 0xff);
    buf[1] = static_cast<char>((v >> 8) & 0xff);
    buf[2] = static_cast<char>((v >> 16) & 0xff);
    buf[3] = static_cast<char>((v >> 24) & 0xff);
    out.append(buf, 4);
}

std::uint32_t get_u32(std::string_view bytes, size_t& pos) {
    if (pos + 4 > bytes.size()) throw Error("truncated frame encoding");
    auto b = [&](size_t i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])); };
    std::uint32_t v = b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
    pos += 4;
    return v;
}

}  // namespace

std::string Frame::encode() const {
    std::string out;
    put_u32(out, static_cast<std::uint32_t>(records_.size()));
    for (const auto& r : records_) {
        std::string body = r.serialize();
        put_u32(out, static_cast<std::uint32_t>(body.size()));
        out += body;
    }
    return out;
}

Frame Frame::decode(std::string_view bytes) {
    size_t pos = 0;
    std::uint32_t count = get_u32(bytes, pos);
    std::vector<Record> records;
    records.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t len = get_u32(bytes, pos);
        if (pos + len > bytes.size()) throw Error("truncated frame encoding");
        records.push_back(Record::parse(bytes.substr(pos, len)));
        pos += len;
    }
    return Frame(std::move(records), 0);
}

std::vector<Frame> FrameBuilder::add(Record r) {
    std::vector<Frame> done;
    size_t need = sizeof(std::uint32_t) + r.encoded_size();
    if (sizeof(std::uint32_t) + need > capacity_) {
        ++rejected_;
        return done;
    }
    if (!open_.empty() && sizeof(std::uint32_t) + open_bytes_ + need > capacity_) {
        done.push_back(Frame(std::move(open_), next_sequence_++));
        open_.clear();
        open_bytes_ = 0;
    }
    open_bytes_ += need;
    open_.push_back(std::move(r));
    return done;
}

std::vector<Frame> FrameBuilder::flush() {
    std::vector<Frame> done;
    if (!open_.empty()) {
        done.push_back(Frame(std::move(open_), next_sequence_++));
        open_.clear();
        open_bytes_ = 0;
    }
    return done;
}

}  // namespace feedmesh::dataflow
