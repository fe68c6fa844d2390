#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "feedmesh/adaptor.hpp"
#include "feedmesh/common.hpp"

namespace feedmesh::adaptors {

// Deterministic synthetic-tweet synthesis. The same (tag, seed, ordinal)
// always yields byte-identical JSON.
class TweetFactory {
public:
    TweetFactory(std::string tag, std::uint64_t seed) : tag_(std::move(tag)), rng_(seed) {}

    // One newline-terminated JSON tweet; tweetId is "<tag>-<ordinal>".
    std::string next_line();
    const std::string& last_id() const { return last_id_; }
    const std::string& tag() const { return tag_; }

private:
    std::string tag_;
    DetRng rng_;
    std::uint64_t ordinal_ = 0;
    std::string last_id_;
};

// Push source living inside the simulator: paced by step(tick), drained by an
// adaptor instance through the ByteSource interface. Also keeps the emitted
// key log used as the loss-accounting oracle.
class SimGenerator : public ByteSource {
public:
    SimGenerator(std::string tag, double records_per_second, double duration_seconds, std::uint64_t seed);

    // Emits this tick's share of records into the outbox.
    void step(Tick now);

    std::uint64_t emitted() const { return emitted_; }
    bool finished(Tick now) const;
    const std::vector<std::string>& key_log() const { return keys_; }
    // Records emitted but not yet drained by the adaptor.
    std::uint64_t outbox_records() const { return outbox_records_; }

    bool connect(const std::string&) override {
        attached_ = true;
        return true;
    }
    std::optional<std::string> read(bool) override;
    bool exhausted() const override;

private:
    TweetFactory factory_;
    double rate_;
    Tick duration_ticks_;
    bool attached_ = false;
    double carry_ = 0.0;
    Tick last_step_ = 0;
    bool stepped_ = false;
    std::uint64_t emitted_ = 0;
    std::string outbox_;
    std::uint64_t outbox_records_ = 0;
    std::vector<std::string> keys_;
};

// Lists the emission schedule of a generator without running one: the number
// of records emitted at each tick of [0, duration). Used by pacing tests.
std::vector<std::uint64_t> emission_schedule(double records_per_second, double duration_seconds);

struct TcpGeneratorOptions {
    int port = 9000;
    double rate = 1000;          // records per second
    double duration_seconds = 10;
    std::uint64_t seed = 1;
    std::string tag = "g0";
};

// Real-mode TweetGen: listens on `port`, waits for one "FEED-REQ <feed>"
// handshake, pushes newline-delimited JSON at the configured rate, then
// closes. Returns records sent. Blocking; run it in its own process/thread.
std::uint64_t run_tcp_generator(const TcpGeneratorOptions& options);

}  // namespace feedmesh::adaptors
