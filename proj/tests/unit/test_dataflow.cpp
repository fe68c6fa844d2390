#include "doctest.h"

#include <set>

#include "feedmesh/frame.hpp"
#include "feedmesh/joint.hpp"
#include "feedmesh/metafeed.hpp"
#include "feedmesh/udf.hpp"

using namespace feedmesh;
using namespace feedmesh::dataflow;

namespace {

Record make_record(const std::string& key, int n = 0) {
    Record r;
    r.set("tweetId", key);
    r.set("message-text", "love #verizon its #plan " + std::to_string(n));
    r.set("user", nlohmann::json{{"screen-name", "user" + std::to_string(n)}});
    r.set("send-time", "2014-03-01T00:00:00");
    return r;
}

Frame make_frame(size_t n, const std::string& prefix = "k") {
    std::vector<Record> records;
    for (size_t i = 0; i < n; ++i) records.push_back(make_record(prefix + std::to_string(i), int(i)));
    return Frame(std::move(records), 0);
}

struct CollectingSink : SoftFailureSink {
    struct Entry {
        Tick tick;
        std::string feed;
        Role role;
        NodeId node;
        std::string what;
        Record record;
    };
    std::vector<Entry> entries;
    void log_soft_failure(Tick tick, const std::string& feed, Role role, const NodeId& node,
                          const std::string& what, const Record& record) override {
        entries.push_back({tick, feed, role, node, what, record});
    }
};

// Core failing on a scripted set of record ordinals (0-based, across frames).
class ScriptedFailCore : public CoreOperator {
public:
    explicit ScriptedFailCore(std::set<long> failing) : failing_(std::move(failing)) {}
    std::optional<Record> process(const Record& r) override {
        long ordinal = next_++;
        if (failing_.count(ordinal)) throw Error("scripted failure at " + std::to_string(ordinal));
        Record out = r;
        out.set("seen", ordinal);
        return out;
    }

private:
    std::set<long> failing_;
    long next_ = 0;
};

catalog::IngestionPolicy tolerant() {
    auto p = catalog::fault_tolerant_policy();
    return p;
}

}  // namespace

TEST_SUITE("dataflow") {

TEST_CASE("frame round trip is lossless") {
    DetRng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        auto frame = make_frame(rng.below(40));
        Frame decoded = Frame::decode(frame.encode());
        REQUIRE(decoded.record_count() == frame.record_count());
        for (size_t i = 0; i < frame.record_count(); ++i)
            CHECK(decoded.records()[i] == frame.records()[i]);
    }
}

TEST_CASE("frame builder respects capacity and rejects oversized records") {
    FrameBuilder builder(512);
    std::vector<Frame> frames;
    for (int i = 0; i < 50; ++i)
        for (auto& f : builder.add(make_record("key" + std::to_string(i), i))) frames.push_back(f);
    for (auto& f : builder.flush()) frames.push_back(f);
    size_t total = 0;
    for (const auto& f : frames) {
        CHECK(f.encoded_size() <= 512);
        total += f.record_count();
    }
    CHECK(total == 50);

    FrameBuilder tiny(64);
    Record big;
    big.set("tweetId", std::string(500, 'x'));
    tiny.add(big);
    CHECK(tiny.rejected_oversized() == 1);
    CHECK(tiny.flush().empty());
}

TEST_CASE("meta_process_frame: failing record is sliced out") {
    // Frame of 8 records, core throws on record 3 (index 2): 7 records out,
    // one error-log entry tagged with the payload.
    CollectingSink sink;
    MetaFeedOperator meta("i0", "F", Role::Compute, "A",
                          std::make_unique<ScriptedFailCore>(std::set<long>{2}), &sink);
    auto result = meta.process_frame(make_frame(8), tolerant(), 17);
    CHECK(result.failed == 1);
    size_t out = 0;
    for (const auto& f : result.outputs) out += f.record_count();
    CHECK(out == 7);
    REQUIRE(sink.entries.size() == 1);
    CHECK(sink.entries[0].tick == 17);
    CHECK(sink.entries[0].record.key("tweetId").value() == "k2");
    CHECK_FALSE(result.terminate_feed);
}

TEST_CASE("meta_process_frame: empty frame is a no-op") {
    CollectingSink sink;
    MetaFeedOperator meta("i0", "F", Role::Compute, "A",
                          std::make_unique<ScriptedFailCore>(std::set<long>{}), &sink);
    auto result = meta.process_frame(Frame(), tolerant(), 0);
    CHECK(result.outputs.empty());
    CHECK(result.processed == 0);
    CHECK(meta.consecutive_skipped() == 0);
}

TEST_CASE("meta_process_frame: subset-frame law") {
    // Output records equal the core applied to exactly the non-failing
    // records, order preserved.
    DetRng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        size_t n = 1 + rng.below(30);
        std::set<long> failing;
        for (size_t i = 0; i < n; ++i)
            if (rng.below(4) == 0) failing.insert(long(i));

        CollectingSink sink;
        MetaFeedOperator meta("i0", "F", Role::Compute, "A",
                              std::make_unique<ScriptedFailCore>(failing), &sink);
        auto result = meta.process_frame(make_frame(n), tolerant(), 0);

        std::vector<std::string> expected;  // oracle: filter then transform
        for (size_t i = 0; i < n; ++i)
            if (!failing.count(long(i))) expected.push_back("k" + std::to_string(i));
        std::vector<std::string> actual;
        for (const auto& f : result.outputs)
            for (const auto& r : f.records()) actual.push_back(r.key("tweetId").value());
        CHECK(actual == expected);
        CHECK(result.failed == failing.size());
        CHECK(sink.entries.size() == failing.size());
    }
}

TEST_CASE("meta_process_frame: transparency with a clean core") {
    // Wrapped output is byte-identical to the unwrapped core output.
    auto fn = udf::FunctionRegistry::with_builtins().make("addHashTags");
    std::vector<std::string> direct;
    auto frame = make_frame(12);
    for (const auto& r : frame.records()) direct.push_back(fn(r)->serialize());

    CollectingSink sink;
    MetaFeedOperator meta("i0", "F", Role::Compute, "A",
                          std::make_unique<ComputeCore>(std::vector<udf::Function>{fn}), &sink);
    auto result = meta.process_frame(frame, tolerant(), 0);
    std::vector<std::string> wrapped;
    for (const auto& f : result.outputs)
        for (const auto& r : f.records()) wrapped.push_back(r.serialize());
    CHECK(wrapped == direct);
    CHECK(sink.entries.empty());
}

TEST_CASE("meta_process_frame: recover.soft.failure=false terminates on first exception") {
    CollectingSink sink;
    MetaFeedOperator meta("i0", "F", Role::Compute, "A",
                          std::make_unique<ScriptedFailCore>(std::set<long>{0}), &sink);
    auto policy = catalog::monitored_policy();  // soft recovery off
    auto result = meta.process_frame(make_frame(4), policy, 0);
    CHECK(result.terminate_feed);
    CHECK(sink.entries.size() == 1);
}

TEST_CASE("meta_process_frame: skip bound ends the feed after m+1 failures") {
    // max_consecutive_skipped = 2 and a UDF failing on every record: the feed
    // terminates on the 3rd consecutive failure, all three logged.
    CollectingSink sink;
    auto chain = std::vector<udf::Function>{udf::FunctionRegistry::with_builtins().make("failEvery(1)")};
    MetaFeedOperator meta("i0", "F", Role::Compute, "A", std::make_unique<ComputeCore>(std::move(chain)),
                          &sink);
    auto policy = tolerant();
    policy.max_consecutive_skipped = 2;

    auto result = meta.process_frame(make_frame(10), policy, 0);
    CHECK(result.terminate_feed);
    CHECK(result.failed == 3);
    CHECK(sink.entries.size() == 3);
    CHECK(meta.consecutive_skipped() == 3);
}

TEST_CASE("meta_process_frame: successes reset the consecutive counter") {
    CollectingSink sink;
    auto chain = std::vector<udf::Function>{udf::FunctionRegistry::with_builtins().make("failEvery(3)")};
    MetaFeedOperator meta("i0", "F", Role::Compute, "A", std::make_unique<ComputeCore>(std::move(chain)),
                          &sink);
    auto policy = tolerant();
    policy.max_consecutive_skipped = 2;
    auto result = meta.process_frame(make_frame(12), policy, 0);
    CHECK_FALSE(result.terminate_feed);  // failures never consecutive
    CHECK(result.failed == 4);           // records 3, 6, 9, 12
    CHECK(result.processed == 8);
}

TEST_CASE("hash_partition") {
    auto r = make_record("abc");
    CHECK(hash_partition(r, "tweetId", 1) == 0);
    CHECK(hash_partition(r, "tweetId", 4) == hash_partition(r, "tweetId", 4));
    CHECK_THROWS_AS(hash_partition(r, "no-such-field", 4), Error);

    // 10000 distinct synthetic keys over 4 partitions: every partition gets
    // 15%..35%.
    std::vector<size_t> counts(4, 0);
    for (int i = 0; i < 10000; ++i) ++counts[hash_partition_key("g0-" + std::to_string(i), 4)];
    for (size_t c : counts) {
        CHECK(c >= 1500);
        CHECK(c <= 3500);
    }
}

TEST_CASE("check_against_type") {
    catalog::RecordType t;
    t.name = "T";
    t.fields = {{"tweetId", catalog::FieldKind::String, false},
                {"location", catalog::FieldKind::Point, true},
                {"count", catalog::FieldKind::Int, false}};
    Record ok;
    ok.set("tweetId", "a");
    ok.set("count", 3);
    ok.set("extra", "open types pass extras through");
    CHECK_FALSE(check_against_type(ok, t).has_value());

    Record missing;
    missing.set("tweetId", "a");
    CHECK(check_against_type(missing, t).has_value());

    Record wrong_kind = ok;
    wrong_kind.set("count", "three");
    CHECK(check_against_type(wrong_kind, t).has_value());

    Record with_point = ok;
    with_point.set("location", nlohmann::json::array({1.5, -2.5}));
    CHECK_FALSE(check_against_type(with_point, t).has_value());
    with_point.set("location", "not a point");
    CHECK(check_against_type(with_point, t).has_value());
}

TEST_CASE("feed joint: fan-out, subscription, release") {
    runtime::FeedMemoryManager fmm(64, 8);
    runtime::FeedManager fm("A");
    auto policy = catalog::monitored_policy();

    FeedJoint joint("j0", "F", "A", "owner");
    CHECK(joint.subscriber_count() == 0);

    // No subscribers: the frame is dropped immediately, the joint stays.
    joint.publish(std::make_shared<Frame>(make_frame(3)), 0);
    CHECK(joint.published_frames() == 1);

    auto& qa = joint.subscribe("subA", "F1", &fmm, &fm, &policy, "");
    auto frame1 = std::make_shared<Frame>(make_frame(2, "one"));
    joint.publish(frame1, 1);

    // A subscriber added mid-stream sees only later frames.
    auto& qb = joint.subscribe("subB", "F2", &fmm, &fm, &policy, "");
    auto frame2 = std::make_shared<Frame>(make_frame(2, "two"));
    joint.publish(frame2, 2);

    CHECK(qa.mem_frames() == 2);
    CHECK(qb.mem_frames() == 1);
    CHECK((*qb.pop())->records()[0].key("tweetId").value() == "two0");

    // The frame object is released only after every subscriber consumed it.
    std::weak_ptr<const Frame> watch = frame2;
    frame2.reset();
    CHECK_FALSE(watch.expired());  // qa still holds it
    qa.pop();
    qa.pop();
    CHECK(watch.expired());

    // Duplicate subscription is rejected; unsubscribe is clean.
    CHECK_THROWS_AS(joint.subscribe("subA", "F1", &fmm, &fm, &policy, ""), Error);
    joint.unsubscribe("subA");
    CHECK_THROWS_AS(joint.unsubscribe("subA"), Error);
    joint.subscribe("subA", "F1", &fmm, &fm, &policy, "");
    joint.publish(std::make_shared<Frame>(make_frame(1, "three")), 3);
    CHECK(joint.queue("subA").mem_frames() == 1);  // no duplicate delivery
    CHECK(fmm.allocated() == joint.queue("subA").mem_frames() + joint.queue("subB").mem_frames());
}

TEST_CASE("feed joint: a stalled subscriber does not delay the others") {
    runtime::FeedMemoryManager fmm(8, 8);  // tiny budget so B stalls quickly
    runtime::FeedManager fm("A");
    auto policy = catalog::monitored_policy();  // discard on overflow

    FeedJoint joint("j0", "F", "A", "owner");
    auto& fast = joint.subscribe("fast", "F1", &fmm, &fm, &policy, "");
    joint.subscribe("slow", "F2", &fmm, &fm, &policy, "");

    size_t fast_seen = 0;
    for (int i = 0; i < 100; ++i) {
        joint.publish(std::make_shared<Frame>(make_frame(1, "f" + std::to_string(i))), i);
        // fast consumes immediately; slow never does.
        while (fast.pop()) ++fast_seen;
    }
    CHECK(fast_seen == 100);  // delivery to fast never blocked
    CHECK(joint.queue("slow").discarded_records() > 0);
    CHECK(fmm.allocated() <= fmm.budget());
}

TEST_CASE("store core: upsert and secondary index maintenance") {
    storage::DatasetPartition partition("D", 0, "A", "tweetId", std::string("userId"));
    catalog::RecordType t;
    t.name = "T";
    t.fields = {{"tweetId", catalog::FieldKind::String, false}};

    CollectingSink sink;
    MetaFeedOperator meta("s0", "F", Role::Store, "A",
                          std::make_unique<StoreCore>(&partition, &t, "tweetId", 1), &sink);

    // 5 fresh records: primary and secondary both cover them.
    std::vector<Record> recs;
    for (int i = 0; i < 5; ++i) {
        Record r;
        r.set("tweetId", "k" + std::to_string(i));
        r.set("userId", "u" + std::to_string(i % 2));
        recs.push_back(r);
    }
    auto result = meta.process_frame(Frame(recs, 0), tolerant(), 0);
    CHECK(result.processed == 5);
    CHECK(partition.size() == 5);
    CHECK(partition.rebuild_secondary() == partition.secondary());

    // Same 5 again: upsert, count unchanged.
    meta.process_frame(Frame(recs, 1), tolerant(), 1);
    CHECK(partition.size() == 5);

    // Missing indexed field: primary insert succeeds, secondary skipped and
    // counted.
    Record no_user;
    no_user.set("tweetId", "k9");
    meta.process_frame(Frame({no_user}, 2), tolerant(), 2);
    CHECK(partition.size() == 6);
    CHECK(partition.missing_secondary_field() == 1);

    // Missing primary key: a soft failure, not a crash.
    Record no_key;
    no_key.set("whatever", 1);
    auto bad = meta.process_frame(Frame({no_key}, 3), tolerant(), 3);
    CHECK(bad.failed == 1);
    CHECK(partition.size() == 6);
}

}  // TEST_SUITE
