#include "doctest.h"

#include <atomic>
#include <filesystem>
#include <thread>

#include "feedmesh/queue.hpp"
#include "feedmesh/runtime.hpp"

using namespace feedmesh;
using namespace feedmesh::runtime;

namespace {

dataflow::FramePtr frame_of(size_t n, const std::string& prefix = "r") {
    std::vector<dataflow::Record> records;
    for (size_t i = 0; i < n; ++i) {
        dataflow::Record r;
        r.set("tweetId", prefix + std::to_string(i));
        records.push_back(r);
    }
    return std::make_shared<dataflow::Frame>(std::move(records), 0);
}

std::string temp_spill(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "feedmesh_queue_test";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

}  // namespace

TEST_SUITE("runtime") {

TEST_CASE("fmm: grants, denial, conservation") {
    FeedMemoryManager fmm(64, 8);
    CHECK(fmm.request(8) == 8);  // budget 64, allocated 0, cap 8
    CHECK(fmm.allocated() == 8);

    // Grant then release returns to the prior value.
    fmm.release(8);
    CHECK(fmm.allocated() == 0);

    // Requests are clipped by the per-request cap.
    CHECK(fmm.request(100) == 8);
    fmm.release(8);

    // Exhausted budget: denial.
    size_t granted = 0;
    while (size_t k = fmm.request(8)) granted += k;
    CHECK(granted == 64);
    CHECK(fmm.request(1) == 0);
    CHECK(fmm.allocated() == 64);
    CHECK(fmm.budget_violations() == 0);
    CHECK(fmm.peak_allocated() == 64);
}

TEST_CASE("fmm: concurrent grant/release never exceeds the budget") {
    FeedMemoryManager fmm(64, 8);
    std::atomic<bool> stop{false};
    std::atomic<std::uint64_t> observed_max{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < 8; ++w) {
        workers.emplace_back([&] {
            std::uint64_t held = 0;
            for (int i = 0; i < 20000; ++i) {
                size_t k = fmm.request(1 + i % 8);
                held += k;
                size_t now = fmm.allocated();
                std::uint64_t seen = observed_max.load();
                while (now > seen && !observed_max.compare_exchange_weak(seen, now)) {
                }
                if (held > 4 || k == 0) {
                    fmm.release(held);
                    held = 0;
                }
            }
            fmm.release(held);
        });
    }
    (void)stop;
    for (auto& w : workers) w.join();
    CHECK(fmm.allocated() == 0);
    CHECK(fmm.budget_violations() == 0);
    CHECK(observed_max.load() <= 64);
    CHECK(fmm.peak_allocated() <= 64);
}

TEST_CASE("handle_stalled: spill, then discard, then escalate") {
    FeedManager fm("A");
    fm.register_instance("i0", "F");

    auto spill_policy = catalog::fault_tolerant_policy();
    CHECK(fm.handle_stalled("i0", spill_policy, 1000, 5) == CongestionAction::Spill);
    CHECK(fm.stalled().count("i0") == 1);

    // Spill limit reached: fall to discard if allowed.
    spill_policy.max_spill_bytes = 100;
    spill_policy.excess_records_discard = true;
    CHECK(fm.handle_stalled("i0", spill_policy, 1000, 6) == CongestionAction::Discard);

    // Neither spill nor discard: escalation reaches the Super Feed Manager.
    auto strict = catalog::basic_policy();
    strict.excess_records_spill = false;
    strict.excess_records_discard = false;
    CHECK(fm.handle_stalled("i0", strict, 1000, 7) == CongestionAction::Escalate);
    REQUIRE(fm.escalations().size() == 1);
    CHECK(fm.escalations()[0].tick == 7);
    CHECK(fm.escalations()[0].feed == "F");
}

TEST_CASE("elect_leader: lowest live node id") {
    CHECK(elect_leader({"C", "A", "B"}).value() == "A");
    CHECK(elect_leader({"C", "B"}).value() == "B");  // after A dies
    CHECK(elect_leader({"Z"}).value() == "Z");
    CHECK_FALSE(elect_leader({}).has_value());
}

TEST_CASE("collect_reports: global rates and stalled map") {
    std::vector<FeedReport> reports;
    for (const auto& node : {"A", "B", "C"}) {
        FeedReport r;
        r.node = node;
        r.window_start = 100;
        r.outflow_rate["F"] = 100.0;
        r.inflow_rate["F"] = 110.0;
        reports.push_back(r);
    }
    reports[1].stalled_instances.push_back("F:D#compute#0");
    auto view = collect_reports(reports, {{"F:D#compute#0", "F"}});
    CHECK(view.outflow_rate.at("F") == doctest::Approx(300.0));
    CHECK(view.inflow_rate.at("F") == doctest::Approx(330.0));
    REQUIRE(view.stalled.size() == 1);
    CHECK(view.stalled[0].node == "B");
    CHECK(view.stalled[0].feed == "F");
    CHECK(view.reporting_nodes.size() == 3);
}

TEST_CASE("report omits rate entries for feeds not collecting statistics") {
    FeedManager fm("A");
    fm.count_inflow("F", 100);
    fm.count_outflow("F", 90);
    fm.count_inflow("G", 50);
    auto report = fm.make_report(0, 200, 0.5, {{"F", false}, {"G", true}});
    CHECK(report.inflow_rate.count("F") == 0);  // omitted from the rate table
    CHECK(report.inflow_rate.count("G") == 1);
}

TEST_CASE("queue: fifo through memory") {
    FeedMemoryManager fmm(64, 8);
    FeedManager fm("A");
    auto policy = catalog::monitored_policy();
    BufferedQueue q("i0", "F", "A", &fmm, &fm, &policy, "");
    q.offer(frame_of(2, "a"), 0);
    q.offer(frame_of(2, "b"), 1);
    CHECK((*q.pop())->records()[0].key("tweetId").value() == "a0");
    CHECK((*q.pop())->records()[0].key("tweetId").value() == "b0");
    CHECK_FALSE(q.pop().has_value());
    CHECK(fmm.allocated() == 0);
}

TEST_CASE("queue: spill preserves order and replays before new arrivals") {
    FeedMemoryManager fmm(2, 8);  // room for two frames in memory
    FeedManager fm("A");
    auto policy = catalog::fault_tolerant_policy();
    auto path = temp_spill("spill_order.bin");
    std::filesystem::remove(path);
    BufferedQueue q("i0", "F", "A", &fmm, &fm, &policy, path);

    CHECK(q.offer(frame_of(1, "m0-"), 0) == OfferOutcome::Queued);
    CHECK(q.offer(frame_of(1, "m1-"), 0) == OfferOutcome::Queued);
    CHECK(q.offer(frame_of(1, "s0-"), 1) == OfferOutcome::Spilled);  // budget exhausted
    CHECK(q.stalled());
    CHECK(std::filesystem::exists(path));

    // Memory drains first (it is older), then the spill replays; frames
    // arriving while the spill is non-empty append to it even though memory
    // has room again.
    CHECK((*q.pop())->records()[0].key("tweetId").value() == "m0-0");
    CHECK(q.offer(frame_of(1, "s1-"), 2) == OfferOutcome::Spilled);
    CHECK((*q.pop())->records()[0].key("tweetId").value() == "m1-0");
    CHECK((*q.pop())->records()[0].key("tweetId").value() == "s0-0");
    CHECK((*q.pop())->records()[0].key("tweetId").value() == "s1-0");
    CHECK_FALSE(std::filesystem::exists(path));  // replay deletes the file
    CHECK_FALSE(q.stalled());

    // Back to memory queueing afterwards.
    CHECK(q.offer(frame_of(1, "m2-"), 3) == OfferOutcome::Queued);
    CHECK(fm.ledger("i0").spilled_frames == 2);
    CHECK(fm.ledger("i0").replayed_frames == 2);
}

TEST_CASE("queue: discard accounting and spill byte limits") {
    FeedMemoryManager fmm(1, 8);
    FeedManager fm("A");
    auto policy = catalog::fault_tolerant_policy();
    policy.max_spill_bytes = 60;  // roughly one tiny frame
    policy.excess_records_discard = true;
    auto path = temp_spill("spill_limit.bin");
    std::filesystem::remove(path);
    BufferedQueue q("i0", "F", "A", &fmm, &fm, &policy, path);

    CHECK(q.offer(frame_of(1, "a"), 0) == OfferOutcome::Queued);
    CHECK(q.offer(frame_of(1, "b"), 0) == OfferOutcome::Spilled);
    // Ledger exceeded: discard takes over.
    CHECK(q.offer(frame_of(3, "c"), 0) == OfferOutcome::Discarded);
    CHECK(q.discarded_records() == 3);
    CHECK(fm.ledger("i0").discarded_records == 3);

    // With spill and discard both off, the queue refuses and the sender must
    // hold the frame.
    policy.excess_records_spill = false;
    policy.excess_records_discard = false;
    CHECK(q.offer(frame_of(1, "d"), 0) == OfferOutcome::Refused);
    CHECK_FALSE(fm.escalations().empty());
    q.clear(true);
}

TEST_CASE("queue: clear drops pending frames and reports the count") {
    FeedMemoryManager fmm(8, 8);
    FeedManager fm("A");
    auto policy = catalog::monitored_policy();
    BufferedQueue q("i0", "F", "A", &fmm, &fm, &policy, "");
    q.offer(frame_of(3), 0);
    q.offer(frame_of(2), 0);
    CHECK(q.in_flight_records() == 5);
    CHECK(q.clear(true) == 5);
    CHECK(fmm.allocated() == 0);
    CHECK(q.empty());
}

}  // TEST_SUITE
