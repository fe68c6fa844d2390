#include "doctest.h"

#include "feedmesh/fault.hpp"

using namespace feedmesh;
using namespace feedmesh::fault;

TEST_SUITE("fault") {

TEST_CASE("heartbeat monitor declares a silent node exactly once") {
    HeartbeatMonitor monitor(10, 3);
    monitor.node_joined("A", 0);
    monitor.node_joined("B", 0);
    for (Tick t = 10; t <= 130; t += 10) {
        monitor.heartbeat("A", t);  // A stays healthy throughout
        if (t <= 30) monitor.heartbeat("B", t);  // B goes silent after 30
        if (t == 40 || t == 60) CHECK(monitor.check(t).empty());  // not yet past the timeout
        if (t == 70) {
            auto failed = monitor.check(61);
            REQUIRE(failed.size() == 1);
            CHECK(failed[0] == "B");
        }
        if (t == 100) CHECK(monitor.check(t).empty());  // declared once only
    }

    // Re-joining restarts detection.
    monitor.node_joined("B", 130);
    monitor.heartbeat("A", 140);
    monitor.heartbeat("A", 150);
    monitor.heartbeat("A", 160);
    CHECK(monitor.check(160).empty());
    CHECK(monitor.check(161) == std::vector<NodeId>{"B"});
}

TEST_CASE("saved state: claim is exactly-once") {
    SavedStateStore store;
    SavedState s;
    s.pipeline = "F:D";
    s.stage_index = 1;
    s.partition_index = 0;
    s.pending_input.push_back(std::make_shared<dataflow::Frame>());
    store.save(std::move(s));
    CHECK(store.size() == 1);

    auto claimed = store.claim("F:D", 1, 0);
    REQUIRE(claimed.has_value());
    CHECK(claimed->pending_input.size() == 1);
    CHECK_FALSE(store.claim("F:D", 1, 0).has_value());  // retrievable exactly once
    CHECK_FALSE(store.claim("F:D", 0, 0).has_value());
}

TEST_CASE("fault script parsing") {
    auto script = FaultScript::parse(
        "# comment\n"
        "700 kill-node C\n"
        "1400 kill-node A\n"
        "1400 kill-node D\n"
        "1500 revive-node C\n"
        "1600 poison-udf ProcessedTweetGenFeed 5\n");
    REQUIRE(script.events.size() == 5);
    CHECK(script.events[0].kind == FaultKind::KillNode);
    CHECK(script.events[0].tick == 700);
    CHECK(script.events[0].node == "C");
    CHECK(script.events[3].kind == FaultKind::ReviveNode);
    CHECK(script.events[4].kind == FaultKind::PoisonUdf);
    CHECK(script.events[4].feed == "ProcessedTweetGenFeed");
    CHECK(script.events[4].every_n == 5);

    CHECK_THROWS_AS(FaultScript::parse("100 kill-node A\n50 kill-node B\n"), ParseError);  // decreasing
    CHECK_THROWS_AS(FaultScript::parse("50 explode-node A\n"), ParseError);
    CHECK_THROWS_AS(FaultScript::parse("50 poison-udf F 0\n"), ParseError);
}

TEST_CASE("classification follows the zombie rules") {
    using dataflow::Role;
    // Dead iff on the failed node.
    CHECK(classify_instance(true, Role::Compute, false) == Fate::Dead);
    CHECK(classify_instance(true, Role::Intake, true) == Fate::Dead);
    // Intake instances must continue to live.
    CHECK(classify_instance(false, Role::Intake, false) == Fate::Live);
    // An instance whose joint feeds other live pipelines must keep flowing.
    CHECK(classify_instance(false, Role::Compute, true) == Fate::Live);
    // Everyone else saves state and becomes a zombie.
    CHECK(classify_instance(false, Role::Compute, false) == Fate::Zombie);
    CHECK(classify_instance(false, Role::Store, false) == Fate::Zombie);
}

TEST_CASE("substitute choice prefers an idle node, then least loaded") {
    cluster::ClusterView view;
    for (const auto& n : {"A", "B", "C"}) view.add_node(n);
    view.add_load("A", 3);
    view.add_load("B", 1);
    CHECK(choose_substitute(view).value() == "C");  // idle

    view.add_load("C", 2);
    CHECK(choose_substitute(view).value() == "B");  // least loaded

    view.set_live("B", false);
    CHECK(choose_substitute(view).value() == "C");

    view.set_live("A", false);
    view.set_live("C", false);
    CHECK_FALSE(choose_substitute(view).has_value());
}

}  // TEST_SUITE
