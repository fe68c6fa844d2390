#include "feedmesh/engine.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace feedmesh {

namespace fs = std::filesystem;
using dataflow::FramePtr;
using dataflow::Role;

namespace {

std::string sanitize(const std::string& s) {
    std::string out = s;
    for (char& c : out) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Internal runtime structures
// ---------------------------------------------------------------------------

struct Engine::NodeRuntime {
    NodeId id;
    bool alive = true;
    runtime::FeedManager fm;
    runtime::FeedMemoryManager fmm;
    fault::SavedStateStore saved;
    std::uint64_t work_used = 0;

    NodeRuntime(const NodeId& node, size_t budget, size_t cap, size_t bytes)
        : id(node), fm(node), fmm(budget, cap, bytes) {}
};

struct Engine::InstanceRt {
    std::string id;
    Role role = Role::Intake;
    size_t stage_index = 0;
    size_t partition_index = 0;
    NodeId node;
    dataflow::Lifecycle lifecycle = dataflow::Lifecycle::Live;
    bool paused = false;

    std::unique_ptr<dataflow::MetaFeedOperator> meta;
    dataflow::StoreCore* store_core = nullptr;  // borrowed from meta's core

    std::unique_ptr<runtime::BufferedQueue> own_queue;
    runtime::BufferedQueue* input = nullptr;  // own_queue or a joint subscriber queue
    std::string source_joint_id;              // joint-sourced heads

    std::unique_ptr<adaptors::AdaptorInstanceHandle> adaptor;
    dataflow::FrameBuilder inbound;
    std::deque<FramePtr> pre_queue;  // frames not yet accepted by the input queue

    dataflow::FeedJoint* output_joint = nullptr;
    // Output frames awaiting an unavailable or congested target, per target
    // partition so one broken path never blocks the others.
    std::map<size_t, std::deque<FramePtr>> backlog;
    // Saved output from a previous execution, re-routed through the connector.
    std::deque<FramePtr> reroute;
    DetRng scatter_rng{0};
    std::uint64_t seq = 0;
    std::uint64_t persisted_seen = 0;

    std::uint64_t backlog_records() const {
        std::uint64_t n = 0;
        for (const auto& [t, q] : backlog)
            for (const auto& f : q) n += f->record_count();
        for (const auto& f : reroute) n += f->record_count();
        return n;
    }

    std::uint64_t pending_records() const {
        std::uint64_t n = backlog_records();
        for (const auto& f : pre_queue) n += f->record_count();
        if (own_queue) n += own_queue->in_flight_records();
        return n;
    }
};

struct Engine::StageRt {
    std::vector<std::unique_ptr<InstanceRt>> instances;
};

struct Engine::PipelineRt {
    std::string id;
    pipeline::PipelinePlan plan;
    catalog::IngestionPolicy policy;
    std::vector<StageRt> stages;
    std::map<std::string, std::unique_ptr<dataflow::FeedJoint>> joints;
    enum class State { Running, Recovering } state = State::Running;
    bool is_stub = false;
    bool halted = false;  // termination pending at end of tick
    Tick resume_at = 0;
    ConnectionStats* stats = nullptr;  // null for stubs

    bool has_instance_on(const NodeId& node) const {
        for (const auto& stage : stages)
            for (const auto& inst : stage.instances)
                if (inst && inst->node == node) return true;
        return false;
    }

    ConnectionStats* open_stats() { return (stats != nullptr && !stats->closed) ? stats : nullptr; }
};

// ---------------------------------------------------------------------------
// Construction / setup
// ---------------------------------------------------------------------------

Engine::Engine(EngineConfig config)
    : config_(std::move(config)),
      placement_rng_(DetRng(config_.seed).fork("placement")),
      functions_(udf::FunctionRegistry::with_builtins()) {
    auto ids = config_.node_ids.empty() ? cluster::default_node_ids(config_.nodes) : config_.node_ids;
    config_.nodes = ids.size();
    for (const auto& id : ids) {
        cluster_.add_node(id);
        nodes_.emplace(id, std::make_unique<NodeRuntime>(id, config_.fmm_budget, config_.fmm_grant_cap,
                                                         config_.frame_bytes));
        monitor_.node_joined(id, 0);
    }
    elect();
    ensure_feed_errors_dataset();
}

Engine::~Engine() = default;

void Engine::elect() {
    leader_ = runtime::elect_leader(cluster_.live_nodes());
    for (auto& [id, rt] : nodes_) rt->fm.set_leader(leader_ && *leader_ == id);
}

Engine::NodeRuntime& Engine::node_rt(const NodeId& id) { return *nodes_.at(id); }

runtime::FeedMemoryManager& Engine::fmm(const NodeId& node) { return node_rt(node).fmm; }
runtime::FeedManager& Engine::feed_manager(const NodeId& node) { return node_rt(node).fm; }
fault::SavedStateStore& Engine::saved_state(const NodeId& node) { return node_rt(node).saved; }

std::uint64_t Engine::fmm_budget_violations() const {
    std::uint64_t total = 0;
    for (const auto& [id, rt] : nodes_) total += rt->fmm.budget_violations();
    return total;
}

adaptors::SimGenerator& Engine::add_generator(const std::string& tag, double rate, double duration_seconds,
                                              std::uint64_t seed) {
    auto gen = std::make_shared<adaptors::SimGenerator>(tag, rate, duration_seconds, seed);
    generators_[tag] = gen;
    sim_sources_.bind("sim://" + tag, [gen]() { return gen; });
    return *gen;
}

void Engine::bind_sim_source(const std::string& address, adaptors::SimSourceRegistry::Factory factory) {
    sim_sources_.bind(address, std::move(factory));
}

const adaptors::SimGenerator* Engine::generator(const std::string& tag) const {
    auto it = generators_.find(tag);
    return it == generators_.end() ? nullptr : it->second.get();
}

std::vector<std::string> Engine::generator_tags() const {
    std::vector<std::string> out;
    for (const auto& [tag, gen] : generators_) out.push_back(tag);
    return out;
}

void Engine::ensure_feed_errors_dataset() {
    // Reserved sink for skipped-record reports when a policy collects
    // statistics.
    catalog::RecordType t;
    t.name = "FeedError";
    t.fields = {{"errorId", catalog::FieldKind::String, false},
                {"feed", catalog::FieldKind::String, false},
                {"message", catalog::FieldKind::String, false}};
    catalog_.add_type(t);
    catalog::DatasetDef d;
    d.name = "feed_errors";
    d.record_type = "FeedError";
    d.primary_key = "errorId";
    d.nodegroup = {cluster_.all_nodes().front()};
    catalog_.add_dataset(d);
    storage_.create_dataset(*catalog_.find_dataset("feed_errors"), d.nodegroup);
}

// ---------------------------------------------------------------------------
// DDL
// ---------------------------------------------------------------------------

ddl::Statement Engine::apply_one(const std::string& statement_text) {
    auto stmt = ddl::parse_statement(statement_text);
    auto action = ddl::apply_statement(stmt, catalog_, functions_.names());
    if (action) handle_action(*action);
    return stmt;
}

void Engine::apply_ddl(const std::string& script_text) {
    for (const auto& text : ddl::split_statements(script_text)) apply_one(text);
}

void Engine::schedule_ddl(Tick at, std::string statement_text) {
    timed_ddl_.emplace_back(at, std::move(statement_text));
    std::stable_sort(timed_ddl_.begin(), timed_ddl_.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
}

void Engine::set_fault_script(fault::FaultScript script) {
    fault_script_ = std::move(script);
    next_fault_ = 0;
}

void Engine::handle_action(const ddl::Action& action) {
    if (const auto* c = std::get_if<ddl::ConnectAction>(&action)) {
        try {
            do_connect(c->feed, c->dataset, c->policy);
        } catch (...) {
            catalog_.set_connection(c->feed, c->dataset, c->policy, catalog::ConnectionState::Disconnected);
            throw;
        }
    } else if (const auto* d = std::get_if<ddl::DisconnectAction>(&action)) {
        do_disconnect(d->feed, d->dataset, false, "", false);
    } else if (std::get_if<ddl::ShowCatalogAction>(&action)) {
        std::cout << show_catalog();
    } else if (std::get_if<ddl::ShowPipelinesAction>(&action)) {
        std::cout << show_pipelines();
    }
}

// ---------------------------------------------------------------------------
// Connect / deploy
// ---------------------------------------------------------------------------

void Engine::do_connect(const std::string& feed, const std::string& dataset, const std::string& policy_name) {
    const auto* ds = catalog_.find_dataset(dataset);
    if (ds == nullptr) throw Error("unknown dataset \"" + dataset + "\"");
    if (ds->nodegroup.empty()) {
        // Default nodegroup: every cluster node, bound at first connect.
        catalog_.set_nodegroup(dataset, cluster_.all_nodes());
        ds = catalog_.find_dataset(dataset);
    }
    for (const auto& node : ds->nodegroup)
        if (!cluster_.contains(node)) throw Error("nodegroup node \"" + node + "\" does not exist");
    storage_.create_dataset(*ds, ds->nodegroup);

    auto plan = pipeline::compile_connect(feed, dataset, policy_name, catalog_, joint_registry_);
    pipeline::schedule(plan, cluster_, placement_rng_);
    deploy(std::move(plan), catalog_.resolve_policy(policy_name));
}

void Engine::deploy(pipeline::PipelinePlan plan, const catalog::IngestionPolicy& policy) {
    auto p = std::make_unique<PipelineRt>();
    p->id = plan.id;
    p->plan = std::move(plan);
    p->policy = policy;

    auto& slot = stats_storage_[p->id];
    if (!slot) {
        slot = std::make_unique<ConnectionStats>();
        slot->feed = p->plan.feed;
        slot->dataset = p->plan.dataset;
    }
    slot->closed = false;
    p->stats = slot.get();

    p->stages.resize(p->plan.stages.size());
    create_instances(*p);
    pipelines_.push_back(std::move(p));
}

std::string Engine::spill_file_for(const NodeId& node, const std::string& feed,
                                   const std::string& instance_id) const {
    return (fs::path(config_.out_dir) / "spill" / sanitize(feed) / node / (sanitize(instance_id) + ".bin"))
        .string();
}

void Engine::create_instances(PipelineRt& p) {
    for (size_t s = 0; s < p.plan.stages.size(); ++s) {
        auto& stage_plan = p.plan.stages[s];
        auto& stage = p.stages[s];
        stage.instances.resize(stage_plan.cardinality);
        for (size_t i = 0; i < stage_plan.cardinality; ++i) {
            if (stage.instances[i]) continue;  // surviving live instance kept in place
            auto inst = std::make_unique<InstanceRt>();
            inst->role = stage_plan.role;
            inst->stage_index = s;
            inst->partition_index = i;
            inst->id = p.id + "#" + dataflow::to_string(inst->role) + "#" + std::to_string(i);
            inst->inbound = dataflow::FrameBuilder(config_.frame_bytes);
            inst->scatter_rng = DetRng(config_.seed).fork(inst->id + "/scatter");
            // Successors deployed during a recovery phase hold until resume;
            // retained live instances keep flowing meanwhile.
            inst->paused = p.state == PipelineRt::State::Recovering;

            bool joint_head = s == 0 && !p.plan.source.from_adaptor;
            dataflow::FeedJoint* source_joint = nullptr;
            if (joint_head) {
                auto jit = joints_by_id_.find(p.plan.source.joints.at(i).id);
                if (jit == joints_by_id_.end())
                    throw Error("source joint \"" + p.plan.source.joints.at(i).id + "\" is not live");
                source_joint = jit->second;
                stage_plan.nodes[i] = source_joint->node();  // co-located
            }
            inst->node = stage_plan.nodes.at(i);
            auto& nrt = node_rt(inst->node);

            std::unique_ptr<dataflow::CoreOperator> core;
            bool poisoned_stage = s + 2 == p.plan.stages.size();  // last pre-store
            auto poison = poisons_.find(p.plan.feed);
            switch (inst->role) {
                case Role::Intake: {
                    auto intake = std::make_unique<dataflow::IntakeCore>();
                    if (poison != poisons_.end() && poisoned_stage) intake->set_poison(poison->second);
                    core = std::move(intake);
                    break;
                }
                case Role::Compute: {
                    std::vector<udf::Function> chain;
                    for (const auto& name : stage_plan.udfs) chain.push_back(functions_.make(name));
                    auto compute = std::make_unique<dataflow::ComputeCore>(std::move(chain));
                    if (poison != poisons_.end() && poisoned_stage) compute->set_poison(poison->second);
                    core = std::move(compute);
                    break;
                }
                case Role::Store: {
                    const auto* ds = catalog_.find_dataset(p.plan.dataset);
                    auto store = std::make_unique<dataflow::StoreCore>(
                        &storage_.partition(p.plan.dataset, i), catalog_.find_type(ds->record_type),
                        ds->primary_key, stage_plan.cardinality);
                    inst->store_core = store.get();
                    core = std::move(store);
                    break;
                }
            }
            inst->meta = std::make_unique<dataflow::MetaFeedOperator>(inst->id, p.plan.feed, inst->role,
                                                                      inst->node, std::move(core), this,
                                                                      config_.frame_bytes);
            nrt.fm.register_instance(inst->id, p.plan.feed);
            cluster_.add_load(inst->node, 1);

            if (joint_head) {
                inst->source_joint_id = source_joint->id();
                if (!source_joint->has_subscriber(inst->id)) {
                    auto& q = source_joint->subscribe(inst->id, p.plan.feed, &nrt.fmm, &nrt.fm, &p.policy,
                                                      spill_file_for(inst->node, p.plan.feed, inst->id));
                    q.mark_as_head(p.stats != nullptr ? &p.stats->entered : nullptr);
                    q.count_discards_into(p.stats != nullptr ? &p.stats->discarded : nullptr);
                }
                inst->input = &source_joint->queue(inst->id);
                subscriber_pipeline_[inst->id] = p.id;
            } else {
                inst->own_queue = std::make_unique<runtime::BufferedQueue>(
                    inst->id, p.plan.feed, inst->node, &nrt.fmm, &nrt.fm, &p.policy,
                    spill_file_for(inst->node, p.plan.feed, inst->id));
                inst->own_queue->count_discards_into(p.stats != nullptr ? &p.stats->discarded : nullptr);
                inst->input = inst->own_queue.get();
                if (s == 0 && p.plan.source.from_adaptor)
                    inst->adaptor = adaptors::open(p.plan.source.adaptor, i, sim_sources_, p.plan.feed, tick_);
            }

            if (stage_plan.joint_feed) {
                std::string joint_id = p.id + "/" + *stage_plan.joint_feed + "#" + std::to_string(i);
                auto joint = std::make_unique<dataflow::FeedJoint>(joint_id, *stage_plan.joint_feed,
                                                                   inst->node, inst->id);
                inst->output_joint = joint.get();
                joints_by_id_[joint_id] = joint.get();
                joint_registry_.add({joint_id, *stage_plan.joint_feed, inst->node, p.id, inst->id});
                p.joints[joint_id] = std::move(joint);
            }

            // Claim whatever a zombie predecessor left with this node's Feed
            // Manager, before anything new can arrive: saved input seeds the
            // fresh queue, saved output re-routes ahead of new work.
            if (auto claimed = node_rt(inst->node).saved.claim(p.id, s, i)) {
                for (auto& f : claimed->pending_input) {
                    if (inst->input->offer(f, tick_) == runtime::OfferOutcome::Refused)
                        inst->pre_queue.push_back(f);
                }
                for (auto it = claimed->pending_output.rbegin(); it != claimed->pending_output.rend(); ++it)
                    inst->reroute.push_front(*it);
            }
            stage.instances[i] = std::move(inst);
        }
    }
}

// ---------------------------------------------------------------------------
// Disconnect / teardown
// ---------------------------------------------------------------------------

Engine::PipelineRt* Engine::find_pipeline(const std::string& id) {
    for (auto& p : pipelines_)
        if (p->id == id && !p->is_stub) return p.get();
    return nullptr;
}

void Engine::drop_instance(PipelineRt& p, InstanceRt& inst, bool count_as_lost, bool release_buffers) {
    std::uint64_t pending = inst.pending_records();
    if (inst.own_queue) inst.own_queue->clear(release_buffers);
    inst.pre_queue.clear();
    inst.backlog.clear();
    inst.reroute.clear();
    if (auto* stats = p.open_stats(); stats != nullptr && pending > 0) {
        if (count_as_lost)
            stats->lost += pending;
        else
            stats->teardown_dropped += pending;
    } else if (p.stats != nullptr && pending > 0) {
        // Books already closed; keep the identity intact anyway.
        if (count_as_lost)
            p.stats->lost += pending;
        else
            p.stats->teardown_dropped += pending;
    }
    subscriber_pipeline_.erase(inst.id);
    if (nodes_.count(inst.node)) {
        node_rt(inst.node).fm.deregister_instance(inst.id);
        cluster_.add_load(inst.node, -1);
    }
}

void Engine::save_zombie_state(PipelineRt& p, InstanceRt& inst) {
    fault::SavedState state;
    state.pipeline = p.id;
    state.feed = p.plan.feed;
    state.role = inst.role;
    state.stage_index = inst.stage_index;
    state.partition_index = inst.partition_index;
    for (auto& f : inst.pre_queue) state.pending_input.push_back(f);
    inst.pre_queue.clear();
    while (auto f = inst.input->pop()) state.pending_input.push_back(*f);
    for (auto& [t, q] : inst.backlog)
        for (auto& f : q) state.pending_output.push_back(f);
    inst.backlog.clear();
    for (auto& f : inst.reroute) state.pending_output.push_back(f);
    inst.reroute.clear();
    node_rt(inst.node).saved.save(std::move(state));
    inst.lifecycle = dataflow::Lifecycle::Zombie;
}

void Engine::teardown_stages(PipelineRt& p, size_t keep, bool count_as_lost, bool save_zombies) {
    for (size_t s = p.stages.size(); s-- > keep;) {
        auto& stage = p.stages[s];
        for (auto& inst : stage.instances) {
            if (!inst) continue;
            bool node_alive = nodes_.count(inst->node) && node_rt(inst->node).alive;
            if (save_zombies && node_alive && inst->lifecycle == dataflow::Lifecycle::Live &&
                inst->source_joint_id.empty()) {
                save_zombie_state(p, *inst);
            }
            // A head's queue lives in the source joint; detach it.
            if (!inst->source_joint_id.empty()) {
                auto jit = joints_by_id_.find(inst->source_joint_id);
                if (jit != joints_by_id_.end() && jit->second->has_subscriber(inst->id)) {
                    std::uint64_t remaining = jit->second->queue(inst->id).in_flight_records();
                    if (p.stats != nullptr) p.stats->teardown_dropped += remaining;
                    jit->second->unsubscribe(inst->id);
                }
            }
            drop_instance(p, *inst, count_as_lost, node_alive);
            inst.reset();
        }
        if (p.plan.stages[s].joint_feed) {
            for (auto it = p.joints.begin(); it != p.joints.end();) {
                if (it->second->feed() == *p.plan.stages[s].joint_feed) {
                    joint_registry_.remove(it->first);
                    joints_by_id_.erase(it->first);
                    it = p.joints.erase(it);
                } else {
                    ++it;
                }
            }
        }
        p.stages.pop_back();
        p.plan.stages.pop_back();
    }
}

void Engine::do_disconnect(const std::string& feed, const std::string& dataset, bool terminating,
                           const std::string& reason, bool save_zombies) {
    std::string id = feed + ":" + dataset;
    PipelineRt* p = find_pipeline(id);
    if (p == nullptr) throw Error("not connected: feed \"" + feed + "\" to dataset \"" + dataset + "\"");

    if (p->stats != nullptr) p->stats->closed = true;

    // How much of the pipeline still feeds other subscribers?
    std::vector<size_t> external(p->stages.size(), 0);
    for (size_t s = 0; s < p->stages.size(); ++s) {
        for (const auto& inst : p->stages[s].instances) {
            if (inst && inst->output_joint) external[s] += inst->output_joint->subscriber_count();
        }
    }
    size_t keep = pipeline::stages_to_keep(external);

    teardown_stages(*p, keep, false, save_zombies);

    if (terminating) terminations_.push_back({tick_, id, reason});
    if (catalog_.find_connection(feed, dataset) != nullptr)
        catalog_.set_connection(feed, dataset, p->policy.name, catalog::ConnectionState::Disconnected);

    if (keep == 0) {
        for (auto it = pipelines_.begin(); it != pipelines_.end(); ++it) {
            if (it->get() == p) {
                pipelines_.erase(it);
                break;
            }
        }
        prune_orphan_stubs();
    } else {
        // The retained prefix keeps producing for its subscribers.
        p->is_stub = true;
        p->stats = nullptr;
        for (auto& stage : p->stages) {
            for (auto& inst : stage.instances) {
                if (!inst) continue;
                if (inst->own_queue) {
                    inst->own_queue->count_discards_into(nullptr);
                    inst->own_queue->mark_as_head(nullptr);
                }
            }
        }
    }
}

void Engine::prune_orphan_stubs() {
    while (true) {
        PipelineRt* orphan = nullptr;
        for (auto& sp : pipelines_) {
            if (!sp->is_stub) continue;
            size_t subscribers = 0;
            for (auto& [jid, joint] : sp->joints) subscribers += joint->subscriber_count();
            if (subscribers == 0) {
                orphan = sp.get();
                break;
            }
        }
        if (orphan == nullptr) return;
        teardown_stages(*orphan, 0, false, false);
        for (auto it = pipelines_.begin(); it != pipelines_.end(); ++it) {
            if (it->get() == orphan) {
                pipelines_.erase(it);
                break;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Faults and recovery
// ---------------------------------------------------------------------------

void Engine::run_fault_events() {
    while (next_fault_ < fault_script_.events.size() && fault_script_.events[next_fault_].tick <= tick_) {
        const auto& event = fault_script_.events[next_fault_++];
        switch (event.kind) {
            case fault::FaultKind::KillNode: kill_node(event.node); break;
            case fault::FaultKind::ReviveNode: revive_node(event.node); break;
            case fault::FaultKind::PoisonUdf: poison_feed(event.feed, event.every_n); break;
        }
    }
}

void Engine::run_timed_ddl() {
    while (next_ddl_ < timed_ddl_.size() && timed_ddl_[next_ddl_].first <= tick_) {
        apply_one(timed_ddl_[next_ddl_++].second);
    }
}

void Engine::kill_node(const NodeId& node) {
    auto it = nodes_.find(node);
    if (it == nodes_.end()) throw Error("kill-node: unknown node \"" + node + "\"");
    if (!it->second->alive) {
        std::cerr << "warning: kill-node " << node << " at tick " << tick_ << ": already dead\n";
        return;
    }
    it->second->alive = false;

    FailureRecord record;
    record.kill_tick = tick_;
    record.node = node;

    // Everything resident on the node dies with it, atomically: queued frames,
    // spill files, saved state, and the memory manager's books.
    for (auto& p : pipelines_) {
        std::uint64_t resident = 0;
        for (auto& stage : p->stages) {
            for (auto& inst : stage.instances) {
                if (!inst) continue;
                if (inst->node == node && inst->own_queue) {
                    resident += inst->pending_records();
                    inst->own_queue->clear(false);
                    inst->pre_queue.clear();
                    inst->backlog.clear();
                    inst->reroute.clear();
                } else if (inst->node == node) {
                    // Head: pre-queue/backlog are local; the joint queue dies
                    // with the joint below.
                    for (const auto& f : inst->pre_queue) resident += f->record_count();
                    resident += inst->backlog_records();
                    inst->pre_queue.clear();
                    inst->backlog.clear();
                    inst->reroute.clear();
                }
                if (inst->output_joint != nullptr && inst->output_joint->node() == node) {
                    for (const auto& sub : inst->output_joint->subscribers()) {
                        auto& q = inst->output_joint->queue(sub);
                        std::uint64_t n = q.in_flight_records();
                        q.clear(false);
                        auto owner_it = subscriber_pipeline_.find(sub);
                        if (owner_it != subscriber_pipeline_.end()) {
                            if (PipelineRt* owner = find_pipeline(owner_it->second); owner != nullptr) {
                                if (owner->stats != nullptr) owner->stats->lost += n;
                                record.resident_records[owner->id] += n;
                            }
                        }
                    }
                }
            }
        }
        if (resident > 0) {
            if (p->stats != nullptr) p->stats->lost += resident;
            record.resident_records[p->id] += resident;
        }
        if (p->has_instance_on(node) && !p->is_stub) record.first_insert_after[p->id] = 0;
    }

    // Zombie state held here dies with the node: a second failure of the
    // hosting node loses whatever a successor had not yet claimed.
    for (const auto& [key, state] : it->second->saved.all()) {
        std::uint64_t n = 0;
        for (const auto& f : state.pending_input) n += f->record_count();
        for (const auto& f : state.pending_output) n += f->record_count();
        auto stats = stats_storage_.find(state.pipeline);
        if (stats != stats_storage_.end() && n > 0) {
            stats->second->lost += n;
            record.resident_records[state.pipeline] += n;
        }
    }

    it->second->fmm.reset();
    it->second->fm = runtime::FeedManager(node);
    it->second->saved.clear();
    std::error_code ec;
    fs::path spill_root = fs::path(config_.out_dir) / "spill";
    if (fs::exists(spill_root, ec)) {
        for (const auto& feed_dir : fs::directory_iterator(spill_root, ec)) {
            fs::remove_all(feed_dir.path() / node, ec);
        }
    }

    failures_.push_back(std::move(record));
}

void Engine::revive_node(const NodeId& node) {
    auto it = nodes_.find(node);
    if (it == nodes_.end()) throw Error("revive-node: unknown node \"" + node + "\"");
    if (it->second->alive) {
        std::cerr << "warning: revive-node " << node << " at tick " << tick_ << ": already alive\n";
        return;
    }
    it->second->alive = true;
    it->second->fmm.reset();
    it->second->saved.clear();
    cluster_.set_live(node, true);
    monitor_.node_joined(node, tick_);
    elect();
}

void Engine::poison_feed(const std::string& feed, long every_n) {
    poisons_[feed] = every_n;
    for (auto& p : pipelines_) {
        if (p->plan.feed != feed || p->stages.size() < 2) continue;
        auto& stage = p->stages[p->stages.size() - 2];  // last pre-store stage
        for (auto& inst : stage.instances) {
            if (!inst) continue;
            if (auto* compute = dynamic_cast<dataflow::ComputeCore*>(&inst->meta->core()))
                compute->set_poison(every_n);
            else if (auto* intake = dynamic_cast<dataflow::IntakeCore*>(&inst->meta->core()))
                intake->set_poison(every_n);
        }
    }
}

void Engine::detect_failures() {
    for (const auto& node : monitor_.check(tick_)) {
        cluster_.set_live(node, false);
        monitor_.node_removed(node);
        elect();
        for (auto& f : failures_) {
            if (f.node == node && f.detected_tick == 0) f.detected_tick = tick_;
        }
        handle_node_failure(node);
    }
}

void Engine::handle_node_failure(const NodeId& failed) {
    struct Decision {
        std::string id;
        bool is_stub;
        enum { TerminatePlain, TerminateSaving, Recover } action;
    };
    std::vector<Decision> decisions;
    for (auto& p : pipelines_) {
        if (!p->has_instance_on(failed)) continue;
        bool store_lost = false;
        if (!p->stages.empty()) {
            for (auto& inst : p->stages.back().instances)
                if (inst && inst->role == Role::Store && inst->node == failed) store_lost = true;
        }
        if (p->is_stub) {
            // Stubs exist only to feed subscribers; rebuild them.
            decisions.push_back({p->id, true, Decision::Recover});
        } else if (store_lost) {
            decisions.push_back({p->id, false, Decision::TerminateSaving});
        } else if (!p->policy.recover_hard_failure) {
            decisions.push_back({p->id, false, Decision::TerminatePlain});
        } else {
            decisions.push_back({p->id, false, Decision::Recover});
        }
    }

    for (const auto& d : decisions) {
        if (d.action == Decision::TerminatePlain && find_pipeline(d.id) != nullptr) {
            PipelineRt* p = find_pipeline(d.id);
            do_disconnect(p->plan.feed, p->plan.dataset, true,
                          "node " + failed + " failed and recover.hard.failure=false", false);
        } else if (d.action == Decision::TerminateSaving && find_pipeline(d.id) != nullptr) {
            PipelineRt* p = find_pipeline(d.id);
            do_disconnect(p->plan.feed, p->plan.dataset, true,
                          "store node " + failed + " failed: early termination, reschedulable on rejoin",
                          true);
        }
    }
    // Creation order keeps sources ahead of the pipelines they feed, so joints
    // are rebuilt before subscribers re-attach.
    for (const auto& d : decisions) {
        if (d.action != Decision::Recover) continue;
        for (auto& p : pipelines_) {
            if (p->id == d.id && p->is_stub == d.is_stub) {
                recover_pipeline(*p, failed);
                break;
            }
        }
    }
}

void Engine::recover_pipeline(PipelineRt& p, const NodeId& failed) {
    p.state = PipelineRt::State::Recovering;
    p.resume_at = tick_ + 2;

    // Classify every instance; zombies save state, dead slots are cleared.
    for (size_t s = 0; s < p.stages.size(); ++s) {
        for (auto& inst : p.stages[s].instances) {
            if (!inst) continue;
            bool joint_feeds_live_subscribers = false;
            if (inst->output_joint != nullptr) {
                for (const auto& sub : inst->output_joint->subscribers()) {
                    auto owner_it = subscriber_pipeline_.find(sub);
                    if (owner_it == subscriber_pipeline_.end()) continue;
                    for (auto& other : pipelines_) {
                        if (other.get() == &p || other->id != owner_it->second) continue;
                        if (!other->has_instance_on(failed)) joint_feeds_live_subscribers = true;
                    }
                }
            }
            auto fate =
                fault::classify_instance(inst->node == failed, inst->role, joint_feeds_live_subscribers);
            switch (fate) {
                case fault::Fate::Dead: {
                    inst->lifecycle = dataflow::Lifecycle::Dead;
                    drop_instance(p, *inst, true, false);
                    inst.reset();
                    break;
                }
                case fault::Fate::Live: {
                    // Heads pause so the joint buffers for them; adaptor
                    // intakes keep receiving and buffer in their backlog.
                    if (!inst->source_joint_id.empty()) inst->paused = true;
                    break;
                }
                case fault::Fate::Zombie: {
                    save_zombie_state(p, *inst);
                    drop_instance(p, *inst, false, true);
                    inst.reset();
                    break;
                }
            }
        }
    }

    // Re-place cleared slots: zombies in place (their node is still live),
    // dead slots on a substitute: an idle node if one exists, else the least
    // loaded. Slots that will be re-occupied in place are reserved first so a
    // zombie's node never looks idle.
    std::map<NodeId, size_t> planned;
    for (size_t s = 0; s < p.plan.stages.size(); ++s) {
        for (size_t i = 0; i < p.plan.stages[s].cardinality; ++i) {
            if (p.stages[s].instances[i]) continue;
            const NodeId& old_node = p.plan.stages[s].nodes.at(i);
            if (cluster_.is_live(old_node)) ++planned[old_node];
        }
    }
    auto pick_substitute = [&]() -> NodeId {
        std::optional<NodeId> best_idle;
        std::optional<NodeId> best_any;
        auto planned_load = [&](const NodeId& n) { return cluster_.load(n) + planned[n]; };
        for (const auto& n : cluster_.live_nodes()) {
            if (planned_load(n) == 0 && !best_idle) best_idle = n;
            if (!best_any || planned_load(n) < planned_load(*best_any)) best_any = n;
        }
        auto choice = best_idle ? best_idle : best_any;
        if (!choice) throw Error("no live node can host a recovered instance");
        ++planned[*choice];
        return *choice;
    };

    for (size_t s = 0; s < p.plan.stages.size(); ++s) {
        auto& stage_plan = p.plan.stages[s];
        for (size_t i = 0; i < stage_plan.cardinality; ++i) {
            if (p.stages[s].instances[i]) continue;  // live instance retained in place
            NodeId old_node = stage_plan.nodes.at(i);
            if (!cluster_.is_live(old_node)) {
                if (s == 0 && !p.plan.source.from_adaptor) {
                    auto jit = joints_by_id_.find(p.plan.source.joints.at(i).id);
                    if (jit != joints_by_id_.end()) stage_plan.nodes[i] = jit->second->node();
                } else {
                    stage_plan.nodes[i] = pick_substitute();
                }
            }
        }
    }

    // Joints owned by dead instances move with their rebuilt owners.
    for (size_t s = 0; s < p.plan.stages.size(); ++s) {
        if (!p.plan.stages[s].joint_feed) continue;
        for (size_t i = 0; i < p.plan.stages[s].cardinality; ++i) {
            std::string joint_id = p.id + "/" + *p.plan.stages[s].joint_feed + "#" + std::to_string(i);
            auto it = p.joints.find(joint_id);
            if (it != p.joints.end() && it->second->node() == failed) {
                joint_registry_.remove(joint_id);
                joints_by_id_.erase(joint_id);
                p.joints.erase(it);
            }
        }
    }

    create_instances(p);
}

void Engine::resume_pipeline(PipelineRt& p) {
    for (auto& stage : p.stages)
        for (auto& inst : stage.instances)
            if (inst) inst->paused = false;
    if (p.state == PipelineRt::State::Recovering) {
        for (auto& f : failures_) {
            auto it = f.resumed_at.find(p.id);
            if (it == f.resumed_at.end() && f.first_insert_after.count(p.id)) f.resumed_at[p.id] = tick_;
        }
    }
    p.state = PipelineRt::State::Running;
}

// ---------------------------------------------------------------------------
// Tick phases
// ---------------------------------------------------------------------------

void Engine::step_generators() {
    for (auto& [tag, gen] : generators_) gen->step(tick_);
}

void Engine::drain_adaptors() {
    for (auto& p : pipelines_) {
        if (p->stages.empty() || p->halted) continue;
        for (auto& inst : p->stages[0].instances) {
            if (!inst || !inst->adaptor || inst->lifecycle != dataflow::Lifecycle::Live) continue;
            if (!node_rt(inst->node).alive) continue;
            auto batch = inst->adaptor->next_batch(tick_);
            if (!batch.records.empty()) {
                if (auto* stats = p->open_stats()) stats->entered += batch.records.size();
                node_rt(inst->node).fm.count_inflow(p->plan.feed, batch.records.size());
                for (auto& r : batch.records) {
                    if (r.encoded_size() + 12 > config_.frame_bytes) {
                        // Does not fit in a single frame: rejected at intake.
                        log_soft_failure(tick_, p->plan.feed, Role::Intake, inst->node,
                                         "record larger than one frame", r);
                        if (auto* stats = p->open_stats()) stats->soft_skipped += 1;
                        continue;
                    }
                    for (auto& done : inst->inbound.add(std::move(r))) {
                        done.set_sequence(inst->seq++);
                        inst->pre_queue.push_back(std::make_shared<dataflow::Frame>(std::move(done)));
                    }
                }
                for (auto& done : inst->inbound.flush()) {
                    done.set_sequence(inst->seq++);
                    inst->pre_queue.push_back(std::make_shared<dataflow::Frame>(std::move(done)));
                }
            }
            while (!inst->pre_queue.empty()) {
                if (inst->input->offer(inst->pre_queue.front(), tick_) == runtime::OfferOutcome::Refused)
                    break;
                inst->pre_queue.pop_front();
            }
            if (inst->adaptor->state() == adaptors::ConnectionState::FailedTerminal && !p->is_stub) {
                p->halted = true;
                pending_terminations_.push_back(
                    {p->plan.feed, p->plan.dataset,
                     "adaptor instance " + std::to_string(inst->partition_index) + " failed terminally"});
            }
        }
    }
}

// Returns false only on genuine back-pressure (a live target refused a
// frame); a dead or missing target just keeps buffering, so the other paths
// out of this instance stay live.
bool Engine::flush_backlog(PipelineRt& p, InstanceRt& inst) {
    while (!inst.reroute.empty()) {
        auto frame = inst.reroute.front();
        inst.reroute.pop_front();
        std::vector<dataflow::Frame> one;
        one.emplace_back(std::vector<dataflow::Record>(frame->records()), frame->sequence());
        if (!route_outputs(p, inst, std::move(one))) return false;
    }
    if (inst.backlog.empty()) return true;
    if (inst.stage_index + 1 >= p.stages.size()) {
        inst.backlog.clear();
        return true;
    }
    auto& targets = p.stages[inst.stage_index + 1].instances;
    for (auto it = inst.backlog.begin(); it != inst.backlog.end();) {
        auto& queue = it->second;
        size_t idx = it->first;
        while (!queue.empty()) {
            if (idx >= targets.size() || !targets[idx]) break;
            auto& target = *targets[idx];
            if (!node_rt(target.node).alive || target.lifecycle != dataflow::Lifecycle::Live) break;
            if (target.own_queue->offer(queue.front(), tick_) == runtime::OfferOutcome::Refused)
                return false;
            queue.pop_front();
        }
        it = queue.empty() ? inst.backlog.erase(it) : ++it;
    }
    return true;
}

bool Engine::route_outputs(PipelineRt& p, InstanceRt& inst, std::vector<dataflow::Frame> outputs) {
    if (outputs.empty()) return true;
    const auto& stage_plan = p.plan.stages[inst.stage_index];

    for (size_t frame_idx = 0; frame_idx < outputs.size(); ++frame_idx) {
        auto frame = std::make_shared<const dataflow::Frame>(std::move(outputs[frame_idx]));
        if (inst.output_joint != nullptr) inst.output_joint->publish(frame, tick_);

        if (stage_plan.output_connector == pipeline::ConnectorKind::None) continue;
        if (inst.stage_index + 1 >= p.stages.size()) continue;
        auto& targets = p.stages[inst.stage_index + 1].instances;
        size_t n = targets.size();
        if (n == 0) continue;

        std::vector<std::vector<dataflow::Record>> per_target(n);
        bool terminate = false;
        std::string terminate_reason;
        std::uint64_t abandoned = 0;
        for (const auto& record : frame->records()) {
            if (terminate) {
                ++abandoned;  // goes down with the feed
                continue;
            }
            size_t idx = 0;
            if (stage_plan.output_connector == pipeline::ConnectorKind::Hash) {
                try {
                    idx = dataflow::hash_partition(record, stage_plan.hash_key, n);
                } catch (const dataflow::FatalError&) {
                    throw;
                } catch (const std::exception& e) {
                    dataflow::MetaResult aux;
                    bool keep_going = inst.meta->record_failure(record, e.what(), p.policy, tick_, aux);
                    if (auto* stats = p.open_stats()) stats->soft_skipped += 1;
                    if (!keep_going) {
                        terminate = true;
                        terminate_reason = aux.terminate_reason;
                    }
                    continue;
                }
            } else {
                idx = static_cast<size_t>(inst.scatter_rng.below(n));
            }
            per_target[idx].push_back(record);
        }

        for (size_t idx = 0; idx < n; ++idx) {
            if (per_target[idx].empty()) continue;
            auto sub = std::make_shared<const dataflow::Frame>(
                dataflow::Frame(std::move(per_target[idx]), frame->sequence()));
            bool blocked_already = inst.backlog.count(idx) > 0 && !inst.backlog[idx].empty();
            if (!blocked_already && targets[idx] && node_rt(targets[idx]->node).alive &&
                targets[idx]->lifecycle == dataflow::Lifecycle::Live) {
                if (targets[idx]->own_queue->offer(sub, tick_) != runtime::OfferOutcome::Refused) continue;
            }
            inst.backlog[idx].push_back(sub);
        }

        if (terminate) {
            for (size_t j = frame_idx + 1; j < outputs.size(); ++j) abandoned += outputs[j].record_count();
            if (auto* stats = p.open_stats()) stats->teardown_dropped += abandoned;
            if (!p.is_stub && !p.halted) {
                p.halted = true;
                pending_terminations_.push_back({p.plan.feed, p.plan.dataset, terminate_reason});
            }
            return false;
        }
    }
    return true;
}

// Processes at most one frame. Returns true when work happened (frames can
// keep flowing in later sweeps this tick).
bool Engine::step_one_frame(PipelineRt& p, InstanceRt& inst) {
    auto& nrt = node_rt(inst.node);
    if (!nrt.alive || inst.paused || inst.lifecycle != dataflow::Lifecycle::Live) return false;

    // Claimed/held frames first, then the regular input.
    while (!inst.pre_queue.empty()) {
        if (inst.input->offer(inst.pre_queue.front(), tick_) == runtime::OfferOutcome::Refused) break;
        inst.pre_queue.pop_front();
    }
    if (!flush_backlog(p, inst)) return false;  // blocked downstream

    auto next_size = inst.input->peek_records();
    if (!next_size) return false;
    // Strict capacity admission: a node that has done work this tick only
    // takes a frame it can afford; an idle node always makes progress.
    std::uint64_t cost = std::max<std::uint64_t>(*next_size, 1);
    if (nrt.work_used > 0 && nrt.work_used + cost > config_.node_capacity) return false;
    auto frame = inst.input->pop();
    if (!frame) return false;
    nrt.work_used += cost;

    auto result = inst.meta->process_frame(**frame, p.policy, tick_);
    if (auto* stats = p.open_stats()) {
        stats->soft_skipped += result.failed;
        stats->udf_dropped += result.dropped;
    }
    if (inst.role == Role::Store && inst.store_core != nullptr) {
        std::uint64_t delta = inst.store_core->persisted() - inst.persisted_seen;
        inst.persisted_seen = inst.store_core->persisted();
        if (delta > 0) {
            nrt.fm.count_outflow(p.plan.feed, delta);
            window_persisted_[p.plan.feed] += delta;
            note_insert(p.id);
            if (auto* stats = p.open_stats()) stats->ingested += delta;
        }
    } else {
        route_outputs(p, inst, std::move(result.outputs));
    }
    if (result.terminate_feed) {
        // Whatever the frame still held past the terminating record goes down
        // with the feed.
        std::uint64_t consumed = result.processed + result.failed + result.dropped;
        if (auto* stats = p.open_stats(); stats != nullptr && (*frame)->record_count() > consumed)
            stats->teardown_dropped += (*frame)->record_count() - consumed;
        if (!p.is_stub && !p.halted) {
            p.halted = true;
            pending_terminations_.push_back({p.plan.feed, p.plan.dataset, result.terminate_reason});
        }
    }
    return true;
}

void Engine::step_operators() {
    for (auto& [id, rt] : nodes_) rt->work_used = 0;

    // Stable snapshot of runnable instances; terminations triggered mid-step
    // are deferred to the end of the tick. Recovering pipelines still run
    // their retained live instances (intakes, joint feeders); the successors
    // hold via their paused flag until resume.
    std::vector<std::pair<PipelineRt*, InstanceRt*>> actives;
    for (auto& p : pipelines_) {
        if (p->halted) continue;
        for (auto& stage : p->stages)
            for (auto& inst : stage.instances)
                if (inst && !inst->paused) actives.emplace_back(p.get(), inst.get());
    }
    if (actives.empty()) return;

    // Round-robin sweeps with a tick-rotated starting point, so no stage
    // systematically starves when a node's capacity binds.
    size_t rotation = static_cast<size_t>(tick_ % actives.size());
    std::vector<size_t> frames_done(actives.size(), 0);
    bool progress = true;
    while (progress) {
        progress = false;
        for (size_t k = 0; k < actives.size(); ++k) {
            auto& [p, inst] = actives[(rotation + k) % actives.size()];
            if (p->halted) continue;
            size_t slot = (rotation + k) % actives.size();
            if (frames_done[slot] >= config_.instance_quantum) continue;
            if (step_one_frame(*p, *inst)) {
                ++frames_done[slot];
                progress = true;
            }
        }
    }
}

void Engine::process_pending_terminations() {
    auto pending = std::move(pending_terminations_);
    pending_terminations_.clear();
    for (const auto& t : pending) {
        PipelineRt* p = find_pipeline(t.feed + ":" + t.dataset);
        if (p == nullptr) continue;
        p->halted = false;
        do_disconnect(t.feed, t.dataset, true, t.reason, false);
    }
}

void Engine::note_insert(const std::string& connection) {
    for (auto& f : failures_) {
        auto it = f.first_insert_after.find(connection);
        if (it == f.first_insert_after.end() || it->second != 0) continue;
        auto resumed = f.resumed_at.find(connection);
        if (resumed != f.resumed_at.end() && tick_ >= resumed->second) it->second = tick_;
    }
}

void Engine::send_heartbeats() {
    if (tick_ % monitor_.period() != 0) return;
    for (auto& [id, rt] : nodes_) {
        if (rt->alive) monitor_.heartbeat(id, tick_);
    }
}

void Engine::collect_window_reports() {
    if (tick_ == 0 || tick_ % kReportPeriodTicks != 0) return;
    std::map<std::string, bool> stats_enabled = feeds_collecting_statistics();
    std::vector<runtime::FeedReport> reports;
    std::map<std::string, std::string> instance_feeds;
    for (auto& [id, rt] : nodes_) {
        if (!rt->alive) continue;
        double occupancy = static_cast<double>(rt->fmm.allocated()) / static_cast<double>(rt->fmm.budget());
        reports.push_back(
            rt->fm.make_report(tick_ - kReportPeriodTicks, kReportPeriodTicks, occupancy, stats_enabled));
        for (const auto& [iid, feed] : rt->fm.registered()) instance_feeds[iid] = feed;
    }
    latest_view_ = runtime::collect_reports(reports, instance_feeds);
}

std::map<std::string, bool> Engine::feeds_collecting_statistics() const {
    std::map<std::string, bool> out;
    for (const auto& conn : catalog_.connections()) {
        bool collect = catalog_.resolve_policy(conn.policy).collect_statistics;
        out[conn.feed] = out.count(conn.feed) ? (out[conn.feed] || collect) : collect;
    }
    return out;
}

void Engine::close_metrics_window(Tick window_start) {
    std::map<std::string, bool> stats_enabled = feeds_collecting_statistics();

    for (auto& [node, rt] : nodes_) {
        auto window = rt->fm.take_window();
        for (auto& [feed, counters] : window) {
            bool enabled = stats_enabled.count(feed) ? stats_enabled.at(feed) : true;
            std::uint64_t inflow = enabled ? counters.inflow : 0;
            std::uint64_t outflow = enabled ? counters.outflow : 0;
            size_t stalled = 0;
            for (const auto& iid : rt->fm.stalled())
                if (rt->fm.feed_of(iid) == feed) ++stalled;
            if (inflow == 0 && outflow == 0 && stalled == 0 && counters.spilled_bytes == 0 &&
                counters.discarded == 0)
                continue;
            std::ostringstream row;
            row << window_start << "," << feed << "," << node << "," << inflow << "," << outflow << ","
                << stalled << "," << counters.spilled_bytes << "," << counters.discarded;
            csv_rows_.push_back(row.str());
        }
    }

    size_t windows_so_far = windows_closed_ + 1;
    for (auto& [feed, count] : window_persisted_) {
        auto& series = timeline_[feed];
        while (series.size() + 1 < windows_so_far) series.push_back(0);
        series.push_back(count);
    }
    for (auto& [feed, series] : timeline_) {
        while (series.size() < windows_so_far) series.push_back(0);
    }
    window_persisted_.clear();
    windows_closed_ = windows_so_far;
}

void Engine::tick() {
    run_fault_events();
    run_timed_ddl();
    detect_failures();
    for (auto& p : pipelines_) {
        if (p->state == PipelineRt::State::Recovering && tick_ >= p->resume_at) resume_pipeline(*p);
    }
    step_generators();
    drain_adaptors();
    step_operators();
    process_pending_terminations();
    ++tick_;
    send_heartbeats();
    collect_window_reports();
    if (tick_ % kMetricsWindowTicks == 0) close_metrics_window(tick_ - kMetricsWindowTicks);
}

void Engine::run_until(Tick end_tick) {
    auto start = std::chrono::steady_clock::now();
    while (tick_ < end_tick) {
        tick();
        if (config_.real_mode) {
            std::this_thread::sleep_until(start + std::chrono::milliseconds(10) * tick_);
        }
    }
}

// ---------------------------------------------------------------------------
// Accounting, metrics, logs
// ---------------------------------------------------------------------------

void Engine::finalize() {
    if (finalized_) return;
    finalized_ = true;

    if (tick_ % kMetricsWindowTicks != 0) close_metrics_window(tick_ - (tick_ % kMetricsWindowTicks));

    for (auto& p : pipelines_) {
        if (p->stats == nullptr || p->stats->closed) continue;
        std::uint64_t in_flight = 0;
        std::uint64_t spill_pending = 0;
        for (auto& stage : p->stages) {
            for (auto& inst : stage.instances) {
                if (!inst) continue;
                for (const auto& f : inst->pre_queue) in_flight += f->record_count();
                in_flight += inst->backlog_records();
                if (inst->input != nullptr) {
                    in_flight += inst->input->in_flight_records() - inst->input->spill_pending_records();
                    spill_pending += inst->input->spill_pending_records();
                }
            }
        }
        p->stats->in_flight = in_flight;
        p->stats->spilled_pending = spill_pending;
        if (p->plan.source.from_adaptor) {
            std::uint64_t outbox = 0;
            for (const auto& ep : p->plan.source.adaptor.instance_endpoints) {
                if (ep.address.rfind("sim://", 0) != 0) continue;
                if (const auto* gen = generator(ep.address.substr(6))) outbox += gen->outbox_records();
            }
            p->stats->source_outbox = outbox;
        }
    }

    // Zombie state held by Feed Managers is still in flight: a successor can
    // claim it.
    for (const auto& [node, rt] : nodes_) {
        for (const auto& [key, state] : rt->saved.all()) {
            auto it = stats_storage_.find(state.pipeline);
            if (it == stats_storage_.end()) continue;
            std::uint64_t n = 0;
            for (const auto& f : state.pending_input) n += f->record_count();
            for (const auto& f : state.pending_output) n += f->record_count();
            it->second->in_flight += n;
        }
    }

    fs::create_directories(fs::path(config_.out_dir) / "logs");
    for (const auto& [feed, text] : error_logs_) {
        std::ofstream out(fs::path(config_.out_dir) / "logs" / (sanitize(feed) + ".errors.log"));
        out << text;
    }
}

std::map<std::string, ConnectionStats> Engine::connections() const {
    std::map<std::string, ConnectionStats> out;
    for (const auto& [id, stats] : stats_storage_) out[id] = *stats;
    return out;
}

bool Engine::accounting_identity_holds() const {
    for (const auto& [id, stats] : stats_storage_) {
        if (!stats->identity_holds()) return false;
    }
    return true;
}

std::string Engine::metrics_csv() const {
    std::ostringstream out;
    out << "window_start,feed,node,inflow,outflow,stalled,spilled_bytes,discarded\n";
    for (const auto& row : csv_rows_) out << row << "\n";
    for (const auto& [id, stats] : stats_storage_) {
        out << "# totals," << stats->feed << "," << stats->dataset << ",entered=" << stats->entered
            << ",ingested=" << stats->ingested << ",discarded=" << stats->discarded
            << ",spilled_pending=" << stats->spilled_pending << ",in_flight=" << stats->in_flight
            << ",soft_skipped=" << stats->soft_skipped << ",udf_dropped=" << stats->udf_dropped
            << ",lost=" << stats->lost << ",teardown_dropped=" << stats->teardown_dropped
            << ",source_outbox=" << stats->source_outbox << "\n";
    }
    return out.str();
}

std::string Engine::metrics_path() const {
    return (fs::path(config_.out_dir) / "metrics" / (config_.run_name + ".csv")).string();
}

void Engine::write_metrics() const {
    fs::create_directories(fs::path(config_.out_dir) / "metrics");
    std::ofstream out(metrics_path());
    out << metrics_csv();
}

void Engine::log_soft_failure(Tick tick, const std::string& feed, Role role, const NodeId& node,
                              const std::string& what, const dataflow::Record& record) {
    std::ostringstream line;
    line << "tick=" << tick << " feed=" << feed << " role=" << dataflow::to_string(role) << " node=" << node
         << " error=\"" << what << "\" record=" << record.serialize() << "\n";
    error_logs_[feed] += line.str();

    bool collect = false;
    for (const auto& conn : catalog_.connections()) {
        if (conn.feed == feed && conn.state == catalog::ConnectionState::Connected)
            collect = collect || catalog_.resolve_policy(conn.policy).collect_statistics;
    }
    if (collect && storage_.has_dataset("feed_errors")) {
        dataflow::Record err;
        err.set("errorId", "e" + std::to_string(next_error_id_++));
        err.set("tick", tick);
        err.set("feed", feed);
        err.set("role", dataflow::to_string(role));
        err.set("node", node);
        err.set("message", what);
        err.set("record", record.doc());
        storage_.partition("feed_errors", 0).insert(err, *err.key("errorId"));
    }
}

std::string Engine::error_log(const std::string& feed) const {
    auto it = error_logs_.find(feed);
    return it == error_logs_.end() ? "" : it->second;
}

std::string Engine::show_pipelines() const {
    std::ostringstream out;
    for (const auto& p : pipelines_) {
        out << pipeline::render_plan(p->plan);
        if (p->is_stub) out << "  state: stub (disconnected; joints retained for subscribers)\n";
        if (p->state == PipelineRt::State::Recovering) out << "  state: recovering\n";
    }
    if (pipelines_.empty()) out << "(no pipelines)\n";
    return out.str();
}

}  // namespace feedmesh
