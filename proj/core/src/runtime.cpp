#include "feedmesh/runtime.hpp"

#include <algorithm>

namespace feedmesh::runtime {

size_t FeedMemoryManager::request(size_t n) {
    size_t want = std::min(n, grant_cap_);
    if (want == 0) return 0;
    size_t current = allocated_.load(std::memory_order_relaxed);
    while (true) {
        if (current >= budget_) return 0;
        size_t k = std::min(want, budget_ - current);
        if (allocated_.compare_exchange_weak(current, current + k, std::memory_order_relaxed)) {
            size_t now = current + k;
            if (now > budget_) violations_.fetch_add(1, std::memory_order_relaxed);
            size_t peak = peak_.load(std::memory_order_relaxed);
            while (now > peak && !peak_.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
            }
            return k;
        }
    }
}

void FeedMemoryManager::release(size_t n) { allocated_.fetch_sub(n, std::memory_order_relaxed); }

void FeedManager::register_instance(const std::string& instance_id, const std::string& feed) {
    instances_[instance_id] = feed;
}

void FeedManager::deregister_instance(const std::string& instance_id) {
    instances_.erase(instance_id);
    stalled_.erase(instance_id);
}

CongestionAction FeedManager::handle_stalled(const std::string& instance_id,
                                             const catalog::IngestionPolicy& policy, size_t incoming_bytes,
                                             Tick now) {
    stalled_.insert(instance_id);
    auto& ledger = ledgers_[instance_id];
    if (policy.excess_records_spill) {
        bool within_limit =
            !policy.max_spill_bytes || ledger.spilled_bytes + incoming_bytes <= *policy.max_spill_bytes;
        if (within_limit) return CongestionAction::Spill;
    }
    if (policy.excess_records_discard) return CongestionAction::Discard;
    auto feed = instances_.find(instance_id);
    escalations_.push_back({now, instance_id, feed == instances_.end() ? "?" : feed->second});
    return CongestionAction::Escalate;
}

void FeedManager::mark_stalled(const std::string& instance_id, bool stalled) {
    if (stalled)
        stalled_.insert(instance_id);
    else
        stalled_.erase(instance_id);
}

void FeedManager::note_spilled(const std::string& instance_id, std::uint64_t bytes) {
    auto& l = ledgers_[instance_id];
    l.spilled_bytes += bytes;
    l.spilled_frames += 1;
}

void FeedManager::note_replayed(const std::string& instance_id) { ledgers_[instance_id].replayed_frames += 1; }

void FeedManager::note_discarded(const std::string& instance_id, std::uint64_t records) {
    ledgers_[instance_id].discarded_records += records;
}

const SpillLedger& FeedManager::ledger(const std::string& instance_id) const {
    static const SpillLedger kEmpty;
    auto it = ledgers_.find(instance_id);
    return it == ledgers_.end() ? kEmpty : it->second;
}

void FeedManager::count_inflow(const std::string& feed, std::uint64_t records) {
    window_[feed].inflow += records;
    report_window_[feed].inflow += records;
}
void FeedManager::count_outflow(const std::string& feed, std::uint64_t records) {
    window_[feed].outflow += records;
    report_window_[feed].outflow += records;
}
void FeedManager::count_spilled_bytes(const std::string& feed, std::uint64_t bytes) {
    window_[feed].spilled_bytes += bytes;
    report_window_[feed].spilled_bytes += bytes;
}
void FeedManager::count_discarded(const std::string& feed, std::uint64_t records) {
    window_[feed].discarded += records;
    report_window_[feed].discarded += records;
}

std::map<std::string, WindowCounters> FeedManager::take_window() {
    std::map<std::string, WindowCounters> out;
    out.swap(window_);
    return out;
}

std::string FeedManager::feed_of(const std::string& instance_id) const {
    auto it = instances_.find(instance_id);
    return it == instances_.end() ? "?" : it->second;
}

FeedReport FeedManager::make_report(Tick window_start, Tick window_ticks, double queue_occupancy,
                                    const std::map<std::string, bool>& feed_stats_enabled) {
    FeedReport report;
    report.node = node_;
    report.window_start = window_start;
    double seconds = static_cast<double>(window_ticks) / kTicksPerSecond;
    double spill_bytes = 0;
    for (const auto& [feed, counters] : report_window_) {
        spill_bytes += static_cast<double>(counters.spilled_bytes);
        auto enabled = feed_stats_enabled.find(feed);
        if (enabled != feed_stats_enabled.end() && !enabled->second) continue;  // omitted from rate table
        report.inflow_rate[feed] = static_cast<double>(counters.inflow) / seconds;
        report.outflow_rate[feed] = static_cast<double>(counters.outflow) / seconds;
    }
    report.cpu_utilization = queue_occupancy;
    report.disk_utilization = spill_bytes > 0 ? 1.0 : 0.0;
    report.stalled_instances.assign(stalled_.begin(), stalled_.end());
    report_window_.clear();
    return report;
}

std::optional<NodeId> elect_leader(const std::vector<NodeId>& live_nodes) {
    if (live_nodes.empty()) return std::nullopt;
    return *std::min_element(live_nodes.begin(), live_nodes.end());
}

GlobalView collect_reports(const std::vector<FeedReport>& reports,
                           const std::map<std::string, std::string>& instance_feeds) {
    GlobalView view;
    for (const auto& report : reports) {
        view.window_start = report.window_start;
        view.reporting_nodes.push_back(report.node);
        for (const auto& [feed, rate] : report.inflow_rate) view.inflow_rate[feed] += rate;
        for (const auto& [feed, rate] : report.outflow_rate) view.outflow_rate[feed] += rate;
        for (const auto& instance : report.stalled_instances) {
            auto feed = instance_feeds.find(instance);
            view.stalled.push_back(
                {instance, report.node, feed == instance_feeds.end() ? "?" : feed->second});
        }
    }
    return view;
}

}  // namespace feedmesh::runtime
