#include "feedmesh/storage.hpp"

#include <cassert>
#include <filesystem>
#include <fstream>

namespace feedmesh::storage {

void DatasetPartition::unlink_secondary(const std::string& key, const Record& old_record) {
    if (!secondary_field_) return;
    auto old_value = old_record.key(*secondary_field_);
    if (!old_value) return;
    auto it = secondary_.find(*old_value);
    if (it == secondary_.end()) return;
    it->second.erase(key);
    if (it->second.empty()) secondary_.erase(it);
}

void DatasetPartition::insert(const Record& record, const std::string& key) {
    auto it = primary_.find(key);
    if (it != primary_.end()) {
        unlink_secondary(key, it->second);
        it->second = record;
    } else {
        primary_.emplace(key, record);
    }
    if (secondary_field_) {
        auto value = record.key(*secondary_field_);
        if (value) {
            secondary_[*value].insert(key);
        } else {
            ++missing_secondary_;
        }
    }
}

std::map<std::string, std::set<std::string>> DatasetPartition::rebuild_secondary() const {
    std::map<std::string, std::set<std::string>> rebuilt;
    if (!secondary_field_) return rebuilt;
    for (const auto& [key, record] : primary_) {
        auto value = record.key(*secondary_field_);
        if (value) rebuilt[*value].insert(key);
    }
    return rebuilt;
}

std::string DatasetPartition::snapshot_ndjson() const {
    std::string out;
    for (const auto& [key, record] : primary_) {
        out += record.serialize();
        out += '\n';
    }
    return out;
}

void StorageManager::create_dataset(const catalog::DatasetDef& def, const std::vector<NodeId>& nodegroup) {
    if (partitions_.count(def.name)) return;  // idempotent; partitions persist across reconnects
    auto& parts = partitions_[def.name];
    for (size_t i = 0; i < nodegroup.size(); ++i) {
        parts.push_back(std::make_unique<DatasetPartition>(def.name, i, nodegroup[i], def.primary_key,
                                                           def.secondary_index));
    }
}

void StorageManager::drop_dataset(const std::string& name) { partitions_.erase(name); }

DatasetPartition& StorageManager::partition(const std::string& dataset, size_t index) {
    return *partitions_.at(dataset).at(index);
}

const std::vector<std::unique_ptr<DatasetPartition>>& StorageManager::partitions(
    const std::string& dataset) const {
    return partitions_.at(dataset);
}

size_t StorageManager::partition_count(const std::string& dataset) const {
    auto it = partitions_.find(dataset);
    return it == partitions_.end() ? 0 : it->second.size();
}

std::uint64_t StorageManager::count(const std::string& dataset) const {
    auto it = partitions_.find(dataset);
    if (it == partitions_.end()) return 0;
    std::uint64_t total = 0;
    for (const auto& p : it->second) total += p->size();
    return total;
}

std::vector<Record> StorageManager::scan(const std::string& dataset,
                                         const std::function<bool(const Record&)>& predicate) const {
    std::vector<Record> out;
    auto it = partitions_.find(dataset);
    if (it == partitions_.end()) return out;
    for (const auto& p : it->second) {
        for (const auto& [key, record] : p->rows()) {
            if (!predicate || predicate(record)) out.push_back(record);
        }
    }
    return out;
}

std::vector<Record> StorageManager::lookup_secondary(const std::string& dataset,
                                                     const std::string& value) const {
    std::vector<Record> out;
    auto it = partitions_.find(dataset);
    if (it == partitions_.end()) return out;
    for (const auto& p : it->second) {
        auto hit = p->secondary().find(value);
        if (hit == p->secondary().end()) continue;
        for (const auto& key : hit->second) out.push_back(p->rows().at(key));
    }
    return out;
}

std::set<std::string> StorageManager::key_set(const std::string& dataset) const {
    std::set<std::string> keys;
    auto it = partitions_.find(dataset);
    if (it == partitions_.end()) return keys;
    for (const auto& p : it->second) {
        for (const auto& [key, record] : p->rows()) keys.insert(key);
    }
    return keys;
}

void StorageManager::snapshot(const std::string& dataset, const std::string& root) const {
    auto it = partitions_.find(dataset);
    if (it == partitions_.end()) return;
    std::filesystem::path dir = std::filesystem::path(root) / "data" / dataset;
    std::filesystem::create_directories(dir);
    for (const auto& p : it->second) {
        std::ofstream out(dir / (std::to_string(p->index()) + ".ndjson"));
        out << p->snapshot_ndjson();
    }
}

}  // namespace feedmesh::storage
