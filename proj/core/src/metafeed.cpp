#include "feedmesh/metafeed.hpp"

namespace feedmesh::dataflow {

std::string to_string(Role role) {
    switch (role) {
        case Role::Intake: return "intake";
        case Role::Compute: return "compute";
        case Role::Store: return "store";
    }
    return "?";
}

size_t hash_partition_key(const std::string& key, size_t n_partitions) {
    if (n_partitions == 0) throw FatalError("hash_partition with zero partitions");
    return static_cast<size_t>(stable_hash(key) % n_partitions);
}

size_t hash_partition(const Record& record, const std::string& key_field, size_t n_partitions) {
    auto key = record.key(key_field);
    if (!key) throw Error("missing partition key field \"" + key_field + "\"");
    return hash_partition_key(*key, n_partitions);
}

bool value_matches_kind(const nlohmann::json& value, catalog::FieldKind kind) {
    using catalog::FieldKind;
    switch (kind) {
        case FieldKind::String: return value.is_string();
        case FieldKind::Int: return value.is_number_integer();
        case FieldKind::Double: return value.is_number();
        case FieldKind::Datetime: return value.is_string() && !value.get<std::string>().empty();
        case FieldKind::Point:
            return value.is_array() && value.size() == 2 && value[0].is_number() && value[1].is_number();
        case FieldKind::StringBag: {
            if (!value.is_array()) return false;
            for (const auto& item : value)
                if (!item.is_string()) return false;
            return true;
        }
    }
    return false;
}

std::optional<std::string> check_against_type(const Record& record, const catalog::RecordType& type) {
    for (const auto& field : type.fields) {
        const auto* value = record.find(field.name);
        if (value == nullptr || value->is_null()) {
            if (field.optional) continue;
            return "missing required field \"" + field.name + "\"";
        }
        if (!value_matches_kind(*value, field.kind)) {
            return "field \"" + field.name + "\" does not match kind " + catalog::to_string(field.kind);
        }
    }
    return std::nullopt;
}

std::optional<Record> IntakeCore::process(const Record& record) {
    if (poison_every_ > 0 && ++seen_ % poison_every_ == 0) throw Error("poisoned intake");
    return record;
}

std::optional<Record> ComputeCore::process(const Record& record) {
    if (poison_every_ > 0 && ++seen_ % poison_every_ == 0) throw Error("poisoned udf");
    Record current = record;
    for (const auto& fn : chain_) {
        auto next = fn(current);
        if (!next) return std::nullopt;
        current = std::move(*next);
    }
    return current;
}

std::optional<Record> StoreCore::process(const Record& record) {
    if (type_ != nullptr) {
        if (auto violation = check_against_type(record, *type_)) throw Error(*violation);
    }
    auto key = record.key(primary_key_);
    if (!key) throw Error("missing primary key field \"" + primary_key_ + "\"");
    if (hash_partition_key(*key, partition_count_) != partition_->index())
        throw FatalError("record routed to wrong partition: key " + *key);
    partition_->insert(record, *key);
    ++persisted_;
    return record;
}

bool MetaFeedOperator::record_failure(const Record& record, const std::string& what,
                                      const catalog::IngestionPolicy& policy, Tick now, MetaResult& result) {
    ++total_failures_;
    ++result.failed;
    ++consecutive_skipped_;
    if (sink_ != nullptr) sink_->log_soft_failure(now, feed_, role_, node_, what, record);
    if (!policy.recover_soft_failure) {
        result.terminate_feed = true;
        result.terminate_reason = "soft failure with recover.soft.failure=false: " + what;
        return false;
    }
    if (policy.max_consecutive_skipped && consecutive_skipped_ > *policy.max_consecutive_skipped) {
        result.terminate_feed = true;
        result.terminate_reason = "skip bound exceeded (" + std::to_string(consecutive_skipped_) +
                                  " consecutive records skipped)";
        return false;
    }
    return true;
}

MetaResult MetaFeedOperator::process_frame(const Frame& frame, const catalog::IngestionPolicy& policy,
                                           Tick now) {
    MetaResult result;
    FrameBuilder builder(frame_capacity_);

    // Record-wise application; an exception at record i leaves records
    // 0..i-1 already emitted and continues with the subset i+1..end.
    for (const auto& record : frame.records()) {
        std::optional<Record> out;
        try {
            out = core_->process(record);
        } catch (const FatalError&) {
            throw;
        } catch (const std::exception& e) {
            if (!record_failure(record, e.what(), policy, now, result)) {
                // Terminating: records accepted before the failure still flow.
                for (auto& done : builder.flush()) result.outputs.push_back(std::move(done));
                for (auto& o : result.outputs) o.set_sequence(frame.sequence());
                return result;
            }
            continue;
        }
        consecutive_skipped_ = 0;
        if (!out) {
            ++result.dropped;
            continue;
        }
        ++result.processed;
        for (auto& done : builder.add(std::move(*out))) result.outputs.push_back(std::move(done));
    }
    for (auto& done : builder.flush()) result.outputs.push_back(std::move(done));

    // The wrapped pipeline keeps the origin ordering visible downstream.
    for (auto& out : result.outputs) out.set_sequence(frame.sequence());
    return result;
}

}  // namespace feedmesh::dataflow
