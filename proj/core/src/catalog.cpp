#include "feedmesh/catalog.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace feedmesh::catalog {

std::string to_string(FieldKind kind) {
    switch (kind) {
        case FieldKind::String: return "string";
        case FieldKind::Int: return "int32";
        case FieldKind::Double: return "double";
        case FieldKind::Point: return "point";
        case FieldKind::Datetime: return "datetime";
        case FieldKind::StringBag: return "{{string}}";
    }
    return "?";
}

std::optional<FieldKind> field_kind_from(const std::string& word) {
    if (word == "string") return FieldKind::String;
    if (word == "int32" || word == "int") return FieldKind::Int;
    if (word == "double") return FieldKind::Double;
    if (word == "point") return FieldKind::Point;
    if (word == "datetime") return FieldKind::Datetime;
    return std::nullopt;
}

const FieldDef* RecordType::find_field(const std::string& field) const {
    for (const auto& f : fields)
        if (f.name == field) return &f;
    return nullptr;
}

namespace {

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw Error("policy parameter " + key + " expects true/false, got \"" + value + "\"");
}

Limit parse_limit(const std::string& value, const std::string& key) {
    if (value == "unlimited") return std::nullopt;
    try {
        size_t pos = 0;
        std::uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw Error("");
        return v;
    } catch (...) {
        throw Error("policy parameter " + key + " expects an integer or unlimited, got \"" + value + "\"");
    }
}

}  // namespace

void IngestionPolicy::set_parameter(const std::string& key, const std::string& value) {
    if (key == "excess.records.spill")
        excess_records_spill = parse_bool(value, key);
    else if (key == "excess.records.discard")
        excess_records_discard = parse_bool(value, key);
    else if (key == "max.spill.bytes")
        max_spill_bytes = parse_limit(value, key);
    else if (key == "recover.soft.failure")
        recover_soft_failure = parse_bool(value, key);
    else if (key == "recover.hard.failure")
        recover_hard_failure = parse_bool(value, key);
    else if (key == "max.consecutive.skipped")
        max_consecutive_skipped = parse_limit(value, key);
    else if (key == "collect.statistics")
        collect_statistics = parse_bool(value, key);
    else
        throw Error("unknown policy parameter \"" + key + "\"");
}

IngestionPolicy basic_policy() {
    IngestionPolicy p;
    p.name = "Basic";
    p.excess_records_spill = false;
    p.excess_records_discard = true;
    p.recover_soft_failure = false;
    p.recover_hard_failure = false;
    p.collect_statistics = false;
    return p;
}

IngestionPolicy monitored_policy() {
    IngestionPolicy p = basic_policy();
    p.name = "Monitored";
    p.collect_statistics = true;
    return p;
}

IngestionPolicy fault_tolerant_policy() {
    IngestionPolicy p;
    p.name = "Fault-Tolerant";
    p.excess_records_spill = true;
    p.excess_records_discard = false;
    p.recover_soft_failure = true;
    p.recover_hard_failure = true;
    p.collect_statistics = true;
    return p;
}

Catalog::Catalog() {
    for (auto p : {basic_policy(), monitored_policy(), fault_tolerant_policy()}) policies_.emplace(p.name, p);
}

const RecordType* Catalog::find_type(const std::string& name) const {
    auto it = types_.find(name);
    return it == types_.end() ? nullptr : &it->second;
}

const DatasetDef* Catalog::find_dataset(const std::string& name) const {
    auto it = datasets_.find(name);
    return it == datasets_.end() ? nullptr : &it->second;
}

const FeedDefinition* Catalog::find_feed(const std::string& name) const {
    auto it = feeds_.find(name);
    return it == feeds_.end() ? nullptr : &it->second;
}

const ConnectionEntry* Catalog::find_connection(const std::string& feed, const std::string& dataset) const {
    for (const auto& c : connections_)
        if (c.feed == feed && c.dataset == dataset) return &c;
    return nullptr;
}

void Catalog::add_type(RecordType t) { types_.emplace(t.name, std::move(t)); }
void Catalog::add_dataset(DatasetDef d) { datasets_.emplace(d.name, std::move(d)); }
void Catalog::add_feed(FeedDefinition f) { feeds_.emplace(f.name, std::move(f)); }
void Catalog::add_policy(IngestionPolicy p) { policies_.emplace(p.name, std::move(p)); }

void Catalog::set_secondary_index(const std::string& dataset, const std::string& field) {
    datasets_.at(dataset).secondary_index = field;
}

void Catalog::set_nodegroup(const std::string& dataset, std::vector<NodeId> nodes) {
    datasets_.at(dataset).nodegroup = std::move(nodes);
}

void Catalog::set_connection(const std::string& feed, const std::string& dataset, const std::string& policy,
                             ConnectionState state) {
    for (auto& c : connections_) {
        if (c.feed == feed && c.dataset == dataset) {
            c.state = state;
            c.policy = policy;
            return;
        }
    }
    connections_.push_back({feed, dataset, policy, state});
}

const IngestionPolicy& Catalog::resolve_policy(const std::optional<std::string>& name) const {
    std::string wanted = name.value_or("Monitored");
    // The fault-tolerant built-in is commonly written without the hyphen.
    if (wanted == "FaultTolerant") wanted = "Fault-Tolerant";
    auto it = policies_.find(wanted);
    if (it == policies_.end()) throw Error("unknown policy \"" + wanted + "\"");
    return it->second;
}

std::vector<const FeedDefinition*> Catalog::lineage(const std::string& feed) const {
    std::vector<const FeedDefinition*> chain;
    std::set<std::string> seen;
    const FeedDefinition* cur = find_feed(feed);
    if (cur == nullptr) throw Error("unknown feed \"" + feed + "\"");
    while (true) {
        if (!seen.insert(cur->name).second) throw Error("cyclic secondary-feed chain at \"" + cur->name + "\"");
        chain.push_back(cur);
        if (cur->kind == FeedKind::Primary) break;
        cur = find_feed(*cur->parent_feed);
        if (cur == nullptr) throw Error("unknown feed \"" + chain.back()->parent_feed.value() + "\"");
    }
    std::reverse(chain.begin(), chain.end());
    return chain;
}

std::vector<std::string> Catalog::udf_chain(const std::string& ancestor, const std::string& feed) const {
    auto chain = lineage(feed);
    std::vector<std::string> udfs;
    bool past_ancestor = false;
    for (const auto* f : chain) {
        if (past_ancestor && f->udf) udfs.push_back(*f->udf);
        if (f->name == ancestor) past_ancestor = true;
    }
    if (!past_ancestor && ancestor != feed) throw Error("\"" + ancestor + "\" is not an ancestor of \"" + feed + "\"");
    return udfs;
}

std::string Catalog::dump() const {
    std::ostringstream out;
    out << "types:\n";
    for (const auto& [name, t] : types_) {
        out << "  " << name << " (open) {";
        bool first = true;
        for (const auto& f : t.fields) {
            out << (first ? " " : ", ") << f.name << ": " << to_string(f.kind) << (f.optional ? "?" : "");
            first = false;
        }
        out << " }\n";
    }
    out << "datasets:\n";
    for (const auto& [name, d] : datasets_) {
        out << "  " << name << "(" << d.record_type << ") primary key " << d.primary_key;
        if (!d.nodegroup.empty()) {
            out << " nodegroup [";
            for (size_t i = 0; i < d.nodegroup.size(); ++i) out << (i ? ", " : "") << d.nodegroup[i];
            out << "]";
        }
        if (d.secondary_index) out << " index on " << *d.secondary_index;
        out << "\n";
    }
    out << "feeds:\n";
    for (const auto& [name, f] : feeds_) {
        out << "  " << name;
        if (f.kind == FeedKind::Primary) {
            out << " using " << f.adaptor->name;
        } else {
            out << " from feed " << *f.parent_feed;
        }
        if (f.udf) out << " apply function " << *f.udf;
        out << "\n";
    }
    out << "policies:\n";
    for (const auto& [name, p] : policies_) {
        auto limit = [](const Limit& l) { return l ? std::to_string(*l) : std::string("unlimited"); };
        out << "  " << name << " spill=" << (p.excess_records_spill ? "true" : "false")
            << " discard=" << (p.excess_records_discard ? "true" : "false")
            << " max_spill_bytes=" << limit(p.max_spill_bytes)
            << " soft=" << (p.recover_soft_failure ? "true" : "false")
            << " hard=" << (p.recover_hard_failure ? "true" : "false")
            << " max_skipped=" << limit(p.max_consecutive_skipped)
            << " stats=" << (p.collect_statistics ? "true" : "false") << "\n";
    }
    out << "connections:\n";
    for (const auto& c : connections_) {
        out << "  " << c.feed << " -> " << c.dataset << " [" << c.policy << "] "
            << (c.state == ConnectionState::Connected ? "connected" : "disconnected") << "\n";
    }
    return out.str();
}

bool Catalog::operator==(const Catalog& other) const {
    return dump() == other.dump();
}

}  // namespace feedmesh::catalog
