#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

#include "feedmesh/common.hpp"

namespace feedmesh::dataflow {

// A feed record is a JSON document. nlohmann's ordinary json keeps object keys
// sorted, which makes every serialization deterministic.
class Record {
public:
    Record() : doc_(nlohmann::json::object()) {}
    explicit Record(nlohmann::json doc) : doc_(std::move(doc)) {}

    static Record parse(std::string_view text);

    const nlohmann::json& doc() const { return doc_; }
    nlohmann::json& doc() { return doc_; }

    // Field lookup; `name` may be a dotted path (user.screen-name).
    const nlohmann::json* find(std::string_view name) const;
    bool has(std::string_view name) const { return find(name) != nullptr; }

    void set(const std::string& name, nlohmann::json value) { doc_[name] = std::move(value); }

    // Primary/secondary key extraction: the canonical string form of the field
    // value. Returns nullopt when the field is missing or null.
    std::optional<std::string> key(std::string_view field) const;

    std::string serialize() const { return doc_.dump(); }
    size_t encoded_size() const { return serialize().size(); }

    bool operator==(const Record& other) const { return doc_ == other.doc_; }

private:
    nlohmann::json doc_;
};

}  // namespace feedmesh::dataflow
