#include "feedmesh/record.hpp"

namespace feedmesh::dataflow {

Record Record::parse(std::string_view text) {
    nlohmann::json doc = nlohmann::json::parse(text);
    if (!doc.is_object()) throw Error("record is not a JSON object");
    return Record(std::move(doc));
}

const nlohmann::json* Record::find(std::string_view name) const {
    const nlohmann::json* cur = &doc_;
    size_t start = 0;
    while (true) {
        size_t dot = name.find('.', start);
        std::string_view part = name.substr(start, dot == std::string_view::npos ? dot : dot - start);
        if (!cur->is_object()) return nullptr;
        auto it = cur->find(std::string(part));
        if (it == cur->end()) return nullptr;
        cur = &*it;
        if (dot == std::string_view::npos) return cur;
        start = dot + 1;
    }
}

std::optional<std::string> Record::key(std::string_view field) const {
    const nlohmann::json* v = find(field);
    if (v == nullptr || v->is_null()) return std::nullopt;
    if (v->is_string()) return v->get<std::string>();
    return v->dump();
}

}  // namespace feedmesh::dataflow
