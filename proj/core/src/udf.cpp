#include "feedmesh/udf.hpp"

#include <memory>
#include <sstream>

namespace feedmesh::udf {

void FunctionRegistry::register_function(const std::string& name, Factory factory) {
    factories_[name] = std::move(factory);
}

bool FunctionRegistry::contains(const std::string& name) const {
    size_t paren = name.find('(');
    return factories_.count(paren == std::string::npos ? name : name.substr(0, paren)) > 0;
}

Function FunctionRegistry::make(const std::string& spec) const {
    std::string base = spec;
    long arg = 0;
    bool has_arg = false;
    size_t paren = spec.find('(');
    if (paren != std::string::npos) {
        if (spec.back() != ')') throw Error("malformed function spec \"" + spec + "\"");
        base = spec.substr(0, paren);
        arg = std::stol(spec.substr(paren + 1, spec.size() - paren - 2));
        has_arg = true;
    }
    auto it = factories_.find(base);
    if (it == factories_.end()) throw Error("unknown function \"" + base + "\"");
    return it->second(arg, has_arg);
}

std::vector<std::string> FunctionRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : factories_) out.push_back(name);
    return out;
}

std::optional<dataflow::Record> add_hash_tags(const dataflow::Record& in) {
    dataflow::Record out = in;
    auto& doc = out.doc();

    std::vector<std::string> topics;
    if (const auto* text = in.find("message-text"); text != nullptr && text->is_string()) {
        std::istringstream words(text->get<std::string>());
        std::string word;
        while (words >> word) {
            if (word.size() > 1 && word[0] == '#') topics.push_back(word.substr(1));
        }
    }
    doc["referred-topics"] = topics;

    if (const auto* screen_name = in.find("user.screen-name"); screen_name != nullptr) {
        doc["userId"] = *screen_name;
    }
    doc.erase("user");
    return out;
}

FunctionRegistry FunctionRegistry::with_builtins() {
    FunctionRegistry reg;
    reg.register_function("identity", [](long, bool) -> Function {
        return [](const dataflow::Record& r) { return r; };
    });
    reg.register_function("addHashTags", [](long, bool) -> Function { return add_hash_tags; });
    reg.register_function("failEvery", [](long n, bool has_arg) -> Function {
        if (!has_arg || n <= 0) throw Error("failEvery requires a positive argument");
        auto counter = std::make_shared<long>(0);
        return [n, counter](const dataflow::Record& r) -> std::optional<dataflow::Record> {
            if (++*counter % n == 0) throw Error("failEvery(" + std::to_string(n) + ") poison");
            return r;
        };
    });
    return reg;
}

}  // namespace feedmesh::udf
