#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "feedmesh/record.hpp"

namespace feedmesh::udf {

// Pre-processing function contract: record in, record out, nullopt to drop.
// A thrown exception is a soft failure handled by the MetaFeed sandbox.
using Function = std::function<std::optional<dataflow::Record>(const dataflow::Record&)>;

// Host-registered functions, addressable from DDL `apply function` clauses.
// Names may carry one integer argument, e.g. "failEvery(3)". make() returns a
// fresh instance so stateful functions never share counters across operator
// instances.
class FunctionRegistry {
public:
    using Factory = std::function<Function(long arg, bool has_arg)>;

    void register_function(const std::string& name, Factory factory);
    bool contains(const std::string& name) const;
    Function make(const std::string& spec) const;
    std::vector<std::string> names() const;

    // addHashTags, identity, failEvery(n).
    static FunctionRegistry with_builtins();

private:
    std::map<std::string, Factory> factories_;
};

// Extracts '#'-prefixed tokens of message-text into referred-topics and copies
// user.screen-name to userId, replacing the nested user object.
std::optional<dataflow::Record> add_hash_tags(const dataflow::Record& in);

}  // namespace feedmesh::udf
