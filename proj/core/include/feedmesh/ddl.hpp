#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "feedmesh/catalog.hpp"

namespace feedmesh::ddl {

struct CreateType {
    catalog::RecordType type;
};

struct CreateDataset {
    std::string name;
    std::string record_type;
    std::string primary_key;
    std::vector<NodeId> nodegroup;  // empty = default (all cluster nodes)
};

struct CreateIndex {
    std::string index_name;
    std::string dataset;
    std::string field;
};

struct CreateFeed {
    std::string name;
    std::string adaptor;
    std::map<std::string, std::string> config;
    std::optional<std::string> udf;
};

struct CreateSecondaryFeed {
    std::string name;
    std::string parent;
    std::optional<std::string> udf;
};

struct CreatePolicy {
    std::string name;
    std::string base;
    std::vector<std::pair<std::string, std::string>> overrides;
};

struct ConnectFeed {
    std::string feed;
    std::string dataset;
    std::optional<std::string> policy;
};

struct DisconnectFeed {
    std::string feed;
    std::string dataset;
};

struct ShowCatalog {};
struct ShowPipelines {};

using Statement = std::variant<CreateType, CreateDataset, CreateIndex, CreateFeed, CreateSecondaryFeed,
                               CreatePolicy, ConnectFeed, DisconnectFeed, ShowCatalog, ShowPipelines>;

// Parses exactly one ';'-terminated statement. Throws ParseError with line and
// column on malformed input.
Statement parse_statement(const std::string& text);

// Splits a script into ';'-terminated statement texts, dropping '--' comments.
std::vector<std::string> split_statements(const std::string& script);

// Action requests emitted by connect/disconnect statements, to be consumed by
// the pipeline layer. Create statements are pure metadata.
struct ConnectAction {
    std::string feed;
    std::string dataset;
    std::string policy;  // resolved name
};
struct DisconnectAction {
    std::string feed;
    std::string dataset;
};
struct ShowCatalogAction {};
struct ShowPipelinesAction {};

using Action = std::variant<ConnectAction, DisconnectAction, ShowCatalogAction, ShowPipelinesAction>;

// The UDF names known to the host; apply_statement validates `apply function`
// clauses against it.
using FunctionNames = std::vector<std::string>;

// Mutates the catalog; returns an action for the pipeline layer when the
// statement has a runtime side (connect/disconnect/show).
std::optional<Action> apply_statement(const Statement& stmt, catalog::Catalog& cat,
                                      const FunctionNames& functions);

}  // namespace feedmesh::ddl
