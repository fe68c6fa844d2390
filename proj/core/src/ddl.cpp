#include "feedmesh/ddl.hpp"

#include <cctype>

namespace feedmesh::ddl {

namespace {

enum class TokKind { Ident, Number, String, Punct, End };

struct Token {
    TokKind kind;
    std::string text;
    int line;
    int column;
};

class Lexer {
public:
    explicit Lexer(const std::string& text) : text_(text) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_space();
            if (pos_ >= text_.size()) break;
            char c = text_[pos_];
            int line = line_, col = col_;
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::string word;
                while (pos_ < text_.size()) {
                    char d = text_[pos_];
                    if (std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '-') {
                        word += d;
                        advance();
                    } else {
                        break;
                    }
                }
                out.push_back({TokKind::Ident, word, line, col});
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                std::string num;
                bool dot = false;
                while (pos_ < text_.size()) {
                    char d = text_[pos_];
                    if (std::isdigit(static_cast<unsigned char>(d)) || (d == '.' && !dot)) {
                        if (d == '.') dot = true;
                        num += d;
                        advance();
                    } else {
                        break;
                    }
                }
                out.push_back({TokKind::Number, num, line, col});
            } else if (c == '"') {
                advance();
                std::string body;
                while (pos_ < text_.size() && text_[pos_] != '"') {
                    if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) advance();
                    body += text_[pos_];
                    advance();
                }
                if (pos_ >= text_.size()) throw ParseError("unterminated string literal", line, col);
                advance();  // closing quote
                out.push_back({TokKind::String, body, line, col});
            } else if (std::string("(){},:;?=").find(c) != std::string::npos) {
                out.push_back({TokKind::Punct, std::string(1, c), line, col});
                advance();
            } else {
                throw ParseError(std::string("unexpected character '") + c + "'", line, col);
            }
        }
        out.push_back({TokKind::End, "", line_, col_});
        return out;
    }

private:
    void skip_space() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '-' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '-') {
                while (pos_ < text_.size() && text_[pos_] != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    void advance() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    const std::string& text_;
    size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    Statement parse() {
        Statement stmt = statement();
        expect_punct(";");
        if (!at(TokKind::End)) fail("trailing input after ';'");
        return stmt;
    }

private:
    Statement statement() {
        if (accept_word("create")) {
            if (accept_word("type")) return create_type();
            if (accept_word("dataset")) return create_dataset();
            if (accept_word("index")) return create_index();
            if (accept_word("feed")) return create_feed();
            if (accept_word("secondary")) {
                expect_word("feed");
                return create_secondary_feed();
            }
            if (accept_word("policy")) return create_policy();
            fail("unknown statement form after 'create'");
        }
        if (accept_word("connect")) {
            expect_word("feed");
            ConnectFeed s;
            s.feed = ident("feed name");
            expect_word("to");
            expect_word("dataset");
            s.dataset = ident("dataset name");
            if (accept_word("using")) {
                expect_word("policy");
                s.policy = ident("policy name");
            }
            return s;
        }
        if (accept_word("disconnect")) {
            expect_word("feed");
            DisconnectFeed s;
            s.feed = ident("feed name");
            expect_word("from");
            expect_word("dataset");
            s.dataset = ident("dataset name");
            return s;
        }
        if (accept_word("show")) {
            if (accept_word("catalog")) return ShowCatalog{};
            if (accept_word("pipelines")) return ShowPipelines{};
            fail("unknown statement form after 'show'");
        }
        fail("unknown statement form");
    }

    Statement create_type() {
        CreateType s;
        s.type.name = ident("type name");
        expect_word("as");
        expect_word("open");
        expect_punct("{");
        while (true) {
            catalog::FieldDef f;
            f.name = ident("field name");
            expect_punct(":");
            f.kind = field_kind();
            if (accept_punct("?")) f.optional = true;
            s.type.fields.push_back(f);
            if (!accept_punct(",")) break;
        }
        expect_punct("}");
        return s;
    }

    catalog::FieldKind field_kind() {
        if (accept_punct("{")) {
            expect_punct("{");
            expect_word("string");
            expect_punct("}");
            expect_punct("}");
            return catalog::FieldKind::StringBag;
        }
        Token t = expect(TokKind::Ident, "field kind");
        auto kind = catalog::field_kind_from(t.text);
        if (!kind) throw ParseError("unknown field kind \"" + t.text + "\"", t.line, t.column);
        return *kind;
    }

    Statement create_dataset() {
        CreateDataset s;
        s.name = ident("dataset name");
        expect_punct("(");
        s.record_type = ident("record type name");
        expect_punct(")");
        expect_word("primary");
        expect_word("key");
        s.primary_key = ident("primary key field");
        if (accept_word("on")) {
            expect_word("nodegroup");
            expect_punct("(");
            while (true) {
                s.nodegroup.push_back(ident("node id"));
                if (!accept_punct(",")) break;
            }
            expect_punct(")");
        }
        return s;
    }

    Statement create_index() {
        CreateIndex s;
        s.index_name = ident("index name");
        expect_word("on");
        s.dataset = ident("dataset name");
        expect_punct("(");
        s.field = ident("field name");
        expect_punct(")");
        if (accept_word("type")) {
            Token t = expect(TokKind::Ident, "index type");
            if (t.text != "hash")
                throw ParseError("unsupported index type \"" + t.text + "\" (only hash)", t.line, t.column);
        }
        return s;
    }

    Statement create_feed() {
        CreateFeed s;
        s.name = ident("feed name");
        expect_word("using");
        s.adaptor = ident("adaptor name");
        if (accept_punct("(")) {
            while (true) {
                Token k = expect(TokKind::String, "config key string");
                expect_punct("=");
                Token v = peek();
                if (v.kind == TokKind::String || v.kind == TokKind::Number) {
                    next();
                } else {
                    fail("config value must be a string or number");
                }
                s.config[k.text] = v.text;
                if (!accept_punct(",")) break;
            }
            expect_punct(")");
        }
        s.udf = apply_clause();
        return s;
    }

    Statement create_secondary_feed() {
        CreateSecondaryFeed s;
        s.name = ident("feed name");
        expect_word("from");
        expect_word("feed");
        s.parent = ident("parent feed name");
        s.udf = apply_clause();
        return s;
    }

    // `apply function name` with an optional single integer argument, e.g.
    // failEvery(3).
    std::optional<std::string> apply_clause() {
        if (!accept_word("apply")) return std::nullopt;
        expect_word("function");
        std::string name = ident("function name");
        if (accept_punct("(")) {
            Token arg = expect(TokKind::Number, "function argument");
            expect_punct(")");
            name += "(" + arg.text + ")";
        }
        return name;
    }

    Statement create_policy() {
        CreatePolicy s;
        s.name = ident("policy name");
        expect_word("from");
        expect_word("policy");
        s.base = ident("base policy name");
        expect_word("set");
        expect_punct("(");
        while (true) {
            expect_punct("(");
            Token k = expect(TokKind::String, "policy parameter key");
            expect_punct(",");
            Token v = expect(TokKind::String, "policy parameter value");
            expect_punct(")");
            s.overrides.emplace_back(k.text, v.text);
            if (!accept_punct(",")) break;
        }
        expect_punct(")");
        return s;
    }

    const Token& peek() const { return tokens_[pos_]; }
    Token next() { return tokens_[pos_++]; }
    bool at(TokKind kind) const { return peek().kind == kind; }

    bool accept_word(const std::string& word) {
        if (peek().kind == TokKind::Ident && peek().text == word) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect_word(const std::string& word) {
        if (!accept_word(word)) fail("expected '" + word + "'");
    }

    bool accept_punct(const std::string& p) {
        if (peek().kind == TokKind::Punct && peek().text == p) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect_punct(const std::string& p) {
        if (!accept_punct(p)) fail("expected '" + p + "'");
    }

    Token expect(TokKind kind, const std::string& what) {
        if (peek().kind != kind) fail("expected " + what);
        return next();
    }

    std::string ident(const std::string& what) { return expect(TokKind::Ident, what).text; }

    [[noreturn]] void fail(const std::string& message) const {
        const Token& t = peek();
        std::string got = t.kind == TokKind::End ? "end of statement" : "\"" + t.text + "\"";
        throw ParseError(message + ", got " + got, t.line, t.column);
    }

    std::vector<Token> tokens_;
    size_t pos_ = 0;
};

}  // namespace

Statement parse_statement(const std::string& text) {
    return Parser(Lexer(text).run()).parse();
}

std::vector<std::string> split_statements(const std::string& script) {
    std::vector<std::string> out;
    std::string cur;
    bool in_string = false;
    bool in_comment = false;
    for (size_t i = 0; i < script.size(); ++i) {
        char c = script[i];
        if (in_comment) {
            if (c == '\n') {
                in_comment = false;
                cur += c;
            }
            continue;
        }
        if (!in_string && c == '-' && i + 1 < script.size() && script[i + 1] == '-') {
            in_comment = true;
            ++i;
            continue;
        }
        if (c == '"') in_string = !in_string;
        cur += c;
        if (c == ';' && !in_string) {
            if (!trim(cur).empty()) out.push_back(cur);
            cur.clear();
        }
    }
    if (!trim(cur).empty()) throw Error("trailing statement not terminated by ';'");
    return out;
}

namespace {

// Splits "failEvery(3)" into its base name for registry validation.
std::string udf_base_name(const std::string& name) {
    size_t paren = name.find('(');
    return paren == std::string::npos ? name : name.substr(0, paren);
}

void check_udf(const std::optional<std::string>& udf, const FunctionNames& functions) {
    if (!udf) return;
    std::string base = udf_base_name(*udf);
    for (const auto& f : functions)
        if (f == base) return;
    throw Error("unknown function \"" + base + "\"");
}

}  // namespace

std::optional<Action> apply_statement(const Statement& stmt, catalog::Catalog& cat,
                                      const FunctionNames& functions) {
    using catalog::ConnectionState;

    if (const auto* s = std::get_if<CreateType>(&stmt)) {
        if (cat.find_type(s->type.name)) throw Error("duplicate type \"" + s->type.name + "\"");
        bool any_required = false;
        std::vector<std::string> seen;
        for (const auto& f : s->type.fields) {
            for (const auto& n : seen)
                if (n == f.name) throw Error("duplicate field \"" + f.name + "\" in type " + s->type.name);
            seen.push_back(f.name);
            if (!f.optional) any_required = true;
        }
        if (!any_required) throw Error("type " + s->type.name + " has no non-optional field");
        cat.add_type(s->type);
        return std::nullopt;
    }

    if (const auto* s = std::get_if<CreateDataset>(&stmt)) {
        if (cat.find_dataset(s->name)) throw Error("duplicate dataset \"" + s->name + "\"");
        const auto* type = cat.find_type(s->record_type);
        if (!type) throw Error("unknown type \"" + s->record_type + "\"");
        const auto* pk = type->find_field(s->primary_key);
        if (!pk) throw Error("primary key \"" + s->primary_key + "\" is not a declared field");
        if (pk->optional) throw Error("primary key \"" + s->primary_key + "\" must be non-optional");
        catalog::DatasetDef d;
        d.name = s->name;
        d.record_type = s->record_type;
        d.primary_key = s->primary_key;
        d.nodegroup = s->nodegroup;  // empty = bound to all cluster nodes at connect
        cat.add_dataset(std::move(d));
        return std::nullopt;
    }

    if (const auto* s = std::get_if<CreateIndex>(&stmt)) {
        const auto* ds = cat.find_dataset(s->dataset);
        if (!ds) throw Error("unknown dataset \"" + s->dataset + "\"");
        if (ds->secondary_index) throw Error("dataset \"" + s->dataset + "\" already has a secondary index");
        cat.set_secondary_index(s->dataset, s->field);
        return std::nullopt;
    }

    if (const auto* s = std::get_if<CreateFeed>(&stmt)) {
        if (cat.find_feed(s->name)) throw Error("duplicate feed \"" + s->name + "\"");
        check_udf(s->udf, functions);
        catalog::FeedDefinition f;
        f.name = s->name;
        f.kind = catalog::FeedKind::Primary;
        f.adaptor = catalog::AdaptorRef{s->adaptor, s->config};
        f.udf = s->udf;
        cat.add_feed(std::move(f));
        return std::nullopt;
    }

    if (const auto* s = std::get_if<CreateSecondaryFeed>(&stmt)) {
        if (cat.find_feed(s->name)) throw Error("duplicate feed \"" + s->name + "\"");
        if (!cat.find_feed(s->parent)) throw Error("unknown feed \"" + s->parent + "\"");
        check_udf(s->udf, functions);
        catalog::FeedDefinition f;
        f.name = s->name;
        f.kind = catalog::FeedKind::Secondary;
        f.parent_feed = s->parent;
        f.udf = s->udf;
        cat.add_feed(std::move(f));
        cat.lineage(s->name);  // acyclicity holds by construction; walk to be sure
        return std::nullopt;
    }

    if (const auto* s = std::get_if<CreatePolicy>(&stmt)) {
        std::string name = s->name == "FaultTolerant" ? "Fault-Tolerant" : s->name;
        if (cat.policies().count(name)) throw Error("duplicate policy \"" + s->name + "\"");
        catalog::IngestionPolicy p = cat.resolve_policy(s->base);
        p.name = name;
        for (const auto& [k, v] : s->overrides) p.set_parameter(k, v);
        cat.add_policy(std::move(p));
        return std::nullopt;
    }

    if (const auto* s = std::get_if<ConnectFeed>(&stmt)) {
        if (!cat.find_feed(s->feed)) throw Error("unknown feed \"" + s->feed + "\"");
        if (!cat.find_dataset(s->dataset)) throw Error("unknown dataset \"" + s->dataset + "\"");
        const auto& policy = cat.resolve_policy(s->policy);
        const auto* existing = cat.find_connection(s->feed, s->dataset);
        if (existing && existing->state == ConnectionState::Connected)
            throw Error("already connected: feed \"" + s->feed + "\" to dataset \"" + s->dataset + "\"");
        cat.set_connection(s->feed, s->dataset, policy.name, ConnectionState::Connected);
        return Action{ConnectAction{s->feed, s->dataset, policy.name}};
    }

    if (const auto* s = std::get_if<DisconnectFeed>(&stmt)) {
        const auto* existing = cat.find_connection(s->feed, s->dataset);
        if (!existing || existing->state != ConnectionState::Connected)
            throw Error("not connected: feed \"" + s->feed + "\" to dataset \"" + s->dataset + "\"");
        cat.set_connection(s->feed, s->dataset, existing->policy, ConnectionState::Disconnected);
        return Action{DisconnectAction{s->feed, s->dataset}};
    }

    if (std::get_if<ShowCatalog>(&stmt)) return Action{ShowCatalogAction{}};
    if (std::get_if<ShowPipelines>(&stmt)) return Action{ShowPipelinesAction{}};

    throw Error("unknown statement form");
}

}  // namespace feedmesh::ddl
