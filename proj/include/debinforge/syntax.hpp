#pragma once

// Thin RAII layer over the tree-sitter C API.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <tree_sitter/api.h>

#include "debinforge/model.hpp"

namespace debinforge::syntax {

const TSLanguage* grammar(Language language);

class Tree {
public:
    Tree(TSTree* tree, std::string source);

    TSNode root() const { return ts_tree_root_node(tree_.get()); }
    const std::string& source() const { return source_; }
    std::string_view text(TSNode node) const;
    bool has_error() const { return ts_node_has_error(root()); }

private:
    std::unique_ptr<TSTree, decltype(&ts_tree_delete)> tree_;
    std::string source_;
};

// Parsers are not thread-safe; each worker owns one.
class Parser {
public:
    explicit Parser(Language language);

    Language language() const { return language_; }
    // Throws ParseFailure when no tree can be produced at all.
    Tree parse(std::string source);

private:
    Language language_;
    std::unique_ptr<TSParser, decltype(&ts_parser_delete)> parser_;
};

class Query {
public:
    // Throws ParseFailure with the error offset if the expression does not compile.
    Query(Language language, std::string_view expression);

    const TSQuery* get() const { return query_.get(); }
    // Index of the named capture, or -1.
    int capture_index(std::string_view name) const;

private:
    std::unique_ptr<TSQuery, decltype(&ts_query_delete)> query_;
};

struct Capture {
    TSNode node;
    std::uint32_t index;
};

// All captures of the query below node, in document order.
std::vector<Capture> run_query(const Query& query, TSNode node);

std::string_view type(TSNode node);
TSNode child_by_field(TSNode node, std::string_view field);
ByteSpan span_of(TSNode node);

} // namespace debinforge::syntax
