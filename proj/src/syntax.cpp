#include "debinforge/syntax.hpp"

#include <fmt/format.h>

#include "debinforge/error.hpp"

extern "C" const TSLanguage* tree_sitter_c();
extern "C" const TSLanguage* tree_sitter_cpp();

namespace debinforge::syntax {

const TSLanguage* grammar(Language language)
{
    return language == Language::C ? tree_sitter_c() : tree_sitter_cpp();
}

Tree::Tree(TSTree* tree, std::string source) : tree_(tree, &ts_tree_delete), source_(std::move(source)) {}

std::string_view Tree::text(TSNode node) const
{
    const auto span = span_of(node);
    return std::string_view(source_).substr(span.begin, span.size());
}

Parser::Parser(Language language) : language_(language), parser_(ts_parser_new(), &ts_parser_delete)
{
    if (!parser_ || !ts_parser_set_language(parser_.get(), grammar(language)))
        fail(ErrorKind::ParseFailure, "grammar version is incompatible with the runtime");
}

Tree Parser::parse(std::string source)
{
    if (source.size() > UINT32_MAX)
        fail(ErrorKind::ParseFailure, "source too large");
    TSTree* tree = ts_parser_parse_string(parser_.get(), nullptr, source.data(),
                                          static_cast<std::uint32_t>(source.size()));
    if (!tree)
        fail(ErrorKind::ParseFailure, "parser produced no tree");
    return Tree(tree, std::move(source));
}

Query::Query(Language language, std::string_view expression) : query_(nullptr, &ts_query_delete)
{
    std::uint32_t error_offset = 0;
    TSQueryError error = TSQueryErrorNone;
    TSQuery* query = ts_query_new(grammar(language), expression.data(),
                                  static_cast<std::uint32_t>(expression.size()), &error_offset, &error);
    if (!query)
        fail(ErrorKind::ParseFailure,
             fmt::format("query error {} at offset {} in '{}'", static_cast<int>(error), error_offset, expression));
    query_.reset(query);
}

int Query::capture_index(std::string_view name) const
{
    const std::uint32_t count = ts_query_capture_count(query_.get());
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t length = 0;
        const char* capture = ts_query_capture_name_for_id(query_.get(), i, &length);
        if (std::string_view(capture, length) == name)
            return static_cast<int>(i);
    }
    return -1;
}

std::vector<Capture> run_query(const Query& query, TSNode node)
{
    std::unique_ptr<TSQueryCursor, decltype(&ts_query_cursor_delete)> cursor(ts_query_cursor_new(),
                                                                             &ts_query_cursor_delete);
    ts_query_cursor_exec(cursor.get(), query.get(), node);
    std::vector<Capture> captures;
    TSQueryMatch match;
    std::uint32_t capture_index = 0;
    while (ts_query_cursor_next_capture(cursor.get(), &match, &capture_index)) {
        const TSQueryCapture& c = match.captures[capture_index];
        captures.push_back({c.node, c.index});
    }
    return captures;
}

std::string_view type(TSNode node)
{
    return ts_node_type(node);
}

TSNode child_by_field(TSNode node, std::string_view field)
{
    return ts_node_child_by_field_name(node, field.data(), static_cast<std::uint32_t>(field.size()));
}

ByteSpan span_of(TSNode node)
{
    return {ts_node_start_byte(node), ts_node_end_byte(node)};
}

} // namespace debinforge::syntax
