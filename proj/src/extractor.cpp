#include "debinforge/extractor.hpp"

#include <algorithm>
#include <charconv>

#include <fmt/format.h>

#include "debinforge/error.hpp"

namespace debinforge::extract {

namespace {

using syntax::child_by_field;
using syntax::span_of;
using syntax::type;

bool is_name_node(std::string_view t)
{
    return t == "identifier" || t == "field_identifier" || t == "qualified_identifier" ||
           t == "destructor_name" || t == "operator_name" || t == "template_function";
}

// The next link of a declarator chain: the `declarator` field, or for wrappers
// without one (parenthesized/attributed), the first named non-attribute child.
TSNode inner_declarator(TSNode node)
{
    TSNode next = child_by_field(node, "declarator");
    if (!ts_node_is_null(next))
        return next;
    const std::uint32_t n = ts_node_named_child_count(node);
    for (std::uint32_t i = 0; i < n; ++i) {
        TSNode child = ts_node_named_child(node, i);
        const auto t = type(child);
        if (t != "attribute_declaration" && t != "ms_call_modifier" && t != "type_qualifier")
            return child;
    }
    return TSNode{};
}

std::string_view simple_name(const syntax::Tree& tree, TSNode node)
{
    while (!ts_node_is_null(node)) {
        const auto t = type(node);
        if (t == "qualified_identifier" || t == "template_function") {
            node = child_by_field(node, "name");
            continue;
        }
        if (t == "identifier" || t == "field_identifier" || t == "destructor_name" || t == "operator_name")
            return tree.text(node);
        break;
    }
    return {};
}

std::optional<std::string> definition_name(const syntax::Tree& tree, TSNode definition,
                                           const syntax::Query& name_query, int name_capture)
{
    TSNode node = child_by_field(definition, "declarator");
    TSNode innermost_function{};
    while (!ts_node_is_null(node) && !is_name_node(type(node))) {
        if (type(node) == "function_declarator")
            innermost_function = node;
        node = inner_declarator(node);
    }
    if (ts_node_is_null(innermost_function))
        return std::nullopt;

    for (const auto& capture : syntax::run_query(name_query, definition)) {
        if (static_cast<int>(capture.index) != name_capture)
            continue;
        TSNode parent = ts_node_parent(capture.node);
        if (ts_node_eq(parent, innermost_function))
            return std::string(tree.text(capture.node));
    }

    // Declarator shapes the query does not cover (qualified names, methods, operators).
    TSNode declared = child_by_field(innermost_function, "declarator");
    auto name = simple_name(tree, declared);
    if (name.empty())
        return std::nullopt;
    return std::string(name);
}

bool inside_function(TSNode node)
{
    for (TSNode p = ts_node_parent(node); !ts_node_is_null(p); p = ts_node_parent(p)) {
        if (type(p) == "function_definition")
            return true;
    }
    return false;
}

void collect_errors(TSNode node, const std::string& path, std::vector<Diagnostic>& out)
{
    if (ts_node_is_error(node) || ts_node_is_missing(node)) {
        out.push_back({path, span_of(node),
                       ts_node_is_missing(node) ? fmt::format("missing '{}'", type(node)) : "syntax error"});
        return;
    }
    if (!ts_node_has_error(node))
        return;
    const std::uint32_t n = ts_node_child_count(node);
    for (std::uint32_t i = 0; i < n; ++i)
        collect_errors(ts_node_child(node, i), path, out);
}

GrammarQuery query_from_json(const Json& json, const char* key)
{
    auto it = json.find(key);
    if (it == json.end() || !it->is_object())
        fail(ErrorKind::Schema, fmt::format("grammar query '{}' missing", key));
    GrammarQuery q{it->value("expression", ""), it->value("capture", "")};
    if (q.expression.empty() || q.capture_name.empty())
        fail(ErrorKind::Schema, fmt::format("grammar query '{}' needs expression and capture", key));
    if (q.expression.find("@" + q.capture_name) == std::string::npos)
        fail(ErrorKind::Schema, fmt::format("capture '@{}' does not appear in query '{}'", q.capture_name, key));
    return q;
}

} // namespace

GrammarQueries GrammarQueries::builtin()
{
    return {
        {"(function_definition) @func-def", "func-def"},
        {"(function_declarator (identifier) @func_name)", "func_name"},
        {"(comment) @comment", "comment"},
    };
}

GrammarQueries GrammarQueries::load(const std::filesystem::path& path)
{
    const Json json = read_json(path);
    return {
        query_from_json(json, "function_definition"),
        query_from_json(json, "function_name"),
        query_from_json(json, "comment"),
    };
}

struct FunctionExtractor::LanguageState {
    syntax::Parser parser;
    syntax::Query function_query;
    syntax::Query name_query;
    syntax::Query comment_query;
    int function_capture;
    int name_capture;
    int comment_capture;

    LanguageState(Language language, const GrammarQueries& q)
        : parser(language),
          function_query(language, q.function_definition.expression),
          name_query(language, q.function_name.expression),
          comment_query(language, q.comment.expression),
          function_capture(function_query.capture_index(q.function_definition.capture_name)),
          name_capture(name_query.capture_index(q.function_name.capture_name)),
          comment_capture(comment_query.capture_index(q.comment.capture_name))
    {
        if (function_capture < 0 || name_capture < 0 || comment_capture < 0)
            fail(ErrorKind::ParseFailure, "a grammar query does not define its named capture");
    }
};

FunctionExtractor::FunctionExtractor(GrammarQueries queries) : queries_(std::move(queries)) {}
FunctionExtractor::~FunctionExtractor() = default;
FunctionExtractor::FunctionExtractor(FunctionExtractor&&) noexcept = default;
FunctionExtractor& FunctionExtractor::operator=(FunctionExtractor&&) noexcept = default;

FunctionExtractor::LanguageState& FunctionExtractor::state(Language language)
{
    auto& slot = states_[language];
    if (!slot)
        slot = std::make_unique<LanguageState>(language, queries_);
    return *slot;
}

ExtractionResult FunctionExtractor::parse_functions(const SourceUnit& unit)
{
    auto& st = state(unit.info.language);
    const syntax::Tree tree = st.parser.parse(unit.text);
    ExtractionResult result;
    if (tree.has_error())
        collect_errors(tree.root(), unit.info.path, result.diagnostics);

    for (const auto& capture : syntax::run_query(st.function_query, tree.root())) {
        if (static_cast<int>(capture.index) != st.function_capture)
            continue;
        TSNode node = capture.node;
        if (inside_function(node))
            continue;
        const ByteSpan span = span_of(node);
        if (ts_node_has_error(node)) {
            result.diagnostics.push_back({unit.info.path, span, "function definition has syntax errors; skipped"});
            continue;
        }
        ExtractedFunction f;
        f.id = function_id(unit.text, span);
        f.unit = unit.info;
        f.span = span;
        TSNode body = child_by_field(node, "body");
        f.body_span = ts_node_is_null(body) ? ByteSpan{span.end, span.end} : span_of(body);
        f.text = std::string(tree.text(node));
        for (const auto& c : syntax::run_query(st.comment_query, node)) {
            if (static_cast<int>(c.index) != st.comment_capture)
                continue;
            const ByteSpan cs = span_of(c.node);
            if (span.contains(cs))
                f.comments.push_back({cs.begin, std::string(tree.text(c.node))});
        }
        if (auto name = definition_name(tree, node, st.name_query, st.name_capture)) {
            f.name = std::move(*name);
        } else {
            result.diagnostics.push_back({unit.info.path, span, "NameNotFound: declarator has no identifier"});
        }
        result.functions.push_back(std::move(f));
    }
    // Query captures arrive in document order already; keep the contract explicit.
    std::stable_sort(result.functions.begin(), result.functions.end(),
                     [](const auto& a, const auto& b) { return a.span.begin < b.span.begin; });
    return result;
}

std::string FunctionExtractor::extract_name(const ExtractedFunction& function)
{
    auto& st = state(function.unit.language);
    const syntax::Tree tree = st.parser.parse(function.text);
    for (const auto& capture : syntax::run_query(st.function_query, tree.root())) {
        if (static_cast<int>(capture.index) != st.function_capture || inside_function(capture.node))
            continue;
        if (auto name = definition_name(tree, capture.node, st.name_query, st.name_capture))
            return *name;
        break;
    }
    fail(ErrorKind::NameNotFound, "no declarator identifier in function at " + function.unit.path + ":" +
                                      std::to_string(function.span.begin));
}

namespace {
FunctionExtractor& local_extractor()
{
    thread_local FunctionExtractor extractor;
    return extractor;
}
} // namespace

std::vector<ExtractedFunction> parse_functions(const SourceUnit& unit)
{
    return local_extractor().parse_functions(unit).functions;
}

std::string extract_name(const ExtractedFunction& function)
{
    return local_extractor().extract_name(function);
}

std::optional<CweId> cwe_prefix(std::string_view name)
{
    if (name.size() < 4 || name.substr(0, 3) != "CWE")
        return std::nullopt;
    std::size_t end = 3;
    while (end < name.size() && end < 12 && name[end] >= '0' && name[end] <= '9')
        ++end;
    if (end == 3 || (end < name.size() && name[end] >= '0' && name[end] <= '9'))
        return std::nullopt;
    std::uint32_t number = 0;
    std::from_chars(name.data() + 3, name.data() + end, number);
    if (number == 0)
        return std::nullopt;
    return CweId(number);
}

VulnLabel label_function(std::string_view name)
{
    const bool bad = name.find("bad") != std::string_view::npos;
    const bool good = name.find("good") != std::string_view::npos;
    if (bad && good)
        return VulnLabel::unknown("both good and bad markers");
    if (bad) {
        if (auto cwe = cwe_prefix(name))
            return VulnLabel::vulnerable(*cwe);
        return VulnLabel::unknown("bad marker without CWE prefix");
    }
    if (good)
        return VulnLabel::benign();
    return VulnLabel::unknown("neither good nor bad marker");
}

std::vector<Comment> extract_comments(const ExtractedFunction& function)
{
    std::vector<Comment> inside;
    for (const auto& c : function.comments) {
        if (function.body_span.contains(c.span()))
            inside.push_back(c);
    }
    return inside;
}

std::string strip_comments(const ExtractedFunction& function)
{
    std::string out;
    out.reserve(function.text.size());
    std::uint32_t cursor = 0;
    for (const auto& c : function.comments) {
        const std::uint32_t begin = c.offset - function.span.begin;
        if (begin < cursor)
            continue;
        out.append(function.text, cursor, begin - cursor);
        out.push_back(' ');
        cursor = begin + static_cast<std::uint32_t>(c.text.size());
    }
    out.append(function.text, cursor, std::string::npos);
    return out;
}

} // namespace debinforge::extract
