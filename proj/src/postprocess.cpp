#include "debinforge/postprocess.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "debinforge/assets.hpp"
#include "debinforge/error.hpp"
#include "debinforge/hash.hpp"
#include "debinforge/parallel.hpp"
#include "debinforge/syntax.hpp"

namespace debinforge::post {

namespace {

using syntax::type;

constexpr std::string_view kKeywords[] = {
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else", "enum", "extern",
    "float", "for", "goto", "if", "inline", "int", "long", "register", "restrict", "return", "short", "signed",
    "sizeof", "static", "struct", "switch", "typedef", "union", "unsigned", "void", "volatile", "while",
    "_Bool", "_Complex", "_Imaginary", "_Alignas", "_Alignof", "_Atomic", "_Generic", "_Noreturn",
    "_Static_assert", "_Thread_local", "bool", "true", "false", "NULL", "nullptr", "alignof", "alignas",
    "asm", "__asm__", "__asm", "__attribute__", "__attribute", "__declspec", "__cdecl", "__stdcall",
    "__fastcall", "__thiscall", "__vectorcall", "__inline", "__inline__", "__forceinline", "__restrict",
    "__restrict__", "__extension__", "__volatile__", "__based", "_unaligned", "__unaligned", "__clrcall",
    "__thread", "thread_local", "constexpr", "noreturn", "defined", "typeof", "__typeof__", "offsetof",
    "class", "namespace", "template", "typename", "this", "new", "delete", "operator", "public", "private",
    "protected", "virtual", "override", "final", "friend", "using", "try", "catch", "throw", "noexcept",
    "explicit", "mutable", "static_cast", "dynamic_cast", "const_cast", "reinterpret_cast", "decltype",
    "consteval", "constinit", "co_await", "co_return", "co_yield", "concept", "requires", "export", "import",
    "module", "char8_t", "char16_t", "char32_t", "char64_t", "wchar_t", "charptr_t", "nullptr_t",
    "max_align_t", "size_t", "ssize_t", "ptrdiff_t", "intptr_t", "uintptr_t", "int8_t", "int16_t", "int32_t",
    "int64_t", "uint8_t", "uint16_t", "uint32_t", "uint64_t",
};

enum class SpanKind { Identifier, Literal, Comment };

struct TokenSpan {
    std::size_t begin;
    std::size_t end;
    SpanKind kind;
};

bool is_ident_start(char c)
{
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool is_ident_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool is_space(char c)
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::size_t skip_quoted(std::string_view s, std::size_t i, char quote)
{
    // i points just past the opening quote.
    while (i < s.size() && s[i] != quote && s[i] != '\n') {
        if (s[i] == '\\' && i + 1 < s.size())
            ++i;
        ++i;
    }
    return i < s.size() && s[i] == quote ? i + 1 : i;
}

// Token spans by hand-lexing; `base` shifts offsets for embedded fragments.
void lex_spans(std::string_view s, std::size_t base, std::vector<TokenSpan>& out)
{
    std::size_t i = 0;
    bool line_start = true;
    while (i < s.size()) {
        const char c = s[i];
        if (is_space(c)) {
            if (c == '\n')
                line_start = true;
            ++i;
            continue;
        }
        if (c == '/' && i + 1 < s.size() && s[i + 1] == '/') {
            std::size_t j = i + 2;
            while (j < s.size() && s[j] != '\n') {
                if (s[j] == '\\' && j + 1 < s.size())
                    ++j;
                ++j;
            }
            out.push_back({base + i, base + j, SpanKind::Comment});
            i = j;
            continue;
        }
        if (c == '/' && i + 1 < s.size() && s[i + 1] == '*') {
            const std::size_t close = s.find("*/", i + 2);
            const std::size_t j = close == std::string_view::npos ? s.size() : close + 2;
            out.push_back({base + i, base + j, SpanKind::Comment});
            i = j;
            continue;
        }
        const bool at_line_start = line_start;
        line_start = false;
        if (c == '#' && at_line_start) {
            std::size_t j = i + 1;
            while (j < s.size() && (s[j] == ' ' || s[j] == '\t'))
                ++j;
            std::size_t k = j;
            while (k < s.size() && is_ident_char(s[k]))
                ++k;
            const std::string_view directive = s.substr(j, k - j);
            i = k;
            if (directive == "include") {
                while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
                    ++i;
                if (i < s.size() && (s[i] == '<' || s[i] == '"')) {
                    const char close = s[i] == '<' ? '>' : '"';
                    std::size_t e = s.find(close, i + 1);
                    e = e == std::string_view::npos ? s.size() : e + 1;
                    out.push_back({base + i, base + e, SpanKind::Literal});
                    i = e;
                }
            }
            continue;
        }
        if (c == '"' || c == '\'') {
            const std::size_t j = skip_quoted(s, i + 1, c);
            out.push_back({base + i, base + j, SpanKind::Literal});
            i = j;
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
            std::size_t j = i + 1;
            while (j < s.size()) {
                const char d = s[j];
                if (is_ident_char(d) || d == '.' || (d == '\'' && j + 1 < s.size() && std::isalnum(static_cast<unsigned char>(s[j + 1])))) {
                    ++j;
                } else if ((d == '+' || d == '-') && std::string_view("eEpP").find(s[j - 1]) != std::string_view::npos) {
                    ++j;
                } else {
                    break;
                }
            }
            i = j;
            continue;
        }
        if (is_ident_start(c)) {
            std::size_t j = i + 1;
            while (j < s.size() && is_ident_char(s[j]))
                ++j;
            const std::string_view word = s.substr(i, j - i);
            if (j < s.size() && (s[j] == '"' || s[j] == '\'') &&
                (word == "L" || word == "u" || word == "U" || word == "u8")) {
                const std::size_t e = skip_quoted(s, j + 1, s[j]);
                out.push_back({base + i, base + e, SpanKind::Literal});
                i = e;
                continue;
            }
            out.push_back({base + i, base + j, SpanKind::Identifier});
            i = j;
            continue;
        }
        ++i;
    }
}

void tree_spans(const syntax::Tree& tree, TSNode node, std::vector<TokenSpan>& out)
{
    const auto t = type(node);
    const auto span = syntax::span_of(node);
    if (t == "identifier" || t == "field_identifier" || t == "type_identifier" || t == "statement_identifier") {
        out.push_back({span.begin, span.end, SpanKind::Identifier});
        return;
    }
    if (t == "string_literal" || t == "char_literal" || t == "system_lib_string") {
        out.push_back({span.begin, span.end, SpanKind::Literal});
        return;
    }
    if (t == "comment") {
        out.push_back({span.begin, span.end, SpanKind::Comment});
        return;
    }
    if (t == "preproc_arg") {
        lex_spans(tree.text(node), span.begin, out);
        return;
    }
    const std::uint32_t n = ts_node_child_count(node);
    for (std::uint32_t i = 0; i < n; ++i)
        tree_spans(tree, ts_node_child(node, i), out);
}

class Renderer {
public:
    explicit Renderer(const IdentifierNormalizer& normalizer) : normalizer_(normalizer) {}

    std::string run(std::string_view code, std::vector<TokenSpan> spans)
    {
        std::sort(spans.begin(), spans.end(), [](const auto& a, const auto& b) { return a.begin < b.begin; });
        std::size_t pos = 0;
        for (const auto& span : spans) {
            if (span.begin < pos)
                continue;
            gap(code.substr(pos, span.begin - pos));
            const std::string_view text = code.substr(span.begin, span.end - span.begin);
            switch (span.kind) {
            case SpanKind::Comment: pending_ = true; break;
            case SpanKind::Literal: token(text); break;
            case SpanKind::Identifier: token(rename(text)); break;
            }
            pos = span.end;
        }
        gap(code.substr(std::min(pos, code.size())));
        return std::move(out_);
    }

private:
    std::string rename(std::string_view name)
    {
        if (normalizer_.is_reserved(name))
            return std::string(name);
        auto [it, inserted] = names_.try_emplace(std::string(name), names_.size());
        return "v" + std::to_string(it->second);
    }

    void token(std::string_view text)
    {
        if (pending_ && !out_.empty())
            out_.push_back(' ');
        pending_ = false;
        out_.append(text);
    }

    void gap(std::string_view text)
    {
        for (char c : text) {
            if (is_space(c)) {
                pending_ = true;
            } else {
                token(std::string_view(&c, 1));
            }
        }
    }

    const IdentifierNormalizer& normalizer_;
    std::map<std::string, std::size_t, std::less<>> names_;
    std::string out_;
    bool pending_ = false;
};

syntax::Parser& c_parser()
{
    thread_local syntax::Parser parser(Language::C);
    return parser;
}

TSNode first_function(TSNode node)
{
    if (type(node) == "function_definition")
        return node;
    const std::uint32_t n = ts_node_named_child_count(node);
    for (std::uint32_t i = 0; i < n; ++i) {
        TSNode found = first_function(ts_node_named_child(node, i));
        if (!ts_node_is_null(found))
            return found;
    }
    return TSNode{};
}

// Text between the first '{' and its matching '}', ignoring comments and literals.
std::optional<bool> brace_body_empty(std::string_view code)
{
    std::vector<TokenSpan> spans;
    lex_spans(code, 0, spans);
    std::string flat(code);
    for (const auto& s : spans) {
        if (s.kind == SpanKind::Comment)
            std::fill(flat.begin() + s.begin, flat.begin() + s.end, ' ');
        else if (s.kind == SpanKind::Literal)
            std::fill(flat.begin() + s.begin, flat.begin() + s.end, 'x');
    }
    const std::size_t open = flat.find('{');
    if (open == std::string::npos)
        return std::nullopt;
    int depth = 0;
    for (std::size_t i = open; i < flat.size(); ++i) {
        if (flat[i] == '{') {
            ++depth;
        } else if (flat[i] == '}' && --depth == 0) {
            const std::string_view inside = std::string_view(flat).substr(open + 1, i - open - 1);
            return std::all_of(inside.begin(), inside.end(), [](char c) { return is_space(c) || c == ';'; });
        }
    }
    return std::nullopt;
}

} // namespace

std::optional<std::size_t> body_statement_count(std::string_view code)
{
    const syntax::Tree tree = c_parser().parse(std::string(code));
    TSNode fn = first_function(tree.root());
    if (ts_node_is_null(fn))
        return std::nullopt;
    TSNode body = syntax::child_by_field(fn, "body");
    if (ts_node_is_null(body))
        return std::nullopt;
    std::size_t count = 0;
    const std::uint32_t n = ts_node_named_child_count(body);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (type(ts_node_named_child(body, i)) != "comment")
            ++count;
    }
    return count;
}

DropResult drop_degenerate(std::vector<MatchedPair> pairs)
{
    DropResult result;
    for (auto& pair : pairs) {
        std::string reason;
        if (pair.build_status != BuildStatus::Success) {
            reason = "not compilable";
        } else {
            bool empty = false;
            if (auto count = body_statement_count(pair.decompiled.decompiled_text)) {
                empty = *count == 0;
            } else {
                empty = brace_body_empty(pair.decompiled.decompiled_text).value_or(true);
            }
            if (empty)
                reason = "empty body";
        }
        if (reason.empty()) {
            result.kept.push_back(std::move(pair));
        } else {
            result.dropped.push_back({pair.function.id, pair.function.name, cell_name(pair.config),
                                      pair.decompiled.entry_address, std::move(reason)});
        }
    }
    return result;
}

IdentifierNormalizer::IdentifierNormalizer(const std::filesystem::path& allowlist_file)
{
    std::istringstream in(read_file(allowlist_file));
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#')
            continue;
        const auto last = line.find_last_not_of(" \t\r");
        allowlist_.insert(line.substr(first, last - first + 1));
    }
}

IdentifierNormalizer::IdentifierNormalizer(std::set<std::string, std::less<>> allowlist)
    : allowlist_(std::move(allowlist))
{
}

const IdentifierNormalizer& IdentifierNormalizer::standard()
{
    static const IdentifierNormalizer normalizer(asset_path("stdlib_identifiers.txt"));
    return normalizer;
}

bool IdentifierNormalizer::is_reserved(std::string_view name) const
{
    if (allowlist_.count(name))
        return true;
    return std::find(std::begin(kKeywords), std::end(kKeywords), name) != std::end(kKeywords);
}

std::optional<std::string> IdentifierNormalizer::normalize_with_parser(std::string_view code) const
{
    const syntax::Tree tree = c_parser().parse(std::string(code));
    if (tree.has_error())
        return std::nullopt;
    std::vector<TokenSpan> spans;
    tree_spans(tree, tree.root(), spans);
    return Renderer(*this).run(code, std::move(spans));
}

std::string IdentifierNormalizer::normalize_with_lexer(std::string_view code) const
{
    std::vector<TokenSpan> spans;
    lex_spans(code, 0, spans);
    return Renderer(*this).run(code, std::move(spans));
}

std::string IdentifierNormalizer::normalize(std::string_view code) const
{
    if (auto parsed = normalize_with_parser(code))
        return std::move(*parsed);
    return normalize_with_lexer(code);
}

std::string normalize_identifiers(std::string_view code)
{
    return IdentifierNormalizer::standard().normalize(code);
}

std::string dedup_key(const CorpusRecord& record, const IdentifierNormalizer& normalizer)
{
    return sha256_hex(fmt::format("{}\x1f{}\x1f{}\x1f{}\x1f{}\x1f{}", normalizer.normalize(record.source_code),
                                  to_string(record.task), record.compiler, to_string(record.architecture),
                                  to_string(record.optimization), record.stripped ? 1 : 0));
}

DedupResult dedup(const std::vector<CorpusRecord>& records, unsigned jobs)
{
    const auto& normalizer = IdentifierNormalizer::standard();
    const auto keys =
        parallel_map(records.size(), jobs, [&](std::size_t i) { return dedup_key(records[i], normalizer); });
    DedupResult result;
    std::map<std::string, std::string, std::less<>> first;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto [it, inserted] = first.try_emplace(keys[i], records[i].id);
        if (inserted)
            result.unique.push_back(records[i]);
        else
            result.duplicates.push_back({records[i].id, it->second, keys[i]});
    }
    return result;
}

std::size_t whitespace_tokens(std::string_view text)
{
    std::size_t count = 0;
    bool in_token = false;
    for (char c : text) {
        const bool space = is_space(c);
        if (!space && !in_token)
            ++count;
        in_token = !space;
    }
    return count;
}

std::size_t line_count(std::string_view text)
{
    if (text.empty())
        return 0;
    const auto newlines = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
    return text.back() == '\n' ? newlines : newlines + 1;
}

std::vector<StatsRow> corpus_stats(const std::vector<CorpusRecord>& records)
{
    struct Sums {
        std::size_t count = 0;
        double tokens = 0;
        double lines = 0;
        double description_tokens = 0;
        std::size_t described = 0;
    };
    std::map<std::tuple<Architecture, Optimization, bool>, Sums> groups;
    for (const auto& r : records) {
        auto& g = groups[{r.architecture, r.optimization, r.is_vulnerable}];
        ++g.count;
        g.tokens += static_cast<double>(whitespace_tokens(r.decompiled_code));
        g.lines += static_cast<double>(line_count(r.decompiled_code));
        if (r.description) {
            ++g.described;
            g.description_tokens += static_cast<double>(whitespace_tokens(*r.description));
        }
    }
    std::vector<StatsRow> rows;
    for (const auto& [key, g] : groups) {
        StatsRow row;
        std::tie(row.architecture, row.optimization, row.vulnerable) = key;
        row.count = g.count;
        row.avg_tokens = g.tokens / static_cast<double>(g.count);
        row.avg_lines = g.lines / static_cast<double>(g.count);
        row.described = g.described;
        row.avg_description_tokens = g.described ? g.description_tokens / static_cast<double>(g.described) : 0.0;
        rows.push_back(row);
    }
    return rows;
}

Json to_json(const std::vector<StatsRow>& rows)
{
    Json out = Json::array();
    for (const auto& r : rows) {
        out.push_back({{"architecture", to_string(r.architecture)},
                       {"optimization", to_string(r.optimization)},
                       {"label", r.vulnerable ? "vulnerable" : "benign"},
                       {"count", r.count},
                       {"avg_tokens", r.avg_tokens},
                       {"avg_lines", r.avg_lines},
                       {"avg_description_tokens", r.avg_description_tokens},
                       {"described", r.described}});
    }
    return out;
}

std::string render_stats_table(const std::vector<StatsRow>& rows)
{
    std::string out = fmt::format("{:<6} {:<4} {:<10} {:>8} {:>11} {:>10} {:>12}\n", "arch", "opt", "label", "count",
                                  "avg_tokens", "avg_lines", "avg_desc_tok");
    for (const auto& r : rows) {
        out += fmt::format("{:<6} {:<4} {:<10} {:>8} {:>11.0f} {:>10.0f} {:>12.0f}\n", to_string(r.architecture),
                           to_string(r.optimization), r.vulnerable ? "vulnerable" : "benign", r.count, r.avg_tokens,
                           r.avg_lines, r.avg_description_tokens);
    }
    return out;
}

Json to_json(const DropEntry& entry)
{
    return {{"function_id", entry.function_id},
            {"function_name", entry.function_name},
            {"cell", entry.cell},
            {"entry", format_hex(entry.entry_address)},
            {"reason", entry.reason}};
}

Json to_json(const DuplicateEntry& entry)
{
    return {{"id", entry.id}, {"kept_id", entry.kept_id}, {"key", entry.key}};
}

} // namespace debinforge::post
