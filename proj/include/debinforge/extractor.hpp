#pragma once

// Function extraction, naming, labeling and comment handling for C/C++ units.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "debinforge/model.hpp"
#include "debinforge/syntax.hpp"

namespace debinforge::extract {

struct GrammarQuery {
    std::string expression;
    std::string capture_name;

    bool operator==(const GrammarQuery&) const = default;
};

struct GrammarQueries {
    GrammarQuery function_definition;
    GrammarQuery function_name;
    GrammarQuery comment;

    // The compiled-in defaults; identical to assets/grammar_queries.json.
    static GrammarQueries builtin();
    // Throws Schema when a query is missing or its capture is not named in its expression.
    static GrammarQueries load(const std::filesystem::path& path);

    bool operator==(const GrammarQueries&) const = default;
};

struct Diagnostic {
    std::string unit_path;
    ByteSpan span;
    std::string message;
};

struct ExtractionResult {
    std::vector<ExtractedFunction> functions;
    std::vector<Diagnostic> diagnostics;
};

// Owns one parser and compiled query set per language. Not thread-safe:
// give each worker its own extractor.
class FunctionExtractor {
public:
    explicit FunctionExtractor(GrammarQueries queries = GrammarQueries::builtin());
    ~FunctionExtractor();
    FunctionExtractor(FunctionExtractor&&) noexcept;
    FunctionExtractor& operator=(FunctionExtractor&&) noexcept;

    // Top-level function definitions in source order, labels left Unknown.
    // Definitions containing syntax errors are skipped and reported.
    ExtractionResult parse_functions(const SourceUnit& unit);

    // Throws NameNotFound.
    std::string extract_name(const ExtractedFunction& function);

private:
    struct LanguageState;
    LanguageState& state(Language language);

    GrammarQueries queries_;
    std::map<Language, std::unique_ptr<LanguageState>> states_;
};

// Convenience wrappers over a thread-local FunctionExtractor with builtin queries.
std::vector<ExtractedFunction> parse_functions(const SourceUnit& unit);
std::string extract_name(const ExtractedFunction& function);

// Vulnerable when the name contains "bad" and starts with CWE<digits>; Benign when it
// contains only "good"; Unknown otherwise. Case-sensitive.
VulnLabel label_function(std::string_view name);

// Leading CWE<digits> of a Juliet-style name, if any.
std::optional<CweId> cwe_prefix(std::string_view name);

// Comments lying inside the function body, in source order.
std::vector<Comment> extract_comments(const ExtractedFunction& function);

// Function text with every comment replaced by a single space.
std::string strip_comments(const ExtractedFunction& function);

} // namespace debinforge::extract
