#pragma once

// Corpus cleaning: degenerate-pair removal, renamed-clone deduplication, statistics.

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "debinforge/model.hpp"

namespace debinforge::post {

struct DropEntry {
    std::string function_id;
    std::string function_name;
    std::string cell;
    std::uint64_t entry_address = 0;
    std::string reason;
};

struct DropResult {
    std::vector<MatchedPair> kept;
    std::vector<DropEntry> dropped;
};

// Drops pairs whose build failed ("not compilable") and pairs whose decompiled
// body has no statements ("empty body").
DropResult drop_degenerate(std::vector<MatchedPair> pairs);

// Statements directly inside the first function body of `code`; nullopt when no body is found.
std::optional<std::size_t> body_statement_count(std::string_view code);

// Replaces identifiers by v0, v1, ... in first-occurrence order. Keywords, literals,
// punctuation and allowlisted library names are kept; comments become whitespace and
// whitespace runs outside literals collapse to one space.
class IdentifierNormalizer {
public:
    // Keywords plus the names listed in `allowlist_file` (one per line, '#' comments).
    explicit IdentifierNormalizer(const std::filesystem::path& allowlist_file);
    explicit IdentifierNormalizer(std::set<std::string, std::less<>> allowlist);

    // Default allowlist asset; cached.
    static const IdentifierNormalizer& standard();

    std::string normalize(std::string_view code) const;
    // The two routes, exposed so they can be checked against each other.
    std::optional<std::string> normalize_with_parser(std::string_view code) const;
    std::string normalize_with_lexer(std::string_view code) const;

    bool is_reserved(std::string_view name) const;

private:
    std::set<std::string, std::less<>> allowlist_;
};

std::string normalize_identifiers(std::string_view code);

struct DuplicateEntry {
    std::string id;
    std::string kept_id;
    std::string key;
};

struct DedupResult {
    std::vector<CorpusRecord> unique;
    std::vector<DuplicateEntry> duplicates;
};

// Clone key: normalized source, task, and the build cell (compiler, architecture,
// optimization, stripped). The first record per key is kept.
std::string dedup_key(const CorpusRecord& record, const IdentifierNormalizer& normalizer);
DedupResult dedup(const std::vector<CorpusRecord>& records, unsigned jobs = 1);

struct StatsRow {
    Architecture architecture = Architecture::X86;
    Optimization optimization = Optimization::O0;
    bool vulnerable = false;
    std::size_t count = 0;
    double avg_tokens = 0;
    double avg_lines = 0;
    // Mean over the rows' records that carry a description; 0 when none do.
    double avg_description_tokens = 0;
    std::size_t described = 0;
};

std::size_t whitespace_tokens(std::string_view text);
std::size_t line_count(std::string_view text);

// Rows sorted by (architecture, optimization, label); token and line counts are
// taken over the decompiled code.
std::vector<StatsRow> corpus_stats(const std::vector<CorpusRecord>& records);
Json to_json(const std::vector<StatsRow>& rows);
std::string render_stats_table(const std::vector<StatsRow>& rows);

Json to_json(const DropEntry& entry);
Json to_json(const DuplicateEntry& entry);

} // namespace debinforge::post
