#pragma once

// Shared domain types for the corpus pipeline and the JSON Lines record schema.

#include <chrono>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace debinforge {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Calendar dates (ISO-8601 "YYYY-MM-DD").

using Date = std::chrono::year_month_day;

std::optional<Date> parse_date(std::string_view iso);
std::string format_date(const Date& date);

// ---------------------------------------------------------------------------
// CWE identifiers.

class CweId {
public:
    // Throws PreconditionViolation for 0.
    explicit CweId(std::uint32_t number);

    std::uint32_t number() const noexcept { return number_; }

    // "CWE-" followed by the decimal digits without padding.
    std::string render() const;

    // Accepts only the canonical rendering ("CWE-121"; not "CWE-0121", not "cwe-121").
    static std::optional<CweId> parse_canonical(std::string_view text);

    auto operator<=>(const CweId&) const = default;

private:
    std::uint32_t number_;
};

// ---------------------------------------------------------------------------
// Vulnerability labels.

struct Benign {
    bool operator==(const Benign&) const = default;
};

struct Vulnerable {
    CweId cwe;
    bool operator==(const Vulnerable&) const = default;
};

struct Unknown {
    std::string reason;
    bool operator==(const Unknown&) const = default;
};

class VulnLabel {
public:
    using Variant = std::variant<Benign, Vulnerable, Unknown>;

    static VulnLabel benign() { return VulnLabel(Benign{}); }
    static VulnLabel vulnerable(CweId cwe) { return VulnLabel(Vulnerable{cwe}); }
    // Throws PreconditionViolation for an empty reason.
    static VulnLabel unknown(std::string reason);

    bool is_benign() const { return std::holds_alternative<Benign>(value_); }
    bool is_vulnerable() const { return std::holds_alternative<Vulnerable>(value_); }
    bool is_unknown() const { return std::holds_alternative<Unknown>(value_); }

    std::optional<CweId> cwe() const;
    // Empty unless the label is Unknown.
    std::string reason() const;

    const Variant& value() const { return value_; }

    bool operator==(const VulnLabel&) const = default;

private:
    explicit VulnLabel(Variant v) : value_(std::move(v)) {}
    Variant value_;
};

// ---------------------------------------------------------------------------
// Source units and extracted functions.

enum class Language { C, Cpp };
enum class Provenance { Sard, Nvd, Injected };

std::string_view to_string(Language language);
std::string_view to_string(Provenance provenance);
std::optional<Language> language_from_path(const std::filesystem::path& path);
std::optional<Provenance> parse_provenance(std::string_view text);

// Metadata of a source file; the text lives in SourceUnit.
struct UnitInfo {
    std::string path;
    Language language = Language::C;
    Provenance provenance = Provenance::Sard;
    std::optional<Date> published_date;

    bool operator==(const UnitInfo&) const = default;
};

struct SourceUnit {
    UnitInfo info;
    std::string text;

    // Language is derived from the ".c"/".cpp" suffix; throws PreconditionViolation otherwise.
    static SourceUnit from_text(std::string path, std::string text,
                                Provenance provenance = Provenance::Sard,
                                std::optional<Date> published_date = std::nullopt);
    static SourceUnit load(const std::filesystem::path& path,
                           Provenance provenance = Provenance::Sard,
                           std::optional<Date> published_date = std::nullopt);

    // Content-derived identifier used for output directory names.
    std::string id() const;
};

struct ByteSpan {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;

    std::uint32_t size() const { return end - begin; }
    bool contains(const ByteSpan& other) const { return begin <= other.begin && other.end <= end; }
    bool operator==(const ByteSpan&) const = default;
};

struct Comment {
    // Byte offset into the unit text.
    std::uint32_t offset = 0;
    std::string text;

    ByteSpan span() const { return {offset, offset + static_cast<std::uint32_t>(text.size())}; }
    bool operator==(const Comment&) const = default;
};

struct ExtractedFunction {
    std::string id;
    UnitInfo unit;
    // Empty when the declarator had no recoverable identifier.
    std::string name;
    ByteSpan span;
    ByteSpan body_span;
    std::string text;
    // Every comment inside span, in source order.
    std::vector<Comment> comments;
    VulnLabel label = VulnLabel::unknown("unlabeled");

    bool operator==(const ExtractedFunction&) const = default;
};

// Deterministic in (unit text, span).
std::string function_id(std::string_view unit_text, ByteSpan span);

// ---------------------------------------------------------------------------
// Build matrix cells and their outputs.

enum class Architecture { X86, X64, Arm, Mips };
enum class Optimization { O0, O3 };

std::string_view to_string(Architecture arch);
std::string_view to_string(Optimization opt);
std::optional<Architecture> parse_architecture(std::string_view text);
std::optional<Optimization> parse_optimization(std::string_view text);

struct BuildConfig {
    // "gcc", "clang", or a cross-toolchain id such as "cross-gcc".
    std::string compiler;
    Architecture architecture = Architecture::X86;
    Optimization optimization = Optimization::O0;
    std::vector<std::string> defines;
    bool strip = true;

    bool operator==(const BuildConfig&) const = default;
};

enum class BuildVariant { Good, Bad, Whole };

std::string_view to_string(BuildVariant variant);
// Good builds define OMITBAD, Bad builds define OMITGOOD, anything else is Whole.
BuildVariant variant_of(const BuildConfig& config);
// "<compiler>-<arch>-<opt>-<variant>", the per-cell output directory name.
std::string cell_name(const BuildConfig& config);

enum class BuildStatus { Success, CompileError, ToolchainMissing };

std::string_view to_string(BuildStatus status);
std::optional<BuildStatus> parse_build_status(std::string_view text);

using SymbolMap = std::map<std::string, std::uint64_t>;

struct CompanionBuild {
    std::string binary_path;
    SymbolMap symbols;

    bool operator==(const CompanionBuild&) const = default;
};

struct BuildArtifact {
    std::string unit_id;
    std::string unit_path;
    BuildConfig config;
    std::string binary_path;
    BuildStatus status = BuildStatus::ToolchainMissing;
    // Compiler output for CompileError; diagnostic text otherwise.
    std::string log;
    // Present on stripped Success artifacts: the unstripped twin and its symbols.
    std::optional<CompanionBuild> companion;

    bool operator==(const BuildArtifact&) const = default;
};

struct DecompiledFunction {
    std::uint64_t entry_address = 0;
    std::string surface_name;
    std::string decompiled_text;
    std::optional<std::string> matched_source;

    bool operator==(const DecompiledFunction&) const = default;
};

// A source function paired with one decompiled rendering of it.
struct MatchedPair {
    ExtractedFunction function;
    DecompiledFunction decompiled;
    BuildConfig config;
    BuildStatus build_status = BuildStatus::Success;
    std::optional<std::string> description;

    bool operator==(const MatchedPair&) const = default;
};

// ---------------------------------------------------------------------------
// Instruction records.

enum class TaskKind { Identify, Classify, PredictName, Describe };
inline constexpr TaskKind kAllTasks[] = {TaskKind::Identify, TaskKind::Classify,
                                         TaskKind::PredictName, TaskKind::Describe};

std::string_view to_string(TaskKind task);
std::optional<TaskKind> parse_task(std::string_view text);

enum class Split { Train, Val, Test };

std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view text);

using InstructionPools = std::map<TaskKind, std::vector<std::string>>;

struct CorpusRecord {
    std::string id;
    Provenance provenance = Provenance::Sard;
    std::string source_path;
    std::string func_name;
    std::string source_code;
    std::string decompiled_code;
    Architecture architecture = Architecture::X86;
    Optimization optimization = Optimization::O0;
    std::string compiler;
    bool stripped = true;
    bool is_vulnerable = false;
    std::optional<CweId> cwe;
    std::optional<std::string> description;
    TaskKind task = TaskKind::Identify;
    std::string instruction;
    std::string output;
    std::optional<Split> split;
    std::optional<Date> published_date;

    bool operator==(const CorpusRecord&) const = default;
};

// Hash of (source path, span, build config, task), 16 hex characters.
std::string record_id(std::string_view source_path, ByteSpan span, const BuildConfig& config,
                      TaskKind task, std::string_view salt = {});

bool is_identifier(std::string_view text);

// Every invariant violation of the record, in a fixed order; empty means valid.
// Instruction membership is only checked when pools are supplied.
std::vector<std::string> validate_record(const CorpusRecord& record,
                                         const InstructionPools* pools = nullptr);

// ---------------------------------------------------------------------------
// JSON mapping. Parsing throws Error(Schema) on missing fields or bad enums.

Json to_json(const CorpusRecord& record);
CorpusRecord record_from_json(const Json& json);

Json to_json(const VulnLabel& label);
VulnLabel label_from_json(const Json& json);

Json to_json(const UnitInfo& unit);
UnitInfo unit_from_json(const Json& json);

Json to_json(const ExtractedFunction& function);
ExtractedFunction function_from_json(const Json& json);

Json to_json(const BuildConfig& config);
BuildConfig config_from_json(const Json& json);

Json to_json(const BuildArtifact& artifact);
BuildArtifact artifact_from_json(const Json& json);

Json to_json(const DecompiledFunction& function);
DecompiledFunction decompiled_from_json(const Json& json);

Json to_json(const MatchedPair& pair);
MatchedPair pair_from_json(const Json& json);

std::string format_hex(std::uint64_t value);
// Accepts "0x"-prefixed or bare hex; throws Error(Schema).
std::uint64_t parse_hex(std::string_view text);

// ---------------------------------------------------------------------------
// JSON Lines I/O.

std::vector<Json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows);
Json read_json(const std::filesystem::path& path);
// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const Json& json);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::vector<CorpusRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, const std::vector<CorpusRecord>& records);

} // namespace debinforge
