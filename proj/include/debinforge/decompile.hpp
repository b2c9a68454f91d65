#pragma once

// Decompiler backends and address-based matching of decompiled functions to source.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "debinforge/model.hpp"

namespace debinforge::decompile {

// The export document written by the decompiler-side script:
// {"binary": ..., "image_base": "0x...", "functions": [{"name", "entry", "decompiled_c"}]}.
struct ExportFunction {
    std::string name;
    std::uint64_t entry = 0;
    std::string decompiled_c;

    bool operator==(const ExportFunction&) const = default;
};

struct ExportDocument {
    std::string binary;
    std::uint64_t image_base = 0;
    std::vector<ExportFunction> functions;
    // Keys beyond the required three (analyzer version, warning counters, ...).
    Json extra = Json::object();

    bool operator==(const ExportDocument&) const = default;
};

// Throws MalformedExport. Hex fields must be lowercase with a "0x" prefix and
// entries strictly ascending by address.
ExportDocument parse_export(const Json& json);
ExportDocument load_export(const std::filesystem::path& path);
Json to_json(const ExportDocument& document);

struct Decompilation {
    std::uint64_t image_base = 0;
    std::vector<DecompiledFunction> functions;
    // Entries exported with empty pseudo-C (decompiler timeouts).
    std::vector<std::string> empty_entries;
};

// Entries with empty text are moved to empty_entries.
Decompilation from_export(const ExportDocument& document);

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string_view name() const = 0;
    // Requires a Success artifact; throws BackendUnavailable, BackendFailure or MalformedExport.
    virtual Decompilation decompile(const BuildArtifact& artifact) = 0;
};

// Reads the export document next to the binary: the binary path itself when it
// ends in ".json", otherwise "<binary>.export.json".
class FixtureBackend : public Backend {
public:
    std::string_view name() const override { return "fixture"; }
    Decompilation decompile(const BuildArtifact& artifact) override;

    static std::filesystem::path export_path(const std::filesystem::path& binary);
};

struct GhidraSettings {
    // Installation root; analyzeHeadless lives in <home>/support.
    std::filesystem::path home;
    // Directory holding the export post-script.
    std::filesystem::path script_dir;
    std::string script_name = "export_functions.py";
    // Scratch space for per-run projects; the system temp directory when empty.
    std::filesystem::path work_dir;
    std::chrono::seconds timeout{1800};
};

class GhidraBackend : public Backend {
public:
    explicit GhidraBackend(GhidraSettings settings);

    std::string_view name() const override { return "ghidra"; }
    Decompilation decompile(const BuildArtifact& artifact) override;

    std::filesystem::path analyzer() const;
    std::vector<std::string> command(const std::filesystem::path& project_dir, std::string_view project_name,
                                     const std::filesystem::path& binary,
                                     const std::filesystem::path& output) const;

private:
    GhidraSettings settings_;
};

using BackendFactory = std::function<std::unique_ptr<Backend>(const Json& config)>;

// Registers a custom backend id, replacing any previous registration.
void register_backend(std::string id, BackendFactory factory);
// "fixture", "ghidra" (config keys: home, script_dir, work_dir, timeout_s; GHIDRA_HOME
// fills a missing home) or a registered id. Throws Config for unknown ids.
std::unique_ptr<Backend> make_backend(std::string_view id, const Json& config = Json::object());

Decompilation decompile(const BuildArtifact& artifact, Backend& backend);

struct Match {
    std::string function_id;
    DecompiledFunction decompiled;
};

struct MatchResult {
    std::uint64_t base_offset = 0;
    // Ordered by the extracted-function order.
    std::vector<Match> matches;
    std::vector<std::string> unmatched_functions;
    std::vector<std::uint64_t> unmatched_entries;
};

// A decompiled function matches source function F iff entry == symbols[F.name] + offset.
// Every distinct symbol address votes for entry - address; the offset is nonzero only
// when it is supported by at least two votes and by more votes than offset zero. Throws AmbiguousBase when candidate offsets tie or when
// nothing aligns at all.
MatchResult match_functions(const std::vector<DecompiledFunction>& decompiled, const SymbolMap& symbols,
                            const std::vector<ExtractedFunction>& extracted);

} // namespace debinforge::decompile
