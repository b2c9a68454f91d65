#pragma once

// Run configuration, on-disk stage layout, and the subcommand driver.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "debinforge/build.hpp"
#include "debinforge/instruct.hpp"
#include "debinforge/model.hpp"

namespace debinforge::pipeline {

// Standard file names inside a run directory.
namespace files {
inline constexpr const char* kCorpus = "corpus.json";
inline constexpr const char* kUnits = "units.jsonl";
inline constexpr const char* kFunctions = "functions.jsonl";
inline constexpr const char* kDiagnostics = "diagnostics.jsonl";
inline constexpr const char* kArtifacts = "artifacts.jsonl";
inline constexpr const char* kDecompiled = "decompiled.jsonl";
inline constexpr const char* kPairs = "pairs.jsonl";
inline constexpr const char* kMatchReport = "match_report.jsonl";
inline constexpr const char* kCleanPairs = "clean_pairs.jsonl";
inline constexpr const char* kDrops = "drops.jsonl";
inline constexpr const char* kDescriptions = "descriptions.jsonl";
inline constexpr const char* kInjections = "injections.jsonl";
inline constexpr const char* kInjectedUnits = "injected_units.jsonl";
inline constexpr const char* kPools = "instruction_pools.json";
inline constexpr const char* kRecords = "records.jsonl";
inline constexpr const char* kSkipped = "skipped.jsonl";
inline constexpr const char* kDuplicates = "duplicates.jsonl";
inline constexpr const char* kSplitReport = "split_report.json";
inline constexpr const char* kPrepared = "prepared.jsonl";
inline constexpr const char* kMetrics = "metrics.json";
inline constexpr const char* kStats = "stats.json";
inline constexpr const char* kStatsTable = "stats.txt";
inline constexpr const char* kRunLog = "run.log";
} // namespace files

std::string split_file(Split split);

struct UnitMeta {
    Provenance provenance = Provenance::Sard;
    std::optional<Date> published_date;
    // Function name -> label, overriding the name-based labeler (for non-SARD sources).
    std::map<std::string, VulnLabel> labels;
};

// <corpus>/manifest.json: {"support_dirs": [...], "units": {path: {...}}, "expected": {...}}.
// A missing manifest means defaults: support dir "testcasesupport", SARD provenance.
struct CorpusManifest {
    std::vector<std::string> support_dirs{"testcasesupport"};
    std::map<std::string, UnitMeta> units;
    Json expected = Json::object();

    static CorpusManifest load(const std::filesystem::path& corpus_root);
};

// Source files of the corpus relative to its root, sorted, support directories and
// the prebuilt "builds" tree excluded.
std::vector<std::string> discover_units(const std::filesystem::path& corpus_root, const CorpusManifest& manifest);

struct RunConfig {
    std::filesystem::path in;
    std::filesystem::path out;
    unsigned jobs = 1;
    std::uint64_t seed = 0;
    std::string matrix = "paper-six";
    std::string decompiler = "ghidra";
    Json decompiler_config = Json::object();
    std::set<std::string> skip;
    bool expand_instructions = false;
    build::ToolchainTable toolchains = build::ToolchainTable::defaults();
    build::CustomProfiles profiles;
    std::chrono::seconds compile_timeout{120};
    Json llm = Json::object();
    Json inject = Json::object();
    std::optional<std::filesystem::path> instruction_pools;
    std::vector<TaskKind> tasks{std::begin(kAllTasks), std::end(kAllTasks)};
    instruct::SplitOptions split;
    instruct::PrepareOptions prepare;
    std::optional<std::filesystem::path> records;
    std::optional<std::filesystem::path> gold;
    std::optional<std::filesystem::path> predictions;
};

// Applies a run-configuration document on top of `base`. Throws Config.
RunConfig apply_config(RunConfig base, const Json& document);

// Stages. Each reads from config.in, writes under config.out and returns its summary.
Json run_extract(const RunConfig& config);
Json run_compile(const RunConfig& config);
Json run_decompile(const RunConfig& config);
Json run_match(const RunConfig& config);
Json run_postprocess(const RunConfig& config);
Json run_describe(const RunConfig& config);
Json run_inject(const RunConfig& config);
Json run_instructions(const RunConfig& config);
Json run_assemble(const RunConfig& config);
Json run_split(const RunConfig& config);
Json run_prepare(const RunConfig& config);
Json run_eval(const RunConfig& config);
Json run_stats(const RunConfig& config);
// extract -> compile -> decompile -> match -> postprocess -> assemble -> split, all in config.out.
Json run_pipeline(const RunConfig& config);

// Parses argv, runs one subcommand and prints its one-line JSON summary.
// Returns 0 on success, 1 on data errors, 2 on configuration errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace debinforge::pipeline
