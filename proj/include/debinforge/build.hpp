#pragma once

// Compilation matrix planning and execution.

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "debinforge/model.hpp"

namespace debinforge::build {

struct Toolchain {
    std::string cc;
    std::string cxx;
    std::vector<std::string> flags;
    std::vector<std::string> link_flags;

    bool operator==(const Toolchain&) const = default;
};

// (compiler id, architecture) -> toolchain. Defaults follow the quoted matrix
// commands; x64 and MIPS entries are configuration.
class ToolchainTable {
public:
    static ToolchainTable defaults();
    // Entries from `json` override the defaults: {"gcc": {"x64": {"cc": ..., "cxx": ..., "flags": [...]}}}.
    static ToolchainTable from_json(const Json& json);

    const Toolchain* find(std::string_view compiler, Architecture arch) const;
    void set(std::string compiler, Architecture arch, Toolchain toolchain);
    Json to_json() const;

private:
    std::map<std::pair<std::string, Architecture>, Toolchain, std::less<>> entries_;
};

// Named matrix profiles beyond the two built-in ones: name -> cells (without defines).
using CustomProfiles = std::map<std::string, std::vector<BuildConfig>, std::less<>>;

CustomProfiles custom_profiles_from_json(const Json& json);

// "paper-six": gcc/clang on x86 plus the ARM cross compiler, each at O0 and O3.
// "full-sixteen": {gcc, clang} x {x86, x64, arm, mips} x {O0, O3}.
// Every cell gets INCLUDEMAIN, the variant's OMIT define, and strip = true.
// Throws UnknownProfile.
std::vector<BuildConfig> plan_matrix(std::string_view profile, BuildVariant variant,
                                     const CustomProfiles& custom = {});

struct BuildPlan {
    SourceUnit unit;
    std::vector<BuildConfig> cells;
    std::vector<std::filesystem::path> include_dirs;
    std::vector<std::filesystem::path> extra_sources;
};

std::vector<std::string> validate_plan(const BuildPlan& plan);

// Headers and support sources co-located with the unit: non-testcase sources in the
// unit's directory, sibling files of a multi-file testcase (`..._51a.c`, `..._51b.c`),
// and every source in the given support directories except files named main*.
BuildPlan make_plan(SourceUnit unit, std::vector<BuildConfig> cells,
                    const std::vector<std::filesystem::path>& support_dirs = {});

struct CompileOptions {
    ToolchainTable toolchains = ToolchainTable::defaults();
    std::filesystem::path output_root = "out";
    std::chrono::seconds timeout{120};
};

// The compiler command line for one cell; `strip` toggles the trailing -s.
std::vector<std::string> compile_command(const BuildPlan& plan, const BuildConfig& cell,
                                         const Toolchain& toolchain, const std::filesystem::path& output,
                                         bool strip);

// Builds one cell into <output_root>/<unit-id>/<cell-name>/{bin, bin.unstripped, compile.log}.
// Failures are reported through the artifact status, never thrown.
BuildArtifact compile(const BuildPlan& plan, const BuildConfig& cell, const CompileOptions& options);

// All cells of the plan; result order equals plan order whatever the worker count.
std::vector<BuildArtifact> compile_all(const BuildPlan& plan, const CompileOptions& options, unsigned jobs);

// True iff none of the names appears in the binary's symbol tables.
// Requires a Success artifact; throws UnreadableBinary.
bool verify_stripped(const BuildArtifact& artifact, const std::vector<std::string>& expected_names);

struct CheckResult {
    bool ok = false;
    std::string log;
};

// Compile-only check of a translation unit through the toolchain table.
class CompileChecker {
public:
    virtual ~CompileChecker() = default;
    virtual CheckResult check(const SourceUnit& unit) = 0;
};

class ToolchainChecker : public CompileChecker {
public:
    ToolchainChecker(ToolchainTable toolchains, std::string compiler = "gcc",
                     Architecture arch = Architecture::X86, std::vector<std::filesystem::path> include_dirs = {},
                     std::chrono::seconds timeout = std::chrono::seconds{120});

    CheckResult check(const SourceUnit& unit) override;

private:
    ToolchainTable toolchains_;
    std::string compiler_;
    Architecture arch_;
    std::vector<std::filesystem::path> include_dirs_;
    std::chrono::seconds timeout_;
};

} // namespace debinforge::build
