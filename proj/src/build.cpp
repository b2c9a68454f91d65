#include "debinforge/build.hpp"

#include <algorithm>
#include <regex>
#include <set>

#include <fmt/format.h>

#include "debinforge/elf.hpp"
#include "debinforge/error.hpp"
#include "debinforge/parallel.hpp"
#include "debinforge/process.hpp"

namespace debinforge::build {

namespace fs = std::filesystem;

namespace {

constexpr Architecture kArchitectures[] = {Architecture::X86, Architecture::X64, Architecture::Arm,
                                           Architecture::Mips};
constexpr Optimization kOptimizations[] = {Optimization::O0, Optimization::O3};

std::vector<std::string> defines_for(BuildVariant variant)
{
    switch (variant) {
    case BuildVariant::Bad: return {"INCLUDEMAIN", "OMITGOOD"};
    case BuildVariant::Good: return {"INCLUDEMAIN", "OMITBAD"};
    case BuildVariant::Whole: return {"INCLUDEMAIN"};
    }
    return {};
}

BuildConfig cell(std::string compiler, Architecture arch, Optimization opt, BuildVariant variant)
{
    return BuildConfig{std::move(compiler), arch, opt, defines_for(variant), true};
}

std::vector<std::string> string_list(const Json& json, const char* key)
{
    std::vector<std::string> out;
    auto it = json.find(key);
    if (it == json.end())
        return out;
    if (!it->is_array())
        fail(ErrorKind::Config, fmt::format("toolchain field '{}' must be an array", key));
    for (const auto& v : *it)
        out.push_back(v.get<std::string>());
    return out;
}

const char* optimization_flag(Optimization opt)
{
    return opt == Optimization::O0 ? "-O0" : "-O3";
}

bool is_source(const fs::path& p)
{
    return language_from_path(p).has_value();
}

} // namespace

ToolchainTable ToolchainTable::defaults()
{
    ToolchainTable t;
    t.set("gcc", Architecture::X86, {"gcc", "g++", {}, {}});
    t.set("gcc", Architecture::X64, {"gcc", "g++", {"-m64"}, {}});
    t.set("gcc", Architecture::Arm, {"aarch64-linux-gnu-gcc", "aarch64-linux-gnu-g++", {}, {}});
    t.set("gcc", Architecture::Mips, {"mips-linux-gnu-gcc", "mips-linux-gnu-g++", {}, {}});
    t.set("clang", Architecture::X86, {"clang", "clang++", {}, {}});
    t.set("clang", Architecture::X64, {"clang", "clang++", {"-m64"}, {}});
    t.set("clang", Architecture::Arm, {"clang", "clang++", {"--target=aarch64-linux-gnu"}, {}});
    t.set("clang", Architecture::Mips, {"clang", "clang++", {"--target=mips-linux-gnu"}, {}});
    t.set("cross-gcc", Architecture::Arm, {"aarch64-linux-gnu-gcc", "aarch64-linux-gnu-g++", {}, {}});
    t.set("cross-gcc", Architecture::Mips, {"mips-linux-gnu-gcc", "mips-linux-gnu-g++", {}, {}});
    return t;
}

ToolchainTable ToolchainTable::from_json(const Json& json)
{
    ToolchainTable t = defaults();
    if (json.is_null())
        return t;
    if (!json.is_object())
        fail(ErrorKind::Config, "toolchains must be an object");
    for (const auto& [compiler, archs] : json.items()) {
        if (!archs.is_object())
            fail(ErrorKind::Config, "toolchains." + compiler + " must be an object");
        for (const auto& [arch_name, entry] : archs.items()) {
            auto arch = parse_architecture(arch_name);
            if (!arch)
                fail(ErrorKind::Config, "unknown architecture in toolchains: " + arch_name);
            Toolchain tc;
            tc.cc = entry.value("cc", "");
            tc.cxx = entry.value("cxx", tc.cc);
            if (tc.cc.empty())
                fail(ErrorKind::Config, fmt::format("toolchains.{}.{} needs 'cc'", compiler, arch_name));
            tc.flags = string_list(entry, "flags");
            tc.link_flags = string_list(entry, "link_flags");
            t.set(compiler, *arch, std::move(tc));
        }
    }
    return t;
}

const Toolchain* ToolchainTable::find(std::string_view compiler, Architecture arch) const
{
    auto it = entries_.find(std::pair<std::string, Architecture>(std::string(compiler), arch));
    return it == entries_.end() ? nullptr : &it->second;
}

void ToolchainTable::set(std::string compiler, Architecture arch, Toolchain toolchain)
{
    entries_[{std::move(compiler), arch}] = std::move(toolchain);
}

Json ToolchainTable::to_json() const
{
    Json json = Json::object();
    for (const auto& [key, tc] : entries_) {
        json[key.first][std::string(to_string(key.second))] =
            Json{{"cc", tc.cc}, {"cxx", tc.cxx}, {"flags", tc.flags}, {"link_flags", tc.link_flags}};
    }
    return json;
}

CustomProfiles custom_profiles_from_json(const Json& json)
{
    CustomProfiles profiles;
    if (json.is_null())
        return profiles;
    if (!json.is_object())
        fail(ErrorKind::Config, "matrix_profiles must be an object");
    for (const auto& [name, cells] : json.items()) {
        std::vector<BuildConfig> configs;
        for (const auto& c : cells) {
            auto arch = parse_architecture(c.value("architecture", ""));
            auto opt = parse_optimization(c.value("optimization", ""));
            if (!arch || !opt || c.value("compiler", "").empty())
                fail(ErrorKind::Config, "matrix profile '" + name + "' has an invalid cell");
            configs.push_back(BuildConfig{c.value("compiler", ""), *arch, *opt, {}, true});
        }
        profiles.emplace(name, std::move(configs));
    }
    return profiles;
}

std::vector<BuildConfig> plan_matrix(std::string_view profile, BuildVariant variant, const CustomProfiles& custom)
{
    std::vector<BuildConfig> cells;
    if (profile == "paper-six") {
        for (const char* compiler : {"gcc", "clang"}) {
            for (auto opt : kOptimizations)
                cells.push_back(cell(compiler, Architecture::X86, opt, variant));
        }
        for (auto opt : kOptimizations)
            cells.push_back(cell("cross-gcc", Architecture::Arm, opt, variant));
        return cells;
    }
    if (profile == "full-sixteen") {
        for (const char* compiler : {"gcc", "clang"}) {
            for (auto arch : kArchitectures) {
                for (auto opt : kOptimizations)
                    cells.push_back(cell(compiler, arch, opt, variant));
            }
        }
        return cells;
    }
    auto it = custom.find(profile);
    if (it == custom.end())
        fail(ErrorKind::UnknownProfile, "unknown matrix profile '" + std::string(profile) + "'");
    for (const auto& c : it->second)
        cells.push_back(cell(c.compiler, c.architecture, c.optimization, variant));
    return cells;
}

std::vector<std::string> validate_plan(const BuildPlan& plan)
{
    std::vector<std::string> violations;
    if (plan.cells.empty())
        violations.emplace_back("plan has no cells");
    if (plan.unit.info.provenance != Provenance::Sard)
        return violations;
    for (const auto& c : plan.cells) {
        auto has = [&](std::string_view d) { return std::count(c.defines.begin(), c.defines.end(), d); };
        if (has("INCLUDEMAIN") != 1)
            violations.push_back(cell_name(c) + ": missing INCLUDEMAIN");
        if (has("OMITGOOD") + has("OMITBAD") != 1)
            violations.push_back(cell_name(c) + ": needs exactly one of OMITGOOD/OMITBAD");
    }
    return violations;
}

BuildPlan make_plan(SourceUnit unit, std::vector<BuildConfig> cells, const std::vector<fs::path>& support_dirs)
{
    BuildPlan plan{std::move(unit), std::move(cells), {}, {}};
    const fs::path unit_path(plan.unit.info.path);
    const fs::path dir = unit_path.has_parent_path() ? unit_path.parent_path() : fs::path(".");
    plan.include_dirs.push_back(dir);

    static const std::regex multi_file(R"((.*_\d+)([a-z]))");
    std::smatch self_match;
    const std::string stem = unit_path.stem().string();
    const bool multi = std::regex_match(stem, self_match, multi_file);

    std::set<fs::path> extra;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        const fs::path p = entry.path();
        if (!entry.is_regular_file() || !is_source(p) || p.filename() == unit_path.filename())
            continue;
        const std::string other = p.stem().string();
        std::smatch m;
        if (multi && std::regex_match(other, m, multi_file) && m[1] == self_match[1].str()) {
            extra.insert(p);
        } else if (other.rfind("CWE", 0) != 0 && other.rfind("main", 0) != 0) {
            extra.insert(p);
        }
    }
    for (const auto& support : support_dirs) {
        plan.include_dirs.push_back(support);
        for (const auto& entry : fs::directory_iterator(support, ec)) {
            const fs::path p = entry.path();
            if (entry.is_regular_file() && is_source(p) && p.stem().string().rfind("main", 0) != 0)
                extra.insert(p);
        }
    }
    plan.extra_sources.assign(extra.begin(), extra.end());
    return plan;
}

std::vector<std::string> compile_command(const BuildPlan& plan, const BuildConfig& cell,
                                         const Toolchain& toolchain, const fs::path& output, bool strip)
{
    std::vector<std::string> argv;
    argv.push_back(plan.unit.info.language == Language::Cpp ? toolchain.cxx : toolchain.cc);
    argv.insert(argv.end(), toolchain.flags.begin(), toolchain.flags.end());
    argv.emplace_back(optimization_flag(cell.optimization));
    for (const auto& d : cell.defines) {
        argv.emplace_back("-D");
        argv.push_back(d);
    }
    for (const auto& inc : plan.include_dirs)
        argv.push_back("-I" + inc.string());
    argv.push_back(plan.unit.info.path);
    for (const auto& src : plan.extra_sources)
        argv.push_back(src.string());
    argv.emplace_back("-o");
    argv.push_back(output.string());
    argv.insert(argv.end(), toolchain.link_flags.begin(), toolchain.link_flags.end());
    if (strip)
        argv.emplace_back("-s");
    return argv;
}

BuildArtifact compile(const BuildPlan& plan, const BuildConfig& cell, const CompileOptions& options)
{
    BuildArtifact artifact;
    artifact.unit_id = plan.unit.id();
    artifact.unit_path = plan.unit.info.path;
    artifact.config = cell;

    const fs::path cell_dir = options.output_root / artifact.unit_id / cell_name(cell);
    const fs::path binary = cell_dir / "bin";
    const fs::path companion = cell_dir / "bin.unstripped";
    artifact.binary_path = binary.string();

    const Toolchain* toolchain = options.toolchains.find(cell.compiler, cell.architecture);
    if (!toolchain) {
        artifact.status = BuildStatus::ToolchainMissing;
        artifact.log = fmt::format("no toolchain configured for {}/{}", cell.compiler, to_string(cell.architecture));
        return artifact;
    }
    const std::string& exe = plan.unit.info.language == Language::Cpp ? toolchain->cxx : toolchain->cc;
    if (!process::find_executable(exe)) {
        artifact.status = BuildStatus::ToolchainMissing;
        artifact.log = "compiler not found: " + exe;
        return artifact;
    }

    std::error_code ec;
    fs::create_directories(cell_dir, ec);
    std::string log;
    process::Options popts;
    popts.timeout = options.timeout;

    auto build_once = [&](const fs::path& output, bool strip) {
        const auto argv = compile_command(plan, cell, *toolchain, output, strip);
        fs::remove(output, ec);
        const auto result = process::run(argv, popts);
        log += "$ " + process::command_line(argv) + "\n" + result.output;
        if (result.timed_out)
            log += fmt::format("timed out after {} s\n", options.timeout.count());
        else if (!result.ok())
            log += fmt::format("exit status {}\n", result.exit_code);
        return result.ok() && fs::is_regular_file(output, ec) && fs::file_size(output, ec) > 0;
    };

    bool ok = build_once(binary, cell.strip);
    if (ok) {
        const fs::path& symbol_source = cell.strip ? companion : binary;
        if (cell.strip)
            ok = build_once(companion, false);
        if (ok) {
            try {
                CompanionBuild twin{symbol_source.string(), elf::function_symbols(elf::read_symbols(symbol_source))};
                if (twin.symbols.empty()) {
                    log += "companion build has no function symbols\n";
                    ok = false;
                } else {
                    artifact.companion = std::move(twin);
                }
            } catch (const Error& e) {
                log += std::string(e.what()) + "\n";
                ok = false;
            }
        }
    }
    artifact.status = ok ? BuildStatus::Success : BuildStatus::CompileError;
    artifact.log = log;
    write_file(cell_dir / "compile.log", log);
    return artifact;
}

std::vector<BuildArtifact> compile_all(const BuildPlan& plan, const CompileOptions& options, unsigned jobs)
{
    return parallel_map(plan.cells.size(), jobs,
                        [&](std::size_t i) { return compile(plan, plan.cells[i], options); });
}

bool verify_stripped(const BuildArtifact& artifact, const std::vector<std::string>& expected_names)
{
    if (artifact.status != BuildStatus::Success)
        fail(ErrorKind::PreconditionViolation, "verify_stripped needs a successful build");
    const auto tables = elf::read_symbols(artifact.binary_path);
    if (expected_names.empty())
        return true;
    const std::set<std::string_view> wanted(expected_names.begin(), expected_names.end());
    for (const auto* table : {&tables.symtab, &tables.dynsym}) {
        for (const auto& sym : *table) {
            if (wanted.count(sym.name))
                return false;
        }
    }
    return true;
}

ToolchainChecker::ToolchainChecker(ToolchainTable toolchains, std::string compiler, Architecture arch,
                                   std::vector<fs::path> include_dirs, std::chrono::seconds timeout)
    : toolchains_(std::move(toolchains)), compiler_(std::move(compiler)), arch_(arch),
      include_dirs_(std::move(include_dirs)), timeout_(timeout)
{
}

CheckResult ToolchainChecker::check(const SourceUnit& unit)
{
    const Toolchain* tc = toolchains_.find(compiler_, arch_);
    if (!tc)
        return {false, fmt::format("no toolchain configured for {}/{}", compiler_, to_string(arch_))};
    const bool cpp = unit.info.language == Language::Cpp;
    std::vector<std::string> argv{cpp ? tc->cxx : tc->cc};
    argv.insert(argv.end(), tc->flags.begin(), tc->flags.end());
    argv.emplace_back("-fsyntax-only");
    const fs::path unit_path(unit.info.path);
    if (unit_path.has_parent_path())
        argv.push_back("-I" + unit_path.parent_path().string());
    for (const auto& inc : include_dirs_)
        argv.push_back("-I" + inc.string());
    argv.emplace_back("-x");
    argv.emplace_back(cpp ? "c++" : "c");
    argv.emplace_back("-");
    process::Options popts;
    popts.timeout = timeout_;
    popts.stdin_data = unit.text;
    const auto result = process::run(argv, popts);
    return {result.ok(), "$ " + process::command_line(argv) + "\n" + result.output};
}

} // namespace debinforge::build
