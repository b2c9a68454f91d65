#include "debinforge/decompile.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <mutex>
#include <set>

#include <fmt/format.h>

#include "debinforge/error.hpp"
#include "debinforge/hash.hpp"
#include "debinforge/process.hpp"

namespace debinforge::decompile {

namespace fs = std::filesystem;

namespace {

std::uint64_t export_hex(const Json& value, std::string_view what)
{
    if (!value.is_string())
        fail(ErrorKind::MalformedExport, fmt::format("{} must be a hex string", what));
    const auto& text = value.get_ref<const std::string&>();
    if (text.size() < 3 || text.size() > 18 || text.compare(0, 2, "0x") != 0 ||
        !std::all_of(text.begin() + 2, text.end(),
                     [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); }))
        fail(ErrorKind::MalformedExport, fmt::format("{} '{}' is not lowercase 0x-prefixed hex", what, text));
    return parse_hex(text);
}

const Json& require(const Json& json, const char* key, std::string_view where)
{
    auto it = json.find(key);
    if (it == json.end())
        fail(ErrorKind::MalformedExport, fmt::format("{} lacks '{}'", where, key));
    return *it;
}

std::mutex registry_mutex;

std::map<std::string, BackendFactory, std::less<>>& registry()
{
    static std::map<std::string, BackendFactory, std::less<>> factories;
    return factories;
}

struct TempDir {
    fs::path path;

    explicit TempDir(const fs::path& parent)
    {
        std::string pattern = (parent / "debinforge-ghidra-XXXXXX").string();
        if (!mkdtemp(pattern.data()))
            fail(ErrorKind::Io, "cannot create a scratch directory under " + parent.string());
        path = pattern;
    }
    ~TempDir()
    {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

} // namespace

ExportDocument parse_export(const Json& json)
{
    if (!json.is_object())
        fail(ErrorKind::MalformedExport, "export document is not an object");
    ExportDocument doc;
    const Json& binary = require(json, "binary", "export document");
    if (!binary.is_string())
        fail(ErrorKind::MalformedExport, "'binary' must be a string");
    doc.binary = binary.get<std::string>();
    doc.image_base = export_hex(require(json, "image_base", "export document"), "image_base");
    const Json& functions = require(json, "functions", "export document");
    if (!functions.is_array())
        fail(ErrorKind::MalformedExport, "'functions' must be an array");
    for (std::size_t i = 0; i < functions.size(); ++i) {
        const Json& f = functions[i];
        const std::string where = fmt::format("functions[{}]", i);
        if (!f.is_object())
            fail(ErrorKind::MalformedExport, where + " is not an object");
        const Json& name = require(f, "name", where);
        const Json& code = require(f, "decompiled_c", where);
        if (!name.is_string() || name.get_ref<const std::string&>().empty())
            fail(ErrorKind::MalformedExport, where + ".name must be a non-empty string");
        if (!code.is_string())
            fail(ErrorKind::MalformedExport, where + ".decompiled_c must be a string");
        ExportFunction fn{name.get<std::string>(), export_hex(require(f, "entry", where), where + ".entry"),
                          code.get<std::string>()};
        if (!doc.functions.empty() && fn.entry <= doc.functions.back().entry)
            fail(ErrorKind::MalformedExport, where + " is out of address order");
        doc.functions.push_back(std::move(fn));
    }
    for (const auto& [key, value] : json.items()) {
        if (key != "binary" && key != "image_base" && key != "functions")
            doc.extra[key] = value;
    }
    return doc;
}

ExportDocument load_export(const fs::path& path)
{
    Json json;
    try {
        json = read_json(path);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Io)
            throw;
        fail(ErrorKind::MalformedExport, path.string() + ": " + e.what());
    }
    return parse_export(json);
}

Json to_json(const ExportDocument& document)
{
    Json functions = Json::array();
    for (const auto& f : document.functions)
        functions.push_back({{"name", f.name}, {"entry", format_hex(f.entry)}, {"decompiled_c", f.decompiled_c}});
    Json json{{"binary", document.binary}, {"image_base", format_hex(document.image_base)}, {"functions", functions}};
    for (const auto& [key, value] : document.extra.items())
        json[key] = value;
    return json;
}

Decompilation from_export(const ExportDocument& document)
{
    Decompilation out;
    out.image_base = document.image_base;
    for (const auto& f : document.functions) {
        if (f.decompiled_c.empty()) {
            out.empty_entries.push_back(f.name);
            continue;
        }
        out.functions.push_back(DecompiledFunction{f.entry, f.name, f.decompiled_c, std::nullopt});
    }
    return out;
}

fs::path FixtureBackend::export_path(const fs::path& binary)
{
    if (binary.extension() == ".json")
        return binary;
    return fs::path(binary.string() + ".export.json");
}

Decompilation FixtureBackend::decompile(const BuildArtifact& artifact)
{
    if (artifact.status != BuildStatus::Success)
        fail(ErrorKind::PreconditionViolation, "decompile needs a successful build");
    const fs::path path = export_path(artifact.binary_path);
    if (!fs::is_regular_file(path))
        fail(ErrorKind::BackendFailure, "no fixture export at " + path.string());
    return from_export(load_export(path));
}

GhidraBackend::GhidraBackend(GhidraSettings settings) : settings_(std::move(settings)) {}

fs::path GhidraBackend::analyzer() const
{
    return settings_.home / "support" / "analyzeHeadless";
}

std::vector<std::string> GhidraBackend::command(const fs::path& project_dir, std::string_view project_name,
                                                const fs::path& binary, const fs::path& output) const
{
    std::vector<std::string> argv{analyzer().string(), project_dir.string(), std::string(project_name),
                                  "-import",           binary.string()};
    if (!settings_.script_dir.empty()) {
        argv.emplace_back("-scriptPath");
        argv.push_back(settings_.script_dir.string());
    }
    argv.emplace_back("-postScript");
    argv.push_back(settings_.script_name);
    argv.push_back(output.string());
    argv.emplace_back("-deleteProject");
    return argv;
}

Decompilation GhidraBackend::decompile(const BuildArtifact& artifact)
{
    if (artifact.status != BuildStatus::Success)
        fail(ErrorKind::PreconditionViolation, "decompile needs a successful build");
    if (settings_.home.empty())
        fail(ErrorKind::BackendUnavailable, "Ghidra home is not configured (set GHIDRA_HOME)");
    const fs::path headless = analyzer();
    std::error_code ec;
    if (!fs::is_regular_file(headless, ec))
        fail(ErrorKind::BackendUnavailable, "analyzeHeadless not found at " + headless.string());

    TempDir scratch(settings_.work_dir.empty() ? fs::temp_directory_path() : settings_.work_dir);
    const fs::path project = scratch.path / "project";
    const fs::path output = scratch.path / "export.json";
    fs::create_directories(project);
    const std::string project_name = "debinforge_" + short_id(artifact.binary_path);

    process::Options options;
    options.timeout = settings_.timeout;
    const auto argv = command(project, project_name, artifact.binary_path, output);
    const auto result = process::run(argv, options);
    if (!result.ok()) {
        std::string reason = result.spawn_failed ? "could not start analyzer"
                             : result.timed_out  ? "analyzer timed out"
                                                 : fmt::format("analyzer exited with status {}", result.exit_code);
        fail(ErrorKind::BackendFailure, reason + "\n" + result.output);
    }
    if (!fs::is_regular_file(output, ec))
        fail(ErrorKind::BackendFailure, "analyzer wrote no export document\n" + result.output);
    return from_export(load_export(output));
}

void register_backend(std::string id, BackendFactory factory)
{
    std::lock_guard lock(registry_mutex);
    registry()[std::move(id)] = std::move(factory);
}

std::unique_ptr<Backend> make_backend(std::string_view id, const Json& config)
{
    if (id == "fixture")
        return std::make_unique<FixtureBackend>();
    if (id == "ghidra") {
        GhidraSettings s;
        if (config.contains("home"))
            s.home = config["home"].get<std::string>();
        else if (const char* env = std::getenv("GHIDRA_HOME"))
            s.home = env;
        if (config.contains("script_dir"))
            s.script_dir = config["script_dir"].get<std::string>();
        if (config.contains("work_dir"))
            s.work_dir = config["work_dir"].get<std::string>();
        if (config.contains("timeout_s"))
            s.timeout = std::chrono::seconds(config["timeout_s"].get<long>());
        return std::make_unique<GhidraBackend>(std::move(s));
    }
    std::lock_guard lock(registry_mutex);
    auto it = registry().find(id);
    if (it == registry().end())
        fail(ErrorKind::Config, fmt::format("unknown decompiler backend '{}'", id));
    return it->second(config);
}

Decompilation decompile(const BuildArtifact& artifact, Backend& backend)
{
    return backend.decompile(artifact);
}

MatchResult match_functions(const std::vector<DecompiledFunction>& decompiled, const SymbolMap& symbols,
                            const std::vector<ExtractedFunction>& extracted)
{
    // Each name anchors at most once, at its first extracted occurrence.
    std::vector<std::pair<std::size_t, std::uint64_t>> anchors;
    std::set<std::string_view> seen;
    for (std::size_t i = 0; i < extracted.size(); ++i) {
        const auto& name = extracted[i].name;
        if (name.empty() || !seen.insert(name).second)
            continue;
        if (auto it = symbols.find(name); it != symbols.end())
            anchors.emplace_back(i, it->second);
    }

    // The load offset is a property of the whole binary, so every companion symbol
    // votes, not only the extracted functions. Aliases share one vote.
    std::set<std::uint64_t> symbol_addresses;
    for (const auto& [name, address] : symbols)
        symbol_addresses.insert(address);
    std::map<std::uint64_t, std::size_t> support;
    for (std::uint64_t address : symbol_addresses) {
        for (const auto& d : decompiled) {
            if (d.entry_address >= address)
                ++support[d.entry_address - address];
        }
    }
    const std::size_t at_zero = support.count(0) ? support[0] : 0;
    std::size_t best = 0;
    std::vector<std::uint64_t> leaders;
    for (const auto& [offset, count] : support) {
        if (offset == 0)
            continue;
        if (count > best) {
            best = count;
            leaders.assign({offset});
        } else if (count == best) {
            leaders.push_back(offset);
        }
    }

    std::uint64_t offset = 0;
    if (best >= 2 && best > at_zero) {
        if (leaders.size() > 1)
            fail(ErrorKind::AmbiguousBase,
                 fmt::format("{} base offsets are each supported by {} anchors", leaders.size(), best));
        offset = leaders.front();
    } else if (at_zero == 0 && best == 1) {
        fail(ErrorKind::AmbiguousBase, "no base offset is supported by two or more anchors");
    }

    MatchResult result;
    result.base_offset = offset;
    std::map<std::uint64_t, std::size_t> by_entry;
    for (std::size_t i = 0; i < decompiled.size(); ++i)
        by_entry.emplace(decompiled[i].entry_address, i);
    std::vector<bool> used(decompiled.size(), false);
    std::vector<bool> matched(extracted.size(), false);
    for (const auto& [index, address] : anchors) {
        auto it = by_entry.find(address + offset);
        if (it == by_entry.end() || used[it->second])
            continue;
        used[it->second] = true;
        matched[index] = true;
        DecompiledFunction d = decompiled[it->second];
        d.matched_source = extracted[index].id;
        result.matches.push_back({extracted[index].id, std::move(d)});
    }
    for (std::size_t i = 0; i < extracted.size(); ++i) {
        if (!matched[i])
            result.unmatched_functions.push_back(extracted[i].id);
    }
    for (std::size_t i = 0; i < decompiled.size(); ++i) {
        if (!used[i])
            result.unmatched_entries.push_back(decompiled[i].entry_address);
    }
    return result;
}

} // namespace debinforge::decompile
