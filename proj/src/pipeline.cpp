#include "debinforge/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>

#include "debinforge/decompile.hpp"
#include "debinforge/error.hpp"
#include "debinforge/eval.hpp"
#include "debinforge/extractor.hpp"
#include "debinforge/llm.hpp"
#include "debinforge/parallel.hpp"
#include "debinforge/postprocess.hpp"

namespace fs = std::filesystem;

namespace debinforge::pipeline {

namespace {

[[noreturn]] void config_error(const std::string& message)
{
    fail(ErrorKind::Config, message);
}

fs::path input(const RunConfig& c, const char* name)
{
    const fs::path p = c.in / name;
    if (!fs::exists(p))
        fail(ErrorKind::Io, fmt::format("missing input {} (run the producing stage first)", p.string()));
    return p;
}

template <typename T>
std::vector<Json> rows_of(const std::vector<T>& items)
{
    std::vector<Json> rows;
    rows.reserve(items.size());
    for (const auto& item : items)
        rows.push_back(to_json(item));
    return rows;
}

template <typename T, typename F>
std::vector<T> parse_rows(const fs::path& path, F&& parse)
{
    std::vector<T> out;
    for (const auto& row : read_jsonl(path))
        out.push_back(parse(row));
    return out;
}

std::vector<MatchedPair> read_pairs(const fs::path& path)
{
    return parse_rows<MatchedPair>(path, pair_from_json);
}

std::vector<ExtractedFunction> read_functions(const fs::path& path)
{
    return parse_rows<ExtractedFunction>(path, function_from_json);
}

std::vector<BuildArtifact> read_artifacts(const fs::path& path)
{
    return parse_rows<BuildArtifact>(path, artifact_from_json);
}

struct CorpusInfo {
    fs::path root;
    CorpusManifest manifest;
};

CorpusInfo read_corpus(const RunConfig& c)
{
    const Json doc = read_json(input(c, files::kCorpus));
    CorpusInfo info{doc.at("root").get<std::string>(), {}};
    info.manifest = CorpusManifest::load(info.root);
    return info;
}

struct UnitRow {
    SourceUnit unit;
    fs::path file;
};

std::vector<UnitRow> read_units(const RunConfig& c)
{
    std::vector<UnitRow> units;
    for (const auto& row : read_jsonl(input(c, files::kUnits))) {
        UnitRow u{{unit_from_json(row.at("unit")), {}}, row.at("file").get<std::string>()};
        u.unit.text = read_file(u.file);
        units.push_back(std::move(u));
    }
    return units;
}

std::vector<BuildVariant> variants_for(const UnitInfo& unit)
{
    if (unit.provenance == Provenance::Sard)
        return {BuildVariant::Bad, BuildVariant::Good};
    return {BuildVariant::Whole};
}

std::vector<fs::path> support_paths(const CorpusInfo& corpus)
{
    std::vector<fs::path> dirs;
    for (const auto& d : corpus.manifest.support_dirs) {
        if (fs::is_directory(corpus.root / d))
            dirs.push_back(corpus.root / d);
    }
    return dirs;
}

VulnLabel label_for(const UnitMeta* meta, const UnitInfo& unit, const std::string& name)
{
    if (meta) {
        if (auto it = meta->labels.find(name); it != meta->labels.end())
            return it->second;
    }
    if (unit.provenance == Provenance::Sard)
        return extract::label_function(name);
    return VulnLabel::unknown("no label for non-SARD function");
}

VulnLabel parse_label_text(const std::string& text)
{
    if (text == "benign")
        return VulnLabel::benign();
    if (auto cwe = CweId::parse_canonical(text))
        return VulnLabel::vulnerable(*cwe);
    config_error("manifest label must be 'benign' or 'CWE-<n>': '" + text + "'");
}

// Chat client from the "llm" config section: a replay transcript or a live endpoint,
// optionally wrapped so the exchange is recorded.
class ClientHandle {
public:
    explicit ClientHandle(const Json& llm)
    {
        const auto settings = llm::settings_from_json(llm);
        if (llm.contains("replay")) {
            base_ = std::make_unique<llm::ReplayChatClient>(
                llm::ReplayChatClient::from_file(settings, llm["replay"].get<std::string>()));
        } else if (!settings.endpoint.empty()) {
            base_ = std::make_unique<llm::HttpChatClient>(settings);
        } else {
            config_error("llm needs an 'endpoint' or a 'replay' transcript");
        }
        if (llm.contains("record")) {
            record_path_ = llm["record"].get<std::string>();
            recorder_ = std::make_unique<llm::RecordingChatClient>(*base_);
        }
    }

    llm::ChatClient& client() { return recorder_ ? *recorder_ : *base_; }

    void finish() const
    {
        if (recorder_)
            write_json(record_path_, recorder_->transcript());
    }

    static bool configured(const Json& llm) { return llm.contains("replay") || llm.contains("endpoint"); }

private:
    std::unique_ptr<llm::ChatClient> base_;
    std::unique_ptr<llm::RecordingChatClient> recorder_;
    fs::path record_path_;
};

InstructionPools pools_for(const RunConfig& c)
{
    if (c.instruction_pools)
        return llm::load_instruction_pools(*c.instruction_pools);
    if (fs::exists(c.in / files::kPools))
        return llm::load_instruction_pools(c.in / files::kPools);
    return llm::bundled_instruction_pools();
}

std::optional<BuildArtifact> import_prebuilt(const fs::path& builds, const SourceUnit& unit,
                                             const BuildConfig& cell)
{
    fs::path stem = fs::path(unit.info.path).replace_extension();
    const fs::path dir = builds / stem / cell_name(cell);
    const fs::path exported = dir / "bin.export.json";
    const fs::path symbols = dir / "bin.symbols.json";

    BuildArtifact a;
    a.unit_id = unit.id();
    a.unit_path = unit.info.path;
    a.config = cell;
    a.binary_path = (dir / "bin").string();
    if (!fs::exists(exported) || !fs::exists(symbols)) {
        a.status = BuildStatus::ToolchainMissing;
        a.log = "no prebuilt artifact in " + dir.string();
        return a;
    }
    CompanionBuild companion;
    companion.binary_path = (dir / "bin.unstripped").string();
    const Json table = read_json(symbols);
    if (!table.is_object())
        fail(ErrorKind::Schema, symbols.string() + ": expected an object of name -> address");
    for (const auto& [name, address] : table.items())
        companion.symbols[name] = parse_hex(address.get<std::string>());
    a.status = BuildStatus::Success;
    a.log = "imported prebuilt artifact";
    a.companion = std::move(companion);
    return a;
}

} // namespace

std::string split_file(Split split)
{
    return fmt::format("{}.jsonl", to_string(split));
}

CorpusManifest CorpusManifest::load(const fs::path& root)
{
    CorpusManifest m;
    const fs::path path = root / "manifest.json";
    if (!fs::exists(path))
        return m;
    const Json doc = read_json(path);
    if (doc.contains("support_dirs"))
        m.support_dirs = doc["support_dirs"].get<std::vector<std::string>>();
    if (doc.contains("expected"))
        m.expected = doc["expected"];
    const Json units = doc.value("units", Json::object());
    for (const auto& [unit_path, entry] : units.items()) {
        UnitMeta meta;
        if (entry.contains("provenance")) {
            auto p = parse_provenance(entry["provenance"].get<std::string>());
            if (!p)
                fail(ErrorKind::Schema, "manifest: bad provenance for " + unit_path);
            meta.provenance = *p;
        }
        if (entry.contains("published_date")) {
            meta.published_date = parse_date(entry["published_date"].get<std::string>());
            if (!meta.published_date)
                fail(ErrorKind::Schema, "manifest: bad published_date for " + unit_path);
        }
        const Json labels = entry.value("labels", Json::object());
        for (const auto& [name, label] : labels.items())
            meta.labels.emplace(name, parse_label_text(label.get<std::string>()));
        m.units.emplace(unit_path, std::move(meta));
    }
    return m;
}

std::vector<std::string> discover_units(const fs::path& root, const CorpusManifest& manifest)
{
    if (!fs::is_directory(root))
        fail(ErrorKind::Io, "corpus directory not found: " + root.string());
    std::vector<std::string> excluded = manifest.support_dirs;
    excluded.emplace_back("builds");
    std::vector<std::string> units;
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
        const auto rel = fs::relative(it->path(), root);
        if (it->is_directory()) {
            if (std::find(excluded.begin(), excluded.end(), rel.generic_string()) != excluded.end())
                it.disable_recursion_pending();
            continue;
        }
        if (it->is_regular_file() && language_from_path(it->path()))
            units.push_back(rel.generic_string());
    }
    std::sort(units.begin(), units.end());
    return units;
}

RunConfig apply_config(RunConfig c, const Json& doc)
{
    if (doc.is_null())
        return c;
    if (!doc.is_object())
        config_error("run configuration must be a JSON object");
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "jobs") {
                c.jobs = value.get<unsigned>();
            } else if (key == "seed") {
                c.seed = value.get<std::uint64_t>();
            } else if (key == "matrix") {
                c.matrix = value.get<std::string>();
            } else if (key == "decompiler") {
                if (value.is_string()) {
                    c.decompiler = value.get<std::string>();
                } else {
                    c.decompiler = value.at("id").get<std::string>();
                    c.decompiler_config = value;
                }
            } else if (key == "skip") {
                const auto stages = value.get<std::vector<std::string>>();
                c.skip.insert(stages.begin(), stages.end());
            } else if (key == "expand_instructions") {
                c.expand_instructions = value.get<bool>();
            } else if (key == "toolchains") {
                c.toolchains = build::ToolchainTable::from_json(value);
            } else if (key == "matrix_profiles") {
                c.profiles = build::custom_profiles_from_json(value);
            } else if (key == "compile_timeout_s") {
                c.compile_timeout = std::chrono::seconds(value.get<long>());
            } else if (key == "llm") {
                c.llm = value;
            } else if (key == "inject") {
                c.inject = value;
            } else if (key == "instruction_pools") {
                c.instruction_pools = value.get<std::string>();
            } else if (key == "tasks") {
                c.tasks.clear();
                for (const auto& t : value) {
                    auto task = parse_task(t.get<std::string>());
                    if (!task)
                        config_error("unknown task '" + t.get<std::string>() + "'");
                    c.tasks.push_back(*task);
                }
            } else if (key == "split") {
                if (value.contains("ratios"))
                    c.split.ratios = value["ratios"].get<std::array<double, 3>>();
                if (value.contains("cutoff")) {
                    auto date = parse_date(value["cutoff"].get<std::string>());
                    if (!date)
                        config_error("split.cutoff must be YYYY-MM-DD");
                    c.split.cutoff = *date;
                }
            } else if (key == "prepare") {
                c.prepare.max_len = value.value("max_len", c.prepare.max_len);
                c.prepare.pad = value.value("pad", c.prepare.pad);
            } else {
                config_error("unknown configuration key '" + key + "'");
            }
        }
    } catch (const Json::exception& e) {
        config_error(std::string("malformed run configuration: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------

Json run_extract(const RunConfig& c)
{
    const fs::path root = fs::absolute(c.in).lexically_normal();
    const auto manifest = CorpusManifest::load(root);
    const auto paths = discover_units(root, manifest);

    struct UnitResult {
        Json unit_row;
        std::vector<ExtractedFunction> functions;
        std::vector<extract::Diagnostic> diagnostics;
    };
    auto results = parallel_map(paths.size(), c.jobs, [&](std::size_t i) {
        const auto& rel = paths[i];
        const UnitMeta* meta = nullptr;
        if (auto it = manifest.units.find(rel); it != manifest.units.end())
            meta = &it->second;
        auto unit = SourceUnit::from_text(rel, read_file(root / rel), meta ? meta->provenance : Provenance::Sard,
                                          meta ? meta->published_date : std::nullopt);
        thread_local extract::FunctionExtractor extractor;
        auto parsed = extractor.parse_functions(unit);
        for (auto& fn : parsed.functions)
            fn.label = label_for(meta, unit.info, fn.name);
        Json row = {{"id", unit.id()}, {"file", (root / rel).string()}, {"unit", to_json(unit.info)}};
        return UnitResult{std::move(row), std::move(parsed.functions), std::move(parsed.diagnostics)};
    });

    std::vector<Json> units, functions, diagnostics;
    std::size_t vulnerable = 0, benign = 0, unknown = 0;
    for (auto& r : results) {
        units.push_back(std::move(r.unit_row));
        for (auto& fn : r.functions) {
            vulnerable += fn.label.is_vulnerable();
            benign += fn.label.is_benign();
            unknown += fn.label.is_unknown();
            functions.push_back(to_json(fn));
        }
        for (auto& d : r.diagnostics) {
            diagnostics.push_back({{"unit_path", d.unit_path},
                                   {"begin", d.span.begin},
                                   {"end", d.span.end},
                                   {"message", d.message}});
        }
    }
    write_json(c.out / files::kCorpus, {{"root", root.string()}, {"support_dirs", manifest.support_dirs}});
    write_jsonl(c.out / files::kUnits, units);
    write_jsonl(c.out / files::kFunctions, functions);
    write_jsonl(c.out / files::kDiagnostics, diagnostics);
    return {{"stage", "extract"},    {"units", units.size()},   {"functions", functions.size()},
            {"vulnerable", vulnerable}, {"benign", benign},     {"unknown", unknown},
            {"diagnostics", diagnostics.size()}};
}

Json run_compile(const RunConfig& c)
{
    const auto corpus = read_corpus(c);
    const auto units = read_units(c);
    const bool import = c.skip.count("compile") > 0;
    const fs::path builds = corpus.root / "builds";
    const auto support = support_paths(corpus);

    std::vector<BuildArtifact> artifacts;
    for (const auto& u : units) {
        std::vector<BuildConfig> cells;
        for (auto variant : variants_for(u.unit.info)) {
            auto planned = build::plan_matrix(c.matrix, variant, c.profiles);
            cells.insert(cells.end(), planned.begin(), planned.end());
        }
        if (import) {
            for (const auto& cell : cells)
                artifacts.push_back(*import_prebuilt(builds, u.unit, cell));
            continue;
        }
        SourceUnit on_disk = u.unit;
        on_disk.info.path = u.file.string();
        auto plan = build::make_plan(std::move(on_disk), cells, support);
        build::CompileOptions options{c.toolchains, fs::absolute(c.out / "builds"), c.compile_timeout};
        auto built = build::compile_all(plan, options, c.jobs);
        for (auto& a : built) {
            a.unit_id = u.unit.id();
            a.unit_path = u.unit.info.path;
        }
        artifacts.insert(artifacts.end(), built.begin(), built.end());
    }
    std::map<std::string, std::size_t> by_status;
    for (const auto& a : artifacts)
        ++by_status[std::string(to_string(a.status))];
    write_jsonl(c.out / files::kArtifacts, rows_of(artifacts));
    Json summary = {{"stage", "compile"}, {"mode", import ? "prebuilt" : "build"}, {"artifacts", artifacts.size()}};
    for (const auto& [status, n] : by_status)
        summary[status] = n;
    return summary;
}

Json run_decompile(const RunConfig& c)
{
    const auto artifacts = read_artifacts(input(c, files::kArtifacts));
    std::vector<const BuildArtifact*> todo;
    for (const auto& a : artifacts) {
        if (a.status == BuildStatus::Success)
            todo.push_back(&a);
    }
    auto backend = decompile::make_backend(c.decompiler, c.decompiler_config);
    auto rows = parallel_map(todo.size(), c.jobs, [&](std::size_t i) {
        const auto& a = *todo[i];
        Json row = {{"unit_id", a.unit_id}, {"unit_path", a.unit_path}, {"cell", cell_name(a.config)}};
        try {
            auto d = decompile::decompile(a, *backend);
            row["image_base"] = format_hex(d.image_base);
            row["functions"] = rows_of(d.functions);
            row["empty_entries"] = d.empty_entries;
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::BackendUnavailable)
                throw;
            row["error"] = {{"kind", to_string(e.kind())}, {"message", e.what()}};
        }
        return row;
    });
    std::size_t functions = 0, failed = 0;
    for (const auto& r : rows) {
        if (r.contains("error"))
            ++failed;
        else
            functions += r["functions"].size();
    }
    write_jsonl(c.out / files::kDecompiled, rows);
    return {{"stage", "decompile"},
            {"backend", std::string(backend->name())},
            {"binaries", rows.size()},
            {"failed", failed},
            {"functions", functions}};
}

Json run_match(const RunConfig& c)
{
    const auto functions = read_functions(input(c, files::kFunctions));
    const auto artifacts = read_artifacts(input(c, files::kArtifacts));
    std::map<std::string, std::vector<ExtractedFunction>> by_unit;
    for (const auto& f : functions)
        by_unit[f.unit.path].push_back(f);
    std::map<std::pair<std::string, std::string>, const BuildArtifact*> artifact_index;
    for (const auto& a : artifacts)
        artifact_index[{a.unit_id, cell_name(a.config)}] = &a;

    std::vector<Json> pairs, report;
    std::size_t unmatched_functions = 0, ambiguous = 0;
    for (const auto& row : read_jsonl(input(c, files::kDecompiled))) {
        if (row.contains("error"))
            continue;
        const auto unit_id = row.at("unit_id").get<std::string>();
        const auto unit_path = row.at("unit_path").get<std::string>();
        const auto cell = row.at("cell").get<std::string>();
        Json entry = {{"unit_path", unit_path}, {"cell", cell}};
        auto ait = artifact_index.find({unit_id, cell});
        if (ait == artifact_index.end() || !ait->second->companion) {
            entry["error"] = "no companion symbol map";
            report.push_back(std::move(entry));
            continue;
        }
        const BuildArtifact& artifact = *ait->second;
        std::vector<DecompiledFunction> decompiled;
        for (const auto& d : row.at("functions"))
            decompiled.push_back(decompiled_from_json(d));
        const auto& extracted = by_unit[unit_path];
        decompile::MatchResult result;
        try {
            result = decompile::match_functions(decompiled, artifact.companion->symbols, extracted);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::AmbiguousBase)
                throw;
            ++ambiguous;
            entry["error"] = e.what();
            report.push_back(std::move(entry));
            continue;
        }
        std::map<std::string_view, const ExtractedFunction*> by_id;
        for (const auto& f : extracted)
            by_id[f.id] = &f;
        for (auto& m : result.matches) {
            MatchedPair p{*by_id.at(m.function_id), std::move(m.decompiled), artifact.config, artifact.status,
                          std::nullopt};
            pairs.push_back(to_json(p));
        }
        std::vector<std::string> entries;
        for (auto e : result.unmatched_entries)
            entries.push_back(format_hex(e));
        unmatched_functions += result.unmatched_functions.size();
        entry["base_offset"] = format_hex(result.base_offset);
        entry["matched"] = result.matches.size();
        entry["unmatched_functions"] = result.unmatched_functions;
        entry["unmatched_entries"] = entries;
        report.push_back(std::move(entry));
    }
    write_jsonl(c.out / files::kPairs, pairs);
    write_jsonl(c.out / files::kMatchReport, report);
    return {{"stage", "match"},
            {"pairs", pairs.size()},
            {"unmatched_functions", unmatched_functions},
            {"ambiguous_cells", ambiguous}};
}

Json run_postprocess(const RunConfig& c)
{
    auto pairs = read_pairs(input(c, files::kPairs));
    const std::size_t before = pairs.size();
    auto result = post::drop_degenerate(std::move(pairs));
    write_jsonl(c.out / files::kCleanPairs, rows_of(result.kept));
    write_jsonl(c.out / files::kDrops, rows_of(result.dropped));
    return {{"stage", "postprocess"}, {"pairs", before}, {"kept", result.kept.size()}, {"dropped", result.dropped.size()}};
}

Json run_describe(const RunConfig& c)
{
    auto pairs = read_pairs(input(c, files::kCleanPairs));
    ClientHandle handle(c.llm);
    std::map<std::string, llm::DescriptionOutcome> outcomes;
    std::vector<Json> rows;
    std::size_t accepted = 0;
    for (const auto& p : pairs) {
        const auto& fn = p.function;
        if (fn.label.is_unknown() || outcomes.count(fn.id))
            continue;
        auto outcome = llm::generate_description(fn, fn.comments, handle.client());
        accepted += outcome.status == llm::DescriptionStatus::Accepted;
        rows.push_back({{"function_id", fn.id},
                        {"function_name", fn.name},
                        {"status", outcome.status == llm::DescriptionStatus::Accepted ? "accepted" : "rejected"},
                        {"description", outcome.description},
                        {"leaked", outcome.leaked},
                        {"attempts", outcome.attempts}});
        outcomes.emplace(fn.id, std::move(outcome));
    }
    for (auto& p : pairs) {
        auto it = outcomes.find(p.function.id);
        if (it != outcomes.end() && it->second.status == llm::DescriptionStatus::Accepted)
            p.description = it->second.description;
    }
    handle.finish();
    write_jsonl(c.out / files::kCleanPairs, rows_of(pairs));
    write_jsonl(c.out / files::kDescriptions, rows);
    return {{"stage", "describe"}, {"functions", rows.size()}, {"accepted", accepted}, {"rejected", rows.size() - accepted}};
}

Json run_inject(const RunConfig& c)
{
    const auto corpus = read_corpus(c);
    const auto units = read_units(c);
    const auto functions = read_functions(input(c, files::kFunctions));

    std::vector<CweId> targets = llm::default_injection_targets();
    if (c.inject.contains("cwes")) {
        targets.clear();
        for (const auto& v : c.inject["cwes"]) {
            if (v.is_number_unsigned())
                targets.emplace_back(v.get<std::uint32_t>());
            else if (auto cwe = CweId::parse_canonical(v.get<std::string>()))
                targets.push_back(*cwe);
            else
                config_error("inject.cwes entries must be numbers or CWE-<n>");
        }
        if (targets.empty())
            config_error("inject.cwes is empty");
    }
    const std::size_t limit = c.inject.value("limit", std::size_t{10});
    const std::string compiler = c.inject.value("compiler", std::string("gcc"));
    const auto arch = parse_architecture(c.inject.value("architecture", std::string("x86")));
    if (!arch)
        config_error("inject.architecture is not a known architecture");

    std::vector<const ExtractedFunction*> candidates;
    for (const auto& f : functions) {
        if (f.label.is_benign() && !f.name.empty())
            candidates.push_back(&f);
    }
    std::mt19937_64 rng(c.seed);
    for (std::size_t i = candidates.size(); i > 1; --i)
        std::swap(candidates[i - 1], candidates[rng() % i]);
    if (candidates.size() > limit)
        candidates.resize(limit);

    std::map<std::string, const UnitRow*> unit_by_path;
    for (const auto& u : units)
        unit_by_path[u.unit.info.path] = &u;
    std::vector<llm::InjectionRequest> requests;
    for (const auto* f : candidates)
        requests.push_back({f, &unit_by_path.at(f->unit.path)->unit, targets[rng() % targets.size()]});

    std::vector<fs::path> includes = support_paths(corpus);
    for (const auto* f : candidates)
        includes.push_back(unit_by_path.at(f->unit.path)->file.parent_path());
    build::ToolchainChecker checker(c.toolchains, compiler, *arch, includes, c.compile_timeout);
    ClientHandle handle(c.llm);
    llm::InjectionOptions options{targets};
    auto batch = llm::inject_batch(requests, handle.client(), checker, llm::PromptLibrary::standard(), options);
    handle.finish();

    std::vector<Json> injected_units;
    for (std::size_t i = 0; i < batch.outcomes.size(); ++i) {
        const auto& o = batch.outcomes[i];
        if (o.status != llm::InjectionStatus::Injected)
            continue;
        auto spliced = llm::splice_function(*requests[i].unit, *requests[i].function, o.injected_code);
        const fs::path rel = fs::path("injected") / fs::path(spliced.info.path).parent_path() /
                             fmt::format("{}__{}_{}{}", fs::path(spliced.info.path).stem().string(), o.function_name,
                                         o.cwe.render(), fs::path(spliced.info.path).extension().string());
        write_file(c.out / rel, spliced.text);
        spliced.info.path = rel.generic_string();
        injected_units.push_back({{"id", spliced.id()},
                                  {"file", fs::absolute(c.out / rel).string()},
                                  {"unit", to_json(spliced.info)},
                                  {"labels", {{o.function_name, o.cwe.render()}}}});
    }
    write_jsonl(c.out / files::kInjections, rows_of(batch.outcomes));
    write_jsonl(c.out / files::kInjectedUnits, injected_units);
    return {{"stage", "inject"},
            {"selected", batch.tally.selected},
            {"injected", batch.tally.injected},
            {"not_compilable", batch.tally.not_compilable},
            {"rejected", batch.tally.rejected}};
}

Json run_instructions(const RunConfig& c)
{
    InstructionPools pools;
    std::string source = "bundled";
    if (ClientHandle::configured(c.llm)) {
        ClientHandle handle(c.llm);
        for (TaskKind task : c.tasks)
            pools[task] = llm::generate_instruction_pool(task, handle.client());
        handle.finish();
        source = "llm";
    } else {
        pools = llm::bundled_instruction_pools();
    }
    write_json(c.out / files::kPools, llm::to_json(pools));
    std::size_t total = 0;
    for (const auto& [task, pool] : pools)
        total += pool.size();
    return {{"stage", "instructions"}, {"source", source}, {"tasks", pools.size()}, {"instructions", total}};
}

Json run_assemble(const RunConfig& c)
{
    const fs::path pairs_path = fs::exists(c.in / files::kCleanPairs) ? c.in / files::kCleanPairs
                                                                       : input(c, files::kPairs);
    const auto pairs = read_pairs(pairs_path);
    const auto pools = pools_for(c);
    instruct::AssembleOptions options{c.tasks, c.seed, c.expand_instructions};
    auto assembled = instruct::assemble_records(pairs, pools, options);
    auto deduped = post::dedup(assembled.records, c.jobs);

    std::vector<Json> skipped;
    for (const auto& s : assembled.skipped)
        skipped.push_back(instruct::to_json(s));
    write_records(c.out / files::kRecords, deduped.unique);
    write_jsonl(c.out / files::kDuplicates, rows_of(deduped.duplicates));
    write_jsonl(c.out / files::kSkipped, skipped);

    Json per_task = Json::object();
    for (const auto& r : deduped.unique) {
        auto& n = per_task[std::string(to_string(r.task))];
        n = n.is_null() ? 1 : n.get<std::size_t>() + 1;
    }
    return {{"stage", "assemble"},
            {"pairs", pairs.size()},
            {"records", deduped.unique.size()},
            {"duplicates", deduped.duplicates.size()},
            {"skipped_pairs", skipped.size()},
            {"per_task", per_task}};
}

Json run_split(const RunConfig& c)
{
    auto records = read_records(c.records ? *c.records : input(c, files::kRecords));
    auto result = instruct::split(std::move(records), c.split);
    std::map<Split, std::vector<CorpusRecord>> parts;
    for (auto& r : result.records)
        parts[*r.split].push_back(std::move(r));
    for (Split s : {Split::Train, Split::Val, Split::Test})
        write_records(c.out / split_file(s), parts[s]);
    const Json report = instruct::to_json(result.report);
    write_json(c.out / files::kSplitReport, report);
    return {{"stage", "split"},
            {"train", parts[Split::Train].size()},
            {"val", parts[Split::Val].size()},
            {"test", parts[Split::Test].size()},
            {"post_cutoff_in_train", result.report.post_cutoff_in_train},
            {"within_tolerance", result.report.within_tolerance}};
}

Json run_prepare(const RunConfig& c)
{
    const auto records = read_records(c.records ? *c.records : input(c, files::kRecords));
    const auto& tokenizer = instruct::BpeTokenizer::bundled();
    auto prepared = parallel_map(records.size(), c.jobs,
                                 [&](std::size_t i) { return instruct::prepare(records[i], tokenizer, c.prepare); });
    std::size_t truncated = 0;
    for (const auto& p : prepared)
        truncated += p.truncated;
    write_jsonl(c.out / files::kPrepared, rows_of(prepared));
    return {{"stage", "prepare"},
            {"records", prepared.size()},
            {"truncated", truncated},
            {"max_len", c.prepare.max_len},
            {"vocab_size", tokenizer.vocab_size()}};
}

Json run_eval(const RunConfig& c)
{
    if (!c.predictions)
        config_error("eval needs --predictions");
    const auto gold = read_records(c.gold ? *c.gold : input(c, split_file(Split::Test).c_str()));
    const auto predictions = eval::read_predictions(*c.predictions);
    const eval::HashEmbedder embedder(64, c.seed);
    const auto report = eval::evaluate(gold, predictions, embedder, {}, c.jobs);
    Json metrics = eval::to_json(report);
    write_json(c.out / files::kMetrics, metrics);
    return {{"stage", "eval"},
            {"gold", gold.size()},
            {"matched", report.matched},
            {"missing_predictions", report.missing_predictions.size()},
            {"unknown_ids", report.unknown_ids.size()}};
}

Json run_stats(const RunConfig& c)
{
    const auto records = read_records(c.records ? *c.records : input(c, files::kRecords));
    const auto rows = post::corpus_stats(records);
    write_json(c.out / files::kStats, post::to_json(rows));
    write_file(c.out / files::kStatsTable, post::render_stats_table(rows));
    return {{"stage", "stats"}, {"records", records.size()}, {"rows", rows.size()}};
}

Json run_pipeline(const RunConfig& config)
{
    static const std::set<std::string> skippable{"compile", "postprocess", "split"};
    for (const auto& s : config.skip) {
        if (!skippable.count(s))
            config_error("pipeline cannot skip stage '" + s + "'");
    }
    Json stages = Json::object();
    stages["extract"] = run_extract(config);
    RunConfig c = config;
    c.in = c.out;
    stages["compile"] = run_compile(c);
    stages["decompile"] = run_decompile(c);
    stages["match"] = run_match(c);
    if (c.skip.count("postprocess")) {
        fs::copy_file(c.out / files::kPairs, c.out / files::kCleanPairs, fs::copy_options::overwrite_existing);
        write_jsonl(c.out / files::kDrops, {});
    } else {
        stages["postprocess"] = run_postprocess(c);
    }
    stages["assemble"] = run_assemble(c);
    if (!c.skip.count("split"))
        stages["split"] = run_split(c);
    return {{"stage", "pipeline"}, {"stages", stages}};
}

// ---------------------------------------------------------------------------

namespace {

int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::UnknownProfile:
    case ErrorKind::BackendUnavailable:
        return 2;
    default:
        return 1;
    }
}

void append_run_log(const fs::path& out, const std::string& subcommand, const Json& summary)
{
    std::ofstream log(out / files::kRunLog, std::ios::app);
    log << fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr))) << ' ' << subcommand << ' ' << summary.dump() << '\n';
}

std::array<double, 3> parse_ratios(const std::string& text)
{
    std::array<double, 3> ratios{};
    std::stringstream in(text);
    std::string part;
    std::size_t i = 0;
    while (std::getline(in, part, ',')) {
        if (i == 3)
            config_error("--ratios takes three comma-separated values");
        try {
            ratios[i++] = std::stod(part);
        } catch (const std::exception&) {
            config_error("--ratios value is not a number: '" + part + "'");
        }
    }
    if (i != 3)
        config_error("--ratios takes three comma-separated values");
    return ratios;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Builds decompiled-code instruction corpora from C/C++ sources", "debinforge"};
    app.require_subcommand(1, 1);

    std::string config_path, in, out_dir, matrix, decompiler, skip, ratios, cutoff, records, gold, predictions, tasks;
    unsigned jobs = 0;
    std::uint64_t seed = 0;
    std::size_t max_len = 0;
    bool expand = false, pad = false;
    auto* o_config = app.add_option("--config", config_path, "Run-configuration JSON document");
    auto* o_in = app.add_option("--in", in, "Input corpus or run directory");
    auto* o_out = app.add_option("--out", out_dir, "Output run directory");
    auto* o_jobs = app.add_option("--jobs", jobs, "Worker count (default: logical CPUs)");
    auto* o_seed = app.add_option("--seed", seed, "Seed for every random choice");
    auto* o_matrix = app.add_option("--matrix", matrix, "Build matrix profile: paper-six|full-sixteen|<custom>");
    auto* o_decompiler = app.add_option("--decompiler", decompiler, "Decompiler backend: ghidra|fixture");
    auto* o_skip = app.add_option("--skip", skip, "Comma-separated stages to skip");
    auto* o_expand = app.add_flag("--expand-instructions", expand, "One record per pool instruction");
    auto* o_ratios = app.add_option("--ratios", ratios, "Split ratios, e.g. 0.8,0.1,0.1");
    auto* o_cutoff = app.add_option("--cutoff", cutoff, "Chronological cutoff date YYYY-MM-DD");
    auto* o_max_len = app.add_option("--max-len", max_len, "Token budget for prepare");
    auto* o_pad = app.add_flag("--pad", pad, "Pad prepared records to --max-len");
    auto* o_records = app.add_option("--records", records, "Records file for split/prepare/stats");
    auto* o_gold = app.add_option("--gold", gold, "Gold records for eval (default <in>/TEST.jsonl)");
    auto* o_predictions = app.add_option("--predictions", predictions, "Predictions JSONL for eval");
    auto* o_tasks = app.add_option("--tasks", tasks, "Comma-separated tasks");

    using Stage = Json (*)(const RunConfig&);
    const std::vector<std::pair<std::string, Stage>> stages{
        {"extract", run_extract},       {"compile", run_compile},   {"decompile", run_decompile},
        {"match", run_match},           {"postprocess", run_postprocess}, {"describe", run_describe},
        {"inject", run_inject},         {"instructions", run_instructions}, {"assemble", run_assemble},
        {"split", run_split},           {"prepare", run_prepare},   {"eval", run_eval},
        {"stats", run_stats},           {"pipeline", run_pipeline}};
    for (const auto& [name, fn] : stages)
        app.add_subcommand(name)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }
    const std::string subcommand = app.get_subcommands().front()->get_name();

    try {
        RunConfig c;
        c.jobs = default_jobs();
        if (*o_config)
            c = apply_config(c, read_json(config_path));
        if (*o_jobs)
            c.jobs = std::max(1u, jobs);
        if (*o_seed)
            c.seed = seed;
        if (*o_matrix)
            c.matrix = matrix;
        if (*o_decompiler) {
            c.decompiler = decompiler;
            if (c.decompiler_config.value("id", decompiler) != decompiler)
                c.decompiler_config = Json::object();
        }
        if (*o_skip) {
            std::stringstream list(skip);
            for (std::string s; std::getline(list, s, ',');) {
                if (!s.empty())
                    c.skip.insert(s);
            }
        }
        if (*o_expand)
            c.expand_instructions = expand;
        if (*o_ratios)
            c.split.ratios = parse_ratios(ratios);
        if (*o_cutoff) {
            auto date = parse_date(cutoff);
            if (!date)
                config_error("--cutoff must be YYYY-MM-DD");
            c.split.cutoff = *date;
        }
        if (*o_max_len)
            c.prepare.max_len = max_len;
        if (*o_pad)
            c.prepare.pad = pad;
        if (*o_records)
            c.records = records;
        if (*o_gold)
            c.gold = gold;
        if (*o_predictions)
            c.predictions = predictions;
        if (*o_tasks) {
            c.tasks.clear();
            std::stringstream list(tasks);
            for (std::string s; std::getline(list, s, ',');) {
                auto task = parse_task(s);
                if (!task)
                    config_error("unknown task '" + s + "'");
                c.tasks.push_back(*task);
            }
        }
        if (!*o_out)
            config_error("--out is required");
        c.out = out_dir;
        if (*o_in)
            c.in = in;
        else if (subcommand == "extract" || subcommand == "pipeline")
            config_error("--in is required for " + subcommand);
        else
            c.in = c.out;
        if (c.jobs == 0)
            c.jobs = 1;
        fs::create_directories(c.out);

        const auto it = std::find_if(stages.begin(), stages.end(), [&](const auto& s) { return s.first == subcommand; });
        const Json summary = it->second(c);
        append_run_log(c.out, subcommand, summary);
        out << summary.dump() << std::endl;
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << std::endl;
        return exit_code(e.kind());
    } catch (const Json::exception& e) {
        err << "error (schema): " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << std::endl;
        return 1;
    }
}

} // namespace debinforge::pipeline
