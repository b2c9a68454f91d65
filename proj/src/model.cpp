#include "debinforge/model.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "debinforge/error.hpp"
#include "debinforge/hash.hpp"

namespace debinforge {

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(std::string_view text, const std::array<std::pair<std::string_view, Enum>, N>& table)
{
    for (const auto& [name, value] : table) {
        if (name == text)
            return value;
    }
    return std::nullopt;
}

template <typename Enum, std::size_t N>
std::string_view name_of(Enum value, const std::array<std::pair<std::string_view, Enum>, N>& table)
{
    for (const auto& [name, v] : table) {
        if (v == value)
            return name;
    }
    return "?";
}

constexpr std::array<std::pair<std::string_view, Language>, 2> kLanguages{{
    {"c", Language::C},
    {"cpp", Language::Cpp},
}};
constexpr std::array<std::pair<std::string_view, Provenance>, 3> kProvenances{{
    {"SARD", Provenance::Sard},
    {"NVD", Provenance::Nvd},
    {"INJECTED", Provenance::Injected},
}};
constexpr std::array<std::pair<std::string_view, Architecture>, 4> kArchitectures{{
    {"x86", Architecture::X86},
    {"x64", Architecture::X64},
    {"arm", Architecture::Arm},
    {"mips", Architecture::Mips},
}};
constexpr std::array<std::pair<std::string_view, Optimization>, 2> kOptimizations{{
    {"O0", Optimization::O0},
    {"O3", Optimization::O3},
}};
constexpr std::array<std::pair<std::string_view, BuildStatus>, 3> kStatuses{{
    {"success", BuildStatus::Success},
    {"compile_error", BuildStatus::CompileError},
    {"toolchain_missing", BuildStatus::ToolchainMissing},
}};
constexpr std::array<std::pair<std::string_view, TaskKind>, 4> kTasks{{
    {"identify", TaskKind::Identify},
    {"classify", TaskKind::Classify},
    {"predict_name", TaskKind::PredictName},
    {"describe", TaskKind::Describe},
}};
constexpr std::array<std::pair<std::string_view, Split>, 3> kSplits{{
    {"TRAIN", Split::Train},
    {"VAL", Split::Val},
    {"TEST", Split::Test},
}};

[[noreturn]] void schema_error(const std::string& what)
{
    fail(ErrorKind::Schema, what);
}

const Json& field(const Json& json, const char* key)
{
    if (!json.is_object())
        schema_error(fmt::format("expected an object while reading '{}'", key));
    auto it = json.find(key);
    if (it == json.end())
        schema_error(fmt::format("missing field '{}'", key));
    return *it;
}

std::string string_field(const Json& json, const char* key)
{
    const Json& v = field(json, key);
    if (!v.is_string())
        schema_error(fmt::format("field '{}' must be a string", key));
    return v.get<std::string>();
}

bool bool_field(const Json& json, const char* key)
{
    const Json& v = field(json, key);
    if (!v.is_boolean())
        schema_error(fmt::format("field '{}' must be a boolean", key));
    return v.get<bool>();
}

std::optional<std::string> optional_string(const Json& json, const char* key)
{
    auto it = json.find(key);
    if (it == json.end() || it->is_null())
        return std::nullopt;
    if (!it->is_string())
        schema_error(fmt::format("field '{}' must be a string or null", key));
    return it->get<std::string>();
}

template <typename Enum, std::size_t N>
Enum enum_field(const Json& json, const char* key, const std::array<std::pair<std::string_view, Enum>, N>& table)
{
    std::string text = string_field(json, key);
    auto value = lookup(text, table);
    if (!value)
        schema_error(fmt::format("field '{}' has unknown value '{}'", key, text));
    return *value;
}

std::optional<Date> optional_date(const Json& json, const char* key)
{
    auto text = optional_string(json, key);
    if (!text)
        return std::nullopt;
    auto date = parse_date(*text);
    if (!date)
        schema_error(fmt::format("field '{}' is not an ISO-8601 date: '{}'", key, *text));
    return date;
}

Json date_json(const std::optional<Date>& date)
{
    return date ? Json(format_date(*date)) : Json(nullptr);
}

ByteSpan span_from_json(const Json& json, const char* key)
{
    const Json& v = field(json, key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_unsigned() || !v[1].is_number_unsigned())
        schema_error(fmt::format("field '{}' must be [begin, end]", key));
    ByteSpan span{v[0].get<std::uint32_t>(), v[1].get<std::uint32_t>()};
    if (span.end < span.begin)
        schema_error(fmt::format("field '{}' has end before begin", key));
    return span;
}

} // namespace

// ---------------------------------------------------------------------------

std::optional<Date> parse_date(std::string_view iso)
{
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-')
        return std::nullopt;
    auto number = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
        int value = 0;
        auto [ptr, ec] = std::from_chars(iso.data() + pos, iso.data() + pos + len, value);
        if (ec != std::errc{} || ptr != iso.data() + pos + len)
            return std::nullopt;
        return value;
    };
    auto y = number(0, 4), m = number(5, 2), d = number(8, 2);
    if (!y || !m || !d)
        return std::nullopt;
    Date date{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
              std::chrono::day{static_cast<unsigned>(*d)}};
    if (!date.ok())
        return std::nullopt;
    return date;
}

std::string format_date(const Date& date)
{
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(date.year()),
                       static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
}

CweId::CweId(std::uint32_t number) : number_(number)
{
    if (number == 0)
        fail(ErrorKind::PreconditionViolation, "CWE numbers start at 1");
}

std::string CweId::render() const
{
    return "CWE-" + std::to_string(number_);
}

std::optional<CweId> CweId::parse_canonical(std::string_view text)
{
    constexpr std::string_view prefix = "CWE-";
    if (text.size() <= prefix.size() || text.substr(0, prefix.size()) != prefix)
        return std::nullopt;
    std::string_view digits = text.substr(prefix.size());
    if (digits.front() == '0' || digits.size() > 9)
        return std::nullopt;
    std::uint32_t value = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc{} || ptr != digits.data() + digits.size())
        return std::nullopt;
    return CweId(value);
}

VulnLabel VulnLabel::unknown(std::string reason)
{
    if (reason.empty())
        fail(ErrorKind::PreconditionViolation, "Unknown labels need a reason");
    return VulnLabel(Unknown{std::move(reason)});
}

std::optional<CweId> VulnLabel::cwe() const
{
    if (const auto* v = std::get_if<Vulnerable>(&value_))
        return v->cwe;
    return std::nullopt;
}

std::string VulnLabel::reason() const
{
    if (const auto* u = std::get_if<Unknown>(&value_))
        return u->reason;
    return {};
}

std::string_view to_string(Language language) { return name_of(language, kLanguages); }
std::string_view to_string(Provenance provenance) { return name_of(provenance, kProvenances); }
std::string_view to_string(Architecture arch) { return name_of(arch, kArchitectures); }
std::string_view to_string(Optimization opt) { return name_of(opt, kOptimizations); }
std::string_view to_string(BuildStatus status) { return name_of(status, kStatuses); }
std::string_view to_string(TaskKind task) { return name_of(task, kTasks); }
std::string_view to_string(Split split) { return name_of(split, kSplits); }

std::string_view to_string(BuildVariant variant)
{
    switch (variant) {
    case BuildVariant::Good: return "good";
    case BuildVariant::Bad: return "bad";
    case BuildVariant::Whole: return "all";
    }
    return "?";
}

std::optional<Provenance> parse_provenance(std::string_view text) { return lookup(text, kProvenances); }
std::optional<Architecture> parse_architecture(std::string_view text) { return lookup(text, kArchitectures); }
std::optional<Optimization> parse_optimization(std::string_view text) { return lookup(text, kOptimizations); }
std::optional<BuildStatus> parse_build_status(std::string_view text) { return lookup(text, kStatuses); }
std::optional<TaskKind> parse_task(std::string_view text) { return lookup(text, kTasks); }
std::optional<Split> parse_split(std::string_view text) { return lookup(text, kSplits); }

std::optional<Language> language_from_path(const std::filesystem::path& path)
{
    const auto ext = path.extension().string();
    if (ext == ".c")
        return Language::C;
    if (ext == ".cpp")
        return Language::Cpp;
    return std::nullopt;
}

SourceUnit SourceUnit::from_text(std::string path, std::string text, Provenance provenance,
                                 std::optional<Date> published_date)
{
    auto language = language_from_path(path);
    if (!language)
        fail(ErrorKind::PreconditionViolation, "not a .c or .cpp file: " + path);
    return SourceUnit{UnitInfo{std::move(path), *language, provenance, published_date}, std::move(text)};
}

SourceUnit SourceUnit::load(const std::filesystem::path& path, Provenance provenance,
                            std::optional<Date> published_date)
{
    return from_text(path.generic_string(), read_file(path), provenance, published_date);
}

std::string SourceUnit::id() const
{
    return short_id("unit\x1f" + info.path + '\x1f' + text);
}

std::string function_id(std::string_view unit_text, ByteSpan span)
{
    std::string key = "fn\x1f";
    key.append(unit_text);
    key += fmt::format("\x1f{}:{}", span.begin, span.end);
    return short_id(key);
}

BuildVariant variant_of(const BuildConfig& config)
{
    auto has = [&](std::string_view d) {
        return std::find(config.defines.begin(), config.defines.end(), d) != config.defines.end();
    };
    if (has("OMITGOOD"))
        return BuildVariant::Bad;
    if (has("OMITBAD"))
        return BuildVariant::Good;
    return BuildVariant::Whole;
}

std::string cell_name(const BuildConfig& config)
{
    return fmt::format("{}-{}-{}-{}", config.compiler, to_string(config.architecture),
                       to_string(config.optimization), to_string(variant_of(config)));
}

std::string record_id(std::string_view source_path, ByteSpan span, const BuildConfig& config,
                      TaskKind task, std::string_view salt)
{
    std::string key = fmt::format("{}\x1f{}:{}\x1f{}\x1f{}\x1f{}", source_path, span.begin, span.end,
                                  to_json(config).dump(), to_string(task), salt);
    return short_id(key);
}

bool is_identifier(std::string_view text)
{
    if (text.empty() || std::isdigit(static_cast<unsigned char>(text.front())))
        return false;
    return std::all_of(text.begin(), text.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    });
}

std::vector<std::string> validate_record(const CorpusRecord& record, const InstructionPools* pools)
{
    std::vector<std::string> violations;
    const bool id_ok = record.id.size() == 16 && std::all_of(record.id.begin(), record.id.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c)) || (c >= 'a' && c <= 'f');
    });
    if (!id_ok)
        violations.emplace_back("id is not 16 lowercase hex characters");
    if (record.source_path.empty())
        violations.emplace_back("empty source_path");
    if (record.func_name.empty())
        violations.emplace_back("empty func_name");
    if (record.decompiled_code.empty())
        violations.emplace_back("empty decompiled_code");
    if (record.compiler.empty())
        violations.emplace_back("empty compiler");

    if (record.is_vulnerable && !record.cwe)
        violations.emplace_back("vulnerable record missing cwe");
    if (!record.is_vulnerable && record.cwe)
        violations.emplace_back("benign record carries cwe");

    switch (record.task) {
    case TaskKind::Identify:
        if (record.output != "Yes" && record.output != "No")
            violations.emplace_back("identify output not Yes/No");
        else if ((record.output == "Yes") != record.is_vulnerable)
            violations.emplace_back("identify output disagrees with is_vulnerable");
        break;
    case TaskKind::Classify: {
        auto parsed = CweId::parse_canonical(record.output);
        if (!parsed)
            violations.emplace_back("classify output not canonical CWE-XXX");
        else if (record.cwe && *parsed != *record.cwe)
            violations.emplace_back("classify output disagrees with cwe");
        break;
    }
    case TaskKind::PredictName:
        if (!is_identifier(record.output))
            violations.emplace_back("predict_name output not a single identifier");
        break;
    case TaskKind::Describe:
        if (std::all_of(record.output.begin(), record.output.end(),
                        [](char c) { return std::isspace(static_cast<unsigned char>(c)); }))
            violations.emplace_back("describe output empty");
        break;
    }

    if (record.instruction.empty()) {
        violations.emplace_back("empty instruction");
    } else if (pools) {
        auto it = pools->find(record.task);
        if (it == pools->end() ||
            std::find(it->second.begin(), it->second.end(), record.instruction) == it->second.end())
            violations.emplace_back("instruction not in task pool");
    }
    return violations;
}

// ---------------------------------------------------------------------------

std::string format_hex(std::uint64_t value)
{
    return fmt::format("0x{:x}", value);
}

std::uint64_t parse_hex(std::string_view text)
{
    std::string_view digits = text;
    if (digits.size() > 2 && digits[0] == '0' && (digits[1] == 'x' || digits[1] == 'X'))
        digits.remove_prefix(2);
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value, 16);
    if (digits.empty() || ec != std::errc{} || ptr != digits.data() + digits.size())
        schema_error(fmt::format("not a hex number: '{}'", text));
    return value;
}

Json to_json(const CorpusRecord& r)
{
    Json j;
    j["id"] = r.id;
    j["provenance"] = to_string(r.provenance);
    j["source_path"] = r.source_path;
    j["func_name"] = r.func_name;
    j["source_code"] = r.source_code;
    j["decompiled_code"] = r.decompiled_code;
    j["architecture"] = to_string(r.architecture);
    j["optimization"] = to_string(r.optimization);
    j["compiler"] = r.compiler;
    j["stripped"] = r.stripped;
    j["is_vulnerable"] = r.is_vulnerable;
    j["cwe"] = r.cwe ? Json(r.cwe->render()) : Json(nullptr);
    j["description"] = r.description ? Json(*r.description) : Json(nullptr);
    j["task"] = to_string(r.task);
    j["instruction"] = r.instruction;
    j["output"] = r.output;
    j["split"] = r.split ? Json(to_string(*r.split)) : Json(nullptr);
    j["published_date"] = date_json(r.published_date);
    return j;
}

CorpusRecord record_from_json(const Json& j)
{
    CorpusRecord r;
    r.id = string_field(j, "id");
    r.provenance = enum_field(j, "provenance", kProvenances);
    r.source_path = string_field(j, "source_path");
    r.func_name = string_field(j, "func_name");
    r.source_code = string_field(j, "source_code");
    r.decompiled_code = string_field(j, "decompiled_code");
    r.architecture = enum_field(j, "architecture", kArchitectures);
    r.optimization = enum_field(j, "optimization", kOptimizations);
    r.compiler = string_field(j, "compiler");
    r.stripped = bool_field(j, "stripped");
    r.is_vulnerable = bool_field(j, "is_vulnerable");
    if (auto cwe = optional_string(j, "cwe")) {
        auto parsed = CweId::parse_canonical(*cwe);
        if (!parsed)
            schema_error("field 'cwe' is not canonical: '" + *cwe + "'");
        r.cwe = parsed;
    }
    r.description = optional_string(j, "description");
    r.task = enum_field(j, "task", kTasks);
    r.instruction = string_field(j, "instruction");
    r.output = string_field(j, "output");
    if (auto split = optional_string(j, "split")) {
        auto parsed = parse_split(*split);
        if (!parsed)
            schema_error("field 'split' has unknown value '" + *split + "'");
        r.split = parsed;
    }
    r.published_date = optional_date(j, "published_date");
    return r;
}

Json to_json(const VulnLabel& label)
{
    Json j;
    if (label.is_benign()) {
        j["kind"] = "benign";
    } else if (auto cwe = label.cwe()) {
        j["kind"] = "vulnerable";
        j["cwe"] = cwe->render();
    } else {
        j["kind"] = "unknown";
        j["reason"] = label.reason();
    }
    return j;
}

VulnLabel label_from_json(const Json& j)
{
    const std::string kind = string_field(j, "kind");
    if (kind == "benign")
        return VulnLabel::benign();
    if (kind == "vulnerable") {
        auto cwe = CweId::parse_canonical(string_field(j, "cwe"));
        if (!cwe)
            schema_error("label cwe is not canonical");
        return VulnLabel::vulnerable(*cwe);
    }
    if (kind == "unknown")
        return VulnLabel::unknown(string_field(j, "reason"));
    schema_error("unknown label kind '" + kind + "'");
}

Json to_json(const UnitInfo& unit)
{
    Json j;
    j["path"] = unit.path;
    j["language"] = to_string(unit.language);
    j["provenance"] = to_string(unit.provenance);
    j["published_date"] = date_json(unit.published_date);
    return j;
}

UnitInfo unit_from_json(const Json& j)
{
    UnitInfo unit;
    unit.path = string_field(j, "path");
    unit.language = enum_field(j, "language", kLanguages);
    unit.provenance = enum_field(j, "provenance", kProvenances);
    unit.published_date = optional_date(j, "published_date");
    return unit;
}

Json to_json(const ExtractedFunction& f)
{
    Json j;
    j["id"] = f.id;
    j["unit"] = to_json(f.unit);
    j["name"] = f.name;
    j["span"] = Json::array({f.span.begin, f.span.end});
    j["body_span"] = Json::array({f.body_span.begin, f.body_span.end});
    j["text"] = f.text;
    Json comments = Json::array();
    for (const auto& c : f.comments)
        comments.push_back(Json{{"offset", c.offset}, {"text", c.text}});
    j["comments"] = std::move(comments);
    j["label"] = to_json(f.label);
    return j;
}

ExtractedFunction function_from_json(const Json& j)
{
    ExtractedFunction f;
    f.id = string_field(j, "id");
    f.unit = unit_from_json(field(j, "unit"));
    f.name = string_field(j, "name");
    f.span = span_from_json(j, "span");
    f.body_span = span_from_json(j, "body_span");
    f.text = string_field(j, "text");
    if (f.text.size() != f.span.size())
        schema_error("function text length disagrees with its span");
    for (const auto& c : field(j, "comments")) {
        Comment comment{c.at("offset").get<std::uint32_t>(), c.at("text").get<std::string>()};
        if (!f.span.contains(comment.span()))
            schema_error("comment lies outside its function");
        f.comments.push_back(std::move(comment));
    }
    f.label = label_from_json(field(j, "label"));
    return f;
}

Json to_json(const BuildConfig& c)
{
    Json j;
    j["compiler"] = c.compiler;
    j["architecture"] = to_string(c.architecture);
    j["optimization"] = to_string(c.optimization);
    j["defines"] = c.defines;
    j["strip"] = c.strip;
    return j;
}

BuildConfig config_from_json(const Json& j)
{
    BuildConfig c;
    c.compiler = string_field(j, "compiler");
    c.architecture = enum_field(j, "architecture", kArchitectures);
    c.optimization = enum_field(j, "optimization", kOptimizations);
    const Json& defines = field(j, "defines");
    if (!defines.is_array())
        schema_error("field 'defines' must be an array");
    for (const auto& d : defines)
        c.defines.push_back(d.get<std::string>());
    c.strip = bool_field(j, "strip");
    return c;
}

Json to_json(const BuildArtifact& a)
{
    Json j;
    j["unit_id"] = a.unit_id;
    j["unit_path"] = a.unit_path;
    j["config"] = to_json(a.config);
    j["binary_path"] = a.binary_path;
    j["status"] = to_string(a.status);
    j["log"] = a.log;
    if (a.companion) {
        Json symbols = Json::object();
        for (const auto& [name, address] : a.companion->symbols)
            symbols[name] = format_hex(address);
        j["companion"] = Json{{"binary_path", a.companion->binary_path}, {"symbols", std::move(symbols)}};
    } else {
        j["companion"] = nullptr;
    }
    return j;
}

BuildArtifact artifact_from_json(const Json& j)
{
    BuildArtifact a;
    a.unit_id = string_field(j, "unit_id");
    a.unit_path = string_field(j, "unit_path");
    a.config = config_from_json(field(j, "config"));
    a.binary_path = string_field(j, "binary_path");
    a.status = enum_field(j, "status", kStatuses);
    a.log = string_field(j, "log");
    auto it = j.find("companion");
    if (it != j.end() && !it->is_null()) {
        CompanionBuild companion;
        companion.binary_path = string_field(*it, "binary_path");
        for (const auto& [name, address] : field(*it, "symbols").items())
            companion.symbols[name] = parse_hex(address.get<std::string>());
        a.companion = std::move(companion);
    }
    return a;
}

Json to_json(const DecompiledFunction& d)
{
    Json j;
    j["entry"] = format_hex(d.entry_address);
    j["name"] = d.surface_name;
    j["decompiled_c"] = d.decompiled_text;
    j["matched_source"] = d.matched_source ? Json(*d.matched_source) : Json(nullptr);
    return j;
}

DecompiledFunction decompiled_from_json(const Json& j)
{
    DecompiledFunction d;
    d.entry_address = parse_hex(string_field(j, "entry"));
    d.surface_name = string_field(j, "name");
    d.decompiled_text = string_field(j, "decompiled_c");
    d.matched_source = optional_string(j, "matched_source");
    return d;
}

Json to_json(const MatchedPair& p)
{
    Json j;
    j["function"] = to_json(p.function);
    j["decompiled"] = to_json(p.decompiled);
    j["config"] = to_json(p.config);
    j["build_status"] = to_string(p.build_status);
    j["description"] = p.description ? Json(*p.description) : Json(nullptr);
    return j;
}

MatchedPair pair_from_json(const Json& j)
{
    MatchedPair p;
    p.function = function_from_json(field(j, "function"));
    p.decompiled = decompiled_from_json(field(j, "decompiled"));
    p.config = config_from_json(field(j, "config"));
    p.build_status = enum_field(j, "build_status", kStatuses);
    p.description = optional_string(j, "description");
    return p;
}

// ---------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorKind::Io, "cannot read " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::filesystem::path& path, std::string_view content)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(ErrorKind::Io, "cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out)
        fail(ErrorKind::Io, "short write to " + path.string());
}

std::vector<Json> read_jsonl(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorKind::Io, "cannot read " + path.string());
    std::vector<Json> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            rows.push_back(Json::parse(line));
        } catch (const Json::parse_error& e) {
            schema_error(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
        }
    }
    return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows)
{
    std::string content;
    for (const auto& row : rows) {
        content += row.dump(-1, ' ', false, Json::error_handler_t::replace);
        content += '\n';
    }
    write_file(path, content);
}

Json read_json(const std::filesystem::path& path)
{
    try {
        return Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        schema_error(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const Json& json)
{
    write_file(path, json.dump(2, ' ', false, Json::error_handler_t::replace) + "\n");
}

std::vector<CorpusRecord> read_records(const std::filesystem::path& path)
{
    std::vector<CorpusRecord> records;
    for (const auto& row : read_jsonl(path))
        records.push_back(record_from_json(row));
    return records;
}

void write_records(const std::filesystem::path& path, const std::vector<CorpusRecord>& records)
{
    std::vector<Json> rows;
    rows.reserve(records.size());
    for (const auto& r : records)
        rows.push_back(to_json(r));
    write_jsonl(path, rows);
}

} // namespace debinforge
