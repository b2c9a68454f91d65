#include "debinforge/llm.hpp"

#include <algorithm>
#include <cstdlib>
#include <regex>
#include <set>

#include <fmt/format.h>

#include "debinforge/assets.hpp"
#include "debinforge/error.hpp"
#include "debinforge/extractor.hpp"
#include "debinforge/hash.hpp"
#include "debinforge/syntax.hpp"

namespace debinforge::llm {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

bool word_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool contains_word(std::string_view text, std::string_view word)
{
    for (std::size_t pos = text.find(word); pos != std::string_view::npos; pos = text.find(word, pos + 1)) {
        const bool left = pos == 0 || !word_char(text[pos - 1]);
        const std::size_t end = pos + word.size();
        const bool right = end >= text.size() || !word_char(text[end]);
        if (left && right)
            return true;
    }
    return false;
}

std::optional<std::string> fenced_block(std::string_view text)
{
    const std::size_t open = text.find("```");
    if (open == std::string_view::npos)
        return std::nullopt;
    const std::size_t body = text.find('\n', open + 3);
    if (body == std::string_view::npos)
        return std::nullopt;
    const std::size_t close = text.find("```", body + 1);
    if (close == std::string_view::npos)
        return std::nullopt;
    std::string code = trim(text.substr(body + 1, close - body - 1));
    if (code.empty())
        return std::nullopt;
    return code;
}

std::optional<std::string> brace_span(std::string_view text)
{
    std::size_t best_open = 0, best_close = 0;
    bool found = false;
    int depth = 0;
    std::size_t open = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '{') {
            if (depth++ == 0)
                open = i;
        } else if (text[i] == '}' && depth > 0) {
            if (--depth == 0 && (!found || i - open > best_close - best_open)) {
                best_open = open;
                best_close = i;
                found = true;
            }
        }
    }
    if (!found)
        return std::nullopt;
    std::size_t start = text.rfind('\n', best_open);
    start = start == std::string_view::npos ? 0 : start + 1;
    if (trim(text.substr(start, best_open - start)).empty() && start > 0) {
        // Opening brace on its own line: the signature is on the previous non-empty line.
        std::size_t prev_end = start - 1;
        while (true) {
            std::size_t prev_start = prev_end == 0 ? std::string_view::npos : text.rfind('\n', prev_end - 1);
            prev_start = prev_start == std::string_view::npos ? 0 : prev_start + 1;
            if (!trim(text.substr(prev_start, prev_end - prev_start)).empty() || prev_start == 0) {
                start = prev_start;
                break;
            }
            prev_end = prev_start - 1;
        }
    }
    return trim(text.substr(start, best_close + 1 - start));
}

TSNode find_function(TSNode node)
{
    if (syntax::type(node) == "function_definition")
        return node;
    const std::uint32_t n = ts_node_named_child_count(node);
    for (std::uint32_t i = 0; i < n; ++i) {
        TSNode found = find_function(ts_node_named_child(node, i));
        if (!ts_node_is_null(found))
            return found;
    }
    return TSNode{};
}

// Identifier at the bottom of a declarator chain.
std::optional<std::string> declarator_name(const syntax::Tree& tree, TSNode node)
{
    while (!ts_node_is_null(node)) {
        const auto t = syntax::type(node);
        if (t == "identifier")
            return std::string(tree.text(node));
        TSNode next = syntax::child_by_field(node, "declarator");
        if (ts_node_is_null(next)) {
            // parenthesized_declarator / reference_declarator hold it as a plain child.
            next = ts_node_named_child_count(node) ? ts_node_named_child(node, 0) : TSNode{};
            if (!ts_node_is_null(next) && syntax::type(next) == "type_qualifier")
                next = ts_node_named_child_count(node) > 1 ? ts_node_named_child(node, 1) : TSNode{};
        }
        node = next;
    }
    return std::nullopt;
}

void collect_declared(const syntax::Tree& tree, TSNode node, std::vector<std::string>& out)
{
    const auto t = syntax::type(node);
    if (t == "parameter_declaration" || t == "declaration") {
        const std::uint32_t n = ts_node_child_count(node);
        for (std::uint32_t i = 0; i < n; ++i) {
            const char* field = ts_node_field_name_for_child(node, i);
            if (field && std::string_view(field) == "declarator") {
                if (auto name = declarator_name(tree, ts_node_child(node, i)))
                    out.push_back(std::move(*name));
            }
        }
    }
    const std::uint32_t n = ts_node_named_child_count(node);
    for (std::uint32_t i = 0; i < n; ++i)
        collect_declared(tree, ts_node_named_child(node, i), out);
}

std::vector<std::string> distinct(std::vector<std::string> items)
{
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto& item : items) {
        if (seen.insert(item).second)
            out.push_back(std::move(item));
    }
    return out;
}

std::string task_file_stem(TaskKind task)
{
    return "instruction_" + std::string(to_string(task)) + ".txt";
}

} // namespace

Json to_json(const ChatRequest& request)
{
    Json messages = Json::array();
    for (const auto& m : request.messages)
        messages.push_back({{"role", m.role}, {"content", m.content}});
    return {{"model", request.model}, {"messages", messages}, {"temperature", request.temperature}};
}

std::string request_hash(const ChatRequest& request)
{
    return sha256_hex(to_json(request).dump());
}

ClientSettings settings_from_json(const Json& json)
{
    ClientSettings s;
    if (json.is_null())
        return s;
    s.endpoint = json.value("endpoint", s.endpoint);
    s.model = json.value("model", s.model);
    s.temperature = json.value("temperature", s.temperature);
    s.max_retries = json.value("max_retries", s.max_retries);
    if (json.contains("timeout_s"))
        s.timeout = std::chrono::seconds(json["timeout_s"].get<long>());
    if (s.temperature < 0)
        fail(ErrorKind::Config, "llm.temperature must be >= 0");
    if (s.max_retries < 0)
        fail(ErrorKind::Config, "llm.max_retries must be >= 0");
    if (const char* key = std::getenv("DEBINFORGE_API_KEY"))
        s.api_key = key;
    return s;
}

ChatClient::ChatClient(ClientSettings settings) : settings_(std::move(settings))
{
    if (settings_.temperature < 0)
        fail(ErrorKind::Config, "temperature must be >= 0");
}

ChatRequest ChatClient::make_request(const std::vector<Message>& messages) const
{
    return ChatRequest{settings_.model, messages, settings_.temperature};
}

std::string ChatClient::chat(const std::vector<Message>& messages)
{
    return complete(make_request(messages));
}

std::string parse_completion(const Json& body)
{
    try {
        const Json& content = body.at("choices").at(0).at("message").at("content");
        if (!content.is_string())
            fail(ErrorKind::MalformedResponse, "message content is not a string");
        return content.get<std::string>();
    } catch (const Json::exception& e) {
        fail(ErrorKind::MalformedResponse, std::string("unexpected completion shape: ") + e.what());
    }
}

ReplayChatClient::ReplayChatClient(ClientSettings settings, const Json& transcript)
    : ChatClient(std::move(settings))
{
    if (!transcript.contains("entries") || !transcript["entries"].is_array())
        fail(ErrorKind::Schema, "transcript needs an 'entries' array");
    for (const auto& entry : transcript["entries"]) {
        std::string hash = entry.value("hash", "");
        if (hash.empty()) {
            const Json& req = entry.at("request");
            ChatRequest r{req.at("model").get<std::string>(), {}, req.value("temperature", 0.0)};
            for (const auto& m : req.at("messages"))
                r.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
            hash = request_hash(r);
        }
        responses_[hash] = entry.at("response").get<std::string>();
    }
}

ReplayChatClient ReplayChatClient::from_file(ClientSettings settings, const fs::path& path)
{
    return ReplayChatClient(std::move(settings), read_json(path));
}

std::string ReplayChatClient::complete(const ChatRequest& request)
{
    const std::string hash = request_hash(request);
    auto it = responses_.find(hash);
    if (it == responses_.end())
        fail(ErrorKind::TransportError, "no recorded response for request " + hash);
    ++served_;
    return it->second;
}

RecordingChatClient::RecordingChatClient(ChatClient& inner) : ChatClient(inner.settings()), inner_(inner) {}

std::string RecordingChatClient::complete(const ChatRequest& request)
{
    std::string response = inner_.chat(request.messages);
    entries_.push_back({{"hash", request_hash(request)}, {"request", to_json(request)}, {"response", response}});
    return response;
}

Json RecordingChatClient::transcript() const
{
    return {{"entries", entries_}};
}

PromptLibrary PromptLibrary::load(const fs::path& dir)
{
    PromptLibrary p;
    for (TaskKind task : kAllTasks)
        p.instruction_meta[task] = read_file(dir / task_file_stem(task));
    p.instruction_feedback = read_file(dir / "instruction_feedback.txt");
    p.injection = read_file(dir / "injection.txt");
    p.description = read_file(dir / "description.txt");
    p.description_feedback = read_file(dir / "description_feedback.txt");
    for (const char* family : {"gpt4", "gemini", "other"})
        p.investigation[family] = read_file(dir / fmt::format("investigate_{}.txt", family));
    return p;
}

const PromptLibrary& PromptLibrary::standard()
{
    static const PromptLibrary library = load(asset_path("prompts"));
    return library;
}

std::string render_template(std::string_view text, const std::map<std::string, std::string>& values)
{
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t open = text.find("{{", pos);
        if (open == std::string_view::npos)
            break;
        const std::size_t close = text.find("}}", open + 2);
        if (close == std::string_view::npos)
            break;
        const std::string key(text.substr(open + 2, close - open - 2));
        auto it = values.find(key);
        if (it == values.end())
            fail(ErrorKind::PreconditionViolation, "no value for template placeholder {{" + key + "}}");
        out.append(text, pos, open - pos);
        out += it->second;
        pos = close + 2;
    }
    out.append(text.substr(pos));
    return out;
}

std::optional<std::string> extract_code(std::string_view response)
{
    if (auto fenced = fenced_block(response))
        return fenced;
    return brace_span(response);
}

const std::vector<CweId>& default_injection_targets()
{
    static const std::vector<CweId> targets{CweId(787), CweId(416), CweId(20),  CweId(125),
                                            CweId(476), CweId(190), CweId(119), CweId(798)};
    return targets;
}

std::string_view to_string(InjectionStatus status)
{
    switch (status) {
    case InjectionStatus::Injected: return "injected";
    case InjectionStatus::NotCompilable: return "not_compilable";
    case InjectionStatus::Rejected: return "rejected";
    }
    return "rejected";
}

Json to_json(const InjectionOutcome& o)
{
    return {{"function_id", o.function_id},     {"function_name", o.function_name},
            {"cwe", o.cwe.render()},            {"status", to_string(o.status)},
            {"compile_checked", o.compile_checked}, {"reason", o.reason},
            {"injected_code", o.injected_code}, {"check_log", o.check_log}};
}

SourceUnit splice_function(const SourceUnit& unit, const ExtractedFunction& function, std::string_view code)
{
    if (function.span.end > unit.text.size() ||
        std::string_view(unit.text).substr(function.span.begin, function.span.size()) != function.text)
        fail(ErrorKind::PreconditionViolation, "function span does not belong to the unit text");
    SourceUnit out = unit;
    out.text.replace(function.span.begin, function.span.size(), code);
    out.info.provenance = Provenance::Injected;
    return out;
}

InjectionOutcome inject_vulnerability(const ExtractedFunction& function, const SourceUnit& unit, CweId cwe,
                                      ChatClient& client, build::CompileChecker& checker,
                                      const PromptLibrary& prompts, const InjectionOptions& options)
{
    if (std::find(options.targets.begin(), options.targets.end(), cwe) == options.targets.end())
        fail(ErrorKind::PreconditionViolation, cwe.render() + " is not an injection target");

    InjectionOutcome outcome;
    outcome.function_id = function.id;
    outcome.function_name = function.name;
    outcome.cwe = cwe;

    const std::string prompt = render_template(prompts.injection, {{"cwe", cwe.render()}, {"code", function.text}});
    const std::string reply = client.chat({{"user", prompt}});
    auto code = extract_code(reply);
    if (!code)
        fail(ErrorKind::MalformedResponse, "reply holds no code block");
    outcome.injected_code = *code;

    if (trim(*code) == trim(function.text)) {
        outcome.reason = "function returned unchanged";
        return outcome;
    }
    syntax::Parser parser(function.unit.language);
    const syntax::Tree tree = parser.parse(*code);
    if (ts_node_is_null(find_function(tree.root()))) {
        outcome.reason = "reply holds no function definition";
        return outcome;
    }

    const auto check = checker.check(splice_function(unit, function, *code));
    outcome.compile_checked = true;
    outcome.check_log = check.log;
    outcome.status = check.ok ? InjectionStatus::Injected : InjectionStatus::NotCompilable;
    return outcome;
}

InjectionBatch inject_batch(const std::vector<InjectionRequest>& requests, ChatClient& client,
                            build::CompileChecker& checker, const PromptLibrary& prompts,
                            const InjectionOptions& options)
{
    InjectionBatch batch;
    for (const auto& req : requests) {
        InjectionOutcome outcome;
        try {
            outcome = inject_vulnerability(*req.function, *req.unit, req.cwe, client, checker, prompts, options);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::MalformedResponse)
                throw;
            outcome.function_id = req.function->id;
            outcome.function_name = req.function->name;
            outcome.cwe = req.cwe;
            outcome.reason = e.what();
        }
        ++batch.tally.selected;
        switch (outcome.status) {
        case InjectionStatus::Injected: ++batch.tally.injected; break;
        case InjectionStatus::NotCompilable: ++batch.tally.not_compilable; break;
        case InjectionStatus::Rejected: ++batch.tally.rejected; break;
        }
        batch.outcomes.push_back(std::move(outcome));
    }
    return batch;
}

std::vector<std::string> declared_identifiers(const ExtractedFunction& function)
{
    std::vector<std::string> names;
    if (!function.name.empty())
        names.push_back(function.name);
    syntax::Parser parser(function.unit.language);
    const syntax::Tree tree = parser.parse(function.text);
    TSNode fn = find_function(tree.root());
    if (!ts_node_is_null(fn)) {
        if (function.name.empty()) {
            if (auto name = declarator_name(tree, syntax::child_by_field(fn, "declarator")))
                names.push_back(std::move(*name));
        }
        collect_declared(tree, syntax::child_by_field(fn, "declarator"), names);
        collect_declared(tree, syntax::child_by_field(fn, "body"), names);
    }
    return distinct(std::move(names));
}

std::vector<std::string> validate_description(std::string_view description, const ExtractedFunction& function)
{
    std::vector<std::string> leaked;
    for (auto& name : declared_identifiers(function)) {
        if (contains_word(description, name))
            leaked.push_back(std::move(name));
    }
    return leaked;
}

DescriptionOutcome generate_description(const ExtractedFunction& function, const std::vector<Comment>& comments,
                                        ChatClient& client, const PromptLibrary& prompts)
{
    std::string comment_text;
    for (const auto& c : comments)
        comment_text += c.text + "\n";
    if (comment_text.empty())
        comment_text = "(none)\n";
    std::vector<Message> messages{
        {"user", render_template(prompts.description,
                                 {{"code", extract::strip_comments(function)}, {"comments", comment_text}})}};

    DescriptionOutcome outcome;
    for (int attempt = 1; attempt <= 2; ++attempt) {
        const std::string reply = client.chat(messages);
        outcome.attempts = attempt;
        outcome.description = trim(reply);
        if (outcome.description.empty())
            fail(ErrorKind::MalformedResponse, "empty description");
        outcome.leaked = validate_description(outcome.description, function);
        if (outcome.leaked.empty()) {
            outcome.status = DescriptionStatus::Accepted;
            return outcome;
        }
        std::string list;
        for (const auto& name : outcome.leaked)
            list += (list.empty() ? "" : ", ") + name;
        messages.push_back({"assistant", reply});
        messages.push_back({"user", render_template(prompts.description_feedback, {{"identifiers", list}})});
    }
    outcome.status = DescriptionStatus::Rejected;
    return outcome;
}

std::vector<std::string> parse_instruction_list(std::string_view response)
{
    static const std::regex marker(R"(^\s*(?:\d+\s*[.):]|[-*•])\s+)");
    std::vector<std::string> lines;
    std::vector<bool> marked;
    std::size_t pos = 0;
    while (pos <= response.size()) {
        std::size_t end = response.find('\n', pos);
        if (end == std::string_view::npos)
            end = response.size();
        std::string line = trim(response.substr(pos, end - pos));
        pos = end + 1;
        if (line.empty())
            continue;
        std::smatch m;
        const bool has_marker = std::regex_search(line, m, marker);
        if (has_marker)
            line = trim(line.substr(static_cast<std::size_t>(m.length(0))));
        if (line.size() >= 2 && (line.front() == '"' || line.front() == '\'') && line.back() == line.front())
            line = trim(line.substr(1, line.size() - 2));
        else if (!line.empty() && line.front() == '"' && std::count(line.begin(), line.end(), '"') % 2 == 1)
            line = trim(line.substr(1));
        if (!line.empty()) {
            lines.push_back(std::move(line));
            marked.push_back(has_marker);
        }
    }
    if (std::find(marked.begin(), marked.end(), true) == marked.end())
        return lines;
    std::vector<std::string> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (marked[i])
            out.push_back(std::move(lines[i]));
    }
    return out;
}

std::vector<std::string> generate_instruction_pool(TaskKind task, ChatClient& client, const PromptLibrary& prompts)
{
    auto it = prompts.instruction_meta.find(task);
    if (it == prompts.instruction_meta.end())
        fail(ErrorKind::MissingPool, fmt::format("no meta-prompt for task {}", to_string(task)));
    std::vector<Message> messages{{"user", it->second}};
    std::vector<std::string> pool;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const std::string reply = client.chat(messages);
        pool = distinct(parse_instruction_list(reply));
        if (pool.size() == kPoolSize)
            return pool;
        messages.push_back({"assistant", reply});
        messages.push_back(
            {"user", render_template(prompts.instruction_feedback, {{"count", std::to_string(pool.size())}})});
    }
    fail(ErrorKind::PoolSizeMismatch,
         fmt::format("{} pool has {} distinct instructions, expected {}", to_string(task), pool.size(), kPoolSize));
}

InstructionPools pools_from_json(const Json& json)
{
    if (!json.is_object())
        fail(ErrorKind::Schema, "instruction pools must be an object");
    InstructionPools pools;
    for (const auto& [key, items] : json.items()) {
        auto task = parse_task(key);
        if (!task)
            fail(ErrorKind::Schema, "unknown task in instruction pools: " + key);
        if (!items.is_array())
            fail(ErrorKind::Schema, "pool '" + key + "' must be an array");
        std::vector<std::string> pool;
        std::set<std::string> seen;
        for (const auto& item : items) {
            if (!item.is_string() || trim(item.get<std::string>()).empty())
                fail(ErrorKind::Schema, "pool '" + key + "' holds an empty or non-string entry");
            if (!seen.insert(item.get<std::string>()).second)
                fail(ErrorKind::Schema, "pool '" + key + "' holds a duplicate instruction");
            pool.push_back(item.get<std::string>());
        }
        if (pool.size() != kPoolSize)
            fail(ErrorKind::PoolSizeMismatch,
                 fmt::format("pool '{}' has {} instructions, expected {}", key, pool.size(), kPoolSize));
        pools[*task] = std::move(pool);
    }
    return pools;
}

InstructionPools load_instruction_pools(const fs::path& path)
{
    return pools_from_json(read_json(path));
}

Json to_json(const InstructionPools& pools)
{
    Json out = Json::object();
    for (const auto& [task, pool] : pools)
        out[std::string(to_string(task))] = pool;
    return out;
}

const InstructionPools& bundled_instruction_pools()
{
    static const InstructionPools pools = load_instruction_pools(asset_path("instruction_pools.json"));
    return pools;
}

} // namespace debinforge::llm
