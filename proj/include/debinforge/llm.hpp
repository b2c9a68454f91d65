#pragma once

// Chat-completion clients and the LLM-backed corpus steps: vulnerability injection,
// description generation and instruction-pool generation.

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "debinforge/build.hpp"
#include "debinforge/model.hpp"

namespace debinforge::llm {

struct Message {
    std::string role;
    std::string content;

    bool operator==(const Message&) const = default;
};

struct ChatRequest {
    std::string model;
    std::vector<Message> messages;
    double temperature = 0.0;
};

// {model, messages: [{role, content}], temperature}
Json to_json(const ChatRequest& request);
// SHA-256 of the compact JSON rendering; the replay key.
std::string request_hash(const ChatRequest& request);

struct ClientSettings {
    std::string endpoint;
    std::string model = "gpt-4";
    double temperature = 0.0;
    int max_retries = 3;
    std::string api_key;
    std::chrono::milliseconds timeout{60'000};
    std::chrono::milliseconds initial_backoff{500};
};

// Keys: endpoint, model, temperature, max_retries, timeout_s. The API key comes from
// DEBINFORGE_API_KEY. Throws Config for a negative temperature or retry count.
ClientSettings settings_from_json(const Json& json);

class ChatClient {
public:
    explicit ChatClient(ClientSettings settings);
    virtual ~ChatClient() = default;

    // Returns the assistant message text. Throws TransportError or MalformedResponse.
    std::string chat(const std::vector<Message>& messages);
    ChatRequest make_request(const std::vector<Message>& messages) const;
    const ClientSettings& settings() const { return settings_; }

protected:
    virtual std::string complete(const ChatRequest& request) = 0;

private:
    ClientSettings settings_;
};

// OpenAI-compatible HTTP(S) endpoint; retries transport failures, 429 and 5xx with
// exponential backoff.
class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(ClientSettings settings);

protected:
    std::string complete(const ChatRequest& request) override;
};

// choices[0].message.content; throws MalformedResponse.
std::string parse_completion(const Json& body);

// Transcript: {"entries": [{"hash", "request", "response"}]}.
class ReplayChatClient : public ChatClient {
public:
    ReplayChatClient(ClientSettings settings, const Json& transcript);
    static ReplayChatClient from_file(ClientSettings settings, const std::filesystem::path& path);

    std::size_t served() const { return served_; }

protected:
    // Throws TransportError when the request was never recorded.
    std::string complete(const ChatRequest& request) override;

private:
    std::map<std::string, std::string> responses_;
    std::size_t served_ = 0;
};

// Forwards to another client and keeps a transcript of everything it saw.
class RecordingChatClient : public ChatClient {
public:
    explicit RecordingChatClient(ChatClient& inner);

    Json transcript() const;

protected:
    std::string complete(const ChatRequest& request) override;

private:
    ChatClient& inner_;
    Json entries_ = Json::array();
};

// Prompt templates with {{name}} placeholders, loaded from the prompt asset directory.
struct PromptLibrary {
    std::map<TaskKind, std::string> instruction_meta;
    std::string instruction_feedback;
    std::string injection;
    std::string description;
    std::string description_feedback;
    // Investigation prompts by model family ("gpt4", "gemini", "other").
    std::map<std::string, std::string> investigation;

    static PromptLibrary load(const std::filesystem::path& dir);
    static const PromptLibrary& standard();
};

// Replaces every {{key}}; throws PreconditionViolation for placeholders without a value.
std::string render_template(std::string_view text, const std::map<std::string, std::string>& values);

// First fenced block; otherwise the longest brace-balanced span, widened to the start
// of the line holding its signature.
std::optional<std::string> extract_code(std::string_view response);

// ---------------------------------------------------------------------------
// Vulnerability injection.

const std::vector<CweId>& default_injection_targets();

enum class InjectionStatus { Injected, NotCompilable, Rejected };
std::string_view to_string(InjectionStatus status);

struct InjectionOutcome {
    std::string function_id;
    std::string function_name;
    CweId cwe{1};
    std::string injected_code;
    bool compile_checked = false;
    InjectionStatus status = InjectionStatus::Rejected;
    std::string reason;
    std::string check_log;
};

Json to_json(const InjectionOutcome& outcome);

struct InjectionOptions {
    std::vector<CweId> targets = default_injection_targets();
};

// The unit with the function's bytes replaced by `code`, marked as injected.
SourceUnit splice_function(const SourceUnit& unit, const ExtractedFunction& function, std::string_view code);

// Throws PreconditionViolation for CWEs outside the target set, TransportError, and
// MalformedResponse when the reply holds no code.
InjectionOutcome inject_vulnerability(const ExtractedFunction& function, const SourceUnit& unit, CweId cwe,
                                      ChatClient& client, build::CompileChecker& checker,
                                      const PromptLibrary& prompts = PromptLibrary::standard(),
                                      const InjectionOptions& options = {});

struct InjectionRequest {
    const ExtractedFunction* function;
    const SourceUnit* unit;
    CweId cwe;
};

struct InjectionTally {
    std::size_t selected = 0;
    std::size_t injected = 0;
    std::size_t not_compilable = 0;
    std::size_t rejected = 0;
};

struct InjectionBatch {
    std::vector<InjectionOutcome> outcomes;
    InjectionTally tally;
};

// Runs the requests in order; unusable replies become Rejected outcomes.
InjectionBatch inject_batch(const std::vector<InjectionRequest>& requests, ChatClient& client,
                            build::CompileChecker& checker, const PromptLibrary& prompts = PromptLibrary::standard(),
                            const InjectionOptions& options = {});

// ---------------------------------------------------------------------------
// Descriptions.

// Function name first, then parameters and locals in declaration order.
std::vector<std::string> declared_identifiers(const ExtractedFunction& function);

// Declared identifiers that occur in the description as whole words (case-sensitive).
std::vector<std::string> validate_description(std::string_view description, const ExtractedFunction& function);

enum class DescriptionStatus { Accepted, Rejected };

struct DescriptionOutcome {
    DescriptionStatus status = DescriptionStatus::Rejected;
    std::string description;
    std::vector<std::string> leaked;
    int attempts = 0;
};

// One retry with feedback when the first description leaks identifiers.
DescriptionOutcome generate_description(const ExtractedFunction& function, const std::vector<Comment>& comments,
                                        ChatClient& client, const PromptLibrary& prompts = PromptLibrary::standard());

// ---------------------------------------------------------------------------
// Instruction pools.

inline constexpr std::size_t kPoolSize = 20;

// One instruction per non-empty line, list markers and wrapping quotes removed.
std::vector<std::string> parse_instruction_list(std::string_view response);

// Exactly kPoolSize distinct instructions; one retry, then PoolSizeMismatch.
std::vector<std::string> generate_instruction_pool(TaskKind task, ChatClient& client,
                                                   const PromptLibrary& prompts = PromptLibrary::standard());

// {"identify": [...], ...}; every pool must hold kPoolSize distinct non-empty entries.
// Throws Schema or PoolSizeMismatch.
InstructionPools pools_from_json(const Json& json);
InstructionPools load_instruction_pools(const std::filesystem::path& path);
Json to_json(const InstructionPools& pools);
const InstructionPools& bundled_instruction_pools();

} // namespace debinforge::llm
