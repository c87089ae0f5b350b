#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gridrag/errors.hpp"
#include "gridrag/index.hpp"
#include "json.hpp"

namespace gridrag {

// --- conversation state ---

enum class Role { system, user, assistant, tool };
std::string to_string(Role role);

struct ToolCall {
    std::string call_id;
    std::string tool_name;
    nlohmann::json arguments;  // validated against the tool's schema
};

struct ToolResult {
    std::string call_id;
    bool ok = true;
    std::vector<Chunk> chunks;           // search results, length <= requested K
    std::string text;                    // non-chunk tool output (grids, reports, ...)
    std::optional<std::string> error;    // present iff !ok
};

struct TextPart {
    std::string text;
};

struct ImagePart {
    std::vector<std::uint8_t> payload;
    std::string encoding;
    std::string alt_text;
    std::string sheet;  // provenance kept so the prune stub can retain it
    int row = 0;
    int col = 0;
};

struct ToolCallPart {
    ToolCall call;
};

// Header of a tool message; image payloads ride as sibling ImageParts so the
// always-prune pass can strip them independently.
struct ToolResultPart {
    std::string call_id;
    bool ok = true;
    std::string text;
    std::optional<std::string> error;
};

using MessagePart = std::variant<TextPart, ImagePart, ToolCallPart, ToolResultPart>;

struct Message {
    Role role = Role::user;
    std::vector<MessagePart> parts;

    std::string joined_text() const;  // all text-ish content, used for script matching
    std::vector<const ToolCall*> tool_calls() const;
};

// tool_call parts only in assistant messages, tool_result parts only in tool
// messages; throws Error on violation.
void validate_message(const Message& m);

// --- tools ---

struct ToolParam {
    std::string name;
    std::string type;  // "string" | "int"
    bool required = false;
    std::string description;
};

struct ToolSchema {
    std::string name;
    std::string description;
    std::vector<ToolParam> params;
};

struct Tool {
    ToolSchema schema;
    std::function<ToolResult(const nlohmann::json& arguments)> invoke;
};

class ToolRegistry {
public:
    void add(Tool tool);
    const Tool* find(const std::string& name) const;
    std::vector<ToolSchema> schemas() const;  // sorted by name
    std::size_t size() const { return tools_.size(); }

private:
    std::map<std::string, Tool> tools_;
};

// The five search tools, all delegating to Index::hybrid_search.
// search_rows / search_columns expose optional row / col coordinate filters.
ToolRegistry register_search_tools(const Index& index, const FusionConfig& fusion = {});

// --- trace ---

constexpr int kTraceFormatVersion = 1;

struct TraceEntry {
    int seq = 0;                // strictly increasing within a trace
    std::int64_t timestamp = 0; // dedicated field; logical clock under replay
    std::optional<std::string> subtask_id;
    ToolCall call;
    ToolResult result;
    int token_estimate = 0;
};

std::string trace_to_jsonl(const std::vector<TraceEntry>& trace);  // payloads -> sha256 digests
std::vector<nlohmann::json> parse_trace_jsonl(const std::string& text);

// --- backend ---

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    // Returns an assistant message with either tool_call parts or final text.
    virtual Message step(const std::vector<Message>& messages,
                         const std::vector<ToolSchema>& tool_schemas) = 0;
};

// Deterministic test backend: an ordered list of steps, each matching on a
// substring of the latest message and emitting fixed tool calls or a final
// answer. A mismatch or an exhausted script raises BackendFailure.
class ScriptedBackend : public LlmBackend {
public:
    struct Step {
        std::string match;                  // substring of the latest message text; "" matches any
        std::vector<ToolCall> tool_calls;   // empty call_id -> assigned "call-<n>"
        std::optional<std::string> final_answer;
    };

    explicit ScriptedBackend(std::vector<Step> steps) : steps_(std::move(steps)) {}
    static ScriptedBackend from_json_file(const std::string& path);
    static ScriptedBackend from_json(const nlohmann::json& j);

    Message step(const std::vector<Message>& messages,
                 const std::vector<ToolSchema>& tool_schemas) override;

private:
    std::vector<Step> steps_;
    std::size_t next_ = 0;
    int call_counter_ = 0;
};

// --- the loop ---

struct LoopBudget {
    int max_tool_iterations = 50;
    int initial_k = 10;
};

struct AgentResult {
    std::string answer;
    bool budget_exhausted = false;
    std::vector<TraceEntry> trace;
    std::vector<Message> messages;
};

struct AgentOptions {
    std::optional<std::string> subtask_id;
    // Logical clock by default so scripted runs replay byte-for-byte.
    std::function<std::int64_t()> clock;
};

// Aborting backend failure carrying the partial trace gathered so far.
struct AgentAborted : Error {
    std::vector<TraceEntry> partial_trace;
    AgentAborted(const std::string& cause, std::vector<TraceEntry> trace)
        : Error("backend failure: " + cause), partial_trace(std::move(trace)) {}
};

AgentResult run_agent(const std::string& query, const std::vector<Chunk>& initial_context,
                      const ToolRegistry& registry, LlmBackend& backend,
                      const LoopBudget& budget = {}, const AgentOptions& options = {});

// Always-prune: image payloads survive only in the most recent image-bearing
// tool result; older ones become textual metadata stubs with a digest.
std::vector<Message> prune_images(const std::vector<Message>& messages);

// ceil(chars/4) per text part, a fixed constant per image payload.
constexpr int kTokensPerImage = 1024;
int estimate_tokens(const Message& message);

}  // namespace gridrag
