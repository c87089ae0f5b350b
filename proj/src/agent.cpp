#include "gridrag/agent.hpp"

#include <algorithm>
#include <cmath>

#include "gridrag/chunk_json.hpp"
#include "gridrag/errors.hpp"
#include "gridrag/util/sha256.hpp"
#include "gridrag/util/strings.hpp"

namespace gridrag {

using nlohmann::json;

std::string to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
        case Role::tool: return "tool";
    }
    return "user";
}

std::string Message::joined_text() const {
    std::string out;
    for (const auto& part : parts) {
        if (const auto* t = std::get_if<TextPart>(&part)) {
            if (!out.empty()) out += "\n";
            out += t->text;
        } else if (const auto* r = std::get_if<ToolResultPart>(&part)) {
            if (!out.empty()) out += "\n";
            out += r->text;
        } else if (const auto* c = std::get_if<ToolCallPart>(&part)) {
            if (!out.empty()) out += "\n";
            out += c->call.tool_name + " " + c->call.arguments.dump();
        }
    }
    return out;
}

std::vector<const ToolCall*> Message::tool_calls() const {
    std::vector<const ToolCall*> out;
    for (const auto& part : parts)
        if (const auto* c = std::get_if<ToolCallPart>(&part)) out.push_back(&c->call);
    return out;
}

void validate_message(const Message& m) {
    for (const auto& part : m.parts) {
        if (std::holds_alternative<ToolCallPart>(part) && m.role != Role::assistant)
            throw Error("tool_call part outside assistant message");
        if (std::holds_alternative<ToolResultPart>(part) && m.role != Role::tool)
            throw Error("tool_result part outside tool message");
    }
}

// --- registry ---

void ToolRegistry::add(Tool tool) {
    std::string name = tool.schema.name;
    if (!tools_.emplace(name, std::move(tool)).second)
        throw Error("tool already registered: " + name);
}

const Tool* ToolRegistry::find(const std::string& name) const {
    auto it = tools_.find(name);
    return it == tools_.end() ? nullptr : &it->second;
}

std::vector<ToolSchema> ToolRegistry::schemas() const {
    std::vector<ToolSchema> out;
    out.reserve(tools_.size());
    for (const auto& [name, tool] : tools_) out.push_back(tool.schema);
    return out;
}

// --- search tools ---

namespace {

ToolResult run_search(const Index& index, const FusionConfig& fusion,
                      std::optional<ChunkKind> kind, bool allow_coords, const json& args) {
    ToolResult r;
    if (!args.contains("query") || !args["query"].is_string()) {
        r.ok = false;
        r.error = "missing required string argument 'query'";
        return r;
    }
    FusionConfig cfg = fusion;
    if (args.contains("K")) {
        if (!args["K"].is_number_integer() || args["K"].get<int>() < 1) {
            r.ok = false;
            r.error = "argument 'K' must be a positive integer";
            return r;
        }
        cfg.top_k = args["K"].get<int>();
    }
    CoordFilter coords;
    if (allow_coords) {
        if (args.contains("row")) coords.row = args["row"].get<int>();
        if (args.contains("col")) coords.col = args["col"].get<int>();
    }
    auto hits = index.hybrid_search(args["query"].get<std::string>(), kind, coords, cfg);
    for (const auto& hit : hits)
        if (hit.chunk) r.chunks.push_back(*hit.chunk);
    r.text = std::to_string(r.chunks.size()) + " chunks";
    return r;
}

Tool make_search_tool(const Index& index, const FusionConfig& fusion, const std::string& name,
                      const std::string& description, std::optional<ChunkKind> kind,
                      bool coords) {
    Tool t;
    t.schema.name = name;
    t.schema.description = description;
    t.schema.params = {{"query", "string", true, "natural language search query"},
                       {"K", "int", false, "number of chunks to return"}};
    if (coords) {
        t.schema.params.push_back({"row", "int", false, "filter to chunks covering this row"});
        t.schema.params.push_back({"col", "int", false, "filter to chunks covering this column"});
    }
    t.invoke = [&index, fusion, kind, coords](const json& args) {
        return run_search(index, fusion, kind, coords, args);
    };
    return t;
}

}  // namespace

ToolRegistry register_search_tools(const Index& index, const FusionConfig& fusion) {
    ToolRegistry reg;
    reg.add(make_search_tool(index, fusion, "search_rows", "retrieve row chunks",
                             ChunkKind::row, true));
    reg.add(make_search_tool(index, fusion, "search_columns", "retrieve column chunks",
                             ChunkKind::column, true));
    reg.add(make_search_tool(index, fusion, "search_windows",
                             "retrieve rectangular cell regions", ChunkKind::window, false));
    reg.add(make_search_tool(index, fusion, "search_images", "retrieve embedded visual content",
                             ChunkKind::image, false));
    reg.add(make_search_tool(index, fusion, "search_all",
                             "unified search across all content types", std::nullopt, false));
    return reg;
}

// --- token estimation ---

int estimate_tokens(const Message& message) {
    int total = 0;
    auto text_tokens = [](const std::string& s) { return int((s.size() + 3) / 4); };
    for (const auto& part : message.parts) {
        if (const auto* t = std::get_if<TextPart>(&part)) {
            total += text_tokens(t->text);
        } else if (std::holds_alternative<ImagePart>(part)) {
            total += kTokensPerImage;
        } else if (const auto* c = std::get_if<ToolCallPart>(&part)) {
            total += text_tokens(c->call.tool_name + c->call.arguments.dump());
        } else if (const auto* r = std::get_if<ToolResultPart>(&part)) {
            total += text_tokens(r->text);
        }
    }
    return total;
}

// --- pruning ---

std::vector<Message> prune_images(const std::vector<Message>& messages) {
    std::size_t last_with_images = messages.size();  // sentinel: none
    for (std::size_t i = 0; i < messages.size(); ++i) {
        if (messages[i].role != Role::tool) continue;
        for (const auto& part : messages[i].parts)
            if (std::holds_alternative<ImagePart>(part)) last_with_images = i;
    }
    std::vector<Message> out = messages;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i].role != Role::tool || i == last_with_images) continue;
        for (auto& part : out[i].parts) {
            if (const auto* img = std::get_if<ImagePart>(&part)) {
                util::Sha256 h;
                h.update(img->payload.data(), img->payload.size());
                std::string stub = "[image pruned] sheet=" + img->sheet;
                if (img->row >= 1 && img->col >= 1)
                    stub += " cell=" + a1_ref(img->row, img->col);
                stub += " alt=" + img->alt_text + " sha256=" + h.hex();
                part = TextPart{std::move(stub)};
            }
        }
    }
    return out;
}

// --- trace export ---

namespace {

json tool_call_to_json(const ToolCall& call) {
    return {{"call_id", call.call_id}, {"tool", call.tool_name}, {"args", call.arguments}};
}

json tool_result_to_json(const ToolResult& r) {
    json j;
    j["call_id"] = r.call_id;
    j["ok"] = r.ok;
    if (!r.text.empty()) j["text"] = r.text;
    if (r.error) j["error"] = *r.error;
    j["chunks"] = json::array();
    for (const auto& chunk : r.chunks) j["chunks"].push_back(chunk_to_json(chunk, true));
    return j;
}

}  // namespace

std::string trace_to_jsonl(const std::vector<TraceEntry>& trace) {
    std::string out;
    for (const auto& e : trace) {
        json j;
        j["format_version"] = kTraceFormatVersion;
        j["seq"] = e.seq;
        j["ts"] = e.timestamp;
        if (e.subtask_id) j["subtask_id"] = *e.subtask_id;
        j["call"] = tool_call_to_json(e.call);
        j["result"] = tool_result_to_json(e.result);
        j["token_estimate"] = e.token_estimate;
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<json> parse_trace_jsonl(const std::string& text) {
    std::vector<json> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw ParseError(std::string("trace line: ") + e.what());
        }
    }
    return out;
}

// --- scripted backend ---

ScriptedBackend ScriptedBackend::from_json(const json& j) {
    std::vector<Step> steps;
    for (const auto& js : j.at("steps")) {
        Step s;
        s.match = js.value("match", std::string());
        for (const auto& jc : js.value("tool_calls", json::array())) {
            ToolCall call;
            call.call_id = jc.value("call_id", std::string());
            call.tool_name = jc.at("tool").get<std::string>();
            call.arguments = jc.value("args", json::object());
            s.tool_calls.push_back(std::move(call));
        }
        if (js.contains("final")) s.final_answer = js["final"].get<std::string>();
        steps.push_back(std::move(s));
    }
    return ScriptedBackend(std::move(steps));
}

ScriptedBackend ScriptedBackend::from_json_file(const std::string& path) {
    try {
        return from_json(json::parse(util::read_file(path)));
    } catch (const json::exception& e) {
        throw BackendFailure("bad script file " + path + ": " + e.what());
    }
}

Message ScriptedBackend::step(const std::vector<Message>& messages,
                              const std::vector<ToolSchema>&) {
    if (next_ >= steps_.size()) throw BackendFailure("script exhausted after " +
                                                     std::to_string(steps_.size()) + " steps");
    const Step& s = steps_[next_];
    if (!s.match.empty()) {
        std::string latest = messages.empty() ? "" : messages.back().joined_text();
        if (latest.find(s.match) == std::string::npos)
            throw BackendFailure("script step " + std::to_string(next_) + " expected substring '" +
                                 s.match + "' in latest message, got: " + latest.substr(0, 200));
    }
    ++next_;
    Message m;
    m.role = Role::assistant;
    for (ToolCall call : s.tool_calls) {
        if (call.call_id.empty()) call.call_id = "call-" + std::to_string(++call_counter_);
        m.parts.push_back(ToolCallPart{std::move(call)});
    }
    if (s.final_answer) m.parts.push_back(TextPart{*s.final_answer});
    if (m.parts.empty()) throw BackendFailure("script step with neither calls nor final answer");
    return m;
}

// --- the loop ---

namespace {

Message tool_result_message(const ToolResult& result) {
    Message m;
    m.role = Role::tool;
    ToolResultPart header;
    header.call_id = result.call_id;
    header.ok = result.ok;
    header.error = result.error;
    std::string body = "tool_result call_id=" + result.call_id +
                       " ok=" + (result.ok ? "true" : "false");
    if (result.error) body += " error=" + *result.error;
    if (!result.text.empty()) body += "\n" + result.text;
    for (const auto& chunk : result.chunks) body += "\n" + chunk.text;
    header.text = std::move(body);
    m.parts.push_back(std::move(header));
    for (const auto& chunk : result.chunks) {
        if (!chunk.image) continue;
        ImagePart img;
        img.payload = chunk.image->payload;
        img.encoding = chunk.image->encoding;
        img.alt_text = chunk.image->alt_text;
        img.sheet = chunk.sheet;
        img.row = chunk.row_span.first;
        img.col = chunk.col_span.first;
        m.parts.push_back(std::move(img));
    }
    return m;
}

bool has_images(const Message& m) {
    for (const auto& part : m.parts)
        if (std::holds_alternative<ImagePart>(part)) return true;
    return false;
}

}  // namespace

AgentResult run_agent(const std::string& query, const std::vector<Chunk>& initial_context,
                      const ToolRegistry& registry, LlmBackend& backend, const LoopBudget& budget,
                      const AgentOptions& options) {
    if (budget.max_tool_iterations < 1 || budget.initial_k < 1)
        throw Error("loop budget fields must be >= 1");

    AgentResult result;
    std::int64_t logical_clock = 0;
    auto now = [&]() -> std::int64_t {
        return options.clock ? options.clock() : logical_clock++;
    };
    int seq = 0;
    auto record = [&](const ToolCall& call, const ToolResult& tool_result, const Message& msg) {
        TraceEntry entry;
        entry.seq = seq++;
        entry.timestamp = now();
        entry.subtask_id = options.subtask_id;
        entry.call = call;
        entry.result = tool_result;
        entry.token_estimate = estimate_tokens(msg);
        result.trace.push_back(std::move(entry));
    };

    auto& messages = result.messages;
    messages.push_back(Message{Role::user, {TextPart{query}}});

    if (!initial_context.empty()) {
        // top-K bootstrap retrieval surfaces in the trace under a synthetic call
        ToolCall bootstrap{"bootstrap", "bootstrap",
                           json{{"query", query}, {"K", budget.initial_k}}};
        ToolResult bootstrap_result;
        bootstrap_result.call_id = "bootstrap";
        bootstrap_result.chunks = initial_context;
        if (int(bootstrap_result.chunks.size()) > budget.initial_k)
            bootstrap_result.chunks.resize(std::size_t(budget.initial_k));
        bootstrap_result.text = std::to_string(bootstrap_result.chunks.size()) + " chunks";
        Message msg = tool_result_message(bootstrap_result);
        record(bootstrap, bootstrap_result, msg);
        messages.push_back(std::move(msg));
        if (has_images(messages.back())) messages = prune_images(messages);
    }

    const auto schemas = registry.schemas();
    int calls_executed = 0;
    std::string last_assistant_text;

    bool exhausted = false;
    while (!exhausted) {
        if (calls_executed >= budget.max_tool_iterations) break;
        Message assistant;
        try {
            assistant = backend.step(messages, schemas);
        } catch (const BackendFailure& e) {
            throw AgentAborted(e.what(), std::move(result.trace));
        }
        assistant.role = Role::assistant;
        validate_message(assistant);
        messages.push_back(assistant);
        std::string text;
        for (const auto& part : assistant.parts)
            if (const auto* t = std::get_if<TextPart>(&part)) text += t->text;
        if (!text.empty()) last_assistant_text = text;

        auto calls = assistant.tool_calls();
        if (calls.empty()) {
            result.answer = text;
            return result;
        }

        for (const ToolCall* call : calls) {
            if (calls_executed >= budget.max_tool_iterations) {
                exhausted = true;
                break;
            }
            ToolResult tool_result;
            tool_result.call_id = call->call_id;
            const Tool* tool = registry.find(call->tool_name);
            if (!tool) {
                tool_result.ok = false;
                tool_result.error = "unknown tool: " + call->tool_name;
            } else {
                try {
                    tool_result = tool->invoke(call->arguments);
                    tool_result.call_id = call->call_id;
                } catch (const std::exception& e) {
                    // tool failures are survivable: surfaced to the backend, loop continues
                    tool_result = {};
                    tool_result.call_id = call->call_id;
                    tool_result.ok = false;
                    tool_result.error = e.what();
                }
            }
            ++calls_executed;
            Message msg = tool_result_message(tool_result);
            record(*call, tool_result, msg);
            bool prune = has_images(msg);
            messages.push_back(std::move(msg));
            if (prune) messages = prune_images(messages);
        }
    }

    result.budget_exhausted = true;
    result.answer = "BUDGET_EXHAUSTED after " + std::to_string(budget.max_tool_iterations) +
                    " tool calls; last assistant text: " + last_assistant_text;
    return result;
}

}  // namespace gridrag
