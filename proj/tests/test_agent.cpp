#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "gridrag/agent.hpp"
#include "gridrag/errors.hpp"
#include "gridrag/index.hpp"

using namespace gridrag;
using nlohmann::json;

namespace {

Chunk text_chunk(const std::string& id, const std::string& text) {
    Chunk c;
    c.chunk_id = id;
    c.kind = ChunkKind::row;
    c.workbook_id = "wb";
    c.sheet = "S";
    c.row_span = {1, 1};
    c.col_span = {1, 2};
    c.text = text;
    return c;
}

Chunk image_chunk(const std::string& id, std::vector<std::uint8_t> payload) {
    Chunk c = text_chunk(id, "an image");
    c.kind = ChunkKind::image;
    c.image = ChunkImage{std::move(payload), "image/png", "alt"};
    return c;
}

// echoes a fixed result for any call
ToolRegistry echo_registry(bool with_image = false) {
    ToolRegistry reg;
    Tool t;
    t.schema = {"echo", "returns a fixed chunk", {{"query", "string", true, ""}}};
    t.invoke = [with_image](const json&) {
        ToolResult r;
        if (with_image)
            r.chunks.push_back(image_chunk("wb/S/img/i1", {9, 8, 7}));
        else
            r.chunks.push_back(text_chunk("wb/S/row/r1", "hello"));
        r.text = "1 chunks";
        return r;
    };
    reg.add(t);
    return reg;
}

ScriptedBackend::Step call_step(const std::string& tool, json args = json::object()) {
    ScriptedBackend::Step s;
    s.tool_calls.push_back(ToolCall{"", tool, std::move(args)});
    return s;
}

ScriptedBackend::Step final_step(const std::string& text) {
    ScriptedBackend::Step s;
    s.final_answer = text;
    return s;
}

}  // namespace

TEST_CASE("estimate_tokens: ceil(chars/4) text plus flat image cost") {
    Message m;
    m.parts.push_back(TextPart{"abcde"});  // 5 chars -> 2
    CHECK(estimate_tokens(m) == 2);
    m.parts.push_back(ImagePart{{1, 2, 3}, "image/png", "alt", "S", 1, 1});
    CHECK(estimate_tokens(m) == 2 + kTokensPerImage);
    Message empty;
    CHECK(estimate_tokens(empty) == 0);
}

TEST_CASE("message part placement is validated") {
    Message bad;
    bad.role = Role::user;
    bad.parts.push_back(ToolCallPart{ToolCall{"c1", "t", {}}});
    CHECK_THROWS_AS(validate_message(bad), Error);
    Message bad2;
    bad2.role = Role::assistant;
    bad2.parts.push_back(ToolResultPart{"c1", true, "", {}});
    CHECK_THROWS_AS(validate_message(bad2), Error);
}

TEST_CASE("agent runs tool calls and stops on final answer") {
    ScriptedBackend backend({call_step("echo", {{"query", "x"}}), final_step("done: hello")});
    auto reg = echo_registry();
    AgentResult r = run_agent("question", {}, reg, backend);
    CHECK(r.answer == "done: hello");
    CHECK_FALSE(r.budget_exhausted);
    REQUIRE(r.trace.size() == 1);  // no bootstrap without initial context
    CHECK(r.trace[0].call.tool_name == "echo");
    CHECK(r.trace[0].result.ok);
    // logical clock: timestamps are 0,1,2,... under replay
    CHECK(r.trace[0].timestamp == 0);
}

TEST_CASE("bootstrap entry appears only with initial context") {
    ScriptedBackend backend({final_step("ok")});
    auto reg = echo_registry();
    AgentResult r = run_agent("q", {text_chunk("wb/S/row/r1", "ctx")}, reg, backend);
    REQUIRE(r.trace.size() == 1);
    CHECK(r.trace[0].call.call_id == "bootstrap");
    CHECK(r.trace[0].result.chunks.size() == 1);
}

TEST_CASE("unknown tool and tool errors are survivable") {
    ToolRegistry reg;
    Tool t;
    t.schema = {"boom", "always fails", {}};
    t.invoke = [](const json&) {
        ToolResult r;
        r.ok = false;
        r.error = "exploded";
        return r;
    };
    reg.add(t);
    ScriptedBackend backend(
        {call_step("boom"), call_step("no_such_tool"), final_step("survived")});
    AgentResult r = run_agent("q", {}, reg, backend);
    CHECK(r.answer == "survived");
    REQUIRE(r.trace.size() == 2);
    CHECK_FALSE(r.trace[0].result.ok);
    CHECK_FALSE(r.trace[1].result.ok);
}

TEST_CASE("budget: always-calling script yields exactly max entries then exhaustion") {
    std::vector<ScriptedBackend::Step> steps;
    for (int i = 0; i < 50; ++i) steps.push_back(call_step("echo", {{"query", "x"}}));
    ScriptedBackend backend(std::move(steps));
    auto reg = echo_registry();
    AgentResult r = run_agent("q", {}, reg, backend);
    CHECK(r.budget_exhausted);
    CHECK(r.trace.size() == 50);
    CHECK(r.answer.find("BUDGET_EXHAUSTED") == 0);
}

TEST_CASE("backend failure aborts with partial trace") {
    ScriptedBackend backend({call_step("echo", {{"query", "x"}})});  // exhausts after one step
    auto reg = echo_registry();
    try {
        run_agent("q", {}, reg, backend);
        FAIL("expected AgentAborted");
    } catch (const AgentAborted& e) {
        CHECK(e.partial_trace.size() == 1);
    }
}

TEST_CASE("scripted backend match mismatch raises BackendFailure") {
    ScriptedBackend::Step s;
    s.match = "not present anywhere";
    s.final_answer = "x";
    ScriptedBackend backend({s});
    CHECK_THROWS_AS(backend.step({Message{Role::user, {TextPart{"hello"}}}}, {}),
                    BackendFailure);
}

TEST_CASE("prune keeps payloads only in the latest image-bearing tool message") {
    ScriptedBackend backend({call_step("echo", {{"query", "a"}}),
                             call_step("echo", {{"query", "b"}}),
                             call_step("echo", {{"query", "c"}}), final_step("done")});
    auto reg = echo_registry(/*with_image=*/true);
    AgentResult r = run_agent("q", {}, reg, backend);

    int image_bearing = 0;
    int stubs = 0;
    for (const auto& m : r.messages) {
        bool has_image = false;
        for (const auto& p : m.parts) {
            if (std::holds_alternative<ImagePart>(p)) has_image = true;
            if (const auto* t = std::get_if<TextPart>(&p);
                t && m.role == Role::tool && t->text.find("[image pruned]") == 0)
                ++stubs;
        }
        if (has_image) ++image_bearing;
    }
    CHECK(image_bearing == 1);
    CHECK(stubs == 2);
    // stubs carry provenance and a digest
    bool digest_found = false;
    for (const auto& m : r.messages)
        for (const auto& p : m.parts)
            if (const auto* t = std::get_if<TextPart>(&p);
                t && t->text.find("sha256=") != std::string::npos)
                digest_found = true;
    CHECK(digest_found);
}

TEST_CASE("prune is idempotent on randomized histories") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Message> history;
        int n = 1 + int(rng() % 8);
        for (int i = 0; i < n; ++i) {
            Message m;
            int pick = int(rng() % 3);
            if (pick == 0) {
                m.role = Role::user;
                m.parts.push_back(TextPart{"text " + std::to_string(i)});
            } else {
                m.role = Role::tool;
                m.parts.push_back(ToolResultPart{"c" + std::to_string(i), true, "r", {}});
                if (pick == 2)
                    m.parts.push_back(ImagePart{{std::uint8_t(i), 2, 3}, "image/png", "alt",
                                                "S", 1, 1});
            }
            history.push_back(std::move(m));
        }
        auto once = prune_images(history);
        auto twice = prune_images(once);
        int bearing = 0;
        for (const auto& m : once)
            for (const auto& p : m.parts)
                if (std::holds_alternative<ImagePart>(p)) {
                    ++bearing;
                    break;
                }
        CHECK(bearing <= 1);
        REQUIRE(once.size() == twice.size());
        for (std::size_t i = 0; i < once.size(); ++i)
            CHECK(once[i].parts.size() == twice[i].parts.size());
    }
}

TEST_CASE("trace jsonl round trip with payload digests") {
    TraceEntry e;
    e.seq = 0;
    e.timestamp = 42;
    e.subtask_id = "3";
    e.call = ToolCall{"c1", "echo", json{{"query", "x"}}};
    e.result.call_id = "c1";
    e.result.chunks.push_back(image_chunk("wb/S/img/i1", {1, 2, 3}));
    e.token_estimate = 7;
    std::string jsonl = trace_to_jsonl({e});
    CHECK(jsonl.find("payload_sha256") != std::string::npos);
    CHECK(jsonl.find("payload_base64") == std::string::npos);
    auto parsed = parse_trace_jsonl(jsonl);
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0]["format_version"] == 1);
    CHECK(parsed[0]["subtask_id"] == "3");
    CHECK(parsed[0]["ts"] == 42);
    CHECK(parsed[0]["token_estimate"] == 7);
}

TEST_CASE("tool schemas are sorted by name") {
    ToolRegistry reg;
    for (const char* name : {"zeta", "alpha", "mid"}) {
        Tool t;
        t.schema.name = name;
        t.invoke = [](const json&) { return ToolResult{}; };
        reg.add(t);
    }
    auto schemas = reg.schemas();
    REQUIRE(schemas.size() == 3);
    CHECK(schemas[0].name == "alpha");
    CHECK(schemas[2].name == "zeta");
}
