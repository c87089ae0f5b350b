#include "gridrag/planner.hpp"

#include <algorithm>
#include <future>
#include <set>
#include <sstream>

#include "gridrag/errors.hpp"
#include "gridrag/executors.hpp"
#include "gridrag/util/strings.hpp"

namespace gridrag {

using nlohmann::json;

std::string to_string(ExecutorType type) {
    switch (type) {
        case ExecutorType::search: return "search";
        case ExecutorType::excel: return "excel";
        case ExecutorType::io: return "io";
        case ExecutorType::web: return "web";
        case ExecutorType::validation: return "validation";
        case ExecutorType::ocr: return "ocr";
    }
    return "search";
}

ExecutorType executor_type_from_string(const std::string& s) {
    if (s == "search") return ExecutorType::search;
    if (s == "excel") return ExecutorType::excel;
    if (s == "io") return ExecutorType::io;
    if (s == "web") return ExecutorType::web;
    if (s == "validation") return ExecutorType::validation;
    if (s == "ocr") return ExecutorType::ocr;
    throw UnknownExecutorType(s);
}

// --- exploration ---

std::vector<std::string> extract_quoted_terms(const std::string& task) {
    std::string text = task;
    // typographic quotes fold into their straight forms before scanning
    text = util::replace_all(text, "\xE2\x80\x9C", "\"");
    text = util::replace_all(text, "\xE2\x80\x9D", "\"");
    text = util::replace_all(text, "\xE2\x80\x98", "'");
    text = util::replace_all(text, "\xE2\x80\x99", "'");
    std::vector<std::string> terms;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char q = text[i];
        if (q != '"' && q != '\'') continue;
        std::size_t close = text.find(q, i + 1);
        if (close == std::string::npos) break;  // unterminated, ignore the rest
        std::string term = text.substr(i + 1, close - i - 1);
        if (!term.empty()) terms.push_back(std::move(term));
        i = close;
    }
    return terms;
}

ExplorationContext explore_data(const std::string& task, const Index& index, int k) {
    ExplorationContext ctx;
    ctx.quoted_terms = extract_quoted_terms(task);
    FusionConfig fusion;
    fusion.top_k = k;
    for (const auto& term : ctx.quoted_terms) {
        ExplorationHit hit;
        hit.term = term;
        for (const auto& sh : index.hybrid_search(term, std::nullopt, {}, fusion)) {
            A1Range span{sh.chunk->row_span.first, sh.chunk->col_span.first,
                         sh.chunk->row_span.second, sh.chunk->col_span.second};
            hit.lines.push_back(sh.chunk->chunk_id + " sheet=" + sh.chunk->sheet +
                                " span=" + a1_span(span));
        }
        ctx.hits.push_back(std::move(hit));
    }
    return ctx;
}

std::string ExplorationContext::render() const {
    if (hits.empty()) return "";
    std::ostringstream out;
    for (const auto& hit : hits) {
        out << "term \"" << hit.term << "\":\n";
        for (const auto& line : hit.lines) out << "  " << line << "\n";
    }
    return out.str();
}

// --- plan parsing and validation ---

std::vector<std::string> validate_plan(const Plan& plan) {
    std::vector<std::string> errors;
    static const std::set<std::string> kOutputTypes = {"spreadsheet", "text", "document", "both"};
    if (!kOutputTypes.count(plan.output_type))
        errors.push_back("unknown output_type: " + plan.output_type);
    if (plan.subtasks.empty() || plan.subtasks.size() > 6)
        errors.push_back("subtask count must be 1..6, got " +
                         std::to_string(plan.subtasks.size()));

    std::set<int> ids;
    for (const auto& st : plan.subtasks) {
        if (st.id < 1) errors.push_back("subtask id must be >= 1, got " + std::to_string(st.id));
        if (!ids.insert(st.id).second)
            errors.push_back("duplicate subtask id " + std::to_string(st.id));
    }
    for (const auto& st : plan.subtasks) {
        for (int dep : st.dependencies) {
            if (dep == st.id)
                errors.push_back("subtask " + std::to_string(st.id) + " depends on itself");
            else if (!ids.count(dep))
                errors.push_back("subtask " + std::to_string(st.id) + " depends on unknown id " +
                                 std::to_string(dep));
        }
    }

    // Kahn's algorithm over the valid edges; leftovers mean a cycle
    std::map<int, int> indegree;
    std::map<int, std::vector<int>> dependents;
    for (const auto& st : plan.subtasks) indegree[st.id] = 0;
    for (const auto& st : plan.subtasks)
        for (int dep : st.dependencies)
            if (dep != st.id && ids.count(dep)) {
                ++indegree[st.id];
                dependents[dep].push_back(st.id);
            }
    std::vector<int> queue;
    for (const auto& [id, deg] : indegree)
        if (deg == 0) queue.push_back(id);
    std::size_t removed = 0;
    while (!queue.empty()) {
        int id = queue.back();
        queue.pop_back();
        ++removed;
        for (int next : dependents[id])
            if (--indegree[next] == 0) queue.push_back(next);
    }
    if (removed < indegree.size()) errors.push_back("dependency graph has a cycle");
    return errors;
}

Plan parse_plan(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error&) {
        auto open = text.find('{');
        auto close = text.rfind('}');
        if (open == std::string::npos || close == std::string::npos || close <= open)
            throw PlanInvalid("no JSON object in backend output");
        try {
            j = json::parse(text.substr(open, close - open + 1));
        } catch (const json::parse_error& e) {
            throw PlanInvalid(std::string("malformed JSON: ") + e.what());
        }
    }

    Plan plan;
    std::vector<std::string> errors;
    try {
        if (!j.is_object()) throw PlanInvalid("plan is not a JSON object");
        plan.output_type = j.value("output_type", std::string());
        if (!j.contains("subtasks") || !j["subtasks"].is_array())
            throw PlanInvalid("missing subtasks array");
        for (const auto& js : j["subtasks"]) {
            Subtask st;
            st.id = js.at("id").get<int>();
            try {
                st.type = executor_type_from_string(js.at("type").get<std::string>());
            } catch (const UnknownExecutorType& e) {
                errors.push_back(e.what());
            }
            st.description = js.value("description", std::string());
            for (const auto& d : js.value("dependencies", json::array()))
                st.dependencies.push_back(d.get<int>());
            plan.subtasks.push_back(std::move(st));
        }
    } catch (const json::exception& e) {
        throw PlanInvalid(std::string("schema violation: ") + e.what());
    }

    auto invariant_errors = validate_plan(plan);
    errors.insert(errors.end(), invariant_errors.begin(), invariant_errors.end());
    if (!errors.empty()) {
        std::string joined;
        for (const auto& e : errors) joined += (joined.empty() ? "" : "; ") + e;
        throw PlanInvalid(joined);
    }
    return plan;
}

std::string render_planner_prompt(const std::string& template_text, const std::string& task,
                                  const std::string& output_path,
                                  const ExplorationContext& exploration) {
    for (const char* placeholder : {"{task}", "{output_path}", "{exploration_context}"})
        if (template_text.find(placeholder) == std::string::npos)
            throw Error(std::string("planner prompt template missing ") + placeholder);
    std::string out = util::replace_all(template_text, "{task}", task);
    out = util::replace_all(out, "{output_path}", output_path);
    out = util::replace_all(out, "{exploration_context}", exploration.render());
    return out;
}

Plan decompose(const std::string& task, const std::string& output_path,
               const ExplorationContext& exploration, LlmBackend& backend,
               const std::string& prompt_template) {
    std::string prompt = render_planner_prompt(prompt_template, task, output_path, exploration);
    std::vector<Message> messages;
    messages.push_back(Message{Role::user, {TextPart{prompt}}});

    Message reply = backend.step(messages, {});
    std::string first_error;
    try {
        return parse_plan(reply.joined_text());
    } catch (const PlanInvalid& e) {
        first_error = e.what();
    }

    messages.push_back(reply);
    messages.push_back(Message{
        Role::user,
        {TextPart{"The plan was rejected: " + first_error +
                  "\nReturn a corrected JSON plan satisfying every constraint."}}});
    Message repaired = backend.step(messages, {});
    return parse_plan(repaired.joined_text());  // second failure propagates PlanInvalid
}

// --- execution ---

ToolRegistry get_tool_set(ExecutorType type, const Index* index, const FusionConfig& fusion) {
    switch (type) {
        case ExecutorType::search:
            if (!index) throw Error("search executor needs an index");
            return register_search_tools(*index, fusion);
        case ExecutorType::excel: return make_excel_tools();
        case ExecutorType::io: return make_io_tools();
        case ExecutorType::validation: return make_validation_tools();
        case ExecutorType::web: return make_stub_tools({"web_search", "web_fetch"});
        case ExecutorType::ocr: return make_stub_tools({"ocr_document"});
    }
    throw UnknownExecutorType(std::to_string(static_cast<int>(type)));
}

std::string summarize(const std::vector<SubtaskResult>& results, std::size_t max_chars) {
    std::vector<const SubtaskResult*> ordered;
    for (const auto& r : results) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(),
              [](const SubtaskResult* a, const SubtaskResult* b) {
                  return a->subtask_id < b->subtask_id;
              });
    std::ostringstream out;
    for (const auto* r : ordered) {
        std::string answer = r->answer_text;
        if (answer.size() > max_chars) answer = answer.substr(0, max_chars) + "...[truncated]";
        out << "subtask " << r->subtask_id << " [" << (r->ok ? "ok" : "failed") << "]: " << answer;
        if (!r->artifacts.empty()) {
            out << "\n  artifacts:";
            for (const auto& a : r->artifacts) out << " " << a;
        }
        out << "\n";
    }
    return out.str();
}

namespace {

// Written file paths recovered from the trace so workflows can report them.
std::vector<std::string> artifacts_from_trace(const std::vector<TraceEntry>& trace) {
    std::vector<std::string> out;
    for (const auto& entry : trace) {
        if (!entry.result.ok) continue;
        if (entry.call.tool_name != "excel_write_cells" && entry.call.tool_name != "io_write")
            continue;
        if (!entry.call.arguments.contains("path")) continue;
        std::string path = entry.call.arguments["path"].get<std::string>();
        if (std::find(out.begin(), out.end(), path) == out.end()) out.push_back(path);
    }
    return out;
}

SubtaskResult run_subtask(const Subtask& st, const std::string& task,
                          const std::string& dep_summaries, const ToolSetProvider& tools_for,
                          const BackendProvider& backend_for, const LoopBudget& budget) {
    SubtaskResult result;
    result.subtask_id = st.id;
    std::ostringstream prompt;
    prompt << "task: " << task << "\nsubtask: " << st.description;
    if (!dep_summaries.empty()) prompt << "\ncompleted dependencies:\n" << dep_summaries;

    try {
        ToolRegistry registry = tools_for(st.type);
        AgentOptions options;
        options.subtask_id = std::to_string(st.id);
        AgentResult agent = run_agent(prompt.str(), {}, registry, backend_for(st), budget, options);
        result.ok = true;
        result.answer_text = agent.answer;
        result.trace_slice = std::move(agent.trace);
    } catch (const AgentAborted& e) {
        result.ok = false;
        result.answer_text = e.what();
        result.trace_slice = e.partial_trace;
    } catch (const std::exception& e) {
        result.ok = false;
        result.answer_text = e.what();
    }
    result.artifacts = artifacts_from_trace(result.trace_slice);
    return result;
}

}  // namespace

ExecutionOutcome execute_plan(const Plan& plan, const std::string& task,
                              const ToolSetProvider& tools_for, const BackendProvider& backend_for,
                              const ExecuteOptions& options) {
    auto errors = validate_plan(plan);
    if (!errors.empty()) throw PlanInvalid(errors.front());
    int concurrency = std::max(1, options.concurrency);

    std::map<int, const Subtask*> by_id;
    for (const auto& st : plan.subtasks) by_id[st.id] = &st;

    ExecutionOutcome outcome;
    std::set<int> resolved;
    int wave = 0;
    while (resolved.size() < plan.subtasks.size()) {
        // propagate failures first so dependents never run
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& [id, st] : by_id) {
                if (resolved.count(id)) continue;
                for (int dep : st->dependencies) {
                    auto it = outcome.results.find(dep);
                    if (it != outcome.results.end() && !it->second.ok) {
                        SubtaskResult r;
                        r.subtask_id = id;
                        r.ok = false;
                        r.answer_text =
                            "failed by dependency: subtask " + std::to_string(dep) + " failed";
                        outcome.results[id] = std::move(r);
                        outcome.schedule.push_back({wave, id, "failed_by_dependency"});
                        resolved.insert(id);
                        changed = true;
                        break;
                    }
                }
            }
        }
        if (resolved.size() == plan.subtasks.size()) break;

        std::vector<const Subtask*> ready;
        for (const auto& [id, st] : by_id) {
            if (resolved.count(id)) continue;
            bool ok = true;
            for (int dep : st->dependencies)
                if (!resolved.count(dep)) ok = false;
            if (ok) ready.push_back(st);
        }

        for (const auto* st : ready) outcome.schedule.push_back({wave, st->id, "started"});
        std::size_t cap = static_cast<std::size_t>(concurrency);
        for (std::size_t batch = 0; batch < ready.size(); batch += cap) {
            std::vector<std::future<SubtaskResult>> futures;
            for (std::size_t i = batch; i < std::min(batch + cap, ready.size()); ++i) {
                const Subtask* st = ready[i];
                std::vector<SubtaskResult> dep_results;
                for (int dep : st->dependencies) dep_results.push_back(outcome.results.at(dep));
                futures.push_back(std::async(
                    std::launch::async,
                    [st, &task, &tools_for, &backend_for, &options,
                     summaries = summarize(dep_results)] {
                        return run_subtask(*st, task, summaries, tools_for, backend_for,
                                           options.budget);
                    }));
            }
            for (auto& f : futures) {
                SubtaskResult r = f.get();
                outcome.schedule.push_back({wave, r.subtask_id, r.ok ? "ok" : "failed"});
                resolved.insert(r.subtask_id);
                outcome.results[r.subtask_id] = std::move(r);
            }
        }
        ++wave;
    }

    // merged trace ordered by subtask id, re-sequenced globally
    int seq = 0;
    for (const auto& [id, result] : outcome.results)
        for (TraceEntry entry : result.trace_slice) {
            entry.seq = seq++;
            outcome.merged_trace.push_back(std::move(entry));
        }
    return outcome;
}

SynthesisResult synthesize(const std::string& task, const std::vector<SubtaskResult>& results,
                           const std::string& output_type, LlmBackend& backend) {
    std::ostringstream prompt;
    prompt << "task: " << task << "\noutput_type: " << output_type
           << "\nsubtask results:\n" << summarize(results)
           << "Merge the results into one final answer.";
    std::vector<Message> messages;
    messages.push_back(Message{Role::user, {TextPart{prompt.str()}}});
    Message reply = backend.step(messages, {});

    SynthesisResult out;
    out.answer = reply.joined_text();
    std::vector<const SubtaskResult*> ordered;
    for (const auto& r : results) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(),
              [](const SubtaskResult* a, const SubtaskResult* b) {
                  return a->subtask_id < b->subtask_id;
              });
    for (const auto* r : ordered)
        for (const auto& a : r->artifacts)
            if (std::find(out.manifest.begin(), out.manifest.end(), a) == out.manifest.end())
                out.manifest.push_back(a);
    return out;
}

}  // namespace gridrag
