#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gridrag/agent.hpp"
#include "gridrag/index.hpp"
#include "json.hpp"

namespace gridrag {

enum class ExecutorType { search, excel, io, web, validation, ocr };

std::string to_string(ExecutorType type);
ExecutorType executor_type_from_string(const std::string& s);  // throws UnknownExecutorType

struct Subtask {
    int id = 0;  // >= 1
    ExecutorType type = ExecutorType::search;
    std::string description;
    std::vector<int> dependencies;  // existing ids, no self-dependency
};

struct Plan {
    std::string output_type;  // spreadsheet | text | document | both
    std::vector<Subtask> subtasks;  // 1..6, dependency graph acyclic
};

struct SubtaskResult {
    int subtask_id = 0;
    bool ok = false;
    std::string answer_text;  // failure description when !ok
    std::vector<std::string> artifacts;
    std::vector<TraceEntry> trace_slice;
};

struct ExplorationHit {
    std::string term;
    std::vector<std::string> lines;  // "chunk_id sheet=<name> span=<A1>" per hit
};

struct ExplorationContext {
    std::vector<std::string> quoted_terms;
    std::vector<ExplorationHit> hits;  // one group per term, same order

    std::string render() const;  // the {exploration_context} placeholder text
};

// Straight single/double quoted substrings; typographic quotes normalized first.
std::vector<std::string> extract_quoted_terms(const std::string& task);

// One hybrid search per quoted term. No quoted terms means an empty context.
ExplorationContext explore_data(const std::string& task, const Index& index, int k = 10);

// All invariant violations at once, empty when the plan is valid.
std::vector<std::string> validate_plan(const Plan& plan);

// Throws PlanInvalid. Accepts a bare JSON object or text with one embedded.
Plan parse_plan(const std::string& text);

std::string render_planner_prompt(const std::string& template_text, const std::string& task,
                                  const std::string& output_path,
                                  const ExplorationContext& exploration);

// Prompt, parse, validate; one repair round carrying the validation errors,
// then PlanInvalid.
Plan decompose(const std::string& task, const std::string& output_path,
               const ExplorationContext& exploration, LlmBackend& backend,
               const std::string& prompt_template);

// Per-result "subtask <id> [ok|failed]: <answer>" capped at max_chars, plus
// artifact paths, ordered by id.
std::string summarize(const std::vector<SubtaskResult>& results, std::size_t max_chars = 2000);

struct ScheduleEvent {
    int wave = 0;
    int subtask_id = 0;
    std::string status;  // started | ok | failed | failed_by_dependency
};

struct ExecutionOutcome {
    std::map<int, SubtaskResult> results;
    std::vector<TraceEntry> merged_trace;  // re-sequenced, ordered by wave then id
    std::vector<ScheduleEvent> schedule;   // wave partition, for audit and tests
};

using ToolSetProvider = std::function<ToolRegistry(ExecutorType)>;
using BackendProvider = std::function<LlmBackend&(const Subtask&)>;

// Tool sets per executor type: search gets the five search tools (needs the
// index), web and ocr get NotImplemented stubs. Throws UnknownExecutorType.
ToolRegistry get_tool_set(ExecutorType type, const Index* index,
                          const FusionConfig& fusion = {});

struct ExecuteOptions {
    LoopBudget budget;
    int concurrency = 4;  // cap within a wave
};

// Wave scheduler over the ready set. Each subtask is an isolated run_agent
// with its own budget; a failure marks transitive dependents failed without
// running them. Never throws for subtask failures.
ExecutionOutcome execute_plan(const Plan& plan, const std::string& task,
                              const ToolSetProvider& tools_for, const BackendProvider& backend_for,
                              const ExecuteOptions& options = {});

struct SynthesisResult {
    std::string answer;
    std::vector<std::string> manifest;  // artifact paths across all results
};

SynthesisResult synthesize(const std::string& task, const std::vector<SubtaskResult>& results,
                           const std::string& output_type, LlmBackend& backend);

}  // namespace gridrag
